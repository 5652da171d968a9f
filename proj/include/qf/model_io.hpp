#pragma once
#include <json.hpp>

#include "qf/filter.hpp"
#include "qf/phase_space.hpp"

namespace qf {

using ordered_json = nlohmann::ordered_json;

/// Phase-space model file format:
///   {
///     "n_modes": 1,
///     "S": "canonical" | [[...]],      // real antisymmetric d x d
///     "Omega": [[...]],                // optional, default 0
///     "upsilon": [...],                // optional, default 0
///     "theta0": [...],                 // optional, default 0
///     "P0": [[...]],                   // optional, default identity
///     "channels": [ { "zeta": [[re, im], ...], "weight": 1.0,
///                     "observed": true, "kind": "complex" | "real" } ]
///   }
/// "complex" channels emit one complex record, "real" channels one real
/// record.  Parse errors carry the offending field path.
PhaseSpaceModel phase_model_from_json(const nlohmann::json& j);
ordered_json phase_model_to_json(const PhaseSpaceModel& model);

/// Finite-dimensional model format: complex matrices as {"re": [[..]],
/// "im": [[..]]}; channels carry weight, kind ("homodyne"/"heterodyne") and
/// an optional "group" (absent = unobserved channel).
FilterModel filter_model_from_json(const nlohmann::json& j);
ordered_json filter_model_to_json(const FilterModel& model);

// building blocks, exposed for tests
RMat real_matrix_from_json(const nlohmann::json& j, const std::string& field);
Mat complex_matrix_from_json(const nlohmann::json& j, const std::string& field);
ordered_json real_matrix_to_json(const RMat& m);
ordered_json complex_matrix_to_json(const Mat& m);

}  // namespace qf
