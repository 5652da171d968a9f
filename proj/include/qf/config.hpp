#pragma once
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

namespace qf {

/// One batch run: either a named preset (with overridable grid/ensemble
/// fields) or a custom inline phase-space model.  JSON schema mirrors the
/// field names below; `grid` is {"t0", "t1", "n_steps"}.
struct ExperimentConfig {
  std::string preset;            // empty for custom-model runs
  nlohmann::ordered_json model;  // inline phase-space model (custom runs)

  double t0 = 0.0;
  double t1 = 1.0;
  int n_steps = 1000;

  std::uint64_t n_traj = 1;
  std::uint64_t master_seed = 1;
  std::string mode = "physical";  // reference | physical | replay
  std::string replay_file;        // required in replay mode
  int workers = 0;                // 0 = auto (flag beats QF_WORKERS env)
  std::string out_dir = "out";
  std::vector<std::string> observables;  // finite-dim extra readouts (sx, sy, sz)
  int dump_trajectories = 1;             // per-trajectory CSV rows for the first k paths
};

/// Names runnable via --preset, in fixed order.
std::vector<std::string> known_presets();
bool is_known_preset(const std::string& name);

/// Baseline config for a preset (grid, ensemble size, mode, observables).
/// Throws on unknown names.
ExperimentConfig preset_defaults(const std::string& name);

/// Parses a config object.  If "preset" is present its defaults are applied
/// first and explicit keys override them.  Throws std::invalid_argument with
/// the offending field path on malformed input.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

/// Diagnostics preventing a run; empty list iff runnable.  Each entry names
/// the offending field.
std::vector<std::string> validate(const ExperimentConfig& cfg);

}  // namespace qf
