#pragma once
#include <optional>
#include <vector>

#include "qf/operators.hpp"

namespace qf {

enum class Detection { homodyne, heterodyne };

/// One microscopic measurement channel.  Channels sharing a group_id are read
/// out only through their weighted average; channels without a group_id are
/// unobserved (dissipation only).
struct MeasurementChannel {
  Mat L;
  double weight = 1.0;
  Detection kind = Detection::homodyne;
  std::optional<int> group_id;
};

/// One detector output: the weight-averaged coupling of a channel group.
struct ObservedChannel {
  Mat Lbar;            // sum_j w_j L_j / Lambda over the group
  double Lambda = 0.0; // total weight of the group
  Detection kind = Detection::homodyne;
  int group_id = 0;
  std::vector<int> members;  // indices into the fine channel list
};

/// Collapses channel groups to their averaged detector couplings, ordered by
/// group id.  The fine channels are untouched (the dissipative part of any
/// generator must keep using them).  Throws if a group mixes detection kinds
/// or has zero total weight.
std::vector<ObservedChannel> coarse_grain(const std::vector<MeasurementChannel>& channels);

}  // namespace qf
