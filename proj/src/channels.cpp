#include "qf/channels.hpp"

#include <map>

namespace qf {

std::vector<ObservedChannel> coarse_grain(const std::vector<MeasurementChannel>& channels) {
  std::map<int, ObservedChannel> groups;
  for (size_t j = 0; j < channels.size(); ++j) {
    const auto& ch = channels[j];
    require_square_finite(ch.L, "coarse_grain: L[" + std::to_string(j) + "]");
    if (!(ch.weight >= 0.0))
      throw std::invalid_argument("coarse_grain: negative weight on channel " +
                                  std::to_string(j));
    if (!ch.group_id) continue;
    auto [it, fresh] = groups.try_emplace(*ch.group_id);
    ObservedChannel& g = it->second;
    if (fresh) {
      g.group_id = *ch.group_id;
      g.kind = ch.kind;
      g.Lbar = Mat::Zero(ch.L.rows(), ch.L.cols());
    } else {
      if (g.kind != ch.kind)
        throw std::invalid_argument("coarse_grain: group " + std::to_string(g.group_id) +
                                    " mixes detection kinds");
      if (g.Lbar.rows() != ch.L.rows())
        throw std::invalid_argument("coarse_grain: group " + std::to_string(g.group_id) +
                                    " mixes dimensions");
    }
    g.Lbar += ch.weight * ch.L;
    g.Lambda += ch.weight;
    g.members.push_back(static_cast<int>(j));
  }
  std::vector<ObservedChannel> out;
  out.reserve(groups.size());
  for (auto& [id, g] : groups) {
    if (!(g.Lambda > 0.0))
      throw std::invalid_argument("coarse_grain: group " + std::to_string(id) +
                                  " has zero total weight");
    g.Lbar /= g.Lambda;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace qf
