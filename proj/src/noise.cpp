#include "qf/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace qf {

NoisePath sample_wiener_path(const TimeGrid& grid, const std::vector<double>& weights,
                             const SeedPolicy& seeds, std::uint64_t k) {
  for (double w : weights)
    if (!(w >= 0.0)) throw std::invalid_argument("sample_wiener_path: negative weight");
  const int m = static_cast<int>(weights.size());
  const double dt = grid.dt();
  NoisePath path;
  path.dt = dt;
  path.increments.resize(grid.n_steps, m);
  CounterRng rng(seeds.stream_seed(k));
  std::vector<double> scale(weights.size());
  for (int j = 0; j < m; ++j) scale[j] = std::sqrt(dt * weights[j]);
  for (int s = 0; s < grid.n_steps; ++s)
    for (int j = 0; j < m; ++j)
      path.increments(s, j) = scale[j] * rng.gaussian();
  return path;
}

NoisePath refine_noise_path(const NoisePath& path, const std::vector<double>& weights,
                            std::uint64_t bridge_seed) {
  const int m = path.n_channels();
  if (static_cast<int>(weights.size()) != m)
    throw std::invalid_argument("refine_noise_path: weight count mismatch");
  NoisePath fine;
  fine.dt = 0.5 * path.dt;
  fine.increments.resize(2 * path.n_steps(), m);
  CounterRng rng(bridge_seed);
  std::vector<double> scale(weights.size());
  for (int j = 0; j < m; ++j) {
    if (!(weights[j] >= 0.0)) throw std::invalid_argument("refine_noise_path: negative weight");
    scale[j] = std::sqrt(0.25 * path.dt * weights[j]);
  }
  for (int s = 0; s < path.n_steps(); ++s)
    for (int j = 0; j < m; ++j) {
      const double whole = path.increments(s, j);
      const double xi = scale[j] * rng.gaussian();
      fine.increments(2 * s, j) = 0.5 * whole + xi;
      fine.increments(2 * s + 1, j) = 0.5 * whole - xi;
    }
  return fine;
}

}  // namespace qf
