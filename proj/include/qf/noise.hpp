#pragma once
#include <Eigen/Dense>
#include <vector>

#include "qf/grid.hpp"
#include "qf/rng.hpp"

namespace qf {

/// Wiener increments: entry (k, j) is the increment of channel j over step k,
/// distributed N(0, dt * weight_j) under the reference measure.
struct NoisePath {
  Eigen::MatrixXd increments;  // n_steps x n_channels
  double dt = 0.0;

  int n_steps() const { return static_cast<int>(increments.rows()); }
  int n_channels() const { return static_cast<int>(increments.cols()); }
};

/// Samples the trajectory-k noise path.  Draws are consumed step-major,
/// channel-minor from CounterRng(seeds.stream_seed(k)); zero-weight channels
/// still consume draws so channel layouts stay aligned across weights.
NoisePath sample_wiener_path(const TimeGrid& grid, const std::vector<double>& weights,
                             const SeedPolicy& seeds, std::uint64_t k);

/// Splits every increment in two by conditional (bridge) sampling:
///   dW = dW_1 + dW_2,  dW_1 = dW/2 + xi,  xi ~ N(0, weight * dt/4),
/// so the refined path is the same Brownian motion evaluated at half the
/// step.  The auxiliary draws come from CounterRng(bridge_seed).  Used for
/// step-halving convergence checks on a fixed realization.
NoisePath refine_noise_path(const NoisePath& path, const std::vector<double>& weights,
                            std::uint64_t bridge_seed);

}  // namespace qf
