#pragma once
#include <vector>

#include "qf/operators.hpp"

namespace qf {

/// One dissipation/measurement coupling: operator L with nonnegative rate weight.
struct Coupling {
  Mat L;
  double weight = 1.0;
};

/// Heisenberg-picture generator
///   G(X) = i[H, X] + sum_j w_j (L_j^* X L_j - (1/2){L_j^* L_j, X})
/// as a superoperator on column-vectorized operators.  G(I) = 0.
Superoperator heisenberg_generator(const Mat& H, const std::vector<Coupling>& channels);

/// Trace-pairing dual of the Heisenberg generator:
///   G_*(rho) = -i[H, rho] + sum_j w_j (L_j rho L_j^* - (1/2){L_j^* L_j, rho})
/// so that tr(G(X) rho) = tr(X G_*(rho)).  Built from the defining formula,
/// not by transposing heisenberg_generator (the duality is a test invariant).
Superoperator schrodinger_generator(const Mat& H, const std::vector<Coupling>& channels);

/// Matrix exponential (scaling-and-squaring Pade, via Eigen).
Mat expm(const Mat& m);

/// Exact evolution of rho0 for time t under the Lindblad master equation:
/// unvec(expm(t * dual) vec(rho0)).  Refuses dim > dim_cap (cost guard).
Mat exact_lindblad_propagate(const Mat& rho0, const Mat& H,
                             const std::vector<Coupling>& channels, double t,
                             int dim_cap = 64);

}  // namespace qf
