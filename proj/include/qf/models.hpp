#pragma once
#include <vector>

#include "qf/filter.hpp"
#include "qf/phase_space.hpp"

namespace qf {

/// Gauss-Legendre rule on [-1, 1]: nodes ascending, weights summing to 2.
void gauss_legendre(int order, RVec& nodes, RVec& weights);

/// Isotropic spin-1/2 direction measurement: a continuum of couplings
/// L_x = (strength/2) x . sigma over the unit sphere (solid-angle measure),
/// discretized by a Gauss-Legendre (polar) x midpoint (azimuthal) product
/// rule of the given order.  Channels are grouped into n_patches equal-area
/// polar bands; each band is one homodyne detector.
std::vector<MeasurementChannel> spin_sphere_channels(int n_patches, double strength, int order);

/// Catalog entry: two-band sphere detection (strength 0.5, order 50) with a
/// transverse drive H = 0.5 sigma_x, started in the up state.
FilterModel spin_hemispheres_model();

/// Catalog entry: fully observed two-channel qubit (each channel its own
/// detector), started in a mixed state so conditioning has purity to gain.
FilterModel two_channel_spin_model();

/// Scalar quasi-free mode with one complex-valued detector.  The channel is
/// L = R(zeta), zeta = sqrt(eps) (1, sign(c) i)/sqrt(2), the commutator
/// scale is |c| (S = |c| J), and omega sets H = (omega/4)(R1^2 + R2^2).
/// c > 0 damps the mode, c < 0 amplifies it, c = 0 is the classical limit.
PhaseSpaceModel open_oscillator(double eps, double omega, double c, const RVec& theta0,
                                const RMat& P0);

/// Matrix realization of one mode truncated to n_levels Fock states: the
/// same physics as open_oscillator at |c| = 2, expressed as a
/// finite-dimensional model so the two integrators can be run against each
/// other.  Initial state is the displaced isotropic Gaussian N(theta0, nu I)
/// (nu >= 1); construction throws if the top three levels carry more than
/// leak_tol of the initial population.
struct FockBridge {
  FilterModel model;
  Mat a;
  Mat R1;
  Mat R2;
};
FockBridge truncated_fock_bridge(int n_levels, double eps, double omega, double c,
                                 const RVec& theta0, const RMat& P0, double leak_tol = 1e-6);

/// tr(rho (XY + YX)/2) - tr(rho X) tr(rho Y) for Hermitian X, Y.
double symmetric_covariance(const Mat& rho, const Mat& X, const Mat& Y);

/// Lowering operator on n_levels Fock states.
Mat lowering_operator(int n_levels);

}  // namespace qf
