#pragma once
#include <span>

#include "qf/phase_space.hpp"

namespace qf {

/// Gain of a homodyne-observed channel: g = 2 Re[(P + K0) zeta].
RVec homodyne_gain(const RMat& P, const Mat& K0, const Vec& zeta);

/// Gain of a heterodyne-observed channel: w = (P + K0) zeta (complex).
Vec heterodyne_gain(const RMat& P, const Mat& K0, const Vec& zeta);

/// dP/dt = A P + P A^T + Q - sum_i Lambda_i * (g_i g_i^T | 2 Re[w_i w_i*]).
RMat riccati_rhs(const RMat& P, const DriftData& data);

/// One deterministic RK4 step of the covariance flow.  The result is
/// symmetrized; if min eig(P + (i/2) S) falls below -1e-6 the step throws,
/// since past that point the matrix no longer bounds any quantum state.
RMat riccati_step(const RMat& P, const DriftData& data, double dt);

/// Advance mean/covariance/log-density one Euler step given the raw real
/// records dY of the homodyne-observed channels (innovation form).
void kalman_step_homodyne(GaussianPosterior& post, const DriftData& data,
                          std::span<const double> dY, double dt);

/// Same update written against the raw records directly, with the
/// record-dependent drift folded into an effective A.  Agrees with the
/// innovation form to rounding; kept separate so the two can be compared.
void kalman_step_homodyne_raw(GaussianPosterior& post, const DriftData& data,
                              std::span<const double> dY, double dt);

/// Advance one Euler step given the raw complex records dZ of the
/// heterodyne-observed channels.
void kalman_step_heterodyne(GaussianPosterior& post, const DriftData& data,
                            std::span<const cplx> dZ, double dt);

/// Mean transport matrix expm((t - r) A) of the record-free flow; requires
/// t >= r.  Composes as a two-parameter semigroup.
RMat transport_propagator(const DriftData& data, double r, double t);

struct PriorMoments {
  RVec mean;
  RMat cov;
};

/// Unconditional (record-averaged) Gaussian moments at time t, computed in
/// closed form from one block matrix exponential.
PriorMoments prior_moments(const DriftData& data, const RVec& theta0, const RMat& P0, double t);

/// Closed-form fixed point of the covariance flow for a fully observed
/// heterodyne model:
///   P_inf = (1/2) X^{-1/2} sqrtm(-X^{1/2} S X S X^{1/2}) X^{-1/2},
/// X = 2 Re(E).  Requires Omega S X = X S Omega (the commutative case); the
/// result is verified against riccati_rhs and the call throws if the
/// residual exceeds tolerance.
RMat stationary_covariance(const PhaseSpaceModel& model);

/// Scalar gain coefficient l with (P_inf + K0) zeta = l * zeta / |zeta|^2 *
/// (zeta^* zeta) -- i.e. Re<zeta, w> / <zeta, zeta> at the stationary
/// covariance.  Requires exactly one observed channel.
double stationary_gain_coefficient(const PhaseSpaceModel& model);

/// Exponential rate at which the conditional covariance of a
/// scalar-reducible model approaches its fixed point.  Throws in the
/// classical limit (S = 0), where the approach is algebraic, not
/// exponential.
double collapse_rate(const PhaseSpaceModel& model);

/// p(t) for dp/dt = eps (c^2/4 - p^2) with p(0) = p0 >= 0, c = c_abs >= 0:
///   c > 0: p = (c/2)(1+q)/(1-q), q = q0 e^{-eps c t}, q0 = (p0-c/2)/(p0+c/2)
///   c = 0: p = p0 / (1 + eps p0 t)
double scalar_riccati_closed_form(double eps, double c_abs, double p0, double t);

}  // namespace qf
