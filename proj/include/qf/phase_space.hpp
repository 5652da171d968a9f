#pragma once
#include <vector>

#include "qf/channels.hpp"
#include "qf/operators.hpp"

namespace qf {

/// Linear coupling R(zeta) = sum_a zeta_a R_a of the canonical coordinates.
/// homodyne kind = one real record per channel, heterodyne = one complex
/// record; unobserved channels contribute dissipation only.
struct PhaseChannel {
  Vec zeta;
  double weight = 1.0;
  bool observed = true;
  Detection kind = Detection::heterodyne;
};

/// Quasi-free model on d = 2 n_modes real canonical coordinates R_a with
///   [R_a, R_b] = (1/i) S_ab,   H = (1/2) R^T Omega R + R(upsilon),
/// Gaussian initial law N(theta0, P0) subject to P0 + (i/2) S >= 0.
struct PhaseSpaceModel {
  int n_modes = 1;
  RMat S;
  RMat Omega;
  RVec upsilon;
  std::vector<PhaseChannel> channels;
  RVec theta0;
  RMat P0;

  int dim() const { return 2 * n_modes; }
  /// Throws std::invalid_argument on shape/symmetry/admissibility violations.
  void validate() const;
};

/// Per-mode blocks [[0, -2], [2, 0]]: coordinates R_1 = a + a*, R_2 = i(a* - a)
/// whose vacuum covariance is the identity.
RMat canonical_symplectic(int n_modes);

/// Smallest eigenvalue of the Hermitian matrix P + (i/2) S.
double admissibility_min_eig(const RMat& P, const RMat& S);

/// Conditional Gaussian law: mean theta, symmetrized covariance P, and the
/// log observation density accumulated along the record.
struct GaussianPosterior {
  RVec theta;
  RMat P;
  double log_rho = 0.0;
  double t = 0.0;
};

/// Coordinate matrices of the filtering equations, precomputed per model.
///
///   d theta = (A theta - Sv) dt + sum_i g_i(P) dYtilde_i
///   dP/dt   = A P + P A^T + Q - (observation reduction)
///
/// with A = S (Im E - Omega), Q = S^T Re(E) S, E = sum_j w_j zeta_j zeta_j^*,
/// g_i(P) = 2 Re[(P + K0) zeta_i], K0 = -(i/2) S.  mu_bar/cross/n_im are the
/// pieces of the equivalent raw-record (non-innovation) form.
struct DriftData {
  RMat S;
  RMat A;
  RVec Sv;
  RMat Q;
  Mat K0;

  struct Obs {
    Vec zeta;
    double Lambda = 0.0;
    Detection kind = Detection::homodyne;
    RVec two_re_zeta;
  };
  std::vector<Obs> observed;

  RMat mu_bar;         // sum_i Lambda_i (2 Re zeta_i)(2 Re zeta_i)^T
  RMat cross;          // sum_i Lambda_i (S Im zeta_i)(2 Re zeta_i)^T
  RMat n_im;           // sum_i Lambda_i (Im zeta_i)(Im zeta_i)^T
  RMat epsilon_tilde;  // Re(E) - n_im: noise matrix of the raw-record form

  int dim() const { return static_cast<int>(A.rows()); }
};

DriftData build_drift_data(const PhaseSpaceModel& model);

}  // namespace qf
