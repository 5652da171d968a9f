#include "qf/phase_space.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>
#include <stdexcept>

namespace qf {

RMat canonical_symplectic(int n_modes) {
  if (n_modes < 1) throw std::invalid_argument("canonical_symplectic: n_modes must be >= 1");
  RMat S = RMat::Zero(2 * n_modes, 2 * n_modes);
  for (int m = 0; m < n_modes; ++m) {
    S(2 * m, 2 * m + 1) = -2.0;
    S(2 * m + 1, 2 * m) = 2.0;
  }
  return S;
}

double admissibility_min_eig(const RMat& P, const RMat& S) {
  if (P.rows() != P.cols() || S.rows() != S.cols() || P.rows() != S.rows())
    throw std::invalid_argument("admissibility_min_eig: shape mismatch");
  Mat H = P.cast<cplx>() + cplx(0.0, 0.5) * S.cast<cplx>();
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void PhaseSpaceModel::validate() const {
  const int d = dim();
  if (n_modes < 1) throw std::invalid_argument("phase model: n_modes must be >= 1");
  if (S.rows() != d || S.cols() != d) throw std::invalid_argument("phase model: S must be d x d");
  if (Omega.rows() != d || Omega.cols() != d)
    throw std::invalid_argument("phase model: Omega must be d x d");
  if (upsilon.size() != d) throw std::invalid_argument("phase model: upsilon must have length d");
  if (theta0.size() != d) throw std::invalid_argument("phase model: theta0 must have length d");
  if (P0.rows() != d || P0.cols() != d) throw std::invalid_argument("phase model: P0 must be d x d");

  const double s_scale = std::max(1.0, S.norm());
  if ((S + S.transpose()).norm() > 1e-12 * s_scale)
    throw std::invalid_argument("phase model: S must be antisymmetric");
  if ((Omega - Omega.transpose()).norm() > 1e-12 * std::max(1.0, Omega.norm()))
    throw std::invalid_argument("phase model: Omega must be symmetric");
  if ((P0 - P0.transpose()).norm() > 1e-12 * std::max(1.0, P0.norm()))
    throw std::invalid_argument("phase model: P0 must be symmetric");
  if (!S.allFinite() || !Omega.allFinite() || !upsilon.allFinite() || !theta0.allFinite() ||
      !P0.allFinite())
    throw std::invalid_argument("phase model: non-finite entry");

  for (std::size_t j = 0; j < channels.size(); ++j) {
    const auto& ch = channels[j];
    if (ch.zeta.size() != d) {
      std::ostringstream os;
      os << "phase model: channel " << j << " zeta must have length " << d;
      throw std::invalid_argument(os.str());
    }
    if (!ch.zeta.allFinite() || !(ch.weight >= 0.0)) {
      std::ostringstream os;
      os << "phase model: channel " << j << " has invalid zeta or weight";
      throw std::invalid_argument(os.str());
    }
  }

  const double admis = admissibility_min_eig(P0, S);
  if (admis < -1e-9) {
    std::ostringstream os;
    os << "phase model: initial covariance violates P0 + (i/2) S >= 0, min eigenvalue " << admis;
    throw std::invalid_argument(os.str());
  }
}

DriftData build_drift_data(const PhaseSpaceModel& model) {
  model.validate();
  const int d = model.dim();

  Mat E = Mat::Zero(d, d);
  for (const auto& ch : model.channels) E += ch.weight * ch.zeta * ch.zeta.adjoint();

  const RMat re_e = E.real();           // Hermitian part is symmetric real
  const RMat im_e = E.imag();           // antisymmetric real
  DriftData data;
  data.S = model.S;
  data.A = model.S * (im_e - model.Omega);
  data.Sv = model.S * model.upsilon;
  data.Q = model.S.transpose() * re_e * model.S;
  data.K0 = cplx(0.0, -0.5) * model.S.cast<cplx>();

  data.mu_bar = RMat::Zero(d, d);
  data.cross = RMat::Zero(d, d);
  data.n_im = RMat::Zero(d, d);
  for (const auto& ch : model.channels) {
    if (!ch.observed) continue;
    DriftData::Obs ob;
    ob.zeta = ch.zeta;
    ob.Lambda = ch.weight;
    ob.kind = ch.kind;
    ob.two_re_zeta = 2.0 * ch.zeta.real();
    data.observed.push_back(ob);

    const RVec re2 = ob.two_re_zeta;
    const RVec im = ch.zeta.imag();
    data.mu_bar += ch.weight * re2 * re2.transpose();
    data.cross += ch.weight * (model.S * im) * re2.transpose();
    data.n_im += ch.weight * im * im.transpose();
  }
  data.epsilon_tilde = re_e - data.n_im;
  return data;
}

}  // namespace qf
