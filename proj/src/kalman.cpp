#include "qf/kalman.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace qf {
namespace {

void require_counts(const DriftData& data, std::size_t n_records, Detection kind,
                    const char* who) {
  if (data.observed.size() != n_records) {
    std::ostringstream os;
    os << who << ": expected " << data.observed.size() << " records, got " << n_records;
    throw std::invalid_argument(os.str());
  }
  for (const auto& ob : data.observed)
    if (ob.kind != kind)
      throw std::invalid_argument(std::string(who) + ": detection kind mismatch for this stepper");
}

// eigendecomposition-based p-th power of a symmetric PSD matrix
RMat sym_power(const RMat& M, double p, double floor_tol, const char* who) {
  Eigen::SelfAdjointEigenSolver<RMat> es(M);
  if (es.info() != Eigen::Success) throw std::runtime_error(std::string(who) + ": eigensolver failed");
  RVec vals = es.eigenvalues();
  const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
  RVec powered(vals.size());
  for (int i = 0; i < vals.size(); ++i) {
    double v = vals[i];
    if (v < -floor_tol * scale) {
      std::ostringstream os;
      os << who << ": matrix has negative eigenvalue " << v;
      throw std::runtime_error(os.str());
    }
    v = std::max(v, 0.0);
    if (p < 0.0 && v <= floor_tol * scale) {
      std::ostringstream os;
      os << who << ": matrix is singular (eigenvalue " << vals[i] << "), cannot invert";
      throw std::runtime_error(os.str());
    }
    powered[i] = std::pow(v, p);
  }
  return es.eigenvectors() * powered.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

RVec homodyne_gain(const RMat& P, const Mat& K0, const Vec& zeta) {
  return 2.0 * ((P.cast<cplx>() + K0) * zeta).real();
}

Vec heterodyne_gain(const RMat& P, const Mat& K0, const Vec& zeta) {
  return (P.cast<cplx>() + K0) * zeta;
}

RMat riccati_rhs(const RMat& P, const DriftData& data) {
  RMat rhs = data.A * P + P * data.A.transpose() + data.Q;
  for (const auto& ob : data.observed) {
    if (ob.kind == Detection::homodyne) {
      const RVec g = homodyne_gain(P, data.K0, ob.zeta);
      rhs -= ob.Lambda * g * g.transpose();
    } else {
      const Vec w = heterodyne_gain(P, data.K0, ob.zeta);
      rhs -= ob.Lambda * 2.0 * (w * w.adjoint()).real();
    }
  }
  return rhs;
}

RMat riccati_step(const RMat& P, const DriftData& data, double dt) {
  const RMat k1 = riccati_rhs(P, data);
  const RMat k2 = riccati_rhs(P + 0.5 * dt * k1, data);
  const RMat k3 = riccati_rhs(P + 0.5 * dt * k2, data);
  const RMat k4 = riccati_rhs(P + dt * k3, data);
  RMat next = P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next = 0.5 * (next + next.transpose()).eval();
  if (!next.allFinite()) throw std::runtime_error("riccati_step: covariance became non-finite");
  const double admis = admissibility_min_eig(next, data.S);
  if (admis < -1e-6) {
    std::ostringstream os;
    os << "riccati_step: covariance lost admissibility, min eig(P + iS/2) = " << admis;
    throw std::runtime_error(os.str());
  }
  return next;
}

void kalman_step_homodyne(GaussianPosterior& post, const DriftData& data,
                          std::span<const double> dY, double dt) {
  require_counts(data, dY.size(), Detection::homodyne, "kalman_step_homodyne");
  const RVec theta = post.theta;
  RVec d_theta = (data.A * theta - data.Sv) * dt;
  double d_log = 0.0;
  for (std::size_t i = 0; i < dY.size(); ++i) {
    const auto& ob = data.observed[i];
    const double pred = ob.two_re_zeta.dot(theta);  // record drift is Lambda * pred
    const RVec g = homodyne_gain(post.P, data.K0, ob.zeta);
    d_theta += g * (dY[i] - ob.Lambda * pred * dt);
    d_log += pred * dY[i] - 0.5 * ob.Lambda * pred * pred * dt;
  }
  post.theta += d_theta;
  post.log_rho += d_log;
  post.P = riccati_step(post.P, data, dt);
  post.t += dt;
}

void kalman_step_homodyne_raw(GaussianPosterior& post, const DriftData& data,
                              std::span<const double> dY, double dt) {
  require_counts(data, dY.size(), Detection::homodyne, "kalman_step_homodyne_raw");
  const RVec theta = post.theta;
  const RMat a_raw = data.A - post.P * data.mu_bar - data.cross;
  RVec d_theta = (a_raw * theta - data.Sv) * dt;
  double d_log = 0.0;
  for (std::size_t i = 0; i < dY.size(); ++i) {
    const auto& ob = data.observed[i];
    const double pred = ob.two_re_zeta.dot(theta);
    d_theta += homodyne_gain(post.P, data.K0, ob.zeta) * dY[i];
    d_log += pred * dY[i] - 0.5 * ob.Lambda * pred * pred * dt;
  }
  post.theta += d_theta;
  post.log_rho += d_log;
  post.P = riccati_step(post.P, data, dt);
  post.t += dt;
}

void kalman_step_heterodyne(GaussianPosterior& post, const DriftData& data,
                            std::span<const cplx> dZ, double dt) {
  require_counts(data, dZ.size(), Detection::heterodyne, "kalman_step_heterodyne");
  const RVec theta = post.theta;
  RVec d_theta = (data.A * theta - data.Sv) * dt;
  double d_log = 0.0;
  for (std::size_t i = 0; i < dZ.size(); ++i) {
    const auto& ob = data.observed[i];
    const cplx pred = ob.zeta.transpose() * theta.cast<cplx>();  // record drift: Lambda * pred
    const Vec w = heterodyne_gain(post.P, data.K0, ob.zeta);
    const cplx innov = dZ[i] - ob.Lambda * pred * dt;
    d_theta += 2.0 * (w * std::conj(innov)).real();
    d_log += 2.0 * std::real(pred * std::conj(dZ[i])) - ob.Lambda * std::norm(pred) * dt;
  }
  post.theta += d_theta;
  post.log_rho += d_log;
  post.P = riccati_step(post.P, data, dt);
  post.t += dt;
}

RMat transport_propagator(const DriftData& data, double r, double t) {
  if (!(t >= r)) throw std::invalid_argument("transport_propagator: requires t >= r");
  return ((t - r) * data.A).exp();
}

PriorMoments prior_moments(const DriftData& data, const RVec& theta0, const RMat& P0, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("prior_moments: requires t >= 0");
  const int d = data.dim();
  if (theta0.size() != d || P0.rows() != d || P0.cols() != d)
    throw std::invalid_argument("prior_moments: shape mismatch");

  // cov: exp of [[A, Q], [0, -A^T]] gives blocks F11 = e^{tA} and
  // F12 with F12 F11^T = int_0^t e^{(t-s)A} Q e^{(t-s)A^T} ds
  RMat block = RMat::Zero(2 * d, 2 * d);
  block.topLeftCorner(d, d) = data.A;
  block.topRightCorner(d, d) = data.Q;
  block.bottomRightCorner(d, d) = -data.A.transpose();
  const RMat eblock = (t * block).exp();
  const RMat f11 = eblock.topLeftCorner(d, d);
  const RMat f12 = eblock.topRightCorner(d, d);

  // mean: affine flow d theta = (A theta - Sv) dt packed the same way
  RMat ablock = RMat::Zero(d + 1, d + 1);
  ablock.topLeftCorner(d, d) = data.A;
  ablock.topRightCorner(d, 1) = -data.Sv;
  const RMat eaff = (t * ablock).exp();

  PriorMoments out;
  out.mean = eaff.topLeftCorner(d, d) * theta0 + eaff.topRightCorner(d, 1);
  RMat cov = f11 * P0 * f11.transpose() + f12 * f11.transpose();
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

RMat stationary_covariance(const PhaseSpaceModel& model) {
  const DriftData data = build_drift_data(model);
  for (const auto& ch : model.channels)
    if (!ch.observed)
      throw std::invalid_argument(
          "stationary_covariance: requires every channel observed (no hidden dissipation)");
  if (model.channels.empty())
    throw std::invalid_argument("stationary_covariance: model has no channels");

  const int d = model.dim();
  Mat E = Mat::Zero(d, d);
  for (const auto& ch : model.channels) E += ch.weight * ch.zeta * ch.zeta.adjoint();
  const RMat X = 2.0 * E.real();

  const double x_scale = std::max(1.0, X.norm());
  const RMat comm = model.Omega * model.S * X - X * model.S * model.Omega;
  if (comm.norm() > 1e-10 * std::max(x_scale, model.Omega.norm() * model.S.norm() * x_scale)) {
    std::ostringstream os;
    os << "stationary_covariance: closed form needs Omega S X = X S Omega; residual norm "
       << comm.norm();
    throw std::invalid_argument(os.str());
  }

  const RMat x_half = sym_power(X, 0.5, 1e-12, "stationary_covariance");
  const RMat x_inv_half = sym_power(X, -0.5, 1e-12, "stationary_covariance");
  const RMat inner = -x_half * model.S * X * model.S * x_half;  // symmetric PSD
  const RMat inner_sqrt = sym_power(0.5 * (inner + inner.transpose()), 0.5, 1e-10,
                                    "stationary_covariance");
  RMat p_inf = 0.5 * x_inv_half * inner_sqrt * x_inv_half;
  p_inf = 0.5 * (p_inf + p_inf.transpose()).eval();

  const RMat residual = riccati_rhs(p_inf, data);
  const double rhs_scale = std::max(1.0, (data.A * p_inf).norm() + data.Q.norm());
  if (residual.norm() > 1e-10 * rhs_scale) {
    std::ostringstream os;
    os << "stationary_covariance: candidate is not a fixed point, residual norm "
       << residual.norm();
    throw std::runtime_error(os.str());
  }
  return p_inf;
}

double stationary_gain_coefficient(const PhaseSpaceModel& model) {
  int n_obs = 0;
  Vec zeta;
  for (const auto& ch : model.channels)
    if (ch.observed) {
      ++n_obs;
      zeta = ch.zeta;
    }
  if (n_obs != 1)
    throw std::invalid_argument("stationary_gain_coefficient: requires exactly one observed channel");
  const RMat p_inf = stationary_covariance(model);
  const Mat K0 = cplx(0.0, -0.5) * model.S.cast<cplx>();
  const Vec w = heterodyne_gain(p_inf, K0, zeta);
  const double denom = zeta.squaredNorm();
  if (denom <= 0.0) throw std::invalid_argument("stationary_gain_coefficient: zeta is zero");
  return std::real(zeta.dot(w)) / denom;
}

double collapse_rate(const PhaseSpaceModel& model) {
  model.validate();
  const int d = model.dim();
  Mat E = Mat::Zero(d, d);
  for (const auto& ch : model.channels) {
    if (!ch.observed)
      throw std::invalid_argument("collapse_rate: requires every channel observed");
    E += ch.weight * ch.zeta * ch.zeta.adjoint();
  }
  const RMat X = 2.0 * E.real();
  const double eps = X(0, 0);  // X = eps * I in the scalar-reducible case
  if ((X - eps * RMat::Identity(d, d)).norm() > 1e-10 * std::max(1.0, std::abs(eps)))
    throw std::invalid_argument("collapse_rate: requires scalar noise matrix Re(E) = (eps/2) I");
  if (eps <= 0.0) throw std::invalid_argument("collapse_rate: requires eps > 0");

  const double omega = model.Omega(0, 0);
  if ((model.Omega - omega * RMat::Identity(d, d)).norm() >
      1e-10 * std::max(1.0, std::abs(omega)))
    throw std::invalid_argument("collapse_rate: requires scalar Omega = omega I");

  const RMat sts = model.S.transpose() * model.S;
  const double sigma2 = sts(0, 0);
  if ((sts - sigma2 * RMat::Identity(d, d)).norm() > 1e-10 * std::max(1.0, sigma2))
    throw std::invalid_argument("collapse_rate: requires S^T S = sigma^2 I");
  const double sigma = std::sqrt(std::max(sigma2, 0.0));
  if (sigma <= 1e-12)
    throw std::invalid_argument(
        "collapse_rate: classical limit (S = 0) relaxes algebraically, no exponential rate");
  return eps * sigma;
}

double scalar_riccati_closed_form(double eps, double c_abs, double p0, double t) {
  if (!(eps > 0.0)) throw std::invalid_argument("scalar_riccati_closed_form: requires eps > 0");
  if (c_abs < 0.0 || p0 < 0.0 || t < 0.0)
    throw std::invalid_argument("scalar_riccati_closed_form: requires c_abs, p0, t >= 0");
  if (c_abs == 0.0) return p0 / (1.0 + eps * p0 * t);
  const double half_c = 0.5 * c_abs;
  const double q0 = (p0 - half_c) / (p0 + half_c);
  const double q = q0 * std::exp(-eps * c_abs * t);
  return half_c * (1.0 + q) / (1.0 - q);
}

}  // namespace qf
