#include "qf/models.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qf {

void gauss_legendre(int order, RVec& nodes, RVec& weights) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  RVec diag = RVec::Zero(order);
  RVec sub(order > 1 ? order - 1 : 0);
  for (int k = 1; k < order; ++k) sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<RMat> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw std::runtime_error("gauss_legendre: eigensolver failed");
  nodes = es.eigenvalues();
  weights.resize(order);
  for (int k = 0; k < order; ++k) {
    const double first = es.eigenvectors()(0, k);
    weights[k] = 2.0 * first * first;
  }
}

std::vector<MeasurementChannel> spin_sphere_channels(int n_patches, double strength, int order) {
  if (n_patches < 1) throw std::invalid_argument("spin_sphere_channels: n_patches must be >= 1");
  if (!(strength > 0.0)) throw std::invalid_argument("spin_sphere_channels: strength must be > 0");
  RVec u, wu;
  gauss_legendre(order, u, wu);

  const Mat sx = pauli_x(), sy = pauli_y(), sz = pauli_z();
  const double two_pi = 2.0 * std::numbers::pi;
  const double dphi_weight = two_pi / order;

  std::vector<MeasurementChannel> channels;
  channels.reserve(static_cast<std::size_t>(order) * order);
  for (int i = 0; i < order; ++i) {
    const double cos_t = u[i];
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    // equal-area polar bands: band area in u is uniform
    int band = static_cast<int>((cos_t + 1.0) / 2.0 * n_patches);
    band = std::min(std::max(band, 0), n_patches - 1);
    for (int m = 0; m < order; ++m) {
      const double phi = two_pi * (m + 0.5) / order;
      MeasurementChannel ch;
      ch.L = 0.5 * strength *
             (sin_t * std::cos(phi) * sx + sin_t * std::sin(phi) * sy + cos_t * sz);
      ch.weight = wu[i] * dphi_weight;
      ch.kind = Detection::homodyne;
      ch.group_id = band;
      channels.push_back(std::move(ch));
    }
  }
  return channels;
}

FilterModel spin_hemispheres_model() {
  FilterModel model;
  model.H = 0.5 * pauli_x();
  model.channels = spin_sphere_channels(2, 0.5, 50);
  Mat rho0 = Mat::Zero(2, 2);
  rho0(0, 0) = 1.0;
  model.rho0 = rho0;
  return model;
}

FilterModel two_channel_spin_model() {
  FilterModel model;
  model.H = 0.3 * pauli_y();
  MeasurementChannel decay{pauli_minus(), 0.8, Detection::homodyne, 0};
  MeasurementChannel dephase{0.5 * pauli_z(), 0.6, Detection::homodyne, 1};
  model.channels = {decay, dephase};
  Mat rho0 = Mat::Zero(2, 2);
  rho0(0, 0) = 0.7;
  rho0(1, 1) = 0.3;
  model.rho0 = rho0;
  return model;
}

PhaseSpaceModel open_oscillator(double eps, double omega, double c, const RVec& theta0,
                                const RMat& P0) {
  if (!(eps > 0.0)) throw std::invalid_argument("open_oscillator: eps must be > 0");
  PhaseSpaceModel model;
  model.n_modes = 1;
  const double sigma = std::abs(c);
  model.S = RMat::Zero(2, 2);
  model.S(0, 1) = -sigma;
  model.S(1, 0) = sigma;
  model.Omega = 0.5 * omega * RMat::Identity(2, 2);
  model.upsilon = RVec::Zero(2);
  PhaseChannel ch;
  const double sign = (c < 0.0) ? -1.0 : 1.0;
  ch.zeta = Vec(2);
  ch.zeta << cplx(std::sqrt(eps / 2.0), 0.0), cplx(0.0, sign * std::sqrt(eps / 2.0));
  ch.weight = 1.0;
  ch.observed = true;
  ch.kind = Detection::heterodyne;
  model.channels = {ch};
  model.theta0 = theta0;
  model.P0 = P0;
  model.validate();
  return model;
}

Mat lowering_operator(int n_levels) {
  if (n_levels < 2) throw std::invalid_argument("lowering_operator: need at least 2 levels");
  Mat a = Mat::Zero(n_levels, n_levels);
  for (int n = 1; n < n_levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

FockBridge truncated_fock_bridge(int n_levels, double eps, double omega, double c,
                                 const RVec& theta0, const RMat& P0, double leak_tol) {
  if (n_levels < 4) throw std::invalid_argument("truncated_fock_bridge: need at least 4 levels");
  if (!(eps > 0.0)) throw std::invalid_argument("truncated_fock_bridge: eps must be > 0");
  if (std::abs(std::abs(c) - 2.0) > 1e-12)
    throw std::invalid_argument(
        "truncated_fock_bridge: Fock coordinates fix the commutator scale to |c| = 2");
  if (theta0.size() != 2 || P0.rows() != 2 || P0.cols() != 2)
    throw std::invalid_argument("truncated_fock_bridge: theta0 must be length 2, P0 2x2");

  const double nu = P0(0, 0);
  if ((P0 - nu * RMat::Identity(2, 2)).norm() > 1e-10 * std::max(1.0, nu))
    throw std::invalid_argument(
        "truncated_fock_bridge: initial covariance must be isotropic, P0 = nu I");
  if (nu < 1.0 - 1e-12)
    throw std::invalid_argument("truncated_fock_bridge: nu < 1 is not a state covariance");

  FockBridge bridge;
  bridge.a = lowering_operator(n_levels);
  const Mat ad = bridge.a.adjoint();
  bridge.R1 = bridge.a + ad;
  bridge.R2 = cplx(0.0, 1.0) * (ad - bridge.a);

  FilterModel model;
  model.H = 0.25 * omega * (bridge.R1 * bridge.R1 + bridge.R2 * bridge.R2);
  MeasurementChannel ch;
  ch.L = std::sqrt(2.0 * eps) * ((c > 0.0) ? bridge.a : Mat(ad));
  ch.weight = 1.0;
  ch.kind = Detection::heterodyne;
  ch.group_id = 0;
  model.channels = {ch};

  // displaced isotropic thermal state: nu = 2 nbar + 1
  const double nbar = 0.5 * (nu - 1.0);
  const double x = nbar / (nbar + 1.0);
  Mat rho = Mat::Zero(n_levels, n_levels);
  double pn = 1.0 - x;
  for (int n = 0; n < n_levels; ++n) {
    rho(n, n) = pn;
    pn *= x;
  }
  const cplx alpha(0.5 * theta0[0], 0.5 * theta0[1]);
  const Mat disp = expm(alpha * ad - std::conj(alpha) * bridge.a);
  rho = disp * rho * disp.adjoint();

  double leak = 0.0;
  for (int n = n_levels - 3; n < n_levels; ++n) leak += std::real(rho(n, n));
  if (!(leak < leak_tol)) {
    std::ostringstream os;
    os << "truncated_fock_bridge: initial state leaks " << leak << " into the top three levels"
       << " (tolerance " << leak_tol << "); raise n_levels";
    throw std::invalid_argument(os.str());
  }

  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  model.rho0 = Mat(rho);
  bridge.model = std::move(model);
  return bridge;
}

double symmetric_covariance(const Mat& rho, const Mat& X, const Mat& Y) {
  const double xy = 0.5 * ((X * Y + Y * X) * rho).trace().real();
  const double ex = (X * rho).trace().real();
  const double ey = (Y * rho).trace().real();
  return xy - ex * ey;
}

}  // namespace qf
