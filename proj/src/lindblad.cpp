#include "qf/lindblad.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace qf {

namespace {

void check_channels(const Mat& H, const std::vector<Coupling>& channels) {
  require_square_finite(H, "generator: H");
  for (size_t j = 0; j < channels.size(); ++j) {
    require_square_finite(channels[j].L, "generator: L[" + std::to_string(j) + "]");
    if (channels[j].L.rows() != H.rows())
      throw std::invalid_argument("generator: channel dimension mismatch");
    if (!(channels[j].weight >= 0.0))
      throw std::invalid_argument("generator: negative channel weight");
  }
}

}  // namespace

Superoperator heisenberg_generator(const Mat& H, const std::vector<Coupling>& channels) {
  check_channels(H, channels);
  const int d = static_cast<int>(H.rows());
  const Mat id = Mat::Identity(d, d);
  // vec(A X B) = (B^T (x) A) vec(X)
  Mat G = I1 * (kron(id, H) - kron(H.transpose(), id));
  for (const auto& ch : channels) {
    const Mat Ld = ch.L.adjoint();
    const Mat LdL = Ld * ch.L;
    G += ch.weight * (kron(ch.L.transpose(), Ld) -
                      0.5 * kron(id, LdL) - 0.5 * kron(LdL.transpose(), id));
  }
  return Superoperator(std::move(G), d);
}

Superoperator schrodinger_generator(const Mat& H, const std::vector<Coupling>& channels) {
  check_channels(H, channels);
  const int d = static_cast<int>(H.rows());
  const Mat id = Mat::Identity(d, d);
  Mat G = -I1 * (kron(id, H) - kron(H.transpose(), id));
  for (const auto& ch : channels) {
    const Mat Ld = ch.L.adjoint();
    const Mat LdL = Ld * ch.L;
    G += ch.weight * (kron(ch.L.conjugate(), ch.L) -
                      0.5 * kron(id, LdL) - 0.5 * kron(LdL.transpose(), id));
  }
  return Superoperator(std::move(G), d);
}

Mat expm(const Mat& m) {
  require_square_finite(m, "expm");
  return m.exp();
}

Mat exact_lindblad_propagate(const Mat& rho0, const Mat& H,
                             const std::vector<Coupling>& channels, double t,
                             int dim_cap) {
  require_square_finite(rho0, "exact_lindblad_propagate: rho0");
  if (rho0.rows() > dim_cap)
    throw std::invalid_argument("exact_lindblad_propagate: dim " +
                                std::to_string(rho0.rows()) + " exceeds cap " +
                                std::to_string(dim_cap) +
                                " (dense dim^2 x dim^2 exponential)");
  if (t < 0.0) throw std::invalid_argument("exact_lindblad_propagate: negative time");
  Superoperator dual = schrodinger_generator(H, channels);
  Mat P = expm(t * dual.matrix);
  return unvec(P * vec(rho0), static_cast<int>(rho0.rows()));
}

}  // namespace qf
