#include "qf/operators.hpp"

namespace qf {

void require_square_finite(const Mat& m, const std::string& what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw std::invalid_argument(what + ": expected a non-empty square matrix, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  if (!m.allFinite())
    throw std::invalid_argument(what + ": non-finite entries");
}

double hermiticity_defect(const Mat& m) {
  double scale = std::max(1.0, m.norm());
  return (m - m.adjoint()).norm() / scale;
}

double min_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize_hermitian(m));
  return es.eigenvalues().minCoeff();
}

Mat symmetrize_hermitian(const Mat& m) { return 0.5 * (m + m.adjoint()); }

Operator::Operator(Mat m) : entries(std::move(m)) {
  require_square_finite(entries, "Operator");
}

DensityMatrix::DensityMatrix(Mat m, bool normalized) : rho(std::move(m)) {
  require_square_finite(rho, "DensityMatrix");
  if (hermiticity_defect(rho) > 1e-12)
    throw std::invalid_argument("DensityMatrix: Hermiticity defect " +
                                std::to_string(hermiticity_defect(rho)) + " exceeds 1e-12");
  if (normalized) {
    if (std::abs(rho.trace().real() - 1.0) > 1e-10 || std::abs(rho.trace().imag()) > 1e-12)
      throw std::invalid_argument("DensityMatrix: trace is not 1");
    if (min_eigenvalue(rho) < -1e-10)
      throw std::invalid_argument("DensityMatrix: negative eigenvalue " +
                                  std::to_string(min_eigenvalue(rho)));
  }
}

Superoperator::Superoperator(Mat m, int d) : matrix(std::move(m)), dim(d) {
  if (matrix.rows() != static_cast<long>(d) * d || matrix.cols() != matrix.rows())
    throw std::invalid_argument("Superoperator: matrix must be dim^2 x dim^2");
}

Mat Superoperator::apply(const Mat& x) const {
  if (x.rows() != dim || x.cols() != dim)
    throw std::invalid_argument("Superoperator::apply: dimension mismatch");
  return unvec(matrix * vec(x), dim);
}

Vec vec(const Mat& x) {
  return Eigen::Map<const Vec>(x.data(), x.size());
}

Mat unvec(const Vec& v, int dim) {
  if (v.size() != static_cast<long>(dim) * dim)
    throw std::invalid_argument("unvec: size mismatch");
  return Eigen::Map<const Mat>(v.data(), dim, dim);
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat commutator(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw std::invalid_argument("commutator: operands must be square and same size");
  return a * b - b * a;
}

Mat pauli_x() { return (Mat(2, 2) << 0, 1, 1, 0).finished(); }
Mat pauli_y() { return (Mat(2, 2) << 0, -I1, I1, 0).finished(); }
Mat pauli_z() { return (Mat(2, 2) << 1, 0, 0, -1).finished(); }
Mat pauli_minus() { return (Mat(2, 2) << 0, 0, 1, 0).finished(); }
Mat pauli_plus() { return (Mat(2, 2) << 0, 1, 0, 0).finished(); }

}  // namespace qf
