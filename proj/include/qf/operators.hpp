#pragma once
#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace qf {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using cplx = std::complex<double>;

inline constexpr cplx I1{0.0, 1.0};

/// Throws std::invalid_argument unless m is square with finite entries.
void require_square_finite(const Mat& m, const std::string& what);

/// Relative Hermiticity defect ||m - m^dagger|| / max(1, ||m||) in Frobenius norm.
double hermiticity_defect(const Mat& m);

/// Smallest eigenvalue of a (nearly) Hermitian matrix.
double min_eigenvalue(const Mat& m);

/// Replace m by its Hermitian part (m + m^dagger)/2.  This is the only
/// place the library repairs Hermiticity drift; steppers call it explicitly.
Mat symmetrize_hermitian(const Mat& m);

/// Square complex matrix with validated entries.  Thin wrapper used at module
/// boundaries; internal arithmetic works on Eigen matrices directly.
struct Operator {
  Mat entries;

  Operator() = default;
  explicit Operator(Mat m);
  int dim() const { return static_cast<int>(entries.rows()); }
};

/// State operator (trace-class, Hermitian, positive when normalized).
struct DensityMatrix {
  Mat rho;

  DensityMatrix() = default;
  /// Validates: square, finite, Hermitian to 1e-12 * max(1, ||rho||).
  /// When `normalized` also requires trace ~ 1 and min eigenvalue >= -1e-10.
  explicit DensityMatrix(Mat m, bool normalized = true);
  int dim() const { return static_cast<int>(rho.rows()); }
  double trace_real() const { return rho.trace().real(); }
};

/// Linear map on operators stored as a dim^2 x dim^2 matrix acting on
/// column-major vectorizations: vec(A X B) = (B^T (x) A) vec(X).
struct Superoperator {
  Mat matrix;
  int dim = 0;

  Superoperator() = default;
  Superoperator(Mat m, int d);
  Mat apply(const Mat& x) const;
};

Vec vec(const Mat& x);
Mat unvec(const Vec& v, int dim);

/// Kronecker product a (x) b.
Mat kron(const Mat& a, const Mat& b);

/// [a, b] = ab - ba.  Throws on dimension mismatch.
Mat commutator(const Mat& a, const Mat& b);

/// Pauli matrices and related fixtures in the basis {|up>, |down>}.
Mat pauli_x();
Mat pauli_y();
Mat pauli_z();
Mat pauli_minus();  // lowers |up> to |down>
Mat pauli_plus();

}  // namespace qf
