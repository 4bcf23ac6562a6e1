#pragma once

// Dense complex kernels for the 2x2 and 4x4 matrices used throughout the
// library. Everything here is a pure function of its arguments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace coa {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;
using RMat4 = Eigen::Matrix4d;

inline constexpr cplx kI{0.0, 1.0};

/// Default tolerances. Every routine that uses one takes an override.
namespace tol {
inline constexpr double kHermitian = 1e-10;
inline constexpr double kNegativeEigen = 1e-10;
inline constexpr double kTrace = 1e-9;
inline constexpr double kUnitary = 1e-9;
inline constexpr double kSymmetric = 1e-9;
inline constexpr double kDegenerate = 1e-8;
inline constexpr double kRank = 1e-9;
}  // namespace tol

class NumericError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto v = cplx(m(i, j));
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
  return true;
}

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!all_finite(m)) throw NumericError(std::string(what) + ": non-finite entry");
}

template <class Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw NumericError(std::string(what) + ": matrix must be square and non-empty");
}

/// Largest |entry| of a - b.
template <class A, class B>
double max_abs_diff(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

template <class Derived>
double unitarity_defect(const Eigen::MatrixBase<Derived>& u) {
  const CMatrix uu = CMatrix(u).adjoint() * CMatrix(u);
  return (uu - CMatrix::Identity(uu.rows(), uu.cols())).cwiseAbs().maxCoeff();
}

template <class Derived>
double hermitian_defect(const Eigen::MatrixBase<Derived>& h) {
  const CMatrix m = h;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

struct SvdResult {
  CMatrix u;
  Eigen::VectorXd sigma;  // descending
  CMatrix v;
};

/// M = U diag(sigma) V^dagger with square unitary U, V.
inline SvdResult svd(const CMatrix& m) {
  require_finite(m, "svd");
  Eigen::JacobiSVD<CMatrix> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Eigen already sorts descending; a stable index sort keeps ties in place.
  return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

inline Eigen::VectorXd singular_values(const CMatrix& m) {
  require_finite(m, "singular_values");
  return Eigen::JacobiSVD<CMatrix>(m).singularValues();
}

struct HermEig {
  Eigen::VectorXd values;  // descending
  CMatrix vectors;         // columns
};

inline HermEig herm_eig(const CMatrix& h, double herm_tol = tol::kHermitian) {
  require_square(h, "herm_eig");
  require_finite(h, "herm_eig");
  const double asym = hermitian_defect(h);
  if (asym > herm_tol) {
    std::ostringstream os;
    os << "herm_eig: matrix is not Hermitian (max |H - H^dag| = " << asym << ")";
    throw NumericError(os.str());
  }
  const CMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  const Eigen::Index n = sym.rows();
  HermEig out{Eigen::VectorXd(n), CMatrix(n, n)};
  // solver returns ascending order
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

/// Principal square root of a PSD matrix. Eigenvalues in [-neg_tol, 0) are
/// clamped to zero; anything more negative is rejected.
inline CMatrix matrix_sqrt_psd(const CMatrix& h, double neg_tol = tol::kNegativeEigen) {
  const HermEig eig = herm_eig(h);
  Eigen::VectorXd root(eig.values.size());
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    const double lam = eig.values(k);
    if (lam < -neg_tol) {
      std::ostringstream os;
      os << "matrix_sqrt_psd: negative eigenvalue " << lam;
      throw NumericError(os.str());
    }
    root(k) = std::sqrt(std::max(lam, 0.0));
  }
  CMatrix s = eig.vectors * root.cast<cplx>().asDiagonal() * eig.vectors.adjoint();
  return 0.5 * (s + s.adjoint());
}

/// Uhlmann fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)).
inline double fidelity(const CMatrix& rho, const CMatrix& sigma, double trace_tol = tol::kTrace) {
  require_square(rho, "fidelity");
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw NumericError("fidelity: dimension mismatch");
  for (const CMatrix* m : {&rho, &sigma}) {
    const double tr = m->trace().real();
    if (std::abs(tr - 1.0) > trace_tol) {
      std::ostringstream os;
      os << "fidelity: density matrix trace " << tr << " differs from 1";
      throw NumericError(os.str());
    }
  }
  const CMatrix r = matrix_sqrt_psd(rho);
  const CMatrix inner = r * sigma * r;
  const HermEig eig = herm_eig(0.5 * (inner + inner.adjoint()));
  double f = 0.0;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    const double lam = eig.values(k);
    if (lam < -tol::kNegativeEigen) throw NumericError("fidelity: product is not PSD");
    f += std::sqrt(std::max(lam, 0.0));
  }
  return f;
}

/// sigma_1 + sigma_2 of a 2x2 matrix, in closed form.
inline double nuclear_norm_2x2(const Mat2& m) {
  const double fro2 = m.squaredNorm();
  const double det = std::abs(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0));
  return std::sqrt(std::max(fro2 + 2.0 * det, 0.0));
}

inline double nuclear_norm_2x2(const CMatrix& m) {
  if (m.rows() != 2 || m.cols() != 2) throw NumericError("nuclear_norm_2x2: matrix must be 2x2");
  require_finite(m, "nuclear_norm_2x2");
  return nuclear_norm_2x2(Mat2(m));
}

/// Haar-distributed unitary from the QR of a complex Ginibre matrix.
/// `normal` is any callable returning standard normal doubles.
template <class NormalSource>
CMatrix random_unitary(Eigen::Index n, NormalSource&& normal) {
  CMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = cplx(normal(), normal());
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx d = r(k, k);
    const double a = std::abs(d);
    if (a > 0) q.col(k) *= d / a;
  }
  return q;
}

/// Haar-distributed real orthogonal matrix with determinant +1.
template <class NormalSource>
RMatrix random_rotation(Eigen::Index n, NormalSource&& normal) {
  RMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal();
  Eigen::HouseholderQR<RMatrix> qr(g);
  RMatrix q = qr.householderQ();
  const RMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k)
    if (r(k, k) < 0) q.col(k) *= -1.0;
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

}  // namespace coa
