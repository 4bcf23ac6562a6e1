#pragma once

// Takagi factorization, orthogonal-phase decomposition of unitaries, and the
// magic-basis map between SU(2)xSU(2) and SO(4).

#include "coa/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

namespace coa {

struct TakagiFactorization {
  CMatrix u;              // u^T Q u = diag(sigma)
  Eigen::VectorXd sigma;  // descending
};

struct OrthoPhaseDecomp {
  RMatrix o1;
  RMatrix o2;
  Eigen::VectorXd deltas;  // U = o1 diag(exp(i delta)) o2^T, each delta in (-pi/2, pi/2]

  CMatrix reconstruct() const {
    Eigen::VectorXcd ph(deltas.size());
    for (Eigen::Index k = 0; k < deltas.size(); ++k) ph(k) = std::polar(1.0, deltas(k));
    return o1.cast<cplx>() * ph.asDiagonal() * o2.transpose().cast<cplx>();
  }
};

namespace detail {

inline TakagiFactorization takagi_recursive(const CMatrix& q) {
  const Eigen::Index n = q.rows();
  TakagiFactorization out{CMatrix::Identity(n, n), Eigen::VectorXd::Zero(n)};
  const double scale = q.cwiseAbs().maxCoeff();
  if (n == 0 || scale == 0.0) return out;

  // Real embedding: [x; y] with eigenvalue s >= 0 gives u = x + i y, Q u = s conj(u).
  RMatrix m(2 * n, 2 * n);
  const RMatrix a = q.real(), b = q.imag();
  m << a, -b, -b, -a;
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd& lam = es.eigenvalues();  // ascending
  const double top = lam(2 * n - 1);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 2 * n - 1; k >= 0 && static_cast<Eigen::Index>(keep.size()) < n; --k)
    if (lam(k) > 1e-3 * top) keep.push_back(k);
  if (keep.empty()) return out;

  const Eigen::Index r = static_cast<Eigen::Index>(keep.size());
  CMatrix us(n, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const Eigen::VectorXd v = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]);
    us.col(j) = v.head(n).cast<cplx>() + kI * v.tail(n).cast<cplx>();
  }
  // Clean up orthonormality (the vectors are orthonormal up to rounding).
  Eigen::HouseholderQR<CMatrix> qr(us);
  CMatrix qfull = qr.householderQ() * CMatrix::Identity(n, n);
  const CMatrix rr = qr.matrixQR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j) {
    const cplx d = rr(j, j);
    if (std::abs(d) > 0) qfull.col(j) *= d / std::abs(d);
  }
  out.u = qfull;
  if (r < n) {
    const CMatrix tailu = qfull.rightCols(n - r);
    const CMatrix tail = tailu.transpose() * q * tailu;
    const TakagiFactorization sub = takagi_recursive(0.5 * (tail + tail.transpose()));
    out.u.rightCols(n - r) = tailu * sub.u;
  }
  return out;
}

}  // namespace detail

/// Takagi factorization u^T Q u = diag(sigma) of a complex symmetric matrix.
inline TakagiFactorization takagi(const CMatrix& q, double sym_tol = tol::kSymmetric) {
  require_square(q, "takagi");
  require_finite(q, "takagi");
  const double asym = (q - q.transpose()).cwiseAbs().maxCoeff();
  if (asym > sym_tol) {
    std::ostringstream os;
    os << "takagi: matrix is not symmetric (max |Q - Q^T| = " << asym << ")";
    throw NumericError(os.str());
  }
  const CMatrix qs = 0.5 * (q + q.transpose());
  TakagiFactorization raw = detail::takagi_recursive(qs);
  const Eigen::Index n = qs.rows();

  // Rotate each column so that u_k^T Q u_k is real and nonnegative.
  Eigen::VectorXd s(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx d = (raw.u.col(k).transpose() * qs * raw.u.col(k))(0, 0);
    if (std::abs(d) > 0) raw.u.col(k) *= std::polar(1.0, -0.5 * std::arg(d));
    s(k) = std::abs(d);
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) { return s(i) > s(j); });
  TakagiFactorization out{CMatrix(n, n), Eigen::VectorXd(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.u.col(k) = raw.u.col(idx[static_cast<std::size_t>(k)]);
    out.sigma(k) = s(idx[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Decomposes a unitary as U = O1 diag(exp(i delta)) O2^T with real orthogonal
/// O1, O2. Singular values of Re(U) closer than `degenerate_tol` are grouped.
inline OrthoPhaseDecomp ortho_phase_decompose(const CMatrix& u, double unitary_tol = tol::kUnitary,
                                              double degenerate_tol = tol::kDegenerate) {
  require_square(u, "ortho_phase_decompose");
  require_finite(u, "ortho_phase_decompose");
  const double defect = unitarity_defect(u);
  if (defect > unitary_tol) {
    std::ostringstream os;
    os << "ortho_phase_decompose: matrix is not unitary (defect " << defect << ")";
    throw NumericError(os.str());
  }
  const Eigen::Index n = u.rows();
  Eigen::JacobiSVD<RMatrix> rsvd(RMatrix(u.real()), Eigen::ComputeFullU | Eigen::ComputeFullV);
  RMatrix o1 = rsvd.matrixU();
  RMatrix o2 = rsvd.matrixV();
  const Eigen::VectorXd s = rsvd.singularValues();
  const RMatrix a = o1.transpose() * u.imag() * o2;

  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    const bool nonzero = s(start) > degenerate_tol;
    while (end < n && s(end - 1) - s(end) <= degenerate_tol && (s(end) > degenerate_tol) == nonzero) ++end;
    const Eigen::Index g = end - start;
    const RMatrix ag = a.block(start, start, g, g);
    if (nonzero) {
      // Imaginary block is symmetric here; diagonalize it on both sides.
      Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (ag + ag.transpose()));
      const RMatrix r = es.eigenvectors();
      o1.middleCols(start, g) = RMatrix(o1.middleCols(start, g) * r);
      o2.middleCols(start, g) = RMatrix(o2.middleCols(start, g) * r);
    } else {
      // Real part vanishes: the imaginary block is orthogonal; absorb it into O1.
      Eigen::JacobiSVD<RMatrix> ps(ag, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const RMatrix polar = ps.matrixU() * ps.matrixV().transpose();
      o1.middleCols(start, g) = RMatrix(o1.middleCols(start, g) * polar);
    }
    start = end;
  }

  const CMatrix d = o1.transpose().cast<cplx>() * u * o2.cast<cplx>();
  Eigen::VectorXd deltas(n);
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    double delta = std::arg(d(k, k));
    if (delta > half_pi) {
      o1.col(k) *= -1.0;
      delta -= std::numbers::pi;
    } else if (delta <= -half_pi) {
      o1.col(k) *= -1.0;
      delta += std::numbers::pi;
    }
    if (delta < -half_pi + 1e-9) {
      o1.col(k) *= -1.0;
      delta += std::numbers::pi;
    }
    deltas(k) = std::min(delta, half_pi);
  }
  return {o1, o2, deltas};
}

/// Magic basis T: T (U1 x U2) T^dagger is real orthogonal for U1, U2 in SU(2).
inline const Mat4& magic_basis() {
  static const Mat4 t = [] {
    Mat4 m;
    const double h = std::numbers::sqrt2 / 2.0;
    m << h, 0, 0, h,
         0, kI * h, kI * h, 0,
         0, -h, h, 0,
         kI * h, 0, 0, -kI * h;
    return m;
  }();
  return t;
}

inline RMat4 local_to_magic(const Mat2& u1, const Mat2& u2, double tol_det = tol::kUnitary) {
  for (const Mat2* u : {&u1, &u2}) {
    require_finite(*u, "local_to_magic");
    if (unitarity_defect(*u) > tol_det) throw NumericError("local_to_magic: factor is not unitary");
    if (std::abs(u->determinant() - cplx(1.0)) > tol_det)
      throw NumericError("local_to_magic: factor determinant must be 1 (rephase into SU(2))");
  }
  const Mat4& t = magic_basis();
  const Mat4 o = t * kron(u1, u2) * t.adjoint();
  return o.real();
}

struct LocalPair {
  Mat2 u1;
  Mat2 u2;
};

/// Inverse of local_to_magic. The (u1, u2) sign ambiguity is fixed by making
/// the largest-modulus entry of u1 have positive real part.
inline LocalPair magic_to_local(const RMat4& o, double tol_orth = tol::kUnitary) {
  require_finite(o, "magic_to_local");
  const double orth = (o.transpose() * o - RMat4::Identity()).cwiseAbs().maxCoeff();
  if (orth > tol_orth) {
    std::ostringstream os;
    os << "magic_to_local: matrix is not orthogonal (defect " << orth << ")";
    throw NumericError(os.str());
  }
  if (o.determinant() < 0) throw NumericError("magic_to_local: determinant is -1");

  const Mat4& t = magic_basis();
  const Mat4 m = t.adjoint() * o.cast<cplx>() * t;
  Mat4 r;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) r(2 * a + c, 2 * b + d) = m(2 * a + b, 2 * c + d);
  Eigen::JacobiSVD<Mat4> rs(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s0 = std::sqrt(rs.singularValues()(0));
  Mat2 u1, u2;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) {
      u1(a, c) = s0 * rs.matrixU()(2 * a + c, 0);
      u2(a, c) = s0 * std::conj(rs.matrixV()(2 * a + c, 0));
    }
  const cplx root = std::sqrt(u1.determinant());
  u1 /= root;
  u2 *= root;

  Eigen::Index best = 0;
  double big = -1.0;
  for (Eigen::Index k = 0; k < 4; ++k)
    if (std::abs(u1(k)) > big + 1e-12) {
      big = std::abs(u1(k));
      best = k;
    }
  const cplx pivot = u1(best);
  const bool flip = std::abs(pivot.real()) > 1e-12 ? pivot.real() < 0 : pivot.imag() < 0;
  if (flip) {
    u1 = -u1;
    u2 = -u2;
  }
  const double resid = (kron(u1, u2) - m).cwiseAbs().maxCoeff();
  if (resid > 1e-8) {
    std::ostringstream os;
    os << "magic_to_local: Kronecker factorization residual " << resid;
    throw NumericError(os.str());
  }
  return {u1, u2};
}

}  // namespace coa
