#pragma once

// Four-outcome POVMs on one assistant, followed by a von Neumann measurement
// on the other.

#include "coa/assist.hpp"
#include "coa/linalg.hpp"
#include "coa/rng.hpp"
#include "coa/simplex.hpp"
#include "coa/state.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coa {

enum class Party { C, D };

inline Party parse_party(std::string_view s) {
  if (s == "C" || s == "c") return Party::C;
  if (s == "D" || s == "d") return Party::D;
  throw std::invalid_argument("unknown party '" + std::string(s) + "' (expected C or D)");
}

inline std::string to_string(Party p) { return p == Party::C ? "C" : "D"; }

class Povm4 {
 public:
  static constexpr double kTol = 1e-9;

  explicit Povm4(const std::array<Mat2, 4>& elements) : e_(elements) {
    Mat2 total = Mat2::Zero();
    for (std::size_t k = 0; k < 4; ++k) {
      require_finite(e_[k], "Povm4");
      const double asym = hermitian_defect(e_[k]);
      if (asym > kTol) {
        std::ostringstream os;
        os << "Povm4: element " << k << " is not Hermitian (defect " << asym << ")";
        throw NumericError(os.str());
      }
      Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (e_[k] + e_[k].adjoint()));
      if (es.eigenvalues().minCoeff() < -kTol) {
        std::ostringstream os;
        os << "Povm4: element " << k << " has eigenvalue " << es.eigenvalues().minCoeff();
        throw NumericError(os.str());
      }
      total += e_[k];
    }
    const double dev = (total - Mat2::Identity()).cwiseAbs().maxCoeff();
    if (dev > kTol) {
      std::ostringstream os;
      os << "Povm4: elements sum to identity only within " << dev;
      throw NumericError(os.str());
    }
  }

  /// Rank-1 POVM E_k = a_k^dag a_k from the rows of a 4x2 isometry.
  static Povm4 from_rows(const Eigen::Matrix<cplx, 4, 2>& a) {
    std::array<Mat2, 4> e;
    for (int k = 0; k < 4; ++k) {
      const Eigen::Matrix<cplx, 1, 2> row = a.row(k);
      e[static_cast<std::size_t>(k)] = row.adjoint() * row;
    }
    return Povm4(e);
  }

  /// Two-outcome projective measurement on the conjugated columns of w
  /// (the convention of cflat_given_w), padded with zero elements.
  static Povm4 projective(const Mat2& w) {
    Eigen::Matrix<cplx, 4, 2> a = Eigen::Matrix<cplx, 4, 2>::Zero();
    a.row(0) = w.col(0).transpose();
    a.row(1) = w.col(1).transpose();
    return from_rows(a);
  }

  const std::array<Mat2, 4>& elements() const { return e_; }
  const Mat2& operator[](std::size_t k) const { return e_[k]; }

 private:
  std::array<Mat2, 4> e_;
};

struct ConditionalOutcome {
  double prob = 0.0;
  Mat4 rho_ab = Mat4::Zero();          // zero when prob vanishes
  Amplitudes post = Amplitudes::Zero();  // normalized post-measurement state
};

namespace detail {

inline int party_bit(Party p) { return p == Party::C ? 1 : 0; }

inline Amplitudes apply_on_party(const Amplitudes& psi, const Mat2& m, Party party) {
  const int shift = party_bit(party);
  Amplitudes out = Amplitudes::Zero();
  for (int i = 0; i < 16; ++i) {
    const int bit = (i >> shift) & 1;
    for (int b = 0; b < 2; ++b) out(i) += m(bit, b) * psi((i & ~(1 << shift)) | (b << shift));
  }
  return out;
}

}  // namespace detail

/// Outcome probabilities and conditional keeper states after `party` applies
/// the POVM with Kraus operators sqrt(E_k).
inline std::vector<ConditionalOutcome> conditional_states(const FourQubitPure& psi, const Povm4& povm, Party party) {
  std::vector<ConditionalOutcome> out;
  out.reserve(4);
  for (const Mat2& e : povm.elements()) {
    const Mat2 kraus = matrix_sqrt_psd(CMatrix(0.5 * (e + e.adjoint())));
    const Amplitudes post = detail::apply_on_party(psi.amplitudes(), kraus, party);
    ConditionalOutcome oc;
    oc.prob = post.squaredNorm();
    if (oc.prob > 0) {
      oc.post = post / std::sqrt(oc.prob);
      Mat4 x;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) x(r, c) = oc.post(4 * r + c);
      oc.rho_ab = x * x.adjoint();
    }
    out.push_back(oc);
  }
  return out;
}

/// Sum over outcomes of p_k F(rho_k, rho~_k): the average concurrence left
/// with AB when the other assistant then measures optimally. F is evaluated
/// as the singular-value sum of the post-measurement state's Q, which is
/// equal and avoids the square roots of nearly singular matrices.
inline double povm_value(const FourQubitPure& psi, const Povm4& povm, Party party) {
  double total = 0.0;
  for (const ConditionalOutcome& oc : conditional_states(psi, povm, party)) {
    if (oc.prob <= 0) continue;
    Mat4 x;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) x(r, c) = oc.post(4 * r + c);
    total += oc.prob * csharp(q_matrix(x));
  }
  return total;
}

/// Eight angles for a rank-1 four-outcome POVM. The first column of the
/// isometry is real and nonnegative (row phases do not change the POVM); the
/// second is a unit vector in its orthogonal complement.
using PovmAngles = std::array<double, 8>;

namespace detail {

inline Eigen::Matrix4d complement_frame(const Eigen::Vector4d& x) {
  Eigen::Vector4d v = x;
  v(0) -= 1.0;
  const double vv = v.squaredNorm();
  if (vv < 1e-30) return Eigen::Matrix4d::Identity();
  return Eigen::Matrix4d::Identity() - (2.0 / vv) * v * v.transpose();
}

}  // namespace detail

inline Eigen::Matrix<cplx, 4, 2> povm_isometry(const PovmAngles& t) {
  Eigen::Vector4d x;
  x << std::cos(t[0]), std::sin(t[0]) * std::cos(t[1]), std::sin(t[0]) * std::sin(t[1]) * std::cos(t[2]),
      std::sin(t[0]) * std::sin(t[1]) * std::sin(t[2]);
  const Eigen::Vector3cd y(std::polar(std::cos(t[3]), t[5]), std::polar(std::sin(t[3]) * std::cos(t[4]), t[6]),
                           std::polar(std::sin(t[3]) * std::sin(t[4]), t[7]));
  const Eigen::Matrix4d h = detail::complement_frame(x);
  Eigen::Matrix<cplx, 4, 2> a;
  a.col(0) = x.cast<cplx>();
  a.col(1) = h.rightCols<3>().cast<cplx>() * y;
  return a;
}

/// Angles reproducing the POVM of an arbitrary 4x2 isometry.
inline PovmAngles povm_angles(const Eigen::Matrix<cplx, 4, 2>& iso) {
  Eigen::Matrix<cplx, 4, 2> a = iso;
  for (int k = 0; k < 4; ++k)
    if (std::abs(a(k, 0)) > 0) a.row(k) *= std::polar(1.0, -std::arg(a(k, 0)));
  Eigen::Vector4d x = a.col(0).real();
  x /= x.norm();
  PovmAngles t{};
  t[0] = std::acos(std::clamp(x(0), -1.0, 1.0));
  t[1] = std::atan2(std::hypot(x(2), x(3)), x(1));
  t[2] = std::atan2(x(3), x(2));
  const Eigen::Matrix4d h = detail::complement_frame(x);
  Eigen::Vector3cd y = h.rightCols<3>().transpose().cast<cplx>() * a.col(1);
  y /= y.norm();
  t[3] = std::atan2(std::hypot(std::abs(y(1)), std::abs(y(2))), std::abs(y(0)));
  t[4] = std::atan2(std::abs(y(2)), std::abs(y(1)));
  t[5] = std::arg(y(0));
  t[6] = std::arg(y(1));
  t[7] = std::arg(y(2));
  return t;
}

/// Fast rank-1 objective on precomputed blocks of Q (party first = C).
inline double povm_rank1_value(const FirstAssistantBlocks& blocks, const Eigen::Matrix<cplx, 4, 2>& a) {
  double total = 0.0;
  for (int k = 0; k < 4; ++k) total += nuclear_norm_2x2(blocks.conditional(a.row(k).transpose()));
  return total;
}

struct PovmOptions {
  int restarts = 64;
  std::uint64_t seed = 0;
  int polish_rounds = 2;
  SimplexOptions simplex{0.4, 1e-10, 1e-15, 4000};
};

struct PovmResult {
  double value = 0.0;  // lower bound on the POVM-assisted average concurrence
  Povm4 povm = Povm4::projective(Mat2::Identity());
  Party party = Party::C;
  double cflat = 0.0;
  double csharp = 0.0;
  int best_restart = -1;  // -1: projective baseline
};

/// Multi-start simplex search over rank-1 four-outcome POVMs on `party`;
/// the best projective basis is always part of the pool.
inline PovmResult povm_optimize(const FourQubitPure& psi, Party party, const PovmOptions& opt = {}) {
  if (opt.restarts < 1) throw std::invalid_argument("povm_optimize: restarts must be >= 1");
  const Mat4 q0 = q_matrix(psi);
  const Mat4 q = party == Party::C ? q0 : swap_cd(q0);
  const FirstAssistantBlocks blocks(q);
  auto objective = [&](const PovmAngles& t) { return povm_rank1_value(blocks, povm_isometry(t)); };
  auto polish = [&](PovmAngles start) {
    SimplexResult<8> r = maximize_simplex<8>(objective, start, opt.simplex);
    SimplexOptions again = opt.simplex;
    for (int round = 0; round < opt.polish_rounds; ++round) {
      again.initial_step *= 0.25;
      const SimplexResult<8> next = maximize_simplex<8>(objective, r.x, again);
      if (next.value <= r.value) break;
      r = next;
    }
    return r;
  };

  PovmResult out;
  out.party = party;
  out.csharp = csharp(q);
  const CflatResult cf = cflat(q);
  out.cflat = cf.value;

  // Projective baseline: the first assistant's basis from the product optimum.
  Eigen::Matrix<cplx, 4, 2> base = Eigen::Matrix<cplx, 4, 2>::Zero();
  base.row(0) = cf.basis.w_c.col(0).transpose();
  base.row(1) = cf.basis.w_c.col(1).transpose();
  double best_value = povm_rank1_value(blocks, base);
  Eigen::Matrix<cplx, 4, 2> best_iso = base;
  const SimplexResult<8> from_base = polish(povm_angles(base));
  if (from_base.value > best_value) {
    best_value = from_base.value;
    best_iso = povm_isometry(from_base.x);
  }

  for (int r = 0; r < opt.restarts; ++r) {
    Stream rng(opt.seed, static_cast<std::uint64_t>(r));
    PovmAngles start;
    for (double& a : start) a = 2.0 * std::numbers::pi * rng.uniform();
    const SimplexResult<8> res = polish(start);
    if (res.value > best_value) {
      best_value = res.value;
      best_iso = povm_isometry(res.x);
      out.best_restart = r;
    }
  }
  out.value = best_value;
  out.povm = Povm4::from_rows(best_iso);
  return out;
}

}  // namespace coa
