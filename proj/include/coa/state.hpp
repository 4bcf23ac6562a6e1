#pragma once

// Four-qubit pure states |psi>_ABCD and the matrices derived from them.
// Amplitude index = 8 bA + 4 bB + 2 bC + bD.

#include "coa/linalg.hpp"
#include "coa/rng.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace coa {

using Amplitudes = Eigen::Matrix<cplx, 16, 1>;

class FourQubitPure {
 public:
  /// Validates finiteness and unit norm (within `norm_tol` on the norm) and
  /// removes any residual rounding from the normalization.
  explicit FourQubitPure(const Amplitudes& amps, double norm_tol = 1e-10) : amps_(amps) {
    require_finite(amps_, "FourQubitPure");
    const double n2 = amps_.squaredNorm();
    if (std::abs(std::sqrt(n2) - 1.0) > norm_tol) {
      std::ostringstream os;
      os << "FourQubitPure: norm " << std::sqrt(n2) << " differs from 1";
      throw NumericError(os.str());
    }
    if (std::abs(n2 - 1.0) > 1e-14) amps_ /= std::sqrt(n2);
  }

  /// Normalizes an arbitrary nonzero vector.
  static FourQubitPure normalized(const Amplitudes& raw) {
    require_finite(raw, "FourQubitPure::normalized");
    const double n = raw.norm();
    if (!(n > 0)) throw NumericError("FourQubitPure::normalized: zero vector");
    return FourQubitPure(raw / n, 1e-6);
  }

  const Amplitudes& amplitudes() const { return amps_; }
  cplx operator[](int i) const { return amps_(i); }

 private:
  Amplitudes amps_;
};

inline const Mat2& pauli_y() {
  static const Mat2 y = [] {
    Mat2 m;
    m << 0, -kI, kI, 0;
    return m;
  }();
  return y;
}

/// sigma_y x sigma_y = antidiag(-1, 1, 1, -1).
inline const Mat4& spin_flip_yy() {
  static const Mat4 yy = kron(pauli_y(), pauli_y());
  return yy;
}

/// Symmetric square root of sigma_y x sigma_y.
inline const Mat4& sqrt_yy() {
  static const Mat4 s = [] {
    const cplx p(0.5, 0.5), m(-0.5, 0.5), c(0.5, -0.5);
    Mat4 r;
    r << p, 0, 0, m,
         0, p, c, 0,
         0, c, p, 0,
         m, 0, 0, p;
    return r;
  }();
  return s;
}

/// Rows indexed by the AB bits, columns by the CD bits.
inline Mat4 coeff_matrix(const FourQubitPure& psi) {
  Mat4 x;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) x(r, c) = psi[4 * r + c];
  return x;
}

inline Mat4 rho_ab(const FourQubitPure& psi) {
  const Mat4 x = coeff_matrix(psi);
  return x * x.adjoint();
}

inline Mat4 rho_cd(const FourQubitPure& psi) {
  const Mat4 xt = coeff_matrix(psi).transpose();
  return xt * xt.adjoint();
}

/// Q = X^T (sigma_y x sigma_y) X, complex symmetric.
inline Mat4 q_matrix(const Mat4& x) {
  const Mat4 q = x.transpose() * spin_flip_yy() * x;
  return 0.5 * (q + q.transpose());
}

inline Mat4 q_matrix(const FourQubitPure& psi) { return q_matrix(coeff_matrix(psi)); }

inline Vec4 spin_flip_pure(const Vec4& phi) { return spin_flip_yy() * phi.conjugate(); }

inline Mat4 spin_flip_mixed(const Mat4& rho) { return spin_flip_yy() * rho.conjugate() * spin_flip_yy(); }

/// 2|ad - bc| for a normalized two-qubit vector (a, b, c, d).
inline double concurrence_pure(const Vec4& phi, double norm_tol = 1e-9) {
  require_finite(phi, "concurrence_pure");
  if (std::abs(phi.norm() - 1.0) > norm_tol) throw NumericError("concurrence_pure: vector is not normalized");
  return 2.0 * std::abs(phi(0) * phi(3) - phi(1) * phi(2));
}

using PartyPerm = std::array<int, 4>;

inline void validate_perm(const PartyPerm& perm) {
  std::array<bool, 4> seen{};
  for (int p : perm) {
    if (p < 0 || p > 3 || seen[static_cast<std::size_t>(p)])
      throw std::invalid_argument("permute_parties: not a permutation of {A,B,C,D}");
    seen[static_cast<std::size_t>(p)] = true;
  }
}

inline PartyPerm inverse_perm(const PartyPerm& perm) {
  validate_perm(perm);
  PartyPerm inv{};
  for (int k = 0; k < 4; ++k) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;
  return inv;
}

/// New party k carries the qubit of old party perm[k].
inline FourQubitPure permute_parties(const FourQubitPure& psi, const PartyPerm& perm) {
  validate_perm(perm);
  Amplitudes out;
  for (int idx = 0; idx < 16; ++idx) {
    int old_idx = 0;
    for (int k = 0; k < 4; ++k) {
      const int bit = (idx >> (3 - k)) & 1;
      old_idx |= bit << (3 - perm[static_cast<std::size_t>(k)]);
    }
    out(idx) = psi[old_idx];
  }
  return FourQubitPure(out);
}

/// Parties given by letter pair, e.g. "AC"; the returned permutation moves the
/// pair into the AB slots and keeps the other two in ascending order.
inline PartyPerm keeper_permutation(std::string_view pair) {
  if (pair.size() != 2) throw std::invalid_argument("pair must name two parties, e.g. AB");
  const int k1 = pair[0] - 'A', k2 = pair[1] - 'A';
  if (k1 < 0 || k1 > 3 || k2 < 0 || k2 > 3 || k1 == k2)
    throw std::invalid_argument("pair must name two distinct parties among A, B, C, D");
  PartyPerm p{k1, k2, 0, 0};
  int slot = 2;
  for (int k = 0; k < 4; ++k)
    if (k != k1 && k != k2) p[static_cast<std::size_t>(slot++)] = k;
  return p;
}

enum class Sampler {
  haar,   // complex gaussian amplitudes: uniform on the unit sphere
  gauss_phase,  // real gaussian magnitude times a uniform phase, then normalized
};

inline Sampler parse_sampler(std::string_view name) {
  if (name == "haar") return Sampler::haar;
  if (name == "gauss_phase") return Sampler::gauss_phase;
  throw std::invalid_argument("unknown sampler '" + std::string(name) + "' (expected haar or gauss_phase)");
}

inline FourQubitPure random_state(std::uint64_t seed, std::uint64_t stream = 0, Sampler sampler = Sampler::haar) {
  Stream rng(seed, stream);
  Amplitudes raw;
  for (int i = 0; i < 16; ++i) {
    if (sampler == Sampler::haar) {
      const double re = rng.normal();
      raw(i) = cplx(re, rng.normal());
    } else {
      const double g = rng.normal();
      raw(i) = std::polar(g, 2.0 * std::numbers::pi * rng.uniform());
    }
  }
  return FourQubitPure::normalized(raw);
}

struct Fixture {
  FourQubitPure state;
  std::optional<std::string> label;
};

namespace detail {

inline Amplitudes kron_ab_cd(const Vec4& ab, const Vec4& cd) {
  Amplitudes a;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a(4 * r + c) = ab(r) * cd(c);
  return a;
}

inline Vec4 two_qubit(cplx a, cplx b, cplx c, cplx d) { return Vec4(a, b, c, d); }

}  // namespace detail

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"ghz", "swap", "comm75", "povm31"};
  return names;
}

inline Fixture fixture(std::string_view name) {
  using detail::kron_ab_cd;
  using detail::two_qubit;
  const double h = 0.5 * std::numbers::sqrt2;
  const Vec4 phi_p = two_qubit(h, 0, 0, h), phi_m = two_qubit(h, 0, 0, -h);
  const Vec4 psi_p = two_qubit(0, h, h, 0), psi_m = two_qubit(0, h, -h, 0);
  if (name == "ghz") {
    Amplitudes a = Amplitudes::Zero();
    a(0) = h;
    a(15) = h;
    return {FourQubitPure(a), std::nullopt};
  }
  if (name == "swap") {
    Amplitudes a = Amplitudes::Zero();
    for (int idx : {0, 5, 10, 15}) a(idx) = 0.5;
    return {FourQubitPure(a), std::nullopt};
  }
  if (name == "comm75") {
    // |1+> and |1-> on CD, with |+-> = (|0> +- |1>)/sqrt2
    const Amplitudes a = kron_ab_cd(phi_p, two_qubit(1, 0, 0, 0)) + kron_ab_cd(phi_m, two_qubit(0, 1, 0, 0)) +
                         kron_ab_cd(psi_p, two_qubit(0, 0, h, h)) + kron_ab_cd(psi_m, two_qubit(0, 0, h, -h));
    return {FourQubitPure(0.5 * a), std::string("renormalized")};
  }
  if (name == "povm31") {
    const Amplitudes a = kron_ab_cd(phi_p, two_qubit(1, 1, 1, 1)) + kron_ab_cd(phi_m, two_qubit(1, 0, 0, 0)) +
                         kron_ab_cd(psi_m, two_qubit(0, 0, 0, 1));
    return {FourQubitPure::normalized(a), std::nullopt};
  }
  throw std::invalid_argument("unknown fixture '" + std::string(name) + "' (expected ghz, swap, comm75, povm31)");
}

}  // namespace coa
