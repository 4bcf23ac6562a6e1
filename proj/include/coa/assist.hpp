#pragma once

// Concurrence of assistance for the keeper pair AB of a four-qubit pure state,
// with C and D as the assisting parties.
//
// A measurement is described by a unitary V whose conjugated columns are the
// measurement vectors; outcome k leaves AB with concurrence-weighted
// probability |(V^T Q V)_kk|.

#include "coa/factor.hpp"
#include "coa/linalg.hpp"
#include "coa/simplex.hpp"
#include "coa/state.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace coa {

struct JointMeasurement {
  Mat4 v;
};

struct LocalBasis {
  Mat2 w_c = Mat2::Identity();
  Mat2 w_d = Mat2::Identity();
  std::optional<std::pair<Mat2, Mat2>> feed_forward;  // D's basis for C outcome 0 and 1

  Mat4 joint() const {
    if (!feed_forward) return kron(w_c, w_d);
    Mat4 block = Mat4::Zero();
    block.topLeftCorner<2, 2>() = feed_forward->first;
    block.bottomRightCorner<2, 2>() = feed_forward->second;
    return kron(w_c, Mat2(Mat2::Identity())) * block;
  }
};

/// Sum of singular values of Q.
inline double csharp(const Mat4& q) { return Eigen::JacobiSVD<Mat4>(q).singularValues().sum(); }
inline double csharp(const FourQubitPure& psi) { return csharp(q_matrix(psi)); }

/// F(rho, rho~) for a two-qubit density matrix.
inline double csharp_fidelity(const Mat4& rho) { return fidelity(CMatrix(rho), CMatrix(spin_flip_mixed(rho))); }

inline double avg_concurrence(const Mat4& q, const Mat4& v) {
  const Mat4 m = v.transpose() * q * v;
  return m.diagonal().cwiseAbs().sum();
}

inline double avg_concurrence(const FourQubitPure& psi, const JointMeasurement& meas) {
  if (unitarity_defect(meas.v) > tol::kUnitary) throw NumericError("avg_concurrence: measurement matrix is not unitary");
  return avg_concurrence(q_matrix(psi), meas.v);
}

/// Q with the roles of C and D exchanged.
inline Mat4 swap_cd(const Mat4& q) {
  static constexpr std::array<int, 4> p{0, 2, 1, 3};
  Mat4 out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out(i, j) = q(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  return out;
}

/// Orthonormal qubit basis with Bloch angles (theta, phi) for its first column.
inline Mat2 bloch_basis(double theta, double phi) {
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  Mat2 w;
  w << c, -std::polar(s, -phi), std::polar(s, phi), c;
  return w;
}

/// Precomputed blocks of Q for evaluating C's basis choices quickly.
class FirstAssistantBlocks {
 public:
  explicit FirstAssistantBlocks(const Mat4& q) {
    q00_ = q.topLeftCorner<2, 2>();
    q11_ = q.bottomRightCorner<2, 2>();
    const Mat2 q01 = q.topRightCorner<2, 2>();
    q01s_ = q01 + q01.transpose();
  }

  /// D's block when C's measurement vector is conj(a).
  Mat2 conditional(const Vec2& a) const { return a(0) * a(0) * q00_ + a(0) * a(1) * q01s_ + a(1) * a(1) * q11_; }

  double value(const Mat2& w) const {
    return nuclear_norm_2x2(conditional(w.col(0))) + nuclear_norm_2x2(conditional(w.col(1)));
  }

  double value(double theta, double phi) const { return value(bloch_basis(theta, phi)); }

 private:
  Mat2 q00_, q11_, q01s_;
};

/// Best average concurrence when C measures in w and D responds optimally to
/// each outcome.
inline double cflat_given_w(const Mat4& q, const Mat2& w) {
  if (unitarity_defect(w) > tol::kUnitary) throw NumericError("cflat_given_w: basis is not unitary");
  return FirstAssistantBlocks(q).value(w);
}

inline double cflat_given_w(const FourQubitPure& psi, const Mat2& w) { return cflat_given_w(q_matrix(psi), w); }

/// Single D basis that serves both of C's outcomes as well as the two
/// outcome-conditioned optimal bases would.
inline LocalBasis communication_free_basis(const Mat4& q, const Mat2& w) {
  if (unitarity_defect(w) > tol::kUnitary) throw NumericError("communication_free_basis: basis is not unitary");
  const FirstAssistantBlocks blocks(q);
  const CMatrix v1 = takagi(CMatrix(blocks.conditional(w.col(0)))).u;
  const CMatrix v2 = takagi(CMatrix(blocks.conditional(w.col(1)))).u;
  const OrthoPhaseDecomp op = ortho_phase_decompose(v1.adjoint() * v2);
  Eigen::Vector2cd ph;
  for (int k = 0; k < 2; ++k) ph(k) = std::polar(1.0, op.deltas(k));
  const Mat2 wd = v1 * op.o1.cast<cplx>() * ph.asDiagonal();
  return {w, wd, std::nullopt};
}

inline LocalBasis communication_free_basis(const FourQubitPure& psi, const Mat2& w) {
  return communication_free_basis(q_matrix(psi), w);
}

struct CflatOptions {
  int grid_theta = 32;
  int grid_phi = 64;
  int starts = 5;
  double step_tol = 1e-9;
  int max_evaluations = 2000;
};

struct CflatOrderingResult {
  double value = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

/// Maximizes the first-assistant objective over C's basis angles.
inline CflatOrderingResult optimize_first_assistant(const Mat4& q, const CflatOptions& opt = {}) {
  const FirstAssistantBlocks blocks(q);
  const double dtheta = std::numbers::pi / opt.grid_theta;
  const double dphi = 2.0 * std::numbers::pi / opt.grid_phi;
  struct Cell {
    double value;
    double theta;
    double phi;
  };
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(opt.grid_theta * opt.grid_phi));
  for (int i = 0; i < opt.grid_theta; ++i)
    for (int j = 0; j < opt.grid_phi; ++j) {
      const double th = (i + 0.5) * dtheta, ph = j * dphi;
      cells.push_back({blocks.value(th, ph), th, ph});
    }
  const auto n_starts = static_cast<std::size_t>(std::min<int>(opt.starts, static_cast<int>(cells.size())));
  std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n_starts), cells.end(),
                    [](const Cell& a, const Cell& b) {
                      if (a.value != b.value) return a.value > b.value;
                      return a.theta != b.theta ? a.theta < b.theta : a.phi < b.phi;
                    });
  CflatOrderingResult best{cells[0].value, cells[0].theta, cells[0].phi};
  SimplexOptions so;
  so.initial_step = 0.5 * dtheta;
  so.x_tol = opt.step_tol;
  so.max_evaluations = opt.max_evaluations;
  for (std::size_t s = 0; s < n_starts; ++s) {
    const auto r = maximize_simplex<2>([&](const std::array<double, 2>& x) { return blocks.value(x[0], x[1]); },
                                       {cells[s].theta, cells[s].phi}, so);
    if (r.value > best.value) best = {r.value, r.x[0], r.x[1]};
  }
  return best;
}

struct CflatResult {
  double value = 0.0;
  LocalBasis basis;  // communication-free, w_c x w_d
  bool c_first = true;
  double value_c_first = 0.0;
  double value_d_first = 0.0;
};

/// Best average concurrence reachable with local von Neumann measurements
/// by C and D, maximized over both measurement orders.
inline CflatResult cflat(const Mat4& q, const CflatOptions& opt = {}) {
  const CflatOrderingResult cf = optimize_first_assistant(q, opt);
  const Mat4 qs = swap_cd(q);
  const CflatOrderingResult df = optimize_first_assistant(qs, opt);
  CflatResult out;
  out.value_c_first = cf.value;
  out.value_d_first = df.value;
  if (cf.value >= df.value) {
    out.value = cf.value;
    out.c_first = true;
    out.basis = communication_free_basis(q, bloch_basis(cf.theta, cf.phi));
  } else {
    out.value = df.value;
    out.c_first = false;
    const LocalBasis swapped = communication_free_basis(qs, bloch_basis(df.theta, df.phi));
    out.basis = {swapped.w_d, swapped.w_c, std::nullopt};
  }
  return out;
}

inline CflatResult cflat(const FourQubitPure& psi, const CflatOptions& opt = {}) { return cflat(q_matrix(psi), opt); }

/// Local basis for states whose optimal joint measurement has two relevant
/// outcomes: C picks a basis in which the two target vectors leave D with
/// orthogonal conditional states, and D separates them.
inline LocalBasis rank2_local_basis_from_vectors(const Vec4& t1, const Vec4& t2) {
  Mat2 m1, m2;
  for (int c = 0; c < 2; ++c)
    for (int d = 0; d < 2; ++d) {
      m1(c, d) = t1(2 * c + d);
      m2(c, d) = t2(2 * c + d);
    }
  const Mat2 h = m1 * m2.adjoint();
  const Eigen::Vector3cd hv((h(0, 1) + h(1, 0)) * 0.5, kI * (h(0, 1) - h(1, 0)) * 0.5, (h(0, 0) - h(1, 1)) * 0.5);
  const Eigen::Vector3d re = hv.real(), im = hv.imag();
  Eigen::Vector3d n = re.cross(im);
  if (n.norm() < 1e-12) {
    const Eigen::Vector3d ref = re.norm() >= im.norm() ? re : im;
    if (ref.norm() < 1e-12) {
      n = Eigen::Vector3d::UnitZ();
    } else {
      // any direction orthogonal to ref
      Eigen::Vector3d trial = std::abs(ref.x()) < 0.9 * ref.norm() ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
      n = ref.cross(trial);
    }
  }
  n.normalize();
  const double theta = std::acos(std::clamp(n.z(), -1.0, 1.0));
  const double phi = std::atan2(n.y(), n.x());
  const Mat2 cvec = bloch_basis(theta, phi);  // columns: C's measurement vectors

  auto d_basis = [&](const Vec2& c) {
    Vec2 eta = m1.transpose() * c.conjugate();
    if (eta.norm() < 1e-12) {
      const Vec2 other = m2.transpose() * c.conjugate();
      if (other.norm() < 1e-12) return Mat2(Mat2::Identity());
      eta = Vec2(-std::conj(other(1)), std::conj(other(0)));
    }
    eta.normalize();
    Mat2 e;
    e.col(0) = eta;
    e.col(1) = Vec2(-std::conj(eta(1)), std::conj(eta(0)));
    return Mat2(e.conjugate());
  };
  LocalBasis out;
  out.w_c = cvec.conjugate();
  out.feed_forward = std::make_pair(d_basis(cvec.col(0)), d_basis(cvec.col(1)));
  out.w_d = out.feed_forward->first;
  return out;
}

inline int rank_of(const Eigen::VectorXd& sigma, double rank_tol = tol::kRank) {
  int r = 0;
  for (Eigen::Index k = 0; k < sigma.size(); ++k)
    if (sigma(k) > rank_tol) ++r;
  return r;
}

inline LocalBasis rank2_local_basis(const Mat4& q, double rank_tol = tol::kRank) {
  const TakagiFactorization tk = takagi(CMatrix(q));
  if (rank_of(tk.sigma, rank_tol) != 2) throw std::invalid_argument("rank2_local_basis: Q must have rank 2");
  const CMatrix target = tk.u.conjugate();
  return rank2_local_basis_from_vectors(target.col(0), target.col(1));
}

inline LocalBasis rank2_local_basis(const FourQubitPure& psi, double rank_tol = tol::kRank) {
  return rank2_local_basis(q_matrix(psi), rank_tol);
}

/// X = g sqrt(YY)^dag Omega sqrt(Sigma) P1 F P2^T T with a global phase g.
struct CanonicalDecomposition {
  Mat4 omega;              // complex orthogonal
  Eigen::Vector4d sigma;   // descending
  RMat4 p1;                // det +1
  RMat4 p2;                // det +1
  Eigen::Vector4cd f;      // diagonal unitary, det 1
  cplx global_phase{1.0, 0.0};

  Mat4 reconstruct() const {
    const Eigen::Vector4cd root = sigma.cwiseSqrt().cast<cplx>();
    return global_phase * sqrt_yy().adjoint() * omega * root.asDiagonal() * p1.cast<cplx>() * f.asDiagonal() *
           p2.transpose().cast<cplx>() * magic_basis();
  }
};

namespace detail {

inline std::vector<std::array<int, 4>> all_permutations4() {
  std::vector<std::array<int, 4>> out;
  std::array<int, 4> p{0, 1, 2, 3};
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline RMat4 permutation_matrix(const std::array<int, 4>& p) {
  RMat4 m = RMat4::Zero();
  for (int k = 0; k < 4; ++k) m(p[static_cast<std::size_t>(k)], k) = 1.0;
  return m;
}

// Sign matrix making det(o * s) = +1; flips column `which` when needed.
inline RMat4 fix_det(const RMat4& o, int which) {
  RMat4 s = RMat4::Identity();
  if (o.determinant() < 0) s(which, which) = -1.0;
  return s;
}

}  // namespace detail

/// Rank 3 and 4 only. Among the admissible orderings of the phase factor the
/// one whose P2 yields the best local measurement is returned.
namespace detail {

/// Takagi unitary with the null column (rank 3) rotated by e^{i alpha}; that
/// phase is not fixed by Q and leaves X unchanged.
inline Mat4 with_null_phase(const Mat4& u, int rank, double alpha) {
  Mat4 out = u;
  if (rank == 3) out.col(3) *= std::polar(1.0, alpha);
  return out;
}

inline OrthoPhaseDecomp unit_phase_split(const Mat4& u, double& theta) {
  theta = std::arg(u.determinant()) / 4.0;
  return ortho_phase_decompose(CMatrix(magic_basis() * (u * std::polar(1.0, -theta))));
}

inline CanonicalDecomposition decompose_with(const Mat4& x, const Mat4& q, const TakagiFactorization& tk, int rank,
                                             double null_phase) {
  const Mat4 u = with_null_phase(tk.u, rank, null_phase);
  const Mat4 a = sqrt_yy() * x * u;
  Mat4 omega;
  for (int k = 0; k < rank; ++k) omega.col(k) = a.col(k) / std::sqrt(tk.sigma(k));
  if (rank == 3) {
    // Complete with the vector bilinearly orthogonal to the first three columns.
    Eigen::FullPivLU<Eigen::Matrix<cplx, 3, 4>> lu(omega.leftCols<3>().transpose());
    Vec4 nvec = lu.kernel().col(0);
    const cplx nn = (nvec.transpose() * nvec)(0, 0);
    omega.col(3) = nvec / std::sqrt(nn);
  }

  double theta = 0.0;
  const OrthoPhaseDecomp op = unit_phase_split(u, theta);
  const RMat4 o3 = op.o1, o4 = op.o2;
  Eigen::Vector4cd e_conj;
  for (int k = 0; k < 4; ++k) e_conj(k) = std::polar(1.0, -op.deltas(k));

  CanonicalDecomposition best;
  double best_value = -1.0;
  for (const auto& perm : all_permutations4()) {
    const RMat4 o7 = permutation_matrix(perm);
    const RMat4 s1 = fix_det(o4 * o7, 0);
    const RMat4 base2 = o3 * o7;
    for (int flip = 0; flip < 4; ++flip) {
      const RMat4 s2 = fix_det(base2, flip);
      if (flip > 0 && s2.isIdentity()) break;
      const RMat4 p1 = o4 * o7 * s1, p2 = base2 * s2;
      const LocalPair lp = magic_to_local(p2);
      const double value = avg_concurrence(q, kron(lp.u1, lp.u2));
      if (value > best_value + 1e-14) {
        best_value = value;
        best.omega = omega;
        best.sigma = tk.sigma;
        best.p1 = p1;
        best.p2 = p2;
        const Eigen::Vector4cd permuted = o7.transpose().cast<cplx>() * e_conj;
        best.f = (s1 * s2).diagonal().cast<cplx>().cwiseProduct(permuted);
        best.global_phase = std::polar(1.0, -theta);
      }
    }
  }
  return best;
}

}  // namespace detail

/// For rank 3 the phase of the null Takagi vector is free; `null_phase` picks it.
inline CanonicalDecomposition canonical_decomposition(const FourQubitPure& psi, double rank_tol = tol::kRank,
                                                      double null_phase = 0.0) {
  const Mat4 x = coeff_matrix(psi);
  const Mat4 q = q_matrix(x);
  TakagiFactorization tk = takagi(CMatrix(q));
  const int rank = rank_of(tk.sigma, rank_tol);
  if (rank < 3) throw std::invalid_argument("canonical_decomposition: requires rank 3 or 4");
  for (int k = rank; k < 4; ++k) tk.sigma(k) = 0.0;
  return detail::decompose_with(x, q, tk, rank, null_phase);
}

struct PatternFit {
  double phi = 0.0;       // canonical representative in [pi/8, pi/4]
  double residual = 0.0;  // max angular deviation, radians
};

/// Fits the four phases (mod pi) to {Phi, -Phi, pi/2 - Phi, Phi - pi/2}.
inline PatternFit fit_phase_pattern(const Eigen::Vector4d& phases) {
  constexpr double pi = std::numbers::pi;
  auto wrap = [](double v) {
    double r = std::fmod(v, pi);
    if (r < 0) r += pi;
    return r;
  };
  PatternFit best{0.0, std::numeric_limits<double>::infinity()};
  for (const auto& perm : detail::all_permutations4()) {
    const std::array<double, 4> est{wrap(phases(perm[0])), wrap(-phases(perm[1])), wrap(pi / 2 - phases(perm[2])),
                                    wrap(phases(perm[3]) + pi / 2)};
    std::array<double, 4> sorted = est;
    std::sort(sorted.begin(), sorted.end());
    double gap = sorted[0] + pi - sorted[3];
    double arc_start = sorted[0];
    for (int k = 0; k < 3; ++k) {
      const double g = sorted[static_cast<std::size_t>(k + 1)] - sorted[static_cast<std::size_t>(k)];
      if (g > gap) {
        gap = g;
        arc_start = sorted[static_cast<std::size_t>(k + 1)];
      }
    }
    const double residual = 0.5 * (pi - gap);
    if (residual < best.residual) {
      // The pattern is unchanged by phi -> -phi and phi -> phi + pi/4 (the
      // latter is the residual global-phase freedom), so report the
      // representative in [pi/8, pi/4].
      double phi = std::fmod(arc_start + residual, pi / 4);
      if (phi < pi / 8) phi = pi / 4 - phi;
      best = {phi, residual};
    }
  }
  return best;
}

enum class Verdict { local_sufficient, local_insufficient, always_local };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::local_sufficient: return "local_sufficient";
    case Verdict::local_insufficient: return "local_insufficient";
    case Verdict::always_local: return "always_local";
  }
  return "unknown";
}

struct LocalityCertificate {
  int rank_class = 0;
  Eigen::Vector4d sigma = Eigen::Vector4d::Zero();
  std::optional<Eigen::Vector4d> f_phases;
  std::optional<double> phi;
  std::optional<double> pattern_residual;
  Verdict verdict = Verdict::always_local;
  std::optional<LocalBasis> local_basis;
  std::optional<double> basis_value;  // avg concurrence of local_basis
};

inline constexpr double kPatternThreshold = 1e-6;

namespace detail {

inline double pattern_residual_at(const Mat4& u, double alpha) {
  double theta = 0.0;
  const OrthoPhaseDecomp op = unit_phase_split(with_null_phase(u, 3, alpha), theta);
  return fit_phase_pattern(-op.deltas).residual;
}

/// Null-vector phase that brings the rank-3 phases closest to the pattern:
/// a coarse scan followed by golden-section refinement of the best cell.
inline double best_null_phase(const Mat4& u) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  constexpr int cells = 720;
  int best = 0;
  double best_r = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cells; ++k) {
    const double r = pattern_residual_at(u, two_pi * k / cells);
    if (r < best_r) {
      best_r = r;
      best = k;
    }
  }
  double lo = two_pi * (best - 1) / cells, hi = two_pi * (best + 1) / cells;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = pattern_residual_at(u, a), fb = pattern_residual_at(u, b);
  while (hi - lo > 1e-13) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = pattern_residual_at(u, a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = pattern_residual_at(u, b);
    }
  }
  const double mid = 0.5 * (lo + hi);
  return pattern_residual_at(u, mid) <= best_r ? mid : two_pi * best / cells;
}

}  // namespace detail

/// Local basis carried by the P2 factor of the decomposition.
inline LocalBasis extract_local_basis(const CanonicalDecomposition& dec) {
  const LocalPair lp = magic_to_local(dec.p2);
  return {lp.u1, lp.u2, std::nullopt};
}

inline LocalityCertificate locality_certificate(const FourQubitPure& psi, double threshold = kPatternThreshold,
                                                double rank_tol = tol::kRank) {
  const Mat4 q = q_matrix(psi);
  const TakagiFactorization tk = takagi(CMatrix(q));
  LocalityCertificate cert;
  cert.sigma = tk.sigma;
  cert.rank_class = rank_of(tk.sigma, rank_tol);
  if (cert.rank_class <= 2) {
    cert.verdict = Verdict::always_local;
    if (cert.rank_class == 2) {
      cert.local_basis = communication_free_basis(q, rank2_local_basis(q, rank_tol).w_c);
    } else {
      cert.local_basis = LocalBasis{};
    }
    cert.basis_value = avg_concurrence(q, cert.local_basis->joint());
    return cert;
  }
  double null_phase = 0.0;
  if (cert.rank_class == 3) null_phase = detail::best_null_phase(tk.u);
  const CanonicalDecomposition dec = canonical_decomposition(psi, rank_tol, null_phase);
  Eigen::Vector4d ph;
  for (int k = 0; k < 4; ++k) ph(k) = std::arg(dec.f(k));
  cert.f_phases = ph;
  const PatternFit fit = fit_phase_pattern(ph);
  cert.phi = fit.phi;
  cert.pattern_residual = fit.residual;
  if (fit.residual <= threshold) {
    cert.verdict = Verdict::local_sufficient;
    cert.local_basis = extract_local_basis(dec);
    cert.basis_value = avg_concurrence(q, cert.local_basis->joint());
  } else {
    cert.verdict = Verdict::local_insufficient;
  }
  return cert;
}

/// (csharp - cflat) / cflat; infinite when only cflat vanishes, 0 when both do.
inline double relative_gain(double csharp_value, double cflat_value) {
  if (cflat_value > 0) return (csharp_value - cflat_value) / cflat_value;
  return csharp_value > 0 ? std::numeric_limits<double>::infinity() : 0.0;
}

struct Report {
  double csharp = 0.0;
  double cflat = 0.0;
  double relative_gain = 0.0;
  int rank_class = 0;
  Verdict verdict = Verdict::always_local;
  std::optional<double> phi;
  std::optional<double> pattern_residual;
  LocalBasis basis;  // product basis reaching cflat
};

inline Report make_report(const FourQubitPure& psi) {
  const Mat4 q = q_matrix(psi);
  const CflatResult cf = cflat(q);
  const LocalityCertificate cert = locality_certificate(psi);
  Report r;
  r.csharp = csharp(q);
  r.cflat = cf.value;
  r.relative_gain = relative_gain(r.csharp, r.cflat);
  r.rank_class = cert.rank_class;
  r.verdict = cert.verdict;
  r.phi = cert.phi;
  r.pattern_residual = cert.pattern_residual;
  r.basis = cf.basis;
  return r;
}

}  // namespace coa
