#include "coa/assist.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace coa;
using namespace testutil;

namespace {

constexpr double kPi = std::numbers::pi;
const double h = 1.0 / std::sqrt(2.0);

Mat2 hadamard() {
  Mat2 m;
  m << h, h, h, -h;
  return m;
}

// Brute-force first-assistant value: for each of C's outcomes, D's best
// response is found by a grid over D's basis; no closed forms involved.
double first_assistant_brute(const Mat4& q, const Mat2& w, int grid) {
  double total = 0.0;
  for (int col = 0; col < 2; ++col) {
    double best = 0.0;
    for (int i = 0; i <= grid; ++i)
      for (int j = 0; j < 2 * grid; ++j) {
        Mat4 v = Mat4::Zero();
        const Mat2 wd = bloch_basis(kPi * i / grid, kPi * j / grid);
        v.topLeftCorner<2, 2>() = wd;
        v.bottomRightCorner<2, 2>() = wd;
        const Mat4 joint = kron(w, Mat2(Mat2::Identity())) * v;
        const Mat4 m = joint.transpose() * q * joint;
        best = std::max(best, std::abs(m(2 * col, 2 * col)) + std::abs(m(2 * col + 1, 2 * col + 1)));
      }
    total += best;
  }
  return total;
}

Vec4 bell_phi_plus() { return Vec4(h, 0, 0, h); }

// Pattern angles related by phi -> -phi or phi -> phi + pi/4 describe the same
// phase set; this picks the member in [pi/8, pi/4].
double canonical_phi(double phi) {
  double c = std::fmod(phi, kPi / 4);
  if (c < 0) c += kPi / 4;
  return c < kPi / 8 ? kPi / 4 - c : c;
}

}  // namespace

TEST(Csharp, Fixtures) {
  EXPECT_NEAR(csharp(fixture("ghz").state), 1.0, 1e-12);
  EXPECT_NEAR(csharp(fixture("swap").state), 1.0, 1e-12);
  EXPECT_NEAR(csharp(fixture("povm31").state), 0.9205, 5e-4);
}

TEST(CsharpFidelity, Examples) {
  Mat4 d = Mat4::Zero();
  d(0, 0) = 0.5;
  d(3, 3) = 0.5;
  EXPECT_NEAR(csharp_fidelity(d), 1.0, 1e-12);
  EXPECT_NEAR(csharp_fidelity(Mat4(0.25 * Mat4::Identity())), 1.0, 1e-12);
  Mat4 p = Mat4::Zero();
  p(0, 0) = 1.0;
  EXPECT_NEAR(csharp_fidelity(p), 0.0, 1e-12);
}

TEST(CsharpFidelity, AgreesWithSingularSum) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const FourQubitPure psi = random_state(50, s);
    EXPECT_NEAR(csharp(psi), csharp_fidelity(rho_ab(psi)), 1e-8);
  }
}

TEST(AvgConcurrence, Examples) {
  const FourQubitPure ghz = fixture("ghz").state;
  EXPECT_NEAR(avg_concurrence(ghz, {kron(hadamard(), hadamard())}), 1.0, 1e-12);
  const FourQubitPure sw = fixture("swap").state;
  EXPECT_NEAR(avg_concurrence(sw, {Mat4::Identity()}), 0.0, 1e-15);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FourQubitPure psi = random_state(51, s);
    const Mat4 u = takagi(CMatrix(q_matrix(psi))).u;
    EXPECT_NEAR(avg_concurrence(psi, {u}), csharp(psi), 1e-10);
  }
}

TEST(AvgConcurrence, MatchesOutcomeByOutcomeConcurrence) {
  // Sum over outcomes of p_k C(phi_k) with phi_k the normalized AB state.
  Stream rng(52, 0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FourQubitPure psi = random_state(52, s);
    const Mat4 v = testutil::random_unitary(rng, 4);
    const Mat4 xv = coeff_matrix(psi) * v;
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      const Vec4 col = xv.col(k);
      const double p = col.squaredNorm();
      if (p > 1e-300) total += p * concurrence_pure(col / std::sqrt(p));
    }
    EXPECT_NEAR(avg_concurrence(psi, {v}), total, 1e-12);
  }
}

TEST(AvgConcurrence, AppendixBound) {
  Stream rng(53, 0);
  for (int t = 0; t < 2000; ++t) {
    const FourQubitPure psi = random_state(53, static_cast<std::uint64_t>(t));
    const Mat4 v = testutil::random_unitary(rng, 4);
    EXPECT_LE(avg_concurrence(psi, {v}), csharp(psi) + 1e-9);
  }
}

TEST(CflatGivenW, Examples) {
  EXPECT_NEAR(cflat_given_w(fixture("ghz").state, hadamard()), 1.0, 1e-12);
  Stream rng(54, 0);
  const FourQubitPure sw = fixture("swap").state;
  for (int t = 0; t < 20; ++t) EXPECT_NEAR(cflat_given_w(sw, Mat2(testutil::random_unitary(rng, 2))), 0.0, 1e-12);
}

TEST(CflatGivenW, MatchesBruteForceResponse) {
  Stream rng(55, 0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Mat4 q = q_matrix(random_state(55, s));
    const Mat2 w = testutil::random_unitary(rng, 2);
    const double exact = cflat_given_w(q, w);
    const double brute = first_assistant_brute(q, w, 60);
    EXPECT_LE(brute, exact + 1e-12);
    EXPECT_NEAR(brute, exact, 2e-3);
  }
}

TEST(CflatGivenW, SwapStateBruteForceIsZero) {
  const Mat4 q = q_matrix(fixture("swap").state);
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(first_assistant_brute(q, bloch_basis(kPi * i / 8, kPi * j / 4), 12), 0.0, 1e-12);
}

TEST(Cflat, Fixtures) {
  const CflatResult g = cflat(fixture("ghz").state);
  EXPECT_NEAR(g.value, 1.0, 1e-9);
  EXPECT_NEAR(avg_concurrence(fixture("ghz").state, {g.basis.joint()}), 1.0, 1e-9);
  EXPECT_NEAR(cflat(fixture("swap").state).value, 0.0, 1e-12);
  const CflatResult p = cflat(fixture("povm31").state);
  EXPECT_NEAR(p.value, 0.8801, 1e-3);
  EXPECT_NEAR(p.value_c_first, p.value_d_first, 1e-7);
}

TEST(Cflat, BoundsBasisAndOrderings) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const FourQubitPure psi = random_state(56, s);
    const CflatResult r = cflat(psi);
    const double cs = csharp(psi);
    EXPECT_GE(r.value, 0.0);
    EXPECT_LE(r.value, cs + 1e-9);
    EXPECT_LT(unitarity_defect(r.basis.w_c), 1e-9);
    EXPECT_LT(unitarity_defect(r.basis.w_d), 1e-9);
    EXPECT_FALSE(r.basis.feed_forward.has_value());
    EXPECT_NEAR(avg_concurrence(psi, {r.basis.joint()}), r.value, 1e-9);
    EXPECT_NEAR(r.value_c_first, r.value_d_first, 1e-7);
  }
}

TEST(Cflat, InvariantUnderLocalUnitariesOnAssistants) {
  Stream rng(57, 0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const FourQubitPure psi = random_state(57, s);
    const Mat4 local = kron(Mat2(testutil::random_unitary(rng, 2)), Mat2(testutil::random_unitary(rng, 2)));
    const Mat4 x2 = coeff_matrix(psi) * local.transpose();
    EXPECT_NEAR(cflat(q_matrix(x2)).value, cflat(psi).value, 1e-6);
  }
}

TEST(Cflat, CsharpInvariantUnderSinglePartyUnitaries) {
  Stream rng(58, 0);
  const FourQubitPure psi = random_state(58, 0);
  for (int party = 0; party < 4; ++party) {
    const Mat2 u = testutil::random_unitary(rng, 2);
    Amplitudes out = Amplitudes::Zero();
    for (int i = 0; i < 16; ++i)
      for (int b = 0; b < 2; ++b) {
        const int bit = (i >> (3 - party)) & 1;
        const int j = (i & ~(1 << (3 - party))) | (b << (3 - party));
        out(i) += u(bit, b) * psi[j];
      }
    EXPECT_NEAR(csharp(FourQubitPure(out)), csharp(psi), 1e-9);
  }
}

TEST(CommunicationFree, Comm75DBasis) {
  const FourQubitPure psi = fixture("comm75").state;
  const Mat2 w = Mat2::Identity();
  const LocalBasis lb = communication_free_basis(psi, w);
  EXPECT_NEAR(avg_concurrence(psi, {lb.joint()}), cflat_given_w(psi, w), 1e-8);
  EXPECT_NEAR(cflat_given_w(psi, w), 1.0, 1e-12);
  // Measurement vectors are the conjugated columns; expect (|0> +- i|1>)/sqrt2 up to phase and order.
  const Mat2 vecs = lb.w_d.conjugate();
  const Vec2 plus_i(h, cplx(0, h)), minus_i(h, cplx(0, -h));
  for (int k = 0; k < 2; ++k) {
    const double op = std::abs(plus_i.dot(vecs.col(k))), om = std::abs(minus_i.dot(vecs.col(k)));
    EXPECT_NEAR(std::max(op, om), 1.0, 1e-9);
  }
}

TEST(CommunicationFree, GhzHadamard) {
  const FourQubitPure psi = fixture("ghz").state;
  const LocalBasis lb = communication_free_basis(psi, hadamard());
  EXPECT_NEAR(avg_concurrence(psi, {lb.joint()}), 1.0, 1e-9);
}

TEST(CommunicationFree, ProductEqualsFeedForwardForAnyW) {
  Stream rng(59, 0);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const FourQubitPure psi = random_state(59, s);
    const Mat2 w = testutil::random_unitary(rng, 2);
    const LocalBasis lb = communication_free_basis(psi, w);
    EXPECT_NEAR(avg_concurrence(psi, {lb.joint()}), cflat_given_w(psi, w), 1e-8);
  }
}

TEST(Rank2, GhzAttainsOne) {
  const LocalBasis lb = rank2_local_basis(fixture("ghz").state);
  ASSERT_TRUE(lb.feed_forward.has_value());
  EXPECT_NEAR(avg_concurrence(fixture("ghz").state, {lb.joint()}), 1.0, 1e-8);
}

TEST(Rank2, ConstructedStatesAttainCsharp) {
  Stream rng(60, 0);
  for (int t = 0; t < 100; ++t) {
    const FourQubitPure psi = random_rank2_state(rng);
    const TakagiFactorization tk = takagi(CMatrix(q_matrix(psi)));
    ASSERT_EQ(rank_of(tk.sigma), 2);
    const LocalBasis lb = rank2_local_basis(psi);
    EXPECT_LT(unitarity_defect(lb.joint()), 1e-10);
    EXPECT_NEAR(avg_concurrence(psi, {lb.joint()}), tk.sigma.sum(), 1e-8);
    const LocalBasis cf = communication_free_basis(psi, lb.w_c);
    EXPECT_NEAR(avg_concurrence(psi, {cf.joint()}), tk.sigma.sum(), 1e-8);
  }
}

TEST(Rank2, TruncatedTakagiChannels) {
  // Zero two Takagi channels of a random state and renormalize.
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FourQubitPure psi = random_state(61, s);
    const Mat4 x = coeff_matrix(psi);
    const TakagiFactorization tk = takagi(CMatrix(q_matrix(x)));
    Mat4 xu = x * tk.u;
    xu.col(2).setZero();
    xu.col(3).setZero();
    const FourQubitPure r2 = state_from_x(xu * tk.u.adjoint());
    const Mat4 q = q_matrix(r2);
    ASSERT_EQ(rank_of(takagi(CMatrix(q)).sigma), 2);
    EXPECT_NEAR(avg_concurrence(q, rank2_local_basis(r2).joint()), csharp(q), 1e-8);
  }
}

TEST(Rank2, RejectsOtherRanks) {
  EXPECT_THROW(rank2_local_basis(fixture("swap").state), std::invalid_argument);
  Amplitudes a = Amplitudes::Zero();
  a(0) = h;
  a(12) = h;  // |Phi+>_AB |00>_CD
  EXPECT_THROW(rank2_local_basis(FourQubitPure(a)), std::invalid_argument);
}

TEST(Rank1, EveryMeasurementIsOptimal) {
  Stream rng(62, 0);
  for (int t = 0; t < 50; ++t) {
    const FourQubitPure psi = random_rank1_state(rng);
    const double cs = csharp(psi);
    ASSERT_EQ(rank_of(takagi(CMatrix(q_matrix(psi))).sigma), 1);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(avg_concurrence(psi, {testutil::random_unitary(rng, 4)}), cs, 1e-9);
  }
}

TEST(Rank1, BellPairOnKeepers) {
  Amplitudes a = Amplitudes::Zero();
  a(0) = h;
  a(12) = h;
  const FourQubitPure psi(a);
  const LocalityCertificate c = locality_certificate(psi);
  EXPECT_EQ(c.rank_class, 1);
  EXPECT_EQ(c.verdict, Verdict::always_local);
  ASSERT_TRUE(c.basis_value.has_value());
  EXPECT_NEAR(*c.basis_value, 1.0, 1e-12);
  EXPECT_NEAR(bell_phi_plus().norm(), 1.0, 1e-15);
}

TEST(CanonicalDecomposition, SwapAndRandomReconstruct) {
  std::vector<FourQubitPure> states{fixture("swap").state};
  for (std::uint64_t s = 0; s < 30; ++s) states.push_back(random_state(63, s));
  for (const auto& psi : states) {
    const CanonicalDecomposition d = canonical_decomposition(psi);
    const Mat4 x = coeff_matrix(psi);
    EXPECT_LT((d.reconstruct() - x).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((d.omega.transpose() * d.omega - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(d.p1.determinant(), 1.0, 1e-9);
    EXPECT_NEAR(d.p2.determinant(), 1.0, 1e-9);
    EXPECT_NEAR(std::abs(d.f.prod() - cplx(1.0)), 0.0, 1e-9);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(d.f(k)), 1.0, 1e-12);
    const Eigen::Vector4d sv = Eigen::JacobiSVD<Mat4>(q_matrix(psi)).singularValues();
    EXPECT_LT((sv - d.sigma).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(CanonicalDecomposition, RankThree) {
  Stream rng(64, 0);
  for (int t = 0; t < 20; ++t) {
    const FourQubitPure psi = random_rank3_state(rng);
    const CanonicalDecomposition d = canonical_decomposition(psi);
    EXPECT_LT((d.reconstruct() - coeff_matrix(psi)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((d.omega.transpose() * d.omega - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(CanonicalDecomposition, RejectsLowRank) {
  EXPECT_THROW(canonical_decomposition(fixture("ghz").state), std::invalid_argument);
}

TEST(PatternFit, ExactPatternAnyOrder) {
  for (double phi : {0.3, kPi / 3, kPi / 2, 1e-3}) {
    const Eigen::Vector4cd f = pattern_phases(phi);
    Eigen::Vector4d ph;
    for (int k = 0; k < 4; ++k) ph(k) = std::arg(f(k));
    std::swap(ph(0), ph(3));
    ph(1) += kPi;  // sign flips are invisible to the test
    const PatternFit fit = fit_phase_pattern(ph);
    EXPECT_LT(fit.residual, 1e-12);
    EXPECT_NEAR(fit.phi, canonical_phi(phi), 1e-12);
  }
}

TEST(PatternFit, GenericPhasesMiss) {
  const PatternFit fit = fit_phase_pattern(Eigen::Vector4d(0.1, 0.2, 0.3, -0.6));
  EXPECT_GT(fit.residual, 1e-3);
  EXPECT_GE(fit.phi, kPi / 8);
  EXPECT_LE(fit.phi, kPi / 4);
}

TEST(Certificate, Fixtures) {
  const LocalityCertificate g = locality_certificate(fixture("ghz").state);
  EXPECT_EQ(g.rank_class, 2);
  EXPECT_EQ(g.verdict, Verdict::always_local);
  ASSERT_TRUE(g.basis_value.has_value());
  EXPECT_NEAR(*g.basis_value, 1.0, 1e-8);

  const LocalityCertificate s = locality_certificate(fixture("swap").state);
  EXPECT_EQ(s.rank_class, 4);
  EXPECT_EQ(s.verdict, Verdict::local_insufficient);
  ASSERT_TRUE(s.pattern_residual.has_value());
  EXPECT_GT(*s.pattern_residual, 1e-6);
}

TEST(Certificate, RandomStatesAreInsufficient) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const LocalityCertificate c = locality_certificate(random_state(65, s));
    EXPECT_EQ(c.rank_class, 4);
    EXPECT_EQ(c.verdict, Verdict::local_insufficient);
  }
}

TEST(Certificate, ForwardConstructedStatesAreSufficient) {
  Stream rng(66, 0);
  for (double phi : {kPi / 3, kPi / 2, 0.4, 1.2}) {
    for (int t = 0; t < 10; ++t) {
      const FourQubitPure psi = forward_constructed_state(rng, phi);
      const LocalityCertificate c = locality_certificate(psi);
      ASSERT_EQ(c.verdict, Verdict::local_sufficient) << "phi=" << phi << " residual=" << c.pattern_residual.value_or(-1);
      EXPECT_NEAR(*c.phi, canonical_phi(phi), 1e-6);
      ASSERT_TRUE(c.local_basis.has_value());
      EXPECT_NEAR(avg_concurrence(psi, {c.local_basis->joint()}), csharp(psi), 1e-8);
    }
  }
}

TEST(Certificate, ForwardConstructedRankThree) {
  Stream rng(67, 0);
  for (int t = 0; t < 10; ++t) {
    const FourQubitPure psi = forward_constructed_state(rng, 0.7, true);
    const LocalityCertificate c = locality_certificate(psi);
    EXPECT_EQ(c.rank_class, 3);
    ASSERT_EQ(c.verdict, Verdict::local_sufficient);
    EXPECT_NEAR(avg_concurrence(psi, {c.local_basis->joint()}), csharp(psi), 1e-8);
  }
}

TEST(Certificate, ExtractedBasisIsProduct) {
  Stream rng(68, 0);
  const FourQubitPure psi = forward_constructed_state(rng, kPi / 3);
  const LocalBasis lb = extract_local_basis(canonical_decomposition(psi));
  EXPECT_NEAR(std::abs(lb.w_c.determinant() - cplx(1.0)), 0.0, 1e-9);
  EXPECT_NEAR(std::abs(lb.w_d.determinant() - cplx(1.0)), 0.0, 1e-9);
  EXPECT_NEAR(avg_concurrence(psi, {lb.joint()}), csharp(psi), 1e-8);
}
