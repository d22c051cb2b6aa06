#include <gtest/gtest.h>

#include <map>
#include <random>

#include "nahmlab/liealg.hpp"

using namespace nahmlab;

namespace {

Mat random_traceless(int N, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  Mat a(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  a.diagonal().array() -= a.trace() / double(N);
  return a;
}

}  // namespace

TEST(LieContext, CartanMatrixRankTwo) {
  const auto ctx = build_lie_context(2);
  Eigen::MatrixXi expected(2, 2);
  expected << 2, -1, -1, 2;
  EXPECT_EQ(ctx.cartan, expected);
}

TEST(LieContext, CartanInverseMatchesClosedForm) {
  for (int n = 1; n <= 8; ++n) {
    const auto ctx = build_lie_context(n);
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j)
        EXPECT_EQ(ctx.cartan_inv[i - 1][j - 1], Rational(std::min(i, j)) - Rational(i * j, n + 1)) << n << i << j;
  }
  EXPECT_EQ(build_lie_context(3).cartan_inv[0][1], Rational(1, 2));
}

TEST(LieContext, WeightsRankThree) {
  EXPECT_EQ(build_lie_context(3).weights, (std::vector<int>{3, 4, 3}));
}

TEST(LieContext, StandardSl2AtRankOne) {
  const auto ctx = build_lie_context(1);
  Mat e0(2, 2), ep(2, 2);
  e0 << 1, 0, 0, -1;
  ep << 0, 1, 0, 0;
  EXPECT_LT((ctx.sl2_zero - e0).norm(), 1e-15);
  EXPECT_LT((ctx.sl2_plus - ep).norm(), 1e-15);
}

TEST(LieContext, RankOutOfRangeIsDomainError) {
  EXPECT_THROW(build_lie_context(0), DomainError);
  EXPECT_THROW(build_lie_context(9), DomainError);
}

TEST(LieContext, AllIdentitiesHoldUpToRankEight) {
  for (int n = 1; n <= 8; ++n) {
    const LieCheck c = verify_lie_context(build_lie_context(n));
    EXPECT_TRUE(c.cartan_inverse_exact) << n;
    EXPECT_TRUE(c.weights_match) << n;
    EXPECT_TRUE(c.chevalley_exact) << n;
    EXPECT_LE(c.sl2_error, 1e-12) << n;
    EXPECT_LE(c.casimir_error, 1e-8) << n;
    EXPECT_TRUE(c.casimir_multiplicities) << n;
    EXPECT_TRUE(c.indicial_roots_match) << n;
  }
}

TEST(Casimir, CartanElementAtRankOneHasEigenvalueTwo) {
  const auto ctx = build_lie_context(1);
  const Mat h = ctx.sl2_zero;
  EXPECT_LT((casimir_apply(ctx, h) - 2.0 * h).norm(), 1e-14);
}

TEST(Casimir, ZeroMapsToZero) {
  const auto ctx = build_lie_context(3);
  EXPECT_EQ(casimir_apply(ctx, Mat::Zero(4, 4)).norm(), 0.0);
}

TEST(Casimir, RankTwoSpectrum) {
  // Oracle: adjoint of sl3 under the principal sl2 splits as V_1 + V_2.
  const auto spec = casimir_spectrum(build_lie_context(2));
  ASSERT_EQ(spec.size(), 8u);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(spec[k], 2.0, 1e-10);
  for (int k = 3; k < 8; ++k) EXPECT_NEAR(spec[k], 6.0, 1e-10);
}

TEST(Casimir, SpectrumIsJJPlusOneWithMultiplicities) {
  for (int n = 1; n <= 8; ++n) {
    const auto spec = casimir_spectrum(build_lie_context(n));
    std::map<int, int> mult;
    for (double v : spec) {
      const int j = int(std::lround((-1.0 + std::sqrt(1.0 + 4.0 * v)) / 2.0));
      EXPECT_NEAR(v, j * (j + 1.0), 1e-8);
      ++mult[j];
    }
    for (int j = 1; j <= n; ++j) EXPECT_EQ(mult[j], 2 * j + 1) << "n=" << n << " j=" << j;
  }
}

TEST(Casimir, SelfAdjointUnderTracePairing) {
  std::mt19937 rng(11);
  for (int n = 1; n <= 8; ++n) {
    const auto ctx = build_lie_context(n);
    for (int trial = 0; trial < 5; ++trial) {
      const Mat a = random_traceless(n + 1, rng), b = random_traceless(n + 1, rng);
      const cplx lhs = (casimir_apply(ctx, a) * b.adjoint()).trace();
      const cplx rhs = (a * casimir_apply(ctx, b).adjoint()).trace();
      EXPECT_LE(std::abs(lhs - rhs), 1e-10);
      EXPECT_LE(std::abs(casimir_apply(ctx, a).trace()), 1e-12);
    }
  }
}

TEST(IndicialRoots, SmallRanks) {
  EXPECT_EQ(indicial_roots(build_lie_context(1)), (std::vector<int>{-1, 2}));
  EXPECT_EQ(indicial_roots(build_lie_context(2)), (std::vector<int>{-2, -1, 2, 3}));
  EXPECT_EQ(indicial_roots(build_lie_context(3)), (std::vector<int>{-3, -2, -1, 2, 3, 4}));
}

TEST(IndicialRoots, ClosedFormUpToRankEight) {
  for (int n = 1; n <= 8; ++n) {
    std::vector<int> expected;
    for (int k = -n; k <= -1; ++k) expected.push_back(k);
    for (int k = 2; k <= n + 1; ++k) expected.push_back(k);
    EXPECT_EQ(indicial_roots(build_lie_context(n)), expected);
  }
}

TEST(HermitianBasis, OrthonormalAndRoundTrips) {
  std::mt19937 rng(3);
  for (int N = 2; N <= 5; ++N) {
    const auto& basis = hermitian_basis(N);
    ASSERT_EQ(int(basis.size()), N * N - 1);
    for (std::size_t a = 0; a < basis.size(); ++a)
      for (std::size_t b = 0; b < basis.size(); ++b)
        EXPECT_NEAR((basis[a] * basis[b]).trace().real(), a == b ? 1.0 : 0.0, 1e-14);
    Mat m = random_traceless(N, rng);
    m = (0.5 * (m + m.adjoint())).eval();
    const Eigen::VectorXd c = herm_coeffs(m);
    EXPECT_LT((herm_from_coeffs(N, c.data()) - m).norm(), 1e-13);
  }
}
