#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nahmlab/field.hpp"

using namespace nahmlab;

namespace {

Mat random_hermitian_traceless(int N, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> nd;
  Mat a(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  return scale * herm_traceless(a);
}

Mat random_matrix(int N, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  Mat a(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  return a;
}

double slope(const std::vector<double>& h, const std::vector<double>& e) {
  // Least-squares slope of log e against log h.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double x = std::log(h[k]), y = std::log(e[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(Grid, GeometricMeshProperties) {
  const Grid3 g = Grid3::geometric(6, 5, 0.01, 8.0, 40);
  EXPECT_EQ(g.ny(), 40);
  EXPECT_DOUBLE_EQ(g.y_min(), 0.01);
  EXPECT_NEAR(g.y_max(), 8.0, 1e-12);
  EXPECT_GE(g.nodes_per_decade(), 8.0);
  EXPECT_EQ(g.nodes(), 6u * 5u * 40u);
  for (std::size_t i = 0; i < g.nodes(); i += 37) {
    EXPECT_EQ(g.index(g.ix_of(i), g.iz_of(i), g.iy_of(i)), i);
  }
}

TEST(Grid, PerDecadeRoundsUp) {
  const Grid3 g = Grid3::per_decade(5, 5, 0.01, 10.0, 12);
  EXPECT_GE(g.nodes_per_decade(), 12.0 - 1e-9);
  EXPECT_EQ(g.ny(), 37);
}

TEST(Grid, RejectsCoarseOrInvalidMesh) {
  EXPECT_THROW(Grid3::geometric(5, 5, 0.01, 10.0, 10), DomainError);  // 3 per decade
  EXPECT_THROW(Grid3(5, 5, {0.0, 0.1, 0.2}), DomainError);
  EXPECT_THROW(Grid3(5, 5, {0.1, 0.1}), DomainError);
}

TEST(Grid, StretchedMeshIsMonotoneAndNotGeometric) {
  const Grid3 g = Grid3::stretched(5, 5, 0.01, 8.0, 64);
  double rmin = 1e9, rmax = 0;
  for (int k = 1; k < g.ny(); ++k) {
    const double r = std::log(g.y()[k] / g.y()[k - 1]);
    EXPECT_GT(r, 0.0);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  EXPECT_GT(rmax / rmin, 1.5);  // log steps vary like 1 +- amplitude
  EXPECT_DOUBLE_EQ(g.y_max(), 8.0);
}

TEST(Grid, QuadratureIntegratesLogMeasure) {
  // sum of y-weights approximates int y dlog y = Y - y_min
  const Grid3 g = Grid3::geometric(5, 5, 0.01, 8.0, 120);
  double s = 0;
  for (int k = 0; k < g.ny(); ++k) s += g.y_weight(k);
  EXPECT_NEAR(s, 8.0 - 0.01, 5e-3);
}

TEST(Stencils, AnnihilateConstants) {
  const Grid3 g = Grid3::geometric(6, 7, 0.05, 4.0, 30);
  std::mt19937 rng(1);
  const MatField f = MatField::constant(random_matrix(3, rng), g.nodes());
  EXPECT_LT(sup_norm(d2_apply(f, g)), 1e-13);
  EXPECT_LT(sup_norm(d3_apply(f, g)), 1e-13);
  EXPECT_LT(sup_norm(del_apply(f, g)), 1e-13);
  EXPECT_LT(sup_norm(dbar_apply(f, g)), 1e-13);
  EXPECT_LT(sup_norm(dy_apply(f, g)), 1e-13 / (g.y()[1] - g.y()[0]));
}

TEST(Stencils, Linear) {
  const Grid3 g = Grid3::geometric(6, 5, 0.05, 4.0, 24);
  std::mt19937 rng(2);
  MatField a(2, g.nodes()), b(2, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    a.set(i, random_matrix(2, rng));
    b.set(i, random_matrix(2, rng));
  }
  const MatField combo = a + 2.5 * b;
  for (auto op : {&d2_apply, &d3_apply, &dy_apply, &del_apply, &dbar_apply}) {
    const MatField lhs = op(combo, g), rhs = op(a, g) + 2.5 * op(b, g);
    EXPECT_LT(sup_norm(lhs - rhs), 1e-12 * (1 + sup_norm(lhs)));
  }
}

TEST(Stencils, TooFewPeriodicNodesIsDomainError) {
  const Grid3 g = Grid3::geometric(4, 6, 0.1, 1.0, 12);
  const MatField f(2, g.nodes());
  EXPECT_THROW(d2_apply(f, g), DomainError);
  const Grid3 h = Grid3::geometric(6, 4, 0.1, 1.0, 12);
  EXPECT_THROW(d3_apply(MatField(2, h.nodes()), h), DomainError);
}

TEST(Stencils, FourierModeConvergesAtOrderFour) {
  std::vector<double> hs, es;
  for (int nx : {8, 16, 32, 64}) {
    const Grid3 g = Grid3::slice2d(nx, 5);
    std::vector<cplx> f(g.nodes());
    for (std::size_t i = 0; i < g.nodes(); ++i) f[i] = std::exp(cplx(0, 2 * kPi * g.x2(i)));
    const auto d = d2_scalar(f, g);
    double err = 0;
    for (std::size_t i = 0; i < g.nodes(); ++i) err = std::max(err, std::abs(d[i] - cplx(0, 2 * kPi) * f[i]));
    hs.push_back(g.hx());
    es.push_back(err);
  }
  EXPECT_NEAR(slope(hs, es), 4.0, 0.3);
}

TEST(Stencils, HolomorphicPartsOfAFourierMode) {
  // e^{2 pi i x3}: del gives pi f, dbar gives -pi f.
  const Grid3 g = Grid3::slice2d(64, 64);
  MatField f(1, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) f[i](0, 0) = std::exp(cplx(0, 2 * kPi * g.x3(i)));
  const MatField dz = del_apply(f, g), dzb = dbar_apply(f, g);
  for (std::size_t i = 0; i < g.nodes(); i += 101) {
    EXPECT_LT(std::abs(dz[i](0, 0) - kPi * f[i](0, 0)), 1e-4);
    EXPECT_LT(std::abs(dzb[i](0, 0) + kPi * f[i](0, 0)), 1e-4);
  }
}

TEST(Stencils, YDerivativeSecondOrderOnGradedMesh) {
  std::vector<double> hs, es;
  // Quadratics are differentiated exactly, so use a cubic.
  for (int ny : {24, 48, 96, 192}) {
    const Grid3 g = Grid3::geometric(5, 5, 0.01, 4.0, ny);
    std::vector<cplx> f(g.nodes());
    for (std::size_t i = 0; i < g.nodes(); ++i) f[i] = std::pow(g.y_at(i), 3);
    const auto d = dy_scalar(f, g);
    double err = 0;
    for (std::size_t i = g.plane(); i + g.plane() < g.nodes(); ++i)
      err = std::max(err, std::abs(d[i] - 3.0 * g.y_at(i) * g.y_at(i)) / (g.y_at(i) * g.y_at(i)));
    hs.push_back(std::log(g.max_ratio()));
    es.push_back(err);
  }
  EXPECT_NEAR(slope(hs, es), 2.0, 0.3);
}

TEST(HermFunctions, ExpInverse) {
  std::mt19937 rng(3);
  for (int N = 2; N <= 9; ++N) {
    const Mat s = random_hermitian_traceless(N, rng);
    EXPECT_LT((herm_exp(s) * herm_exp(-s) - Mat::Identity(N, N)).norm(), 1e-13 * herm_exp(s).norm() * herm_exp(-s).norm());
    EXPECT_NEAR(std::abs(herm_exp(s).determinant()), 1.0, 1e-10);
    EXPECT_LT((herm_log(herm_exp(s)) - s).norm(), 1e-11);
    const Mat h = herm_exp(s);
    EXPECT_LT((herm_pow(h, 0.5) * herm_pow(h, 0.5) - h).norm(), 1e-11 * h.norm());
  }
}

TEST(HermFunctions, NonHermitianIsDomainError) {
  Mat a = Mat::Zero(2, 2);
  a(0, 1) = 1.0;
  EXPECT_THROW(herm_exp(a), DomainError);
}

TEST(GammaFunction, SeriesBranchIsContinuous) {
  EXPECT_DOUBLE_EQ(gamma_fn(0.0), 1.0);
  for (double x : {1e-7, 9e-6, 1.1e-5, 1e-3, -1e-6}) EXPECT_NEAR(gamma_fn(x), std::expm1(x) / x, 1e-15);
}

TEST(GammaFunction, IdentitiesOfTheOperator) {
  std::mt19937 rng(4);
  for (int N = 2; N <= 5; ++N) {
    const Mat s = random_hermitian_traceless(N, rng);
    const Mat a = random_matrix(N, rng);
    EXPECT_LT((gamma_apply(Mat::Zero(N, N), a, 1) - a).norm(), 1e-14);
    EXPECT_LT((gamma_apply(s, s, 1) - s).norm(), 1e-12);
    EXPECT_LT((gamma_apply(s, s, -1) - s).norm(), 1e-12);
    const Mat r = sqrt_gamma_apply(s, sqrt_gamma_apply(s, a, -1), -1);
    EXPECT_LT((r - gamma_apply(s, a, -1)).norm(), 1e-11 * a.norm());
  }
}

TEST(GammaFunction, PositiveOnRealSpectrum) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int N = 2 + trial % 4;
    const Mat s = random_hermitian_traceless(N, rng, 3.0);
    const Mat a = random_matrix(N, rng);
    EXPECT_GE((gamma_apply(s, a, -1) * a.adjoint()).trace().real(), 0.0);
  }
}

TEST(GammaFunction, ExponentialDerivativeMatchesFiniteDifference) {
  std::mt19937 rng(6);
  for (int N = 2; N <= 4; ++N) {
    const Mat s = random_hermitian_traceless(N, rng), ds = random_hermitian_traceless(N, rng);
    const double u = 1e-6;
    const Mat fd = (herm_exp(s + u * ds) - herm_exp(s - u * ds)) / (2 * u);
    const Mat formula = herm_exp(s) * gamma_apply(s, ds, -1);
    EXPECT_LT((fd - formula).norm(), 1e-6 * formula.norm());
    EXPECT_LT((dexp(s, ds) - formula).norm(), 1e-10 * formula.norm());
  }
}

TEST(WeightedNorms, PowerLawExponents) {
  const Grid3 g = Grid3::geometric(5, 5, 1e-3, 4.0, 60);
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  for (double p : {1.0, 1.5}) {
    MatField s(2, g.nodes());
    for (std::size_t i = 0; i < g.nodes(); ++i) s.set(i, std::pow(g.y_at(i), p) * m);
    const DecayFit f = weighted_norms(s, g, 0.5, 1.0);
    ASSERT_TRUE(f.alpha.has_value());
    EXPECT_NEAR(*f.alpha, p, 0.05);
    EXPECT_NEAR(f.sup_weighted, std::sqrt(2.0) * std::pow(4.0, p - 0.5), 1e-9);
  }
}

TEST(WeightedNorms, ZeroFieldHasNoExponent) {
  const Grid3 g = Grid3::geometric(5, 5, 1e-3, 4.0, 60);
  const DecayFit f = weighted_norms(MatField(2, g.nodes()), g, 0.5, 1.0);
  EXPECT_EQ(f.sup_weighted, 0.0);
  EXPECT_FALSE(f.alpha.has_value());
}

TEST(FieldAlgebra, InnerProductAndNorms) {
  const Grid3 g = Grid3::geometric(5, 5, 0.1, 1.0, 12);
  const MatField one = MatField::constant(Mat::Identity(2, 2), g.nodes());
  double total = 0;
  for (std::size_t i = 0; i < g.nodes(); ++i) total += g.weight(i);
  EXPECT_NEAR(inner(one, one, g), 2.0 * total, 1e-14);
  EXPECT_NEAR(flat_dot(one, one), 2.0 * g.nodes(), 1e-12);
  EXPECT_NEAR(sup_norm(one), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(sup_norm_weighted(one, g, 2.0), std::sqrt(2.0), 1e-14);
  EXPECT_THROW(one + MatField(3, g.nodes()), DomainError);
}
