#include <gtest/gtest.h>

#include <cmath>

#include "nahmlab/solver.hpp"

using namespace nahmlab;

namespace {

// Bisection on a^2 - |c|^2 / a^2 for the diagonal metric diag(a, 1/a) balancing [[0,1],[c,0]].
double balance_oracle(double abs_c) {
  double lo = 1e-6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (mid * mid - abs_c * abs_c / (mid * mid) > 0 ? hi : lo) = mid;
  }
  return std::sqrt(lo * hi);
}

Mat rotation() {
  Mat u(2, 2);
  const double c = std::cos(0.4), s = std::sin(0.4);
  u << c, cplx(0, s) * std::exp(cplx(0, 0.3)), cplx(0, s) * std::exp(cplx(0, -0.3)), c;
  return u;
}

MatField conjugate(const MatField& f, const Mat& u) {
  MatField out(f.dim(), f.nodes());
  for (std::size_t i = 0; i < f.nodes(); ++i) out[i] = u * f[i] * u.adjoint();
  return out;
}

struct SmallProblem {
  LieContext ctx = build_lie_context(1);
  Grid3 grid = Grid3::per_decade(8, 8, 0.05, 4.0, 12);
  HiggsData higgs = constant_hitchin_higgs(ctx, {0.3});
  MatField phi = phi_field(higgs, grid);
  BackgroundMetric background() const {
    const auto far = hitchin2d_solve(ctx, higgs, Grid3::slice2d(grid.nx(), grid.nz()));
    return build_background(ctx, higgs, &far.H, grid);
  }
};

SolverOptions small_options() {
  SolverOptions o;
  o.tol = 1e-8;
  return o;
}

}  // namespace

TEST(Hitchin2D, FlatSolutionForZeroField) {
  const Grid3 g = Grid3::slice2d(16, 16);
  const auto r = hitchin2d_solve(MatField(2, g.nodes()), g);
  for (std::size_t i = 0; i < g.nodes(); ++i) EXPECT_LT((r.H.at(i) - Mat::Identity(2, 2)).norm(), 1e-14);
}

TEST(Hitchin2D, ConstantDataMatchesBisectionOracle) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::slice2d(64, 64);
  for (cplx c : {cplx(0.5, 0), cplx(0, 0.8), cplx(1.0, 0), cplx(0.1, -0.05)}) {
    const auto r = hitchin2d_solve(ctx, constant_hitchin_higgs(ctx, {c}), g);
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_LE(r.det_defect, 1e-12);
    const double a = balance_oracle(std::abs(c));
    for (std::size_t i = 0; i < g.nodes(); i += 97) {
      EXPECT_NEAR(r.H.at(i)(0, 0).real(), a, 1e-8);
      EXPECT_NEAR(r.H.at(i)(1, 1).real(), 1.0 / a, 1e-8);
      EXPECT_LT(std::abs(r.H.at(i)(0, 1)), 1e-8);
    }
  }
  EXPECT_NEAR(balance_oracle(0.5), 0.70710678118654752, 1e-12);
}

TEST(Hitchin2D, UnitaryEquivariance) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::slice2d(64, 64);
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {cplx(0.6, 0.2)}), g);
  const Mat u = rotation();
  const auto a = hitchin2d_solve(phi, g), b = hitchin2d_solve(conjugate(phi, u), g);
  for (std::size_t i = 0; i < g.nodes(); i += 31) EXPECT_LT((b.H.at(i) - u * a.H.at(i) * u.adjoint()).norm(), 1e-8);
}

TEST(Hitchin2D, RequiresSlice) {
  const Grid3 g = Grid3::geometric(8, 8, 0.1, 1.0, 12);
  EXPECT_THROW(hitchin2d_solve(MatField(2, g.nodes()), g), DomainError);
}

TEST(Background, NahmModelBelowCutoff) {
  const auto ctx = build_lie_context(2);
  const Grid3 g = Grid3::per_decade(6, 6, 0.01, 4.0, 12);
  const HiggsData hd = constant_hitchin_higgs(ctx, {0.0, 0.0});
  const MatField one = MatField::constant(Mat::Identity(3, 3), g.plane());
  const BackgroundMetric b = build_background(ctx, hd, &one, g, {1.0, 0});
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const double y = g.y_at(i);
    if (y <= 1.0) EXPECT_LT((b.H.at(i) - nahm_model_metric(ctx, y)).norm(), 1e-12 * nahm_model_metric(ctx, y).norm());
    if (y >= 2.0) EXPECT_LT((b.H.at(i) - Mat::Identity(3, 3)).norm(), 1e-14);
    EXPECT_LT((b.frame.at(i).adjoint() * b.frame.at(i) - b.H.at(i)).norm(), 1e-12 * b.H.at(i).norm());
  }
}

TEST(Background, FarFieldRegionCarriesTheHitchinResidual) {
  SmallProblem p;
  const BackgroundMetric b = p.background();
  const auto r = omega_residual(b.H, p.phi, p.grid);
  // The y stencil reaches one node down, so start one node above 2 y_c.
  for (std::size_t i = 0; i < p.grid.nodes(); ++i) {
    const int k = p.grid.iy_of(i);
    if (k > 0 && p.grid.y()[k - 1] >= 2.0) EXPECT_LE(r.omega.at(i).norm(), 1e-8);
  }
}

TEST(Background, OrderOneCorrectionReducesTheNearResidual) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::per_decade(8, 8, 0.01, 4.0, 16);
  const HiggsData hd = constant_hitchin_higgs(ctx, {0.5});
  const auto far = hitchin2d_solve(ctx, hd, Grid3::slice2d(8, 8));
  const MatField phi = phi_field(hd, g);
  auto near_residual = [&](int order) {
    const BackgroundMetric b = build_background(ctx, hd, &far.H, g, {1.0, order});
    const auto r = omega_residual(b.H, phi, g);
    double worst = 0;
    for (std::size_t i = 0; i < g.nodes(); ++i)
      if (g.y_at(i) <= 1.0) worst = std::max(worst, g.y_at(i) * g.y_at(i) * r.omega.at(i).norm());
    return worst;
  };
  EXPECT_LE(2.0 * near_residual(1), near_residual(0));
}

TEST(Background, RejectsInvalidSpec) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::per_decade(6, 6, 0.1, 2.0, 12);
  const HiggsData hd = constant_hitchin_higgs(ctx, {0.0});
  EXPECT_THROW(build_background(ctx, hd, nullptr, g, {1.0, 2}), DomainError);
  EXPECT_THROW(build_background(ctx, hd, nullptr, Grid3::slice2d(6, 6)), DomainError);
}

TEST(SmoothCutoff, Profile) {
  EXPECT_EQ(smooth_cutoff(0.5, 1.0), 1.0);
  EXPECT_EQ(smooth_cutoff(1.0, 1.0), 1.0);
  EXPECT_EQ(smooth_cutoff(2.0, 1.0), 0.0);
  double prev = 1.0;
  for (double y = 1.0; y <= 2.0; y += 0.01) {
    EXPECT_LE(smooth_cutoff(y, 1.0), prev + 1e-15);
    prev = smooth_cutoff(y, 1.0);
  }
  EXPECT_NEAR(smooth_cutoff(1.5, 1.0), 0.5, 1e-15);
}

TEST(Coefficients, RoundTrip) {
  const Grid3 g = Grid3::geometric(5, 5, 0.1, 1.0, 12);
  MatField s(3, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    Mat m(3, 3);
    m << 1.0 + 0.01 * i, cplx(0.2, 0.1), 0.3, cplx(0.2, -0.1), -0.5, cplx(0, 1), 0.3, cplx(0, -1), -0.5 - 0.01 * i;
    s.set(i, m);
  }
  EXPECT_LT(sup_norm(from_coeffs(to_coeffs(s), 3, g.nodes()) - s), 1e-14);
}

TEST(ComparisonProblem, PositiveSourceGivesNonnegativeSolution) {
  const Grid3 g = Grid3::per_decade(8, 8, 0.05, 4.0, 12);
  std::vector<double> f(g.nodes(), 0.0);
  for (std::size_t i = 0; i < g.nodes(); ++i)
    if (!g.on_y_boundary(i)) f[i] = 1.0 + 0.5 * std::cos(2 * kPi * g.x2(i));
  const auto w = comparison_solve(f, g);
  double mx = 0;
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    EXPECT_GE(w[i], -1e-12);
    if (g.on_y_boundary(i)) EXPECT_LT(std::abs(w[i]), 1e-12);
    mx = std::max(mx, w[i]);
  }
  EXPECT_GT(mx, 0.0);
}

TEST(ContinuitySolve, FlatProblemStaysAtZero) {
  const Grid3 g = Grid3::per_decade(6, 6, 0.1, 2.0, 12);
  BackgroundMetric b;
  b.H = MatField::constant(Mat::Identity(2, 2), g.nodes());
  b.frame = b.H;
  const SolverState st = continuity_solve(MatField(2, g.nodes()), b, g, small_options());
  EXPECT_EQ(sup_norm(st.s), 0.0);
  EXPECT_EQ(st.residual_norm, 0.0);
  EXPECT_EQ(st.t, 0.0);
}

TEST(ContinuitySolve, SmallHitchinSectionProblem) {
  SmallProblem p;
  const BackgroundMetric b = p.background();
  const SolverOptions opt = small_options();
  const SolverState st = continuity_solve(p.phi, b, p.grid, opt);

  EXPECT_EQ(st.t, 0.0);
  EXPECT_EQ(st.t_schedule.back(), 0.0);
  // The first interior plane sits in the under-resolved model layer; its start shift is clamped, so t = 1
  // is solved by Newton.
  EXPECT_GT(st.clamped_nodes, 0u);
  EXPECT_EQ(st.history.front().t, 1.0);
  EXPECT_TRUE(st.history.front().converged);
  EXPECT_LE(st.residual_norm, opt.tol);
  EXPECT_NEAR(continuity_residual(p.phi, st.frame, st.s, 0.0, p.grid), st.residual_norm, 1e-12);
  EXPECT_LE(omega_residual(st.H, p.phi, p.grid).sup_y2, 10 * opt.tol);

  for (std::size_t i = 0; i < p.grid.nodes(); ++i) {
    EXPECT_NEAR(std::abs(st.H.at(i).determinant()), 1.0, 1e-9);
    EXPECT_LT(std::abs(st.s.at(i).trace()), 1e-12);
    const Mat k = st.frame.at(i);
    const Mat sh = k * st.s.at(i) * k.inverse();
    EXPECT_LT((sh - sh.adjoint()).norm(), 1e-9 * (1 + sh.norm()));
  }
  EXPECT_TRUE(st.max_principle.ok);
  for (double v : st.max_principle.iterate_sup) EXPECT_LE(v, st.max_principle.bound * (1 + 1e-9) + 1e-12);
  ASSERT_TRUE(st.decay.alpha.has_value());
  EXPECT_GT(*st.decay.alpha, 0.0);

  for (const auto& rec : st.history) {
    if (!rec.converged) continue;
    for (std::size_t k = 1; k < rec.merit.size(); ++k) EXPECT_LE(rec.merit[k], rec.merit[k - 1] * (1 + 1e-12));
    for (double c : rec.linearization_check) EXPECT_LT(c, 1e-3);
  }
}

TEST(ContinuitySolve, StartIsExactWithoutClamping) {
  SmallProblem p;
  SolverOptions opt = small_options();
  opt.shift_clamp = 1e3;
  const SolverState st = continuity_solve(p.phi, p.background(), p.grid, opt);
  EXPECT_EQ(st.clamped_nodes, 0u);
  EXPECT_LE(st.start_residual, 1e-10);
  EXPECT_LE(st.residual_norm, opt.tol);
}

TEST(ContinuitySolve, PipelineIsUnitarilyEquivariant) {
  SmallProblem p;
  const BackgroundMetric b = p.background();
  const Mat u = rotation();
  BackgroundMetric bu = b;
  bu.H = conjugate(b.H, u);
  for (std::size_t i = 0; i < p.grid.nodes(); ++i) bu.frame[i] = b.frame.at(i) * u.adjoint();
  const SolverState a = continuity_solve(p.phi, b, p.grid, small_options());
  const SolverState c = continuity_solve(conjugate(p.phi, u), bu, p.grid, small_options());
  EXPECT_LT(metric_distance(conjugate(a.H, u), p.grid, c.H, p.grid), 1e-7);
}

TEST(ContinuitySolve, UnreachableToleranceIsSolverError) {
  SmallProblem p;
  SolverOptions opt = small_options();
  opt.tol = 1e-30;
  opt.max_newton = 3;
  opt.t_step_min = 0.05;
  try {
    continuity_solve(p.phi, p.background(), p.grid, opt);
    FAIL() << "expected a solver error";
  } catch (const SolverError& e) {
    EXPECT_FALSE(e.history().empty());
    EXPECT_GT(e.final_residual(), 0.0);
  }
}

TEST(KnotSolve, TrivialWeightReducesToKnotlessSolve) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::per_decade(8, 8, 0.05, 4.0, 12);
  const HiggsData knot = knot_local_higgs(ctx, KnotPoint{{0}, 0.5 / 8, 0.5 / 8});
  const HiggsData plain = constant_hitchin_higgs(ctx, {0.0});
  const SolverState a = knot_solve(ctx, knot, g, small_options());
  const MatField phi = phi_field(plain, g);
  const SolverState b = continuity_solve(phi, build_background(ctx, plain, nullptr, g), g, small_options());
  EXPECT_LE(metric_distance(a.H, g, b.H, g), 1e-6);
}

TEST(KnotSolve, RequiresKnotData) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::per_decade(6, 6, 0.1, 2.0, 12);
  EXPECT_THROW(knot_solve(ctx, constant_hitchin_higgs(ctx, {0.0}), g), DomainError);
}

TEST(MetricDistance, ZeroForEqualAndPositiveOtherwise) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::per_decade(5, 5, 0.1, 2.0, 12);
  MatField H(2, g.nodes()), K(2, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    H[i] = nahm_model_metric(ctx, g.y_at(i));
    K[i] = nahm_model_metric(ctx, 1.1 * g.y_at(i));
  }
  EXPECT_LT(metric_distance(H, g, H, g), 1e-14);
  EXPECT_NEAR(metric_distance(H, g, K, g), std::sqrt(2.0) * std::log(1.1), 1e-12);
}
