#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nahmlab/moment.hpp"

using namespace nahmlab;

namespace {

double slope(const std::vector<double>& h, const std::vector<double>& e) {
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

MatField nahm_metric(const LieContext& ctx, const Grid3& g) {
  MatField H(ctx.dim(), g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) H[i] = nahm_model_metric(ctx, g.y_at(i));
  return H;
}

// Smooth H-self-adjoint field vanishing on both y faces. variant picks the profile and the matrix shape.
MatField smooth_direction(const Grid3& g, const MatField& H, double amp, int variant) {
  MatField s(2, g.nodes());
  const double L = std::log(g.y_max() / g.y_min());
  Mat shape(2, 2);
  switch (variant) {
    case 0: shape << 1, cplx(0.5, 0.3), cplx(0.5, -0.3), -1; break;
    case 1: shape << 0.3, cplx(-0.2, 1), cplx(-0.2, -1), -0.3; break;
    default: shape << 1, 0, 0, -1; break;
  }
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const double u = std::log(g.y_at(i) / g.y_min()) / L;
    double b = 0.0;
    if (variant == 0) b = std::sin(kPi * u) * (1 + 0.5 * std::cos(2 * kPi * g.x2(i)) + 0.3 * std::sin(2 * kPi * g.x3(i)));
    if (variant == 1) b = std::sin(2 * kPi * u) * (0.4 + std::sin(2 * kPi * (g.x2(i) + g.x3(i))));
    if (variant == 2) b = std::sin(kPi * u);
    const Mat h = H.at(i);
    s.set(i, amp * b * herm_pow(h, -0.5) * shape * herm_pow(h, 0.5));
  }
  return s;
}

// sum_w Re Tr(a b): the H-pairing for H-self-adjoint b.
double pairing(const MatField& a, const MatField& b, const Grid3& g) {
  double t = 0;
  for (std::size_t i = 0; i < g.nodes(); ++i) t += g.weight(i) * (a.at(i) * b.at(i)).trace().real();
  return t;
}

Mat e_plus() {
  Mat e = Mat::Zero(2, 2);
  e(0, 1) = 1.0;
  return e;
}

}  // namespace

TEST(AdjointHiggs, Examples) {
  const Mat ep = e_plus();
  EXPECT_LT((adjoint_higgs(Mat::Identity(2, 2), ep) - Mat(ep.transpose())).norm(), 1e-15);
  const double y = 0.3;
  Mat H = Mat::Zero(2, 2);
  H(0, 0) = 1 / y;
  H(1, 1) = y;
  EXPECT_LT((adjoint_higgs(H, ep) - Mat(ep.transpose() / (y * y))).norm(), 1e-13);
}

TEST(AdjointHiggs, InvolutiveAndRejectsSingularMetric) {
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  Mat a(3, 3), phi(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a(i, j) = cplx(nd(rng), nd(rng));
      phi(i, j) = cplx(nd(rng), nd(rng));
    }
  const Mat H = a * a.adjoint() + Mat::Identity(3, 3);
  EXPECT_LT((adjoint_higgs(H, adjoint_higgs(H, phi)) - phi).norm(), 1e-12 * phi.norm());
  EXPECT_THROW(adjoint_higgs(Mat::Zero(3, 3), phi), DomainError);
}

TEST(Omega, FlatFieldsGiveZero) {
  const Grid3 g = Grid3::geometric(6, 6, 0.1, 2.0, 16);
  const MatField H = MatField::constant(Mat::Identity(2, 2), g.nodes());
  EXPECT_EQ(omega_residual(H, MatField(2, g.nodes()), g).sup, 0.0);
}

TEST(Omega, IdentityMetricWithRaisingOperator) {
  const Grid3 g = Grid3::geometric(6, 6, 0.1, 2.0, 16);
  const MatField H = MatField::constant(Mat::Identity(2, 2), g.nodes());
  const auto r = omega_residual(H, MatField::constant(e_plus(), g.nodes()), g);
  Mat expected = Mat::Zero(2, 2);
  expected(0, 0) = 1.0;
  expected(1, 1) = -1.0;
  for (std::size_t i = 0; i < g.nodes(); ++i)
    if (!g.on_y_boundary(i)) EXPECT_LT((r.omega.at(i) - expected).norm(), 1e-14);
}

TEST(Omega, NahmModelIsADiscreteSolutionOnGeometricMeshes) {
  const auto ctx = build_lie_context(2);
  const Grid3 g = Grid3::geometric(5, 5, 0.01, 8.0, 40);
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0, 0.0}), g);
  EXPECT_LT(omega_residual(nahm_metric(ctx, g), phi, g).sup_y2, 1e-10);
}

TEST(Omega, NahmModelConvergesAtOrderTwoOnStretchedMeshes) {
  for (int n = 1; n <= 3; ++n) {
    const OrderStudy st = nahm_residual_order(build_lie_context(n), {32, 64, 128, 256});
    EXPECT_NEAR(st.order, 2.0, 0.3) << n;
    for (std::size_t k = 1; k < st.error.size(); ++k) EXPECT_LT(st.error[k], st.error[k - 1]);
  }
}

TEST(Omega, SignSlipWouldBeLoud) {
  // H = diag(y, 1/y) is the model with the wrong sign; its residual is 2 e0 / y^2 in the continuum.
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(5, 5, 0.1, 2.0, 24);
  MatField H(2, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) H[i] = nahm_model_metric(ctx, 1.0 / g.y_at(i));
  EXPECT_GT(omega_residual(H, MatField::constant(e_plus(), g.nodes()), g).sup_y2, 1.0);
}

TEST(Omega, TracelessHermitianAndUnitarilyEquivariant) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(8, 8, 0.1, 2.0, 20);
  const MatField H0 = nahm_metric(ctx, g);
  const MatField H = metric_times_exp(H0, smooth_direction(g, H0, 0.3, 0));
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {cplx(0.2, 0.1)}), g);
  const auto r = omega_residual(H, phi, g);
  EXPECT_LT(r.trace_max, 1e-10 * (1 + r.sup));
  EXPECT_LT(r.hermiticity_defect, 1e-10 * (1 + r.sup));

  Mat u(2, 2);
  const double c = std::cos(0.7), s = std::sin(0.7);
  u << c, cplx(0, s), cplx(0, s), c;
  MatField Hu(2, g.nodes()), phiu(2, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    Hu[i] = u * H[i] * u.adjoint();
    phiu[i] = u * phi[i] * u.adjoint();
  }
  const auto ru = omega_residual(Hu, phiu, g);
  double err = 0;
  for (std::size_t i = 0; i < g.nodes(); ++i)
    err = std::max(err, (ru.omega.at(i) - u * r.omega.at(i) * u.adjoint()).norm());
  EXPECT_LT(err, 1e-10 * (1 + r.sup));
}

TEST(Omega, ShapeMismatchIsDomainError) {
  const Grid3 g = Grid3::geometric(5, 5, 0.1, 1.0, 12);
  EXPECT_THROW(omega_residual(MatField(2, g.nodes() - 1), MatField(2, g.nodes() - 1), g), DomainError);
}

TEST(Linearization, FiniteDifferenceSlopeIsOne) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(10, 10, 0.1, 2.0, 25);
  const MatField H = nahm_metric(ctx, g);
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0}), g);
  const MomentOperator op(g, phi, H);
  const MatField s = smooth_direction(g, H, 1.0, 0);
  const MatField L = linearization_apply(op, s);
  std::vector<double> eps, err;
  for (double e : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const MomentOperator pe(g, phi, metric_times_exp(H, e * s));
    MatField fd = pe.omega() - op.omega();
    fd *= 1.0 / e;
    eps.push_back(e);
    err.push_back(sup_norm(fd - L));
  }
  EXPECT_NEAR(slope(eps, err), 1.0, 0.1);
}

TEST(Linearization, SymmetricAndNonnegativeAtASolution) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(12, 12, 0.1, 2.0, 25);
  const MatField H = nahm_metric(ctx, g);
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0}), g);
  const MomentOperator op(g, phi, H);
  ASSERT_LT(sup_norm(op.omega()), 1e-10);
  const MatField s1 = smooth_direction(g, H, 1.0, 0), s2 = smooth_direction(g, H, 1.0, 1);
  const MatField L1 = linearization_apply(op, s1), L2 = linearization_apply(op, s2);
  const double a = pairing(L1, s2, g), b = pairing(s1, L2, g);
  EXPECT_LT(std::abs(a - b), 1e-6 * (std::abs(a) + std::abs(b)));
  EXPECT_GT(pairing(L1, s1, g), 0.0);
  EXPECT_GT(pairing(L2, s2, g), 0.0);
}

TEST(Linearization, OperatorFormAgreesToDiscretizationError) {
  const auto ctx = build_lie_context(1);
  std::vector<double> errs;
  for (int m : {8, 16}) {
    const Grid3 g = Grid3::geometric(m, m, 0.1, 2.0, 2 * m + 1);
    const MatField H = nahm_metric(ctx, g);
    const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0}), g);
    const MomentOperator op(g, phi, H);
    const MatField s = smooth_direction(g, H, 1.0, 0);
    const MatField L = linearization_apply(op, s);
    errs.push_back(sup_norm(linearization_operator_form(op, phi, s) - L) / sup_norm(L));
  }
  EXPECT_LT(errs.back(), 1e-2);
  EXPECT_LT(errs.back(), errs.front());
}

TEST(ExpansionIdentity, ZeroCorrection) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(8, 8, 0.1, 2.0, 17);
  const MatField H = nahm_metric(ctx, g);
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.3}), g);
  const auto e = expansion_identity_check(H, phi, MatField(2, g.nodes()), g);
  EXPECT_LT(e.residual, 1e-12);
}

TEST(ExpansionIdentity, DiagonalCommutingFamilyIsExact) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(8, 8, 0.1, 2.0, 17);
  const MatField H = nahm_metric(ctx, g);
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0}), g);
  const auto e = expansion_identity_check(H, phi, smooth_direction(g, H, 0.2, 2), g);
  EXPECT_GT(e.scale, 1e-2);
  EXPECT_LT(e.residual, 1e-10);
}

TEST(ExpansionIdentity, SecondOrderUnderRefinement) {
  const auto ctx = build_lie_context(1);
  std::vector<double> hs, errs;
  for (int m : {8, 16, 32}) {
    const Grid3 g = Grid3::geometric(m, m, 0.1, 2.0, 2 * m + 1);
    const MatField H = nahm_metric(ctx, g);
    const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0}), g);
    errs.push_back(expansion_identity_check(H, phi, smooth_direction(g, H, 0.1, 0), g).residual);
    hs.push_back(1.0 / m);
  }
  EXPECT_GE(slope(hs, errs), 1.7);
}

TEST(NormIdentity, ZeroCorrection) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(8, 8, 0.1, 2.0, 17);
  const MatField H = nahm_metric(ctx, g);
  const auto n = norm_identity_check(H, phi_field(constant_hitchin_higgs(ctx, {0.0}), g), MatField(2, g.nodes()), g);
  EXPECT_EQ(n.residual, 0.0);
  EXPECT_EQ(n.inequality_violation, 0.0);
}

TEST(NormIdentity, SecondOrderUnderRefinement) {
  const auto ctx = build_lie_context(1);
  for (int variant : {0, 2}) {
    std::vector<double> hs, errs;
    for (int m : {8, 16, 32}) {
      const Grid3 g = Grid3::geometric(m, m, 0.1, 2.0, 2 * m + 1);
      const MatField H = nahm_metric(ctx, g);
      const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0}), g);
      const auto n = norm_identity_check(H, phi, smooth_direction(g, H, 0.1, variant), g);
      EXPECT_EQ(n.inequality_violation, 0.0);
      errs.push_back(n.residual);
      hs.push_back(1.0 / m);
    }
    EXPECT_GE(slope(hs, errs), 1.7) << variant;
  }
}

TEST(UnitaryGauge, NahmModelFields) {
  const auto ctx = build_lie_context(1);
  const Grid3 g = Grid3::geometric(5, 5, 0.1, 2.0, 120);
  const MatField H = nahm_metric(ctx, g);
  const MatField phi = phi_field(constant_hitchin_higgs(ctx, {0.0}), g);
  const UnitaryGauge u = unitary_gauge(H, phi, g);
  for (std::size_t i = g.plane(); i + g.plane() < g.nodes(); i += 7) {
    const double y = g.y_at(i);
    EXPECT_LT(u.A_z.at(i).norm(), 1e-12);
    EXPECT_LT(u.A_y.at(i).norm(), 1e-12);
    // g = diag(y^-1/2, y^1/2): phi_1 = i diag(-1, 1) / (2y), phi_z = e+ / y.
    EXPECT_NEAR(u.phi_1.at(i)(0, 0).imag(), -0.5 / y, 2e-3 / y);
    EXPECT_NEAR(u.phi_1.at(i)(1, 1).imag(), 0.5 / y, 2e-3 / y);
    EXPECT_NEAR(std::abs(u.phi_z.at(i)(0, 1)), 1.0 / y, 1e-12 / y);
  }
}
