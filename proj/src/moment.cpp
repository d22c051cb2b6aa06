#include "nahmlab/moment.hpp"

#include <algorithm>
#include <cmath>

namespace nahmlab {

namespace {

using Index = std::ptrdiff_t;

void check_shapes(const MatField& a, const MatField& b, const Grid3& g, const char* what) {
  if (!a.same_shape(b) || a.nodes() != g.nodes()) throw DomainError(std::string(what) + ": grid/field mismatch");
}

void check_y_layout(const Grid3& g) {
  if (!g.is2d() && g.ny() < 3) throw DomainError("y mesh needs at least 3 nodes");
}

Mat project(const Mat& r, const Mat& H, const Mat& Hinv) {
  Mat out = 0.5 * (r + Hinv * r.adjoint() * H);
  out.diagonal().array() -= r.trace().real() / double(r.rows());
  return out;
}

cplx gamma_c(cplx z) {
  if (std::abs(z) < 1e-5) return 1.0 + z * (0.5 + z / 6.0);
  return (std::exp(z) - 1.0) / z;
}

// -(B_{k+1/2} - B_{k-1/2}) / w'_k at interior planes; flux[k * plane + p] holds B_{k+1/2}.
void add_flux_divergence(MatField& out, const std::vector<Mat>& flux, const Grid3& g) {
  const Index plane = Index(g.plane());
  const int ny = g.ny();
#pragma omp parallel for schedule(static)
  for (Index node = plane; node < Index(plane) * (ny - 1); ++node) {
    const Index k = node / plane, p = node % plane;
    out[node] -= (flux[k * plane + p] - flux[(k - 1) * plane + p]) / g.y_weight(int(k));
  }
}

double herm_inner(const Mat& a, const Mat& b) { return (a.array() * b.transpose().array()).sum().real(); }

}  // namespace

MatField phi_field(const HiggsData& phi, const Grid3& g) {
  const std::size_t plane = g.plane();
  std::vector<Mat> vals(plane);
  for (std::size_t p = 0; p < plane; ++p) vals[p] = phi.eval(g.x2(p), g.x3(p));
  MatField out(int(vals.front().rows()), g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) out[i] = vals[i % plane];
  return out;
}

Mat adjoint_higgs(const Mat& H, const Mat& phi) {
  Eigen::FullPivLU<Mat> lu(H);
  if (!lu.isInvertible()) throw DomainError("adjoint_higgs: metric is singular");
  return lu.solve(Mat(phi.adjoint() * H));
}

MatField adjoint_higgs(const MatField& H, const MatField& phi) {
  if (!H.same_shape(phi)) throw DomainError("adjoint_higgs: shape mismatch");
  MatField out(H.dim(), H.nodes());
  for (std::size_t i = 0; i < H.nodes(); ++i) out[i] = adjoint_higgs(H.at(i), phi.at(i));
  return out;
}

MomentOperator::MomentOperator(const Grid3& g, const MatField& phi, MatField H)
    : g_(&g), phi_(&phi), H_(std::move(H)) {
  check_shapes(H_, phi, g, "omega");
  check_y_layout(g);
  const int N = H_.dim();
  const Index nodes = Index(g.nodes());
  Hinv_ = MatField(N, g.nodes());
  phidag_ = MatField(N, g.nodes());
  bool singular = false, nonherm = false;
#pragma omp parallel for schedule(static) reduction(|| : singular, nonherm)
  for (Index i = 0; i < nodes; ++i) {
    const Mat h = H_[i];
    if ((h - h.adjoint()).norm() > 1e-10 * h.norm()) nonherm = true;
    Eigen::FullPivLU<Mat> lu(h);
    if (!lu.isInvertible()) {
      singular = true;
      continue;
    }
    const Mat hinv = lu.inverse();
    Hinv_[i] = hinv;
    phidag_[i] = hinv * phi[i].adjoint() * h;
  }
  if (nonherm) throw DomainError("omega: metric is not Hermitian");
  if (singular) throw DomainError("omega: metric is singular");

  dH_ = del_apply(H_, g);
  A_ = MatField(N, g.nodes());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) A_[i] = Hinv_[i] * dH_[i];
  R_ = dbar_apply(A_, g);
  R_ *= -1.0;

  if (!g.is2d()) {
    const Index plane = Index(g.plane());
    const int ny = g.ny();
    Ay_.assign(std::size_t(plane) * (ny - 1), Mat());
    half_.assign(Ay_.size(), HalfNode{});
    bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
    for (Index h = 0; h < Index(Ay_.size()); ++h) {
      const Index k = h / plane, p = h % plane;
      const Index a = k * plane + p, b = (k + 1) * plane + p;
      Eigen::SelfAdjointEigenSolver<Mat> ek(Mat(0.5 * (H_.at(a) + H_.at(a).adjoint())));
      if (ek.eigenvalues().minCoeff() <= 0.0) {
        bad = true;
        continue;
      }
      const RVec mu = ek.eigenvalues();
      const Mat& W = ek.eigenvectors();
      const Mat m12 = W * mu.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() * W.adjoint();
      const Mat p12 = W * mu.cwiseSqrt().cast<cplx>().asDiagonal() * W.adjoint();
      Mat S = m12 * H_.at(b) * m12;
      S = 0.5 * (S + S.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<Mat> es(S);
      const RVec lam = es.eigenvalues();
      if (lam.minCoeff() <= 0.0) {
        bad = true;
        continue;
      }
      HalfNode& hn = half_[h];
      hn.V = m12 * es.eigenvectors();
      hn.Vinv = es.eigenvectors().adjoint() * p12;
      hn.Hk_inv = Hinv_.at(a);
      hn.G = hn.Hk_inv * H_.at(b);
      const int n = int(lam.size());
      hn.L = Mat(n, n);
      RVec loglam(n);
      for (int i = 0; i < n; ++i) loglam[i] = std::log(lam[i]);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double d = lam[i] - lam[j];
          hn.L(i, j) = std::abs(d) < 1e-9 * (lam[i] + lam[j]) ? 2.0 / (lam[i] + lam[j]) : (loglam[i] - loglam[j]) / d;
        }
      const double dy = g.y()[k + 1] - g.y()[k];
      Ay_[h] = hn.V * loglam.cast<cplx>().asDiagonal() * hn.Vinv / dy;
    }
    if (bad) throw DomainError("omega: metric is not positive definite");
    add_flux_divergence(R_, Ay_, g);
  }

#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) {
    if (g.on_y_boundary(std::size_t(i))) {
      R_[i].setZero();
      continue;
    }
    R_[i] += commutator(phi.at(i), phidag_.at(i));
  }

  omega_ = MatField(N, g.nodes());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) omega_[i] = project(R_.at(i), H_.at(i), Hinv_.at(i));
}

MatField MomentOperator::raw_derivative(const MatField& dH) const {
  const Grid3& g = *g_;
  check_shapes(dH, H_, g, "derivative");
  const int N = H_.dim();
  const Index nodes = Index(g.nodes());
  MatField dHinv(N, g.nodes()), dA(N, g.nodes());
  const MatField ddH = del_apply(dH, g);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) {
    const Mat hinv = Hinv_[i];
    const Mat di = -hinv * dH[i] * hinv;
    dHinv[i] = di;
    dA[i] = di * dH_[i] + hinv * ddH[i];
  }
  MatField dR = dbar_apply(dA, g);
  dR *= -1.0;

  if (!g.is2d()) {
    const Index plane = Index(g.plane());
    std::vector<Mat> dAy(Ay_.size());
#pragma omp parallel for schedule(static)
    for (Index h = 0; h < Index(Ay_.size()); ++h) {
      const Index k = h / plane, p = h % plane;
      const HalfNode& hn = half_[h];
      const Mat dG = hn.Hk_inv * (dH.at(k * plane + p) * (-hn.G) + dH.at((k + 1) * plane + p));
      const Mat inner = hn.L.cwiseProduct(hn.Vinv * dG * hn.V);
      dAy[h] = hn.V * inner * hn.Vinv / (g.y()[k + 1] - g.y()[k]);
    }
    add_flux_divergence(dR, dAy, g);
  }

  const MatField& phi = *phi_;
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) {
    if (g.on_y_boundary(std::size_t(i))) {
      dR[i].setZero();
      continue;
    }
    const Mat pd = phi[i].adjoint();
    const Mat dphidag = dHinv[i] * pd * H_[i] + Hinv_[i] * pd * dH[i];
    dR[i] += commutator(phi.at(i), dphidag);
  }
  return dR;
}

MatField MomentOperator::derivative(const MatField& dH) const {
  const Grid3& g = *g_;
  MatField dR = raw_derivative(dH);
  const Index nodes = Index(g.nodes());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) {
    const Mat h = H_[i], hinv = Hinv_[i], r = R_[i], dr = dR[i], dh = dH[i];
    const Mat dhinv = -hinv * dh * hinv;
    Mat out = 0.5 * (dr + dhinv * r.adjoint() * h + hinv * dr.adjoint() * h + hinv * r.adjoint() * dh);
    out.diagonal().array() -= dr.trace().real() / double(h.rows());
    dR[i] = out;
  }
  return dR;
}

ResidualField summarize_residual(const MatField& omega, const MatField& H, const Grid3& g) {
  check_shapes(omega, H, g, "residual");
  ResidualField out;
  out.omega = omega;
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const Mat w = omega.at(i);
    const double nrm = w.norm();
    const double y = g.y_at(i);
    out.sup = std::max(out.sup, nrm);
    out.sup_y2 = std::max(out.sup_y2, y * y * nrm);
    out.trace_max = std::max(out.trace_max, std::abs(w.trace()));
    const Mat k = herm_pow(H.at(i), 0.5);
    const Mat kinv = herm_pow(H.at(i), -0.5);
    const Mat c = k * w * kinv;
    out.hermiticity_defect = std::max(out.hermiticity_defect, 0.5 * (c - c.adjoint()).norm());
  }
  return out;
}

ResidualField omega_residual(const MatField& H, const MatField& phi, const Grid3& g) {
  const MomentOperator op(g, phi, H);
  return summarize_residual(op.omega(), H, g);
}

MatField metric_times_exp(const MatField& H, const MatField& s) {
  if (!H.same_shape(s)) throw DomainError("metric_times_exp: shape mismatch");
  MatField out(H.dim(), H.nodes());
  const Index nodes = Index(H.nodes());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) {
    const Mat k = herm_pow(H.at(i), 0.5);
    const Mat kinv = herm_pow(H.at(i), -0.5);
    Mat sh = k * s[i] * kinv;
    sh = 0.5 * (sh + sh.adjoint()).eval();
    Mat r = k * herm_exp(sh) * k;
    out[i] = 0.5 * (r + r.adjoint());
  }
  return out;
}

MatField linearization_apply(const MomentOperator& op, const MatField& s) {
  const MatField& H = op.metric();
  if (!H.same_shape(s)) throw DomainError("linearization: shape mismatch");
  MatField dH(H.dim(), H.nodes());
  for (std::size_t i = 0; i < H.nodes(); ++i) dH[i] = H[i] * s[i];
  return op.derivative(dH);
}

MatField linearization_operator_form(const MomentOperator& op, const MatField& phi, const MatField& s) {
  const Grid3& g = op.grid();
  const MatField& H = op.metric();
  const MatField& Hinv = op.metric_inverse();
  check_shapes(s, H, g, "linearization");
  const int N = H.dim();
  const Index nodes = Index(g.nodes());
  MatField cov = del_apply(s, g);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) cov[i] += commutator(op.connection().at(i), s.at(i));
  MatField L = dbar_apply(cov, g);
  L *= -1.0;
  if (!g.is2d()) {
    const Index plane = Index(g.plane());
    const auto& Ay = op.y_connection();
    std::vector<Mat> flux(Ay.size());
#pragma omp parallel for schedule(static)
    for (Index h = 0; h < Index(Ay.size()); ++h) {
      const Index k = h / plane, p = h % plane;
      const Mat a = s[k * plane + p], b = s[(k + 1) * plane + p];
      flux[h] = (b - a) / (g.y()[k + 1] - g.y()[k]) + commutator(Ay[h], 0.5 * (a + b));
    }
    add_flux_divergence(L, flux, g);
  }
  MatField out(N, g.nodes());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) {
    if (g.on_y_boundary(std::size_t(i))) continue;
    const Mat pd = Hinv[i] * phi[i].adjoint() * H[i];
    const Mat l = L.at(i) + commutator(phi.at(i), commutator(pd, s.at(i)));
    out[i] = project(l, H.at(i), Hinv.at(i));
  }
  return out;
}

Mat gamma_general(const Mat& s, const Mat& a, int sign) {
  if (s.norm() == 0.0) return a;
  Eigen::ComplexEigenSolver<Mat> es(s);
  const Mat V = es.eigenvectors();
  const Mat Vinv = V.inverse();
  Mat t = Vinv * a * V;
  const double sg = sign < 0 ? -1.0 : 1.0;
  const auto& lam = es.eigenvalues();
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j) t(i, j) *= gamma_c(sg * (lam[i] - lam[j]));
  return V * t * Vinv;
}

ExpansionCheck expansion_identity_check(const MatField& H0, const MatField& phi, const MatField& s, const Grid3& g) {
  check_shapes(H0, s, g, "expansion check");
  const MomentOperator op0(g, phi, H0);
  const MomentOperator op(g, phi, metric_times_exp(H0, s));
  const int N = H0.dim();
  const Index nodes = Index(g.nodes());

  MatField dH(N, g.nodes());
  for (Index i = 0; i < nodes; ++i) dH[i] = H0[i] * s[i];
  const MatField Ls = op0.raw_derivative(dH);

  // Discrete form of the full nonlinear increment.
  MatField cov = del_apply(s, g);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i)
    cov[i] = gamma_general(s.at(i), Mat(cov.at(i) + commutator(op0.connection().at(i), s.at(i))), -1);
  MatField E = dbar_apply(cov, g);
  E *= -1.0;
  if (!g.is2d()) {
    const Index plane = Index(g.plane());
    const auto& Ay = op0.y_connection();
    std::vector<Mat> flux(Ay.size());
#pragma omp parallel for schedule(static)
    for (Index h = 0; h < Index(Ay.size()); ++h) {
      const Index k = h / plane, p = h % plane;
      const Mat a = s[k * plane + p], b = s[(k + 1) * plane + p];
      const Mat mid = 0.5 * (a + b);
      flux[h] = gamma_general(mid, Mat((b - a) / (g.y()[k + 1] - g.y()[k]) + commutator(Ay[h], mid)), -1);
    }
    add_flux_divergence(E, flux, g);
  }

  ExpansionCheck out;
  out.linear = MatField(N, g.nodes());
  out.remainder = MatField(N, g.nodes());
  for (Index i = 0; i < nodes; ++i) {
    if (g.on_y_boundary(std::size_t(i))) continue;
    const Mat si = s.at(i);
    const Mat pd = op0.metric_inverse()[i] * phi[i].adjoint() * H0[i];
    const Mat e = E.at(i) + commutator(phi.at(i), gamma_general(si, commutator(pd, si), -1));
    const Mat lin = gamma_general(si, Ls.at(i), -1);
    out.linear[i] = lin;
    out.remainder[i] = e - lin;
    const Mat lhs = op.raw().at(i) - op0.raw().at(i);
    const double y2 = g.y_at(std::size_t(i)) * g.y_at(std::size_t(i));
    out.residual = std::max(out.residual, y2 * (lhs - lin - out.remainder.at(i)).norm());
    out.scale = std::max(out.scale, y2 * lhs.norm());
  }
  return out;
}

NormCheck norm_identity_check(const MatField& H0, const MatField& phi, const MatField& s, const Grid3& g) {
  check_shapes(H0, s, g, "norm check");
  if (!g.is2d() && g.ny() < 5) throw DomainError("norm check needs at least 5 y nodes");
  const MomentOperator op0(g, phi, H0);
  const MomentOperator op(g, phi, metric_times_exp(H0, s));
  const Index nodes = Index(g.nodes());

  std::vector<cplx> sq(g.nodes());
  for (Index i = 0; i < nodes; ++i) sq[i] = (s[i] * s[i]).trace().real();
  const auto d2 = d2_scalar(sq, g);
  const auto d3 = d3_scalar(sq, g);
  const auto d22 = d2_scalar(d2, g);
  const auto d33 = d3_scalar(d3, g);

  const MatField ds = del_apply(s, g);
  MatField dys, dyH;
  if (!g.is2d()) {
    dys = dy_apply(s, g);
    dyH = dy_apply(H0, g);
  }

  NormCheck out;
  out.lhs.assign(g.nodes(), 0.0);
  out.rhs.assign(g.nodes(), 0.0);
  out.laplacian_term.assign(g.nodes(), 0.0);
  const Index plane = Index(g.plane());
  const auto& y = g.y();
  for (Index i = 0; i < nodes; ++i) {
    if (g.on_y_boundary(std::size_t(i))) continue;
    const Mat si = s.at(i), h = H0.at(i), hinv = op0.metric_inverse().at(i);
    auto grad_sq = [&](const Mat& w) { return herm_inner(gamma_general(si, w, -1), Mat(hinv * w.adjoint() * h)); };
    double P = 0.25 * (d22[i] + d33[i]).real();
    double rhs = 0.0;
    rhs += grad_sq(Mat(ds.at(i) + commutator(op0.connection().at(i), si)));
    const Mat pd = hinv * phi[i].adjoint() * h;
    rhs += grad_sq(commutator(pd, si));
    if (!g.is2d()) {
      const Index k = i / plane;
      const double up = (sq[i + plane] - sq[i]).real() / (y[k + 1] - y[k]);
      const double dn = (sq[i] - sq[i - plane]).real() / (y[k] - y[k - 1]);
      P += (up - dn) / g.y_weight(int(k));
      const Mat Ay0 = hinv * dyH.at(i);
      rhs += grad_sq(Mat(dys.at(i) + commutator(Ay0, si)));
    }
    rhs += -0.5 * P;
    const double lhs = herm_inner(Mat(op.raw().at(i) - op0.raw().at(i)), si);
    out.lhs[i] = lhs;
    out.rhs[i] = rhs;
    out.laplacian_term[i] = -0.5 * P;
    const double y2 = g.y_at(std::size_t(i)) * g.y_at(std::size_t(i));
    out.residual = std::max(out.residual, y2 * std::abs(lhs - rhs));
    out.scale = std::max(out.scale, y2 * std::abs(lhs));
    out.inequality_violation = std::max(out.inequality_violation, y2 * (-0.5 * P - lhs));
  }
  if (out.inequality_violation < 0.0) out.inequality_violation = 0.0;
  return out;
}

UnitaryGauge unitary_gauge(const MatField& H, const MatField& phi, const Grid3& g) {
  check_shapes(H, phi, g, "unitary gauge");
  const int N = H.dim();
  MatField G(N, g.nodes()), Ginv(N, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    G[i] = herm_pow(H.at(i), 0.5);
    Ginv[i] = herm_pow(H.at(i), -0.5);
  }
  const MatField dG = del_apply(G, g);
  MatField Gy(N, g.nodes());
  if (!g.is2d()) Gy = dy_apply(G, g);
  UnitaryGauge out{MatField(N, g.nodes()), MatField(N, g.nodes()), MatField(N, g.nodes()), MatField(N, g.nodes())};
  const cplx half_i(0.0, 0.5);
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const Mat gi = G.at(i), ginv = Ginv.at(i), gy = Gy.at(i);
    out.A_z[i] = ginv * dG[i];
    out.phi_z[i] = gi * phi[i] * ginv;
    out.A_y[i] = 0.5 * (gy * ginv - ginv * gy);
    out.phi_1[i] = half_i * (ginv * gy + gy * ginv);
  }
  return out;
}

OrderStudy nahm_residual_order(const LieContext& ctx, const std::vector<int>& intervals, double y_min, double y_max,
                               double amplitude) {
  if (intervals.size() < 2) throw DomainError("order study needs at least two meshes");
  OrderStudy out;
  const HiggsData hd = constant_hitchin_higgs(ctx, std::vector<cplx>(ctx.n, 0.0));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int m : intervals) {
    const Grid3 g = Grid3::stretched(5, 5, y_min, y_max, m, amplitude);
    MatField H(ctx.dim(), g.nodes());
    for (std::size_t i = 0; i < g.nodes(); ++i) H[i] = nahm_model_metric(ctx, g.y_at(i));
    const double e = omega_residual(H, phi_field(hd, g), g).sup_y2;
    out.intervals.push_back(m);
    out.error.push_back(e);
    const double lx = std::log(double(m)), ly = -std::log(e);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double k = double(intervals.size());
  out.order = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return out;
}

}  // namespace nahmlab
