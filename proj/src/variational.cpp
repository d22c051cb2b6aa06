#include "nahmlab/variational.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>

namespace nahmlab {

namespace {

using Eigen::Index;

Mat hermitize(const Mat& a) { return 0.5 * (a + a.adjoint()); }

double h_norm2(const Mat& x, const Mat& H, const Mat& Hinv) { return (Hinv * x.adjoint() * H * x).trace().real(); }

// Nodes and weights of Gauss-Legendre on [0, 1].
template <int Points>
void gauss_unit(std::vector<double>& u, std::vector<double>& w) {
  using G = boost::math::quadrature::gauss<double, Points>;
  const auto& x = G::abscissa();
  const auto& wt = G::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      u.push_back(0.5);
      w.push_back(0.5 * wt[i]);
      continue;
    }
    u.push_back(0.5 * (1.0 - x[i]));
    w.push_back(0.5 * wt[i]);
    u.push_back(0.5 * (1.0 + x[i]));
    w.push_back(0.5 * wt[i]);
  }
}

void gauss_rule(int points, std::vector<double>& u, std::vector<double>& w) {
  u.clear();
  w.clear();
  switch (points) {
    case 8: gauss_unit<8>(u, w); break;
    case 16: gauss_unit<16>(u, w); break;
    default: throw DomainError("Gauss-Legendre rule must have 8 or 16 nodes");
  }
}

// K^{1/2} e^{t K^{1/2} s K^{-1/2}} K^{1/2} at every node.
MatField geodesic_point(const MatField& K, const MatField& s, double t) {
  MatField out(K.dim(), K.nodes());
  const Index nodes = Index(K.nodes());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < nodes; ++i) {
    const Mat kh = herm_pow(K.at(i), 0.5);
    const Mat lx = hermitize(kh * s.at(i) * kh.inverse());
    out[i] = hermitize(kh * herm_exp(Mat(t * lx)) * kh);
  }
  return out;
}

void check_inputs(const MatField& K, const MatField& s, const MatField& phi, const Grid3& g) {
  if (!K.same_shape(s) || !K.same_shape(phi) || K.nodes() != g.nodes())
    throw DomainError("donaldson functional: grid/field mismatch");
  if (g.is2d()) throw DomainError("donaldson functional needs a 3D grid");
  for (std::size_t i = 0; i < s.nodes(); ++i) {
    const double scale = std::max(1.0, s.at(i).norm());
    if (std::abs(s.at(i).trace()) > 1e-10 * scale) throw DomainError("donaldson functional: s is not traceless");
  }
}

}  // namespace

MatField relative_log(const MatField& H, const MatField& K, const Grid3& g) {
  if (!H.same_shape(K) || H.nodes() != g.nodes()) throw DomainError("relative_log: grid/field mismatch");
  MatField s(H.dim(), H.nodes());
  for (std::size_t i = 0; i < H.nodes(); ++i) {
    const Mat kh = herm_pow(K.at(i), 0.5);
    const Mat kmh = kh.inverse();
    const Mat lx = herm_log(hermitize(kmh * H.at(i) * kmh));
    s[i] = kmh * lx * kh;
    const double scale = std::max(1.0, lx.norm());
    if (std::abs(lx.trace()) > 1e-10 * scale) throw DomainError("relative_log: det(K^{-1} H) != 1, s is not traceless");
    if (g.on_y_boundary(i) && lx.norm() > 1e-10 * std::max(1.0, K.at(i).norm()))
      throw DomainError("relative_log: H and K differ on a y face");
  }
  return s;
}

double first_variation(const MatField& K, const MatField& s, const MatField& phi, const Grid3& g, double t) {
  check_inputs(K, s, phi, g);
  const MomentOperator op(g, phi, geodesic_point(K, s, t));
  double acc = 0.0;
  for (std::size_t i = 0; i < g.nodes(); ++i) acc += g.weight(i) * (s.at(i) * op.omega().at(i)).trace().real();
  return acc;
}

SecondVariation second_variation(const MatField& K, const MatField& s, const MatField& phi, const Grid3& g, double t) {
  check_inputs(K, s, phi, g);
  const MomentOperator op(g, phi, geodesic_point(K, s, t));
  const MatField& H = op.metric();
  const MatField& Hinv = op.metric_inverse();
  const MatField L = linearization_apply(op, s);
  SecondVariation out;
  double direct = 0.0, sq = 0.0;
  const MatField ds = del_apply(s, g);
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const double w = g.weight(i);
    direct += w * (s.at(i) * L.at(i)).trace().real();
    const Mat Hi = H.at(i), Hii = Hinv.at(i);
    const Mat cov = ds.at(i) + commutator(op.connection().at(i), s.at(i));
    const Mat pd = Hii * phi.at(i).adjoint() * Hi;
    sq += w * (h_norm2(cov, Hi, Hii) + h_norm2(commutator(pd, s.at(i)), Hi, Hii));
  }
  // y part on half nodes, matching the flux form of Omega.
  const std::size_t plane = g.plane();
  const auto& Ay = op.y_connection();
  const double cell = g.hx() * g.hz();
  for (std::size_t h = 0; h < Ay.size(); ++h) {
    const std::size_t k = h / plane, p = h % plane;
    const std::size_t lo = k * plane + p, hi = lo + plane;
    const double dy = g.y()[k + 1] - g.y()[k];
    const Mat b = (s.at(hi) - s.at(lo)) / dy + commutator(Ay[h], 0.5 * (s.at(lo) + s.at(hi)));
    sq += cell * dy * 0.5 * (h_norm2(b, H.at(lo), Hinv.at(lo)) + h_norm2(b, H.at(hi), Hinv.at(hi)));
  }
  // Boundary flux Re Tr(s dy_A s) at both faces.
  const MatField sy = dy_apply(s, g);
  const MatField Hy = dy_apply(H, g);
  double bnd = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int face : {0, g.ny() - 1}) {
      const std::size_t i = std::size_t(face) * plane + p;
      const Mat ay = Hinv.at(i) * Hy.at(i);
      const double v = (s.at(i) * (sy.at(i) + commutator(ay, s.at(i)))).trace().real();
      bnd += cell * (face == 0 ? -v : v);
    }
  }
  out.direct = direct;
  out.sum_of_squares = sq;
  out.boundary = bnd;
  out.eps_quad = std::abs(direct - sq - bnd) + 1e-12 * (std::abs(direct) + sq);
  return out;
}

double donaldson_along(const MatField& K, const MatField& s, const MatField& phi, const Grid3& g, double t,
                       int quad_nodes) {
  std::vector<double> u, w;
  gauss_rule(quad_nodes, u, w);
  double acc = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) acc += w[j] * first_variation(K, s, phi, g, t * u[j]);
  return t * acc;
}

FunctionalReport donaldson_value(const MatField& H, const MatField& K, const MatField& phi, const Grid3& g,
                                 std::vector<double> t_samples, int quad_nodes) {
  const MatField s = relative_log(H, K, g);
  FunctionalReport rep;
  gauss_rule(quad_nodes, rep.u_nodes, rep.u_weights);
  rep.value = donaldson_along(K, s, phi, g, 1.0, quad_nodes);
  rep.t_samples = std::move(t_samples);
  for (double t : rep.t_samples) {
    rep.first_variation.push_back(first_variation(K, s, phi, g, t));
    rep.second_variation.push_back(second_variation(K, s, phi, g, t));
    rep.eps_quad = std::max(rep.eps_quad, rep.second_variation.back().eps_quad);
  }
  return rep;
}

MatField random_direction(const MatField& frame, const Grid3& g, std::mt19937_64& rng, double amplitude) {
  if (frame.nodes() != g.nodes() || g.is2d()) throw DomainError("random_direction: grid/field mismatch");
  const int N = frame.dim();
  const int d = N * N - 1;
  std::normal_distribution<double> normal;
  // Mode shapes 1, cos 2pi x2, sin 2pi x3, cos 2pi (x2 + x3).
  std::vector<Eigen::VectorXd> c(4, Eigen::VectorXd(d));
  for (auto& v : c)
    for (int j = 0; j < d; ++j) v[j] = normal(rng);
  MatField raw(N, g.nodes());
  const double l0 = std::log(g.y_min()), l1 = std::log(g.y_max());
  double peak = 0.0;
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    if (g.on_y_boundary(i)) continue;
    const double u = (std::log(g.y_at(i)) - l0) / (l1 - l0);
    const double x = g.x2(i), z = g.x3(i);
    const Eigen::VectorXd v = std::sin(kPi * u) * (c[0] + c[1] * std::cos(2 * kPi * x) + c[2] * std::sin(2 * kPi * z) +
                                                   c[3] * std::cos(2 * kPi * (x + z)));
    raw[i] = herm_from_coeffs(N, v.data());
    peak = std::max(peak, raw.at(i).norm());
  }
  MatField s(N, g.nodes());
  if (peak == 0.0) return s;
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const Mat k = frame.at(i);
    s[i] = k.inverse() * (amplitude / peak * raw.at(i)) * k;
  }
  return s;
}

MatField compact_perturbation(const MatField& frame, const Grid3& g, double amplitude) {
  if (frame.nodes() != g.nodes() || g.is2d()) throw DomainError("compact_perturbation: grid/field mismatch");
  const int N = frame.dim();
  // Fixed traceless Hermitian shape with both diagonal and off-diagonal parts.
  Mat shape = Mat::Zero(N, N);
  for (int a = 0; a < N; ++a) shape(a, a) = double(N - 1 - 2 * a);
  for (int a = 0; a + 1 < N; ++a) {
    shape(a, a + 1) = cplx(0.5, 0.25);
    shape(a + 1, a) = cplx(0.5, -0.25);
  }
  MatField raw(N, g.nodes());
  double peak = 0.0;
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const double u = std::log10(g.y_at(i) / 0.1);
    if (u <= 0.0 || u >= 1.0 || g.on_y_boundary(i)) continue;
    const double bump = std::pow(std::sin(kPi * u), 2) * (1.0 + 0.5 * std::cos(2 * kPi * g.x2(i)));
    raw[i] = bump * shape;
    peak = std::max(peak, raw.at(i).norm());
  }
  if (peak == 0.0) throw DomainError("compact_perturbation: no grid nodes in 0.1 < y < 1");
  MatField s(N, g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const Mat k = frame.at(i);
    s[i] = k.inverse() * (amplitude / peak * raw.at(i)) * k;
  }
  return s;
}

UniquenessReport uniqueness_test(const MatField& phi, const BackgroundMetric& b1, const BackgroundMetric& b2,
                                 const Grid3& g, const SolverOptions& opt) {
  UniquenessReport rep;
  rep.first = continuity_solve(phi, b1, g, opt);
  rep.second = continuity_solve(phi, b2, g, opt);
  rep.distance = metric_distance(rep.first.H, g, rep.second.H, g);
  return rep;
}

}  // namespace nahmlab
