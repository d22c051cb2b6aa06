#include "nahmlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace nahmlab {

Mat nahm_model_metric(const LieContext& ctx, double y) {
  if (!(y > 0.0)) throw DomainError("nahm_model_metric: y must be positive");
  const int N = ctx.dim();
  Mat h = Mat::Zero(N, N);
  for (int k = 0; k < N; ++k) h(k, k) = std::pow(y, -(ctx.n - 2 * k));
  return h;
}

KnotChart KnotChart::from_ry(double r, double y, double theta) {
  KnotChart c;
  c.r = r;
  c.y = y;
  c.theta = theta;
  c.R = std::hypot(r, y);
  c.psi = std::atan2(y, r);
  c.sigma = r > 0 ? std::asinh(y / r) : INFINITY;
  return c;
}

KnotChart KnotChart::from_polar(double R, double psi, double theta) {
  KnotChart c;
  c.R = R;
  c.psi = psi;
  c.theta = theta;
  c.r = R * std::cos(psi);
  c.y = R * std::sin(psi);
  c.sigma = c.r > 0 ? std::asinh(std::tan(psi)) : INFINITY;
  return c;
}

TodaProfile::TodaProfile(const LieContext& ctx, std::vector<int> weights, Source source, ExtFn chi_ext)
    : cartan_(ctx.cartan), weights_(std::move(weights)), source_(source), chi_fn_(std::move(chi_ext)) {
  if (int(weights_.size()) != ctx.n) throw DomainError("Toda profile: need one weight per simple root");
  for (int w : weights_)
    if (w < 0) throw DomainError("Toda profile: weights must be nonnegative");
}

std::vector<double> TodaProfile::chi(double sigma) const {
  const auto c = chi_fn_(sigma);
  return {c.begin(), c.end()};
}

std::vector<long double> TodaProfile::q_ext(long double sigma) const {
  const auto c = chi_fn_(sigma);
  std::vector<long double> out(c.size(), 0.0L);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out[i] += cartan_(i, j) * c[j];
  return out;
}

std::vector<double> TodaProfile::q(double sigma) const {
  const auto v = q_ext(sigma);
  return {v.begin(), v.end()};
}

namespace {

// -log(sinh(m s)/m), stable for small and large s.
long double sl2_chi(int m, long double s) {
  const long double ms = m * s;
  return -(ms + std::log(-std::expm1(-2.0L * ms)) - std::log(2.0L * m));
}

}  // namespace

TodaProfile sl2_knot_profile(const LieContext& ctx, int r) {
  if (ctx.n != 1) throw DomainError("sl2_knot_profile needs n = 1");
  if (r < 0) throw DomainError("knot weight must be nonnegative");
  const int m = r + 1;
  return TodaProfile(ctx, {r}, TodaProfile::Source::ClosedForm,
                     [m](long double s) { return std::vector<long double>{sl2_chi(m, s)}; });
}

namespace {

// chi for the SL(3) closed form, factored by the dominant exponential:
// exp(-chi) = e^{a s}/(4 m1 (m1+m2)) * bracket, with bracket = 1 - A e^{-2 m1 s} + B e^{-2(m1+m2) s}
// and 1 - A + B = 0, so the bracket is written with expm1 to keep accuracy at small s.
long double sl3_chi_first(int m1, int m2, long double s) {
  const long double a = (4.0L * m1 + 2.0L * m2) / 3.0L;
  const long double A = (long double)(m1 + m2) / m2;
  const long double B = (long double)m1 / m2;
  const long double bracket = -A * std::expm1(-2.0L * m1 * s) + B * std::expm1(-2.0L * (m1 + m2) * s);
  return -(a * s - std::log(4.0L * m1 * (m1 + m2)) + std::log(bracket));
}

}  // namespace

TodaProfile sl3_knot_profile(const LieContext& ctx, int m1, int m2) {
  if (ctx.n != 2) throw DomainError("sl3_knot_profile needs n = 2");
  if (m1 < 1 || m2 < 1) throw DomainError("sl3_knot_profile needs m1, m2 >= 1");
  return TodaProfile(ctx, {m1 - 1, m2 - 1}, TodaProfile::Source::ClosedForm, [m1, m2](long double s) {
    return std::vector<long double>{sl3_chi_first(m1, m2, s), sl3_chi_first(m2, m1, s)};
  });
}

std::vector<double> toda_default_grid(double sigma_min, double sigma_max, double rel, double max_step) {
  if (!(sigma_min >= 1e-3 - 1e-15) || !(sigma_max > sigma_min)) throw DomainError("Toda grid needs 1e-3 <= sigma_min < sigma_max");
  std::vector<double> g{sigma_min};
  while (g.back() < sigma_max) g.push_back(g.back() + std::min(rel * g.back(), max_step));
  g.back() = sigma_max;
  if (g.size() >= 2 && g[g.size() - 1] - g[g.size() - 2] < 0.25 * std::min(rel * g[g.size() - 2], max_step))
    g.erase(g.end() - 2);
  return g;
}

namespace {

// Piecewise cubic Hermite interpolant of tabulated q with asymptotic extensions.
struct QTable {
  std::vector<double> s;
  std::vector<std::vector<double>> q, dq;
  std::vector<int> weights;
  std::vector<double> log_b;

  std::vector<long double> eval(long double sl) const {
    const double x = double(sl);
    const int n = int(weights.size());
    std::vector<long double> out(n);
    if (x <= s.front()) {
      for (int i = 0; i < n; ++i) out[i] = q.front()[i] - 2.0 * std::log(x / s.front());
      return out;
    }
    if (x >= s.back()) {
      for (int i = 0; i < n; ++i) out[i] = q.back()[i] - 2.0 * (weights[i] + 1) * (x - s.back());
      return out;
    }
    const std::size_t k = std::size_t(std::upper_bound(s.begin(), s.end(), x) - s.begin()) - 1;
    const double h = s[k + 1] - s[k];
    const double t = (x - s[k]) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    for (int i = 0; i < n; ++i)
      out[i] = h00 * q[k][i] + h10 * h * dq[k][i] + h01 * q[k + 1][i] + h11 * h * dq[k + 1][i];
    return out;
  }
};

}  // namespace

TodaProfile toda_bvp_solve(const LieContext& ctx, const std::vector<int>& weights, const std::vector<double>& grid) {
  const int n = ctx.n;
  if (int(weights.size()) != n) throw DomainError("toda_bvp_solve: need one weight per simple root");
  if (grid.size() < 5) throw DomainError("toda_bvp_solve: grid too small");
  if (grid.front() < 1e-3 - 1e-15) throw DomainError("toda_bvp_solve: sigma_min must be >= 1e-3");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw DomainError("toda_bvp_solve: grid must be increasing");
  for (int w : weights)
    if (w < 0) throw DomainError("toda_bvp_solve: weights must be nonnegative");

  const int K = int(grid.size());
  const int U = K - 1;  // unknown nodes 1..K-1
  auto uid = [n](int k, int i) { return (k - 1) * n + i; };

  std::vector<std::vector<double>> q(K, std::vector<double>(n));
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) q[k][i] = 2.0 * double(sl2_chi(weights[i] + 1, grid[k]));
  for (int i = 0; i < n; ++i) q[0][i] = -2.0 * std::log(grid[0]) + std::log(double(ctx.weights[i]));

  std::vector<double> slope(n);
  for (int i = 0; i < n; ++i) slope[i] = -2.0 * (weights[i] + 1);

  // Residual scaled by sigma^2 so that all rows are O(1).
  auto residual = [&](const std::vector<std::vector<double>>& qq, Eigen::VectorXd& F) {
    F.resize(U * n);
    for (int k = 1; k < K; ++k) {
      const double s2 = grid[k] * grid[k];
      for (int i = 0; i < n; ++i) {
        double d2;
        if (k < K - 1) {
          const double h1 = grid[k] - grid[k - 1], h2 = grid[k + 1] - grid[k];
          d2 = 2.0 * ((qq[k + 1][i] - qq[k][i]) / h2 - (qq[k][i] - qq[k - 1][i]) / h1) / (h1 + h2);
        } else {
          const double h = grid[k] - grid[k - 1];
          d2 = 2.0 * (qq[k - 1][i] - qq[k][i] + h * slope[i]) / (h * h);
        }
        double src = 0.0;
        for (int j = 0; j < n; ++j) src += ctx.cartan(i, j) * std::exp(qq[k][j]);
        F[uid(k, i)] = s2 * (d2 - src);
      }
    }
  };

  Eigen::VectorXd F;
  residual(q, F);
  std::vector<double> history{F.lpNorm<Eigen::Infinity>()};
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(U) * n * (n + 2));
    for (int k = 1; k < K; ++k) {
      const double s2 = grid[k] * grid[k];
      for (int i = 0; i < n; ++i) {
        const int row = uid(k, i);
        if (k < K - 1) {
          const double h1 = grid[k] - grid[k - 1], h2 = grid[k + 1] - grid[k];
          const double c = 2.0 / (h1 + h2);
          if (k > 1) trip.emplace_back(row, uid(k - 1, i), s2 * c / h1);
          trip.emplace_back(row, uid(k + 1, i), s2 * c / h2);
          trip.emplace_back(row, row, -s2 * c * (1.0 / h1 + 1.0 / h2));
        } else {
          const double h = grid[k] - grid[k - 1];
          trip.emplace_back(row, uid(k - 1, i), s2 * 2.0 / (h * h));
          trip.emplace_back(row, row, -s2 * 2.0 / (h * h));
        }
        for (int j = 0; j < n; ++j)
          if (ctx.cartan(i, j) != 0) trip.emplace_back(row, uid(k, j), -s2 * ctx.cartan(i, j) * std::exp(q[k][j]));
      }
    }
    Eigen::SparseMatrix<double> J(U * n, U * n);
    J.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw SolverError("Toda BVP: Jacobian factorization failed", history);
    const Eigen::VectorXd dq = lu.solve(-F);

    // Damped update: halve until the residual decreases.
    const double f0 = F.lpNorm<Eigen::Infinity>();
    double lambda = 1.0;
    std::vector<std::vector<double>> trial;
    Eigen::VectorXd Ft;
    for (int ls = 0; ls < 30; ++ls) {
      trial = q;
      for (int k = 1; k < K; ++k)
        for (int i = 0; i < n; ++i) trial[k][i] += lambda * dq[uid(k, i)];
      residual(trial, Ft);
      if (Ft.allFinite() && Ft.lpNorm<Eigen::Infinity>() < f0 * (1.0 - 1e-4 * lambda)) break;
      lambda *= 0.5;
    }
    if (!Ft.allFinite()) throw SolverError("Toda BVP: non-finite residual", history);
    const bool stalled = Ft.lpNorm<Eigen::Infinity>() >= f0;
    if (!stalled) {
      q = std::move(trial);
      F = Ft;
    }
    history.push_back(F.lpNorm<Eigen::Infinity>());
    const double step = lambda * dq.lpNorm<Eigen::Infinity>();
    // Roundoff floor of the scaled second difference: eps * sigma^2 * |q| / h^2.
    double floor = 0.0;
    for (int k = 1; k < K - 1; ++k) {
      const double h1 = grid[k] - grid[k - 1], h2 = grid[k + 1] - grid[k];
      for (int i = 0; i < n; ++i)
        floor = std::max(floor, 4.0 * std::numeric_limits<double>::epsilon() * grid[k] * grid[k] *
                                    (std::abs(q[k - 1][i]) + 2.0 * std::abs(q[k][i]) + std::abs(q[k + 1][i])) / (h1 * h2));
    }
    if (history.back() < 1e-11 || (lambda == 1.0 && step < 1e-12) || (stalled && history.back() < 100.0 * floor)) {
      converged = true;
      break;
    }
    if (stalled) break;
  }
  if (!converged) throw SolverError("Toda BVP: Newton did not converge", history);

  auto table = std::make_shared<QTable>();
  table->s = grid;
  table->q = q;
  table->weights = weights;
  table->dq.assign(K, std::vector<double>(n));
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) {
      if (k == K - 1) {
        table->dq[k][i] = slope[i];
      } else if (k == 0) {
        const double h1 = grid[1] - grid[0], h2 = grid[2] - grid[1];
        table->dq[k][i] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * q[0][i] + (h1 + h2) / (h1 * h2) * q[1][i] -
                          h1 / (h2 * (h1 + h2)) * q[2][i];
      } else {
        const double h1 = grid[k] - grid[k - 1], h2 = grid[k + 1] - grid[k];
        table->dq[k][i] = -h2 / (h1 * (h1 + h2)) * q[k - 1][i] + (h2 - h1) / (h1 * h2) * q[k][i] +
                          h1 / (h2 * (h1 + h2)) * q[k + 1][i];
      }
    }

  Eigen::MatrixXd ainv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ainv(i, j) = ctx.cartan_inv_value(i, j);

  TodaProfile p(ctx, weights, TodaProfile::Source::NumericBVP, [table, ainv](long double s) {
    const auto qv = table->eval(s);
    const int nn = int(qv.size());
    std::vector<long double> c(nn, 0.0L);
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < nn; ++j) c[i] += ainv(i, j) * qv[j];
    return c;
  });
  p.sigma_nodes = grid;
  p.q_nodes = q;
  p.residual_nodes.assign(K, std::vector<double>(n, 0.0));
  for (int k = 1; k < K; ++k)
    for (int i = 0; i < n; ++i) p.residual_nodes[k][i] = F[uid(k, i)] / (grid[k] * grid[k]);
  return p;
}

double toda_profile_distance(const TodaProfile& a, const TodaProfile& b, double lo, double hi, int samples) {
  if (a.n() != b.n()) throw DomainError("toda_profile_distance: rank mismatch");
  if (!(lo > 0.0) || !(hi > lo)) throw DomainError("toda_profile_distance: need 0 < lo < hi");
  std::vector<double> sig;
  const TodaProfile* numeric = a.source() == TodaProfile::Source::NumericBVP ? &a
                               : b.source() == TodaProfile::Source::NumericBVP ? &b
                                                                                : nullptr;
  if (numeric) {
    for (double s : numeric->sigma_nodes)
      if (s >= lo && s <= hi) sig.push_back(s);
  } else {
    for (int k = 0; k < samples; ++k) sig.push_back(lo * std::pow(hi / lo, double(k) / (samples - 1)));
  }
  double worst = 0.0;
  for (double s : sig) {
    const auto qa = a.q(s), qb = b.q(s);
    for (int i = 0; i < a.n(); ++i) worst = std::max(worst, std::abs(qa[i] - qb[i]));
  }
  return worst;
}

double toda_residual(const TodaProfile& p, double lo, double hi, int samples) {
  const int n = p.n();
  double worst = 0.0;
  if (p.source() == TodaProfile::Source::NumericBVP) {
    for (std::size_t k = 0; k < p.sigma_nodes.size(); ++k) {
      if (p.sigma_nodes[k] < lo || p.sigma_nodes[k] > hi) continue;
      for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(p.residual_nodes[k][i]));
    }
    return worst;
  }
  // Central second difference at h, h/2, h/4 with two Richardson levels, in long double.
  const long double h0 = 1e-3L;
  for (int t = 0; t < samples; ++t) {
    const long double s = lo + (hi - lo) * (long double)t / (samples - 1);
    std::vector<std::vector<long double>> d(3, std::vector<long double>(n));
    const auto q0 = p.q_ext(s);
    for (int l = 0; l < 3; ++l) {
      const long double h = h0 / (1 << l);
      const auto qp = p.q_ext(s + h), qm = p.q_ext(s - h);
      for (int i = 0; i < n; ++i) d[l][i] = (qp[i] - 2.0L * q0[i] + qm[i]) / (h * h);
    }
    for (int i = 0; i < n; ++i) {
      const long double r1a = (4.0L * d[1][i] - d[0][i]) / 3.0L;
      const long double r1b = (4.0L * d[2][i] - d[1][i]) / 3.0L;
      const long double d2 = (16.0L * r1b - r1a) / 15.0L;
      long double src = 0.0L;
      for (int j = 0; j < n; ++j) {
        const int a = (i == j) ? 2 : (std::abs(i - j) == 1 ? -1 : 0);
        src += a * std::exp(q0[j]);
      }
      worst = std::max(worst, double(std::abs(d2 - src)));
    }
  }
  return worst;
}

double toda_boundary_defect(const TodaProfile& p, double sigma) {
  const auto q = p.q(sigma);
  const int n = p.n();
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    const double B = double((j + 1) * (n - j));
    worst = std::max(worst, std::abs(q[j] + 2.0 * std::log(sigma) - std::log(B)));
  }
  return worst;
}

namespace {

std::vector<double> knot_exponents(const LieContext& ctx, const TodaProfile& profile, const KnotChart& c) {
  if (!(c.r > 0.0) || !(c.y > 0.0)) throw DomainError("knot model metric: need r > 0 and y > 0");
  if (profile.n() != ctx.n) throw DomainError("knot model metric: profile rank mismatch");
  const int n = ctx.n;
  const auto chi = profile.chi(c.sigma);
  const double lr = std::log(c.r);
  std::vector<double> e(n + 2, 0.0);  // e[0] = e[n+1] = 0
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += ctx.cartan_inv_value(i, j) * (profile.weights()[j] + 1);
    e[i + 1] = chi[i] - 2.0 * acc * lr;
  }
  return e;
}

}  // namespace

Mat knot_model_metric(const LieContext& ctx, const TodaProfile& profile, const KnotChart& chart) {
  const auto e = knot_exponents(ctx, profile, chart);
  const int N = ctx.dim();
  Mat h = Mat::Zero(N, N);
  for (int k = 0; k < N; ++k) h(k, k) = std::exp(e[k + 1] - e[k]);
  return h;
}

std::vector<double> lambda_ratios(const LieContext& ctx, const TodaProfile& profile, const KnotChart& chart) {
  if (!(chart.r > 0.0) || !(chart.y > 0.0)) throw DomainError("lambda_ratios: need r > 0 and y > 0");
  // lambda_{k+1}/lambda_k = exp(-q_k + 2 (r_k + 1) log r).
  const auto q = profile.q(chart.sigma);
  std::vector<double> out(ctx.n);
  for (int k = 0; k < ctx.n; ++k)
    out[k] = std::exp(-q[k] + 2.0 * (profile.weights()[k] + 1) * std::log(chart.r));
  return out;
}

LambdaRatioReport lambda_ratio_bound(const LieContext& ctx, const TodaProfile& profile,
                                     const std::vector<KnotChart>& ball_samples) {
  LambdaRatioReport rep;
  auto worst = [&](const KnotChart& c) {
    const auto r = lambda_ratios(ctx, profile, c);
    return *std::max_element(r.begin(), r.end());
  };
  for (const auto& c : ball_samples) rep.sup = std::max(rep.sup, worst(c));
  for (int k = 1; k <= 14; ++k) {
    rep.along_R.push_back(worst(KnotChart::from_polar(std::ldexp(1.0, -k), kPi / 4)));
    rep.along_psi.push_back(worst(KnotChart::from_polar(1.0, std::ldexp(1.0, -k))));
  }
  rep.at_small_R = worst(KnotChart::from_polar(1e-4, kPi / 4));
  rep.at_small_psi = worst(KnotChart::from_polar(1.0, 1e-4));
  auto decreasing = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[i - 1] * (1 + 1e-12)) return false;
    return true;
  };
  rep.limits_ok = decreasing(rep.along_R) && decreasing(rep.along_psi) && rep.at_small_R < 1e-3 &&
                  rep.at_small_psi < 1e-3;
  return rep;
}

}  // namespace nahmlab
