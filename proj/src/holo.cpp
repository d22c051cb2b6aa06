#include "nahmlab/holo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace nahmlab {

// ---- Series ----

Series Series::constant(cplx a, int order) {
  Series s(order);
  if (order > 0) s.c_[0] = a;
  return s;
}

Series Series::monomial(int power, cplx a, int order) {
  Series s(order);
  if (power < order) s.c_[power] = a;
  return s;
}

std::optional<int> Series::valuation(double tol) const {
  for (int k = 0; k < order(); ++k)
    if (std::abs(c_[k]) > tol) return k;
  return std::nullopt;
}

Series Series::shifted_down(int k) const {
  if (k > order()) throw InconclusiveError("series shift exceeds truncation order");
  Series s(order() - k);
  for (int i = 0; i < s.order(); ++i) s.c_[i] = c_[i + k];
  return s;
}

Series Series::reciprocal() const {
  if (order() == 0 || c_[0] == cplx(0)) throw DomainError("series reciprocal needs a nonzero constant term");
  Series r(order());
  r.c_[0] = 1.0 / c_[0];
  for (int k = 1; k < order(); ++k) {
    cplx acc = 0;
    for (int j = 1; j <= k; ++j) acc += c_[j] * r.c_[k - j];
    r.c_[k] = -acc * r.c_[0];
  }
  return r;
}

Series Series::truncated(int order) const {
  Series s(std::min(order, this->order()));
  for (int i = 0; i < s.order(); ++i) s.c_[i] = c_[i];
  return s;
}

Series& Series::operator+=(const Series& o) {
  c_.resize(std::min(c_.size(), o.c_.size()));
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Series& Series::operator-=(const Series& o) {
  c_.resize(std::min(c_.size(), o.c_.size()));
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Series& Series::operator*=(cplx a) {
  for (auto& v : c_) v *= a;
  return *this;
}

Series operator+(Series a, const Series& b) { return a += b; }
Series operator-(Series a, const Series& b) { return a -= b; }
Series operator*(cplx a, Series b) { return b *= a; }

Series operator*(const Series& a, const Series& b) {
  const int order = std::min(a.order(), b.order());
  Series out(order);
  for (int i = 0; i < order; ++i) {
    if (a[i] == cplx(0)) continue;
    for (int j = 0; i + j < order; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// ---- PolyMatrix ----

PolyMatrix::PolyMatrix(int rows, int cols, int order)
    : rows_(rows), cols_(cols), e_(std::size_t(rows) * cols, Series(order)) {}

PolyMatrix PolyMatrix::identity(int n, int order) {
  PolyMatrix m(n, n, order);
  for (int i = 0; i < n; ++i) m(i, i) = Series::constant(1.0, order);
  return m;
}

PolyMatrix PolyMatrix::from_constant(const Mat& c, int order) {
  PolyMatrix m(int(c.rows()), int(c.cols()), order);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = Series::constant(c(i, j), order);
  return m;
}

int PolyMatrix::order() const {
  int o = e_.empty() ? 0 : e_.front().order();
  for (const auto& s : e_) o = std::min(o, s.order());
  return o;
}

Eigen::MatrixXcd PolyMatrix::coeff(int k) const {
  Eigen::MatrixXcd m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = k < (*this)(i, j).order() ? (*this)(i, j)[k] : cplx(0);
  return m;
}

PolyMatrix PolyMatrix::row(int i) const {
  PolyMatrix r(1, cols_, order());
  for (int j = 0; j < cols_; ++j) r(0, j) = (*this)(i, j);
  return r;
}

double PolyMatrix::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& s : e_)
    for (int k = 0; k < s.order(); ++k) m = std::max(m, std::abs(s[k]));
  return m;
}

PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b) {
  if (a.cols() != b.rows()) throw DomainError("PolyMatrix product: shape mismatch");
  const int order = std::min(a.order(), b.order());
  PolyMatrix out(a.rows(), b.cols(), order);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j)
      for (int k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

PolyMatrix operator+(const PolyMatrix& a, const PolyMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DomainError("PolyMatrix sum: shape mismatch");
  PolyMatrix out = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) += b(i, j);
  return out;
}

PolyMatrix operator-(const PolyMatrix& a, const PolyMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DomainError("PolyMatrix difference: shape mismatch");
  PolyMatrix out = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) -= b(i, j);
  return out;
}

PolyMatrix inverse(const PolyMatrix& a) {
  if (a.rows() != a.cols()) throw DomainError("PolyMatrix inverse: not square");
  const int n = a.rows();
  PolyMatrix m = a;
  PolyMatrix inv = PolyMatrix::identity(n, a.order());
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m(r, c)[0]) > std::abs(m(piv, c)[0])) piv = r;
    if (std::abs(m(piv, c)[0]) < 1e-12) throw DomainError("PolyMatrix inverse: not invertible at z = 0");
    if (piv != c)
      for (int j = 0; j < n; ++j) {
        std::swap(m(c, j), m(piv, j));
        std::swap(inv(c, j), inv(piv, j));
      }
    const Series rp = m(c, c).reciprocal();
    for (int j = 0; j < n; ++j) {
      m(c, j) = rp * m(c, j);
      inv(c, j) = rp * inv(c, j);
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const Series f = m(r, c);
      for (int j = 0; j < n; ++j) {
        m(r, j) -= f * m(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  return inv;
}

// ---- Trig polynomials and Higgs data ----

cplx trig_eval(const TrigPoly& p, double x2, double x3) {
  cplx acc = 0;
  for (const auto& t : p) acc += t.coef * std::exp(cplx(0, 2 * kPi * (t.k2 * x2 + t.k3 * x3)));
  return acc;
}

cplx trig_dbar(const TrigPoly& p, double x2, double x3) {
  cplx acc = 0;
  for (const auto& t : p)
    acc += t.coef * cplx(0, kPi) * cplx(t.k2, t.k3) * std::exp(cplx(0, 2 * kPi * (t.k2 * x2 + t.k3 * x3)));
  return acc;
}

bool trig_is_constant(const TrigPoly& p) {
  return std::all_of(p.begin(), p.end(), [](const TrigTerm& t) { return t.k2 == 0 && t.k3 == 0; });
}

cplx knot_coordinate(const KnotPoint& k, double x2, double x3) {
  return cplx(std::sin(2 * kPi * (x2 - k.x2)), std::sin(2 * kPi * (x3 - k.x3))) / (2 * kPi);
}

std::vector<std::pair<double, double>> knot_zeros(const KnotPoint& k) {
  std::vector<std::pair<double, double>> z;
  for (double a : {0.0, 0.5})
    for (double b : {0.0, 0.5}) {
      double u = std::fmod(k.x2 + a, 1.0), v = std::fmod(k.x3 + b, 1.0);
      if (u < 0) u += 1.0;
      if (v < 0) v += 1.0;
      z.emplace_back(u, v);
    }
  return z;
}

namespace {

void fill_bottom_row(Mat& phi, const std::vector<TrigPoly>& q, double x2, double x3) {
  const int N = int(phi.rows());
  // bottom row (q_{n+1}, q_n, ..., q_2, 0); q[i] holds q_{i+2}
  for (int j = 0; j + 1 < N; ++j) {
    const int idx = N - j - 2;
    if (idx < int(q.size())) phi(N - 1, j) += trig_eval(q[idx], x2, x3);
  }
}

}  // namespace

Mat HiggsData::eval(double x2, double x3) const {
  const int N = n + 1;
  Mat phi = Mat::Zero(N, N);
  switch (kind) {
    case HiggsKind::HitchinSection:
      for (int i = 1; i <= n; ++i) phi(i - 1, i) = std::sqrt(double(i * (N - i)));
      fill_bottom_row(phi, q, x2, x3);
      break;
    case HiggsKind::KnotLocal:
      for (int i = 0; i < n; ++i) {
        cplx v = 1.0;
        for (const auto& k : knots) {
          const cplx f = knot_coordinate(k, x2, x3);
          for (int p = 0; p < k.weights[i]; ++p) v *= f;
        }
        phi(i, i + 1) = v;
      }
      fill_bottom_row(phi, q, x2, x3);
      break;
    case HiggsKind::Explicit:
      if (!explicit_fn) throw DomainError("explicit Higgs data without an evaluator");
      phi = explicit_fn(x2, x3);
      break;
  }
  return phi;
}

double HiggsData::dbar_residual(int samples) const {
  const double h = 1e-3;
  double worst = 0.0;
  auto d = [&](double x2, double x3, bool along2) {
    auto at = [&](double t) { return along2 ? eval(x2 + t, x3) : eval(x2, x3 + t); };
    return Mat((-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h));
  };
  for (int a = 0; a < samples; ++a)
    for (int b = 0; b < samples; ++b) {
      const double x2 = (a + 0.25) / samples, x3 = (b + 0.25) / samples;
      const Mat db = 0.5 * (d(x2, x3, true) + cplx(0, 1) * d(x2, x3, false));
      worst = std::max(worst, db.norm());
    }
  return worst;
}

HiggsData hitchin_section_higgs(const LieContext& ctx, std::vector<TrigPoly> q_coeffs) {
  if (int(q_coeffs.size()) != ctx.n)
    throw DomainError("hitchin_section_higgs: need exactly n coefficient functions q_2..q_{n+1}");
  HiggsData h;
  h.n = ctx.n;
  h.kind = HiggsKind::HitchinSection;
  h.q = std::move(q_coeffs);
  return h;
}

HiggsData constant_hitchin_higgs(const LieContext& ctx, const std::vector<cplx>& q_consts) {
  std::vector<TrigPoly> q;
  for (cplx c : q_consts) q.push_back({TrigTerm{c, 0, 0}});
  return hitchin_section_higgs(ctx, std::move(q));
}

HiggsData knot_local_higgs(const LieContext& ctx, KnotPoint knot, std::vector<TrigPoly> q_coeffs) {
  if (int(knot.weights.size()) != ctx.n) throw DomainError("knot_local_higgs: need one weight per simple root");
  for (int w : knot.weights)
    if (w < 0) throw DomainError("knot_local_higgs: weights must be nonnegative");
  if (!q_coeffs.empty() && int(q_coeffs.size()) != ctx.n)
    throw DomainError("knot_local_higgs: need zero or n coefficient functions");
  HiggsData h;
  h.n = ctx.n;
  h.kind = HiggsKind::KnotLocal;
  h.knots.push_back(std::move(knot));
  h.q = std::move(q_coeffs);
  return h;
}

std::vector<cplx> hitchin_fibration(const Mat& phi) {
  const int N = int(phi.rows());
  if (phi.cols() != N) throw DomainError("hitchin_fibration: matrix must be square");
  if (std::abs(phi.trace()) > 1e-10 * std::max(phi.norm(), 1e-300) && std::abs(phi.trace()) > 0)
    throw DomainError("hitchin_fibration: phi must be traceless");
  // Faddeev-LeVerrier: det(lambda - phi) = sum_k c_k lambda^{N-k}.
  std::vector<cplx> c(N + 1);
  c[0] = 1.0;
  Mat M = Mat::Zero(N, N);
  for (int k = 1; k <= N; ++k) {
    M = phi * M + c[k - 1] * Mat::Identity(N, N);
    c[k] = -(phi * M).trace() / double(k);
  }
  std::vector<cplx> p;
  for (int j = 2; j <= N; ++j) p.push_back((j % 2 == 0 ? 1.0 : -1.0) * c[j]);
  return p;
}

// ---- Divisor and canonical frame ----

DivisorResult divisor_orders(const PolyMatrix& phi, const PolyMatrix& v) {
  const int N = phi.rows();
  if (phi.cols() != N || v.rows() != 1 || v.cols() != N) throw DomainError("divisor_orders: shape mismatch");
  const int n = N - 1;
  std::vector<PolyMatrix> w{v};
  for (int i = 1; i <= n; ++i) w.push_back(w.back() * phi);

  // minors[S] for column subsets S of size level+1, by expansion along the last row.
  const std::size_t full = std::size_t(1) << N;
  std::vector<std::optional<Series>> prev(full), cur(full);
  for (int j = 0; j < N; ++j) prev[std::size_t(1) << j] = w[0](0, j);

  auto min_valuation = [](const std::vector<std::optional<Series>>& m) -> std::optional<int> {
    double scale = 0.0;
    for (const auto& s : m)
      if (s)
        for (int k = 0; k < s->order(); ++k) scale = std::max(scale, std::abs((*s)[k]));
    const double tol = 1e-8 * std::max(1.0, scale);
    std::optional<int> best;
    for (const auto& s : m)
      if (s)
        if (auto v = s->valuation(tol)) best = best ? std::min(*best, *v) : *v;
    return best;
  };

  std::vector<int> Z;  // Z[0] = valuation of v, Z[i] for the wedge of i+1 rows
  auto z0 = min_valuation(prev);
  if (!z0) throw InconclusiveError("initial section vanishes to truncation order");
  Z.push_back(*z0);
  for (int level = 1; level <= n; ++level) {
    std::fill(cur.begin(), cur.end(), std::nullopt);
    for (std::size_t S = 0; S < full; ++S) {
      if (std::popcount(S) != level + 1) continue;
      Series acc(w[level].order());
      bool any = false;
      int pos = 0;
      for (int j = 0; j < N; ++j) {
        if (!(S & (std::size_t(1) << j))) continue;
        const auto& sub = prev[S & ~(std::size_t(1) << j)];
        if (sub) {
          Series term = w[level](0, j) * (*sub);
          if ((level + pos) % 2) term *= -1.0;
          acc = any ? acc + term : term;
          any = true;
        }
        ++pos;
      }
      if (any) cur[S] = acc;
    }
    auto z = min_valuation(cur);
    if (!z) throw InconclusiveError("all minors vanish to truncation order; raise the order");
    Z.push_back(*z);
    std::swap(prev, cur);
  }

  DivisorResult out;
  out.vanishing.assign(Z.begin() + 1, Z.end());
  out.effective = true;
  for (int i = 1; i <= n; ++i) {
    const int zm2 = (i >= 2) ? Z[i - 2] : 0;
    const int r = Z[i] - 2 * Z[i - 1] + zm2;
    out.weights.push_back(r);
    if (r < 0) out.effective = false;
  }
  return out;
}

DivisorResult divisor_orders(const PolyMatrix& phi) {
  PolyMatrix v(1, phi.rows(), phi.order());
  v(0, 0) = Series::constant(1.0, phi.order());
  return divisor_orders(phi, v);
}

CanonicalFrame canonical_frame(const PolyMatrix& phi, const PolyMatrix& v) {
  const int N = phi.rows();
  if (phi.cols() != N || v.rows() != 1 || v.cols() != N) throw DomainError("canonical_frame: shape mismatch");
  if (v.coeff(0).norm() < 1e-12) throw InconclusiveError("canonical_frame: initial section vanishes at z = 0");

  std::vector<PolyMatrix> rows{v};
  std::vector<int> weights;
  for (int k = 1; k < N; ++k) {
    const int order = std::min(rows.back().order(), phi.order());
    // Complete the constant parts of the current rows with standard basis vectors.
    Eigen::MatrixXcd Q(N, 0);
    for (const auto& r : rows) {
      Eigen::VectorXcd x = r.coeff(0).transpose();
      x -= Q * (Q.adjoint() * x);
      x -= Q * (Q.adjoint() * x);
      if (x.norm() < 1e-10) throw InconclusiveError("canonical_frame: frame rows dependent at z = 0");
      Q.conservativeResize(N, Q.cols() + 1);
      Q.col(Q.cols() - 1) = x / x.norm();
    }
    std::vector<int> comp;
    while (int(Q.cols()) < N) {
      int best = -1;
      double bn = 0.0;
      Eigen::VectorXcd bx;
      for (int j = 0; j < N; ++j) {
        Eigen::VectorXcd x = Eigen::VectorXcd::Unit(N, j);
        x -= Q * (Q.adjoint() * x);
        if (x.norm() > bn + 1e-12) {
          bn = x.norm();
          best = j;
          bx = x;
        }
      }
      comp.push_back(best);
      Q.conservativeResize(N, Q.cols() + 1);
      Q.col(Q.cols() - 1) = bx / bx.norm();
    }

    PolyMatrix B(N, N, order);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < N; ++j) B(i, j) = rows[i](0, j).truncated(order);
    for (int i = k; i < N; ++i) B(i, comp[i - k]) = Series::constant(1.0, order);

    PolyMatrix w = rows.back() * phi;
    PolyMatrix coeffs = w * inverse(B);

    double scale = std::max(1.0, coeffs.max_abs_coeff());
    std::optional<int> r;
    for (int j = k; j < N; ++j)
      if (auto vj = coeffs(0, j).valuation(1e-9 * scale)) r = r ? std::min(*r, *vj) : *vj;
    if (!r) throw InconclusiveError("canonical_frame: pivot not determinable at truncation order");
    weights.push_back(*r);

    const int new_order = coeffs.order() - *r;
    if (new_order <= 0) throw InconclusiveError("canonical_frame: truncation order exhausted");
    PolyMatrix next(1, N, new_order);
    for (int j = k; j < N; ++j) {
      Series b = coeffs(0, j);
      for (int t = 0; t < *r; ++t) b[t] = 0;  // below tolerance
      const Series bs = b.shifted_down(*r);
      next(0, comp[j - k]) += bs;
    }
    rows.push_back(next);
  }

  int order = phi.order();
  for (const auto& r : rows) order = std::min(order, r.order());
  CanonicalFrame out;
  out.frame = PolyMatrix(N, N, order);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) out.frame(i, j) = rows[i](0, j).truncated(order);
  out.transformed = out.frame * phi * inverse(out.frame);
  // Superdiagonal entries equal z^{r_k} by construction; check, then clear roundoff there and above it.
  const double scale = std::max(1.0, out.transformed.max_abs_coeff());
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      const int o = out.transformed(i, j).order();
      const Series expected = (j == i + 1) ? Series::monomial(weights[i], 1.0, o) : Series(o);
      const Series diff = out.transformed(i, j) - expected;
      if (diff.valuation(1e-7 * scale)) throw ConsistencyError("canonical_frame: transformed field is not canonical");
      out.transformed(i, j) = expected;
    }
  out.weights = weights;
  return out;
}

PolyMatrix knot_local_polymatrix(const std::vector<int>& weights, const Mat& lower, int order) {
  const int N = int(weights.size()) + 1;
  PolyMatrix m(N, N, order);
  for (int i = 0; i + 1 < N; ++i) m(i, i + 1) = Series::monomial(weights[i], 1.0, order);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j <= i; ++j)
      if (i < lower.rows() && j < lower.cols()) m(i, j) = Series::constant(lower(i, j), order);
  return m;
}

PolyMatrix hitchin_section_polymatrix(const LieContext& ctx, const std::vector<cplx>& q_consts, int order) {
  const HiggsData h = constant_hitchin_higgs(ctx, q_consts);
  return PolyMatrix::from_constant(h.eval(0.0, 0.0), order);
}

}  // namespace nahmlab
