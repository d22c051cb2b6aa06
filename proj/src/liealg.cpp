#include "nahmlab/liealg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>

namespace nahmlab {

namespace {

Eigen::MatrixXi unit(int N, int i, int j) {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(N, N);
  m(i, j) = 1;
  return m;
}

Mat to_mat(const Eigen::MatrixXi& m) { return m.cast<cplx>(); }

std::vector<Mat> build_hermitian_basis(int N) {
  std::vector<Mat> basis;
  const double r2 = std::sqrt(0.5);
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      Mat a = Mat::Zero(N, N);
      a(i, j) = a(j, i) = r2;
      basis.push_back(a);
      Mat b = Mat::Zero(N, N);
      b(i, j) = cplx(0, -r2);
      b(j, i) = cplx(0, r2);
      basis.push_back(b);
    }
  }
  // Diagonal generalized Gell-Mann elements.
  for (int k = 1; k < N; ++k) {
    Mat d = Mat::Zero(N, N);
    const double c = 1.0 / std::sqrt(double(k) * (k + 1));
    for (int i = 0; i < k; ++i) d(i, i) = c;
    d(k, k) = -k * c;
    basis.push_back(d);
  }
  return basis;
}

}  // namespace

LieContext build_lie_context(int n) {
  if (n < 1 || n > kMaxDim - 1) throw DomainError("rank n must satisfy 1 <= n <= 8");
  LieContext ctx;
  ctx.n = n;
  const int N = n + 1;

  ctx.cartan = Eigen::MatrixXi::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    ctx.cartan(i, i) = 2;
    if (i + 1 < n) ctx.cartan(i, i + 1) = ctx.cartan(i + 1, i) = -1;
  }

  ctx.cartan_inv.assign(n, std::vector<Rational>(n));
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j)
      ctx.cartan_inv[i - 1][j - 1] = Rational(std::min(i, j)) - Rational(i * j, N);

  for (int i = 1; i <= n; ++i) ctx.weights.push_back(i * (N - i));

  for (int j = 0; j < n; ++j) {
    ctx.e_plus.push_back(unit(N, j, j + 1));
    ctx.e_minus.push_back(unit(N, j + 1, j));
    ctx.h_basis.push_back(unit(N, j, j) - unit(N, j + 1, j + 1));
  }

  ctx.sl2_plus = Mat::Zero(N, N);
  ctx.sl2_minus = Mat::Zero(N, N);
  ctx.sl2_zero = Mat::Zero(N, N);
  for (int j = 0; j < n; ++j) {
    // sqrt(B_j) is the only non-integer data; computed in double.
    const double rb = std::sqrt(double(ctx.weights[j]));
    ctx.sl2_plus += rb * to_mat(ctx.e_plus[j]);
    ctx.sl2_minus += rb * to_mat(ctx.e_minus[j]);
    ctx.sl2_zero += double(ctx.weights[j]) * to_mat(ctx.h_basis[j]);
  }
  return ctx;
}

const std::vector<Mat>& hermitian_basis(int N) {
  static std::mutex mu;
  static std::map<int, std::vector<Mat>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(N);
  if (it == cache.end()) it = cache.emplace(N, build_hermitian_basis(N)).first;
  return it->second;
}

Eigen::VectorXd herm_coeffs(const Mat& a) {
  const auto& basis = hermitian_basis(int(a.rows()));
  Eigen::VectorXd c(basis.size());
  for (size_t k = 0; k < basis.size(); ++k) c[k] = (a * basis[k]).trace().real();
  return c;
}

Mat herm_from_coeffs(int N, const double* c) {
  const auto& basis = hermitian_basis(N);
  Mat a = Mat::Zero(N, N);
  for (size_t k = 0; k < basis.size(); ++k) a += c[k] * basis[k];
  return a;
}

Mat casimir_apply(const LieContext& ctx, const Mat& s) {
  const int N = ctx.dim();
  if (s.rows() != N || s.cols() != N) throw DomainError("casimir_apply: shape mismatch");
  const Mat& ep = ctx.sl2_plus;
  const Mat& em = ctx.sl2_minus;
  const Mat& e0 = ctx.sl2_zero;
  return 0.5 * (commutator(ep, commutator(em, s)) + commutator(em, commutator(ep, s))) +
         0.25 * commutator(e0, commutator(e0, s));
}

Eigen::MatrixXd casimir_matrix(const LieContext& ctx) {
  const auto& basis = hermitian_basis(ctx.dim());
  const int d = int(basis.size());
  Eigen::MatrixXd m(d, d);
  for (int b = 0; b < d; ++b) m.col(b) = herm_coeffs(casimir_apply(ctx, basis[b]));
  return m;
}

std::vector<double> casimir_spectrum(const LieContext& ctx) {
  const Eigen::MatrixXd m = casimir_matrix(ctx);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

std::vector<int> indicial_roots(const LieContext& ctx) {
  std::set<int> roots;
  for (double mu : casimir_spectrum(ctx)) {
    const double j = 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * std::max(mu, 0.0)));
    const long jr = std::lround(j);
    if (std::abs(mu - double(jr * (jr + 1))) > 1e-8 || jr < 1)
      throw ConsistencyError("Casimir eigenvalue " + std::to_string(mu) + " is not of the form j(j+1)");
    roots.insert(int(-jr));
    roots.insert(int(jr + 1));
  }
  std::vector<int> out(roots.begin(), roots.end());
  std::vector<int> expected;
  for (int k = -ctx.n; k <= -1; ++k) expected.push_back(k);
  for (int k = 2; k <= ctx.n + 1; ++k) expected.push_back(k);
  if (out != expected) throw ConsistencyError("indicial roots disagree with the closed form");
  return out;
}

bool LieCheck::ok() const {
  return cartan_inverse_exact && weights_match && chevalley_exact && sl2_error <= 1e-12 &&
         casimir_error <= 1e-8 && casimir_multiplicities && indicial_roots_match;
}

LieCheck verify_lie_context(const LieContext& ctx) {
  LieCheck out;
  const int n = ctx.n;
  out.n = n;

  bool inv_ok = true;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Rational acc(0);
      for (int k = 0; k < n; ++k) acc += Rational(ctx.cartan(i, k)) * ctx.cartan_inv[k][j];
      if (acc != Rational(i == j ? 1 : 0)) inv_ok = false;
    }
  out.cartan_inverse_exact = inv_ok;

  bool w_ok = true;
  for (int i = 0; i < n; ++i) {
    Rational row(0);
    for (int j = 0; j < n; ++j) row += ctx.cartan_inv[i][j];
    if (Rational(2) * row != Rational(ctx.weights[i]) || ctx.weights[i] != (i + 1) * (n - i)) w_ok = false;
  }
  out.weights_match = w_ok;

  auto br = [](const Eigen::MatrixXi& a, const Eigen::MatrixXi& b) -> Eigen::MatrixXi { return a * b - b * a; };
  bool chev = true;
  const int N = ctx.dim();
  const Eigen::MatrixXi zero = Eigen::MatrixXi::Zero(N, N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (br(ctx.e_plus[i], ctx.e_minus[j]) != (i == j ? ctx.h_basis[j] : zero)) chev = false;
      if (br(ctx.h_basis[i], ctx.h_basis[j]) != zero) chev = false;
      if (br(ctx.h_basis[i], ctx.e_plus[j]) != ctx.cartan(i, j) * ctx.e_plus[j]) chev = false;
      if (br(ctx.h_basis[i], ctx.e_minus[j]) != -ctx.cartan(i, j) * ctx.e_minus[j]) chev = false;
    }
  out.chevalley_exact = chev;

  const Mat& ep = ctx.sl2_plus;
  const Mat& em = ctx.sl2_minus;
  const Mat& e0 = ctx.sl2_zero;
  const double scale = std::max({ep.norm() * em.norm(), e0.norm() * ep.norm(), 1.0});
  Mat e0_expected = Mat::Zero(N, N);
  for (int k = 0; k < N; ++k) e0_expected(k, k) = double(n - 2 * k);
  out.sl2_error = std::max({(commutator(ep, em) - e0).norm(), (commutator(e0, ep) - 2.0 * ep).norm(),
                            (commutator(e0, em) + 2.0 * em).norm(), (e0 - e0_expected).norm()}) /
                  scale;

  const auto spec = casimir_spectrum(ctx);
  std::map<int, int> mult;
  double err = 0.0;
  for (double mu : spec) {
    const double j = 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * std::max(mu, 0.0)));
    const long jr = std::lround(j);
    err = std::max(err, std::abs(mu - double(jr * (jr + 1))));
    ++mult[int(jr)];
  }
  out.casimir_error = err;
  bool mult_ok = int(mult.size()) == n;
  for (int j = 1; j <= n; ++j)
    if (mult[j] != 2 * j + 1) mult_ok = false;
  out.casimir_multiplicities = mult_ok;

  try {
    indicial_roots(ctx);
    out.indicial_roots_match = true;
  } catch (const ConsistencyError&) {
    out.indicial_roots_match = false;
  }
  return out;
}

}  // namespace nahmlab
