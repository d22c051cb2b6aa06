#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nahmlab/liealg.hpp"

namespace nahmlab {

/// Truncated power series in z: coefficients of z^0 .. z^{order-1} are known.
class Series {
 public:
  Series() = default;
  explicit Series(int order) : c_(std::size_t(order), cplx(0)) {}
  static Series constant(cplx a, int order);
  static Series monomial(int power, cplx a, int order);

  int order() const { return int(c_.size()); }
  cplx operator[](int k) const { return c_[k]; }
  cplx& operator[](int k) { return c_[k]; }

  /// Lowest k with |c_k| > tol, or nullopt if zero to the tracked order.
  std::optional<int> valuation(double tol = 1e-9) const;
  /// Divide by z^k (requires the first k coefficients to vanish); order drops by k.
  Series shifted_down(int k) const;
  /// Reciprocal of a series with nonzero constant term.
  Series reciprocal() const;
  Series truncated(int order) const;

  Series& operator+=(const Series& o);
  Series& operator-=(const Series& o);
  Series& operator*=(cplx a);

 private:
  std::vector<cplx> c_;
};

Series operator+(Series a, const Series& b);
Series operator-(Series a, const Series& b);
Series operator*(const Series& a, const Series& b);
Series operator*(cplx a, Series b);

/// Square matrix (or row vector when rows == 1) of truncated series.
class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(int rows, int cols, int order);
  static PolyMatrix identity(int n, int order);
  static PolyMatrix from_constant(const Mat& m, int order);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int order() const;
  Series& operator()(int i, int j) { return e_[std::size_t(i) * cols_ + j]; }
  const Series& operator()(int i, int j) const { return e_[std::size_t(i) * cols_ + j]; }

  /// Coefficient matrix of z^k.
  Eigen::MatrixXcd coeff(int k) const;
  PolyMatrix row(int i) const;
  double max_abs_coeff() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<Series> e_;
};

PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b);
PolyMatrix operator+(const PolyMatrix& a, const PolyMatrix& b);
PolyMatrix operator-(const PolyMatrix& a, const PolyMatrix& b);
/// Inverse by Gaussian elimination with constant-term pivoting.
PolyMatrix inverse(const PolyMatrix& a);

/// c * exp(2 pi i (k2 x2 + k3 x3)).
struct TrigTerm {
  cplx coef;
  int k2 = 0;
  int k3 = 0;
};
using TrigPoly = std::vector<TrigTerm>;
cplx trig_eval(const TrigPoly& p, double x2, double x3);
/// dbar of the trig polynomial.
cplx trig_dbar(const TrigPoly& p, double x2, double x3);
bool trig_is_constant(const TrigPoly& p);

enum class HiggsKind { HitchinSection, KnotLocal, Explicit };

struct KnotPoint {
  std::vector<int> weights;
  double x2 = 0.5, x3 = 0.5;
};

/// Holomorphic field on the periodic chart.
struct HiggsData {
  int n = 1;
  HiggsKind kind = HiggsKind::HitchinSection;
  std::vector<TrigPoly> q;          // q_2 .. q_{n+1}
  std::vector<KnotPoint> knots;     // KnotLocal only
  std::function<Mat(double, double)> explicit_fn;  // Explicit only

  Mat eval(double x2, double x3) const;
  /// Sup over a sampling of |dbar phi| (zero for constant Hitchin-section data).
  double dbar_residual(int samples = 32) const;
};

HiggsData hitchin_section_higgs(const LieContext& ctx, std::vector<TrigPoly> q_coeffs);
HiggsData constant_hitchin_higgs(const LieContext& ctx, const std::vector<cplx>& q_consts);
/// Superdiagonal f^{r_i}, f = (sin 2 pi (x2 - p2) + i sin 2 pi (x3 - p3)) / (2 pi); optional Hitchin bottom row.
HiggsData knot_local_higgs(const LieContext& ctx, KnotPoint knot, std::vector<TrigPoly> q_coeffs = {});
/// The local coordinate function f used for knot data, and its zeros in [0,1)^2.
cplx knot_coordinate(const KnotPoint& k, double x2, double x3);
std::vector<std::pair<double, double>> knot_zeros(const KnotPoint& k);

/// Coefficients p_2 .. p_{n+1} with det(lambda - phi) = sum lambda^{n+1-j} (-1)^j p_j.
std::vector<cplx> hitchin_fibration(const Mat& phi);

struct DivisorResult {
  std::vector<int> vanishing;  // Z(f_1) .. Z(f_n)
  std::vector<int> weights;    // r_1 .. r_n
  bool effective = false;
};

/// Vanishing orders of the wedges v, v phi, ..., v phi^i (row action) from minimal minor valuations.
DivisorResult divisor_orders(const PolyMatrix& phi, const PolyMatrix& v);
DivisorResult divisor_orders(const PolyMatrix& phi);  // v = e_1

struct CanonicalFrame {
  PolyMatrix frame;        // rows e^_1 .. e^_N
  PolyMatrix transformed;  // frame * phi * frame^{-1}
  std::vector<int> weights;
};

CanonicalFrame canonical_frame(const PolyMatrix& phi, const PolyMatrix& v);

/// Knot-local PolyMatrix with superdiagonal z^{r_i} and the given constant lower entries.
PolyMatrix knot_local_polymatrix(const std::vector<int>& weights, const Mat& lower, int order);
PolyMatrix hitchin_section_polymatrix(const LieContext& ctx, const std::vector<cplx>& q_consts, int order);

/// Calls gen(order) starting at 16, doubling on InconclusiveError up to max_order.
template <class Gen>
auto with_adaptive_order(Gen&& gen, int start = 16, int max_order = 256) {
  for (int order = start;; order *= 2) {
    try {
      return gen(order);
    } catch (const InconclusiveError&) {
      if (order * 2 > max_order) throw;
    }
  }
}

}  // namespace nahmlab
