#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nahmlab/types.hpp"

namespace nahmlab {

/// Periodic (x2, x3) in [0,1)^2 times a graded y mesh. ny == 1 denotes a 2D slice.
class Grid3 {
 public:
  Grid3() = default;
  Grid3(int nx, int nz, std::vector<double> y_nodes);

  /// Geometric mesh y_k = y_min * rho^k with ny nodes ending at y_max.
  static Grid3 geometric(int nx, int nz, double y_min, double y_max, int ny);
  /// Geometric mesh with the given nodes per decade (rounded up).
  static Grid3 per_decade(int nx, int nz, double y_min, double y_max, double nodes_per_decade);
  /// Smoothly stretched log mesh, y = y_min exp(L (u + a sin(pi u) / pi)) at u = k / intervals. Not geometric
  /// for a != 0; |a| < 1 keeps it monotone.
  static Grid3 stretched(int nx, int nz, double y_min, double y_max, int intervals, double amplitude = 0.3);
  /// Periodic 2D slice (single y node at y = 1).
  static Grid3 slice2d(int nx, int nz);

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  int ny() const { return int(y_.size()); }
  bool is2d() const { return y_.size() == 1; }
  std::size_t nodes() const { return std::size_t(nx_) * nz_ * y_.size(); }
  std::size_t plane() const { return std::size_t(nx_) * nz_; }
  double hx() const { return 1.0 / nx_; }
  double hz() const { return 1.0 / nz_; }
  const std::vector<double>& y() const { return y_; }
  double y_min() const { return y_.front(); }
  double y_max() const { return y_.back(); }

  std::size_t index(int ix, int iz, int iy) const { return (std::size_t(iy) * nz_ + iz) * nx_ + ix; }
  int ix_of(std::size_t node) const { return int(node % nx_); }
  int iz_of(std::size_t node) const { return int((node / nx_) % nz_); }
  int iy_of(std::size_t node) const { return int(node / plane()); }
  double x2(std::size_t node) const { return ix_of(node) * hx(); }
  double x3(std::size_t node) const { return iz_of(node) * hz(); }
  double y_at(std::size_t node) const { return y_[iy_of(node)]; }
  bool on_y_boundary(std::size_t node) const {
    const int iy = iy_of(node);
    return !is2d() && (iy == 0 || iy == ny() - 1);
  }
  /// Quadrature weight: hx * hz * y-dual-cell weight (1 in y for 2D).
  double weight(std::size_t node) const { return hx() * hz() * wy_[iy_of(node)]; }
  double y_weight(int iy) const { return wy_[iy]; }
  /// Largest consecutive ratio y_{k+1}/y_k.
  double max_ratio() const;
  /// Nodes per decade implied by the mesh.
  double nodes_per_decade() const;

 private:
  int nx_ = 0, nz_ = 0;
  std::vector<double> y_;
  std::vector<double> wy_;
};

/// Node-sampled N x N complex matrices, stored contiguously (column-major per node).
class MatField {
 public:
  using MapT = Eigen::Map<Eigen::MatrixXcd>;
  using CMapT = Eigen::Map<const Eigen::MatrixXcd>;

  MatField() = default;
  MatField(int N, std::size_t nodes) : n_(N), nodes_(nodes), data_(std::size_t(N) * N * nodes, cplx(0)) {}
  /// Same matrix at every node.
  static MatField constant(const Mat& m, std::size_t nodes);

  int dim() const { return n_; }
  std::size_t nodes() const { return nodes_; }
  std::size_t stride() const { return std::size_t(n_) * n_; }

  MapT operator[](std::size_t i) { return MapT(data_.data() + i * stride(), n_, n_); }
  CMapT operator[](std::size_t i) const { return CMapT(data_.data() + i * stride(), n_, n_); }
  Mat at(std::size_t i) const { return (*this)[i]; }
  void set(std::size_t i, const Mat& m) { (*this)[i] = m; }

  std::span<cplx> raw() { return data_; }
  std::span<const cplx> raw() const { return data_; }

  MatField& operator+=(const MatField& o);
  MatField& operator-=(const MatField& o);
  MatField& operator*=(double a);
  /// this += a * o
  MatField& axpy(double a, const MatField& o);

  bool same_shape(const MatField& o) const { return n_ == o.n_ && nodes_ == o.nodes_; }

 private:
  int n_ = 0;
  std::size_t nodes_ = 0;
  std::vector<cplx> data_;
};

MatField operator+(MatField a, const MatField& b);
MatField operator-(MatField a, const MatField& b);
MatField operator*(double s, MatField a);

/// Weighted inner product sum_w Re Tr(a b^dagger).
double inner(const MatField& a, const MatField& b, const Grid3& g);
/// Unweighted Euclidean inner product over all entries (real part).
double flat_dot(const MatField& a, const MatField& b);
/// Max Frobenius norm over nodes.
double sup_norm(const MatField& a);
/// Max of y^p * |a| over nodes.
double sup_norm_weighted(const MatField& a, const Grid3& g, double p);

/// Periodic 4th-order derivatives in x2 and x3.
MatField d2_apply(const MatField& f, const Grid3& g);
MatField d3_apply(const MatField& f, const Grid3& g);
/// del = (d2 - i d3)/2, dbar = (d2 + i d3)/2.
MatField del_apply(const MatField& f, const Grid3& g);
MatField dbar_apply(const MatField& f, const Grid3& g);
/// Three-point nonuniform y derivative, one-sided second order at the ends.
MatField dy_apply(const MatField& f, const Grid3& g);

/// Scalar versions on node-sampled real data (used by tests and the scalar comparison problem).
std::vector<cplx> d2_scalar(std::span<const cplx> f, const Grid3& g);
std::vector<cplx> d3_scalar(std::span<const cplx> f, const Grid3& g);
std::vector<cplx> dy_scalar(std::span<const cplx> f, const Grid3& g);

/// Hermitian eigendecomposition with a Hermiticity check.
struct HermEig {
  RVec values;
  Mat vectors;
};
HermEig herm_eig(const Mat& s, double tol = 1e-10);

/// e^s for Hermitian s.
Mat herm_exp(const Mat& s);
/// Principal log of a positive Hermitian matrix.
Mat herm_log(const Mat& h);
/// h^p for positive Hermitian h.
Mat herm_pow(const Mat& h, double p);

/// (e^x - 1)/x with a series near 0.
double gamma_fn(double x);
/// gamma(sign * s) a, evaluated in the eigenbasis of ad_s.
Mat gamma_apply(const Mat& s, const Mat& a, int sign);
/// sqrt(gamma(sign * s)) a.
Mat sqrt_gamma_apply(const Mat& s, const Mat& a, int sign);
/// Directional derivative of the exponential: d/du e^{s + u ds} at u = 0.
Mat dexp(const Mat& s, const Mat& ds);

struct DecayFit {
  double sup_weighted = 0.0;
  std::optional<double> alpha;  // empty when undefined
};

/// sup y^{-mu}|s| and the least-squares slope of log max_x|s| against log y over y in [y_lo, y_fit].
DecayFit weighted_norms(const MatField& s, const Grid3& g, double mu, double y_fit, double y_lo = 0.0);

}  // namespace nahmlab
