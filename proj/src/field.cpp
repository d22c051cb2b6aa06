#include "nahmlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nahmlab {

namespace {

constexpr double kMaxRatio = 1.333521432163324;  // 10^(1/8): at least 8 nodes per decade

void require_nodes(int count, const char* dir) {
  if (count < 5) throw DomainError(std::string("stencil needs at least 5 nodes in ") + dir);
}

// Applies the periodic 4th-order first derivative along x2 (along_x) or x3 to data
// laid out as nodes x block entries.
std::vector<cplx> periodic_derivative(std::span<const cplx> f, std::size_t block, const Grid3& g, bool along_x) {
  const int nx = g.nx(), nz = g.nz(), ny = g.ny();
  require_nodes(along_x ? nx : nz, along_x ? "x2" : "x3");
  const double inv = 1.0 / (12.0 * (along_x ? g.hx() : g.hz()));
  std::vector<cplx> out(f.size());
  for (int iy = 0; iy < ny; ++iy)
    for (int iz = 0; iz < nz; ++iz)
      for (int ix = 0; ix < nx; ++ix) {
        std::size_t m2, m1, p1, p2;
        if (along_x) {
          m2 = g.index((ix - 2 + nx) % nx, iz, iy);
          m1 = g.index((ix - 1 + nx) % nx, iz, iy);
          p1 = g.index((ix + 1) % nx, iz, iy);
          p2 = g.index((ix + 2) % nx, iz, iy);
        } else {
          m2 = g.index(ix, (iz - 2 + nz) % nz, iy);
          m1 = g.index(ix, (iz - 1 + nz) % nz, iy);
          p1 = g.index(ix, (iz + 1) % nz, iy);
          p2 = g.index(ix, (iz + 2) % nz, iy);
        }
        const std::size_t c = g.index(ix, iz, iy);
        for (std::size_t e = 0; e < block; ++e)
          out[c * block + e] =
              (-f[p2 * block + e] + 8.0 * f[p1 * block + e] - 8.0 * f[m1 * block + e] + f[m2 * block + e]) * inv;
      }
  return out;
}

std::vector<cplx> y_derivative(std::span<const cplx> f, std::size_t block, const Grid3& g) {
  const int ny = g.ny();
  require_nodes(ny, "y");
  const auto& y = g.y();
  const std::size_t plane = g.plane();
  std::vector<cplx> out(f.size());
  for (int k = 0; k < ny; ++k) {
    int a, b, c;  // stencil node indices
    double wa, wb, wc;
    if (k == 0) {
      const double h1 = y[1] - y[0], h2 = y[2] - y[1];
      a = 0, b = 1, c = 2;
      wa = -(2 * h1 + h2) / (h1 * (h1 + h2));
      wb = (h1 + h2) / (h1 * h2);
      wc = -h1 / (h2 * (h1 + h2));
    } else if (k == ny - 1) {
      const double h1 = y[k - 1] - y[k - 2], h2 = y[k] - y[k - 1];
      a = k - 2, b = k - 1, c = k;
      wa = h2 / (h1 * (h1 + h2));
      wb = -(h1 + h2) / (h1 * h2);
      wc = (2 * h2 + h1) / (h2 * (h1 + h2));
    } else {
      const double h1 = y[k] - y[k - 1], h2 = y[k + 1] - y[k];
      a = k - 1, b = k, c = k + 1;
      wa = -h2 / (h1 * (h1 + h2));
      wb = (h2 - h1) / (h1 * h2);
      wc = h1 / (h2 * (h1 + h2));
    }
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t e = 0; e < block; ++e) {
        const std::size_t o = (std::size_t(k) * plane + p) * block + e;
        out[o] = wa * f[(a * plane + p) * block + e] + wb * f[(b * plane + p) * block + e] +
                 wc * f[(c * plane + p) * block + e];
      }
  }
  return out;
}

MatField wrap(int N, std::size_t nodes, std::vector<cplx> data) {
  MatField out(N, nodes);
  std::copy(data.begin(), data.end(), out.raw().begin());
  return out;
}

}  // namespace

Grid3::Grid3(int nx, int nz, std::vector<double> y_nodes) : nx_(nx), nz_(nz), y_(std::move(y_nodes)) {
  if (nx_ < 1 || nz_ < 1) throw DomainError("grid needs positive periodic sample counts");
  if (y_.empty()) throw DomainError("grid needs at least one y node");
  if (y_.front() <= 0.0) throw DomainError("grid needs y_min > 0");
  for (std::size_t k = 1; k < y_.size(); ++k)
    if (!(y_[k] > y_[k - 1])) throw DomainError("y nodes must be strictly increasing");
  if (y_.size() > 1 && max_ratio() > kMaxRatio * (1 + 1e-12))
    throw DomainError("y mesh too coarse: need at least 8 nodes per decade");
  wy_.assign(y_.size(), 1.0);
  if (y_.size() > 1) {
    const std::size_t L = y_.size() - 1;
    // Dual cell measured as y d(log y); matches the y flux form of the moment map.
    wy_[0] = 0.5 * y_[0] * std::log(y_[1] / y_[0]);
    wy_[L] = 0.5 * y_[L] * std::log(y_[L] / y_[L - 1]);
    for (std::size_t k = 1; k < L; ++k) wy_[k] = 0.5 * y_[k] * std::log(y_[k + 1] / y_[k - 1]);
  }
}

Grid3 Grid3::geometric(int nx, int nz, double y_min, double y_max, int ny) {
  if (ny < 2 || !(y_max > y_min) || y_min <= 0) throw DomainError("geometric mesh needs ny >= 2 and 0 < y_min < y_max");
  const double rho = std::pow(y_max / y_min, 1.0 / (ny - 1));
  std::vector<double> y(ny);
  for (int k = 0; k < ny; ++k) y[k] = y_min * std::pow(rho, k);
  y.back() = y_max;
  return Grid3(nx, nz, std::move(y));
}

Grid3 Grid3::stretched(int nx, int nz, double y_min, double y_max, int intervals, double amplitude) {
  if (!(y_min > 0.0) || !(y_max > y_min)) throw DomainError("stretched mesh: need 0 < y_min < y_max");
  if (intervals < 4) throw DomainError("stretched mesh: need at least 4 intervals");
  if (!(std::abs(amplitude) < 1.0)) throw DomainError("stretched mesh: |amplitude| must be below 1");
  const double L = std::log(y_max / y_min);
  std::vector<double> y(intervals + 1);
  for (int k = 0; k <= intervals; ++k) {
    const double u = double(k) / intervals;
    y[k] = y_min * std::exp(L * (u + amplitude * std::sin(kPi * u) / kPi));
  }
  y.back() = y_max;
  return Grid3(nx, nz, std::move(y));
}

Grid3 Grid3::per_decade(int nx, int nz, double y_min, double y_max, double nodes_per_decade) {
  if (!(y_max > y_min) || y_min <= 0) throw DomainError("per_decade mesh needs 0 < y_min < y_max");
  const int ny = int(std::ceil(nodes_per_decade * std::log10(y_max / y_min) - 1e-9)) + 1;
  return geometric(nx, nz, y_min, y_max, std::max(ny, 2));
}

Grid3 Grid3::slice2d(int nx, int nz) { return Grid3(nx, nz, {1.0}); }

double Grid3::max_ratio() const {
  double r = 1.0;
  for (std::size_t k = 1; k < y_.size(); ++k) r = std::max(r, y_[k] / y_[k - 1]);
  return r;
}

double Grid3::nodes_per_decade() const {
  if (y_.size() < 2) return 0.0;
  return double(y_.size() - 1) / std::log10(y_.back() / y_.front());
}

MatField MatField::constant(const Mat& m, std::size_t nodes) {
  MatField f(int(m.rows()), nodes);
  for (std::size_t i = 0; i < nodes; ++i) f[i] = m;
  return f;
}

MatField& MatField::operator+=(const MatField& o) {
  if (!same_shape(o)) throw DomainError("field shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

MatField& MatField::operator-=(const MatField& o) {
  if (!same_shape(o)) throw DomainError("field shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

MatField& MatField::operator*=(double a) {
  for (auto& v : data_) v *= a;
  return *this;
}

MatField& MatField::axpy(double a, const MatField& o) {
  if (!same_shape(o)) throw DomainError("field shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
  return *this;
}

MatField operator+(MatField a, const MatField& b) { return a += b; }
MatField operator-(MatField a, const MatField& b) { return a -= b; }
MatField operator*(double s, MatField a) { return a *= s; }

double inner(const MatField& a, const MatField& b, const Grid3& g) {
  if (!a.same_shape(b) || a.nodes() != g.nodes()) throw DomainError("inner: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.nodes(); ++i) {
    double t = 0.0;
    const auto A = a[i];
    const auto B = b[i];
    for (Eigen::Index e = 0; e < A.size(); ++e) t += (A.data()[e] * std::conj(B.data()[e])).real();
    acc += g.weight(i) * t;
  }
  return acc;
}

double flat_dot(const MatField& a, const MatField& b) {
  if (!a.same_shape(b)) throw DomainError("flat_dot: shape mismatch");
  double acc = 0.0;
  auto ra = a.raw();
  auto rb = b.raw();
  for (std::size_t i = 0; i < ra.size(); ++i) acc += (ra[i] * std::conj(rb[i])).real();
  return acc;
}

double sup_norm(const MatField& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.nodes(); ++i) m = std::max(m, a[i].norm());
  return m;
}

double sup_norm_weighted(const MatField& a, const Grid3& g, double p) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.nodes(); ++i) m = std::max(m, std::pow(g.y_at(i), p) * a[i].norm());
  return m;
}

MatField d2_apply(const MatField& f, const Grid3& g) {
  return wrap(f.dim(), f.nodes(), periodic_derivative(f.raw(), f.stride(), g, true));
}

MatField d3_apply(const MatField& f, const Grid3& g) {
  return wrap(f.dim(), f.nodes(), periodic_derivative(f.raw(), f.stride(), g, false));
}

MatField del_apply(const MatField& f, const Grid3& g) {
  auto a = periodic_derivative(f.raw(), f.stride(), g, true);
  const auto b = periodic_derivative(f.raw(), f.stride(), g, false);
  const cplx I(0, 1);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (a[i] - I * b[i]);
  return wrap(f.dim(), f.nodes(), std::move(a));
}

MatField dbar_apply(const MatField& f, const Grid3& g) {
  auto a = periodic_derivative(f.raw(), f.stride(), g, true);
  const auto b = periodic_derivative(f.raw(), f.stride(), g, false);
  const cplx I(0, 1);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (a[i] + I * b[i]);
  return wrap(f.dim(), f.nodes(), std::move(a));
}

MatField dy_apply(const MatField& f, const Grid3& g) {
  return wrap(f.dim(), f.nodes(), y_derivative(f.raw(), f.stride(), g));
}

std::vector<cplx> d2_scalar(std::span<const cplx> f, const Grid3& g) { return periodic_derivative(f, 1, g, true); }
std::vector<cplx> d3_scalar(std::span<const cplx> f, const Grid3& g) { return periodic_derivative(f, 1, g, false); }
std::vector<cplx> dy_scalar(std::span<const cplx> f, const Grid3& g) { return y_derivative(f, 1, g); }

HermEig herm_eig(const Mat& s, double tol) {
  const double scale = std::max(1.0, s.norm());
  if ((s - s.adjoint()).norm() > tol * scale) throw DomainError("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (s + s.adjoint())));
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace {

template <class F>
Mat herm_func(const Mat& s, F&& f) {
  const HermEig e = herm_eig(s);
  RVec d(e.values.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = f(e.values[i]);
  return e.vectors * d.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

}  // namespace

Mat herm_exp(const Mat& s) {
  return herm_func(s, [](double x) { return std::exp(x); });
}

Mat herm_log(const Mat& h) {
  return herm_func(h, [](double x) {
    if (x <= 0.0) throw DomainError("herm_log: matrix is not positive definite");
    return std::log(x);
  });
}

Mat herm_pow(const Mat& h, double p) {
  return herm_func(h, [p](double x) {
    if (x <= 0.0) throw DomainError("herm_pow: matrix is not positive definite");
    return std::pow(x, p);
  });
}

double gamma_fn(double x) {
  if (std::abs(x) < 1e-5) return 1.0 + x * (0.5 + x / 6.0);
  return std::expm1(x) / x;
}

namespace {

template <class F>
Mat ad_func_apply(const Mat& s, const Mat& a, F&& f) {
  const HermEig e = herm_eig(s);
  Mat t = e.vectors.adjoint() * a * e.vectors;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) *= f(e.values[i] - e.values[j]);
  return e.vectors * t * e.vectors.adjoint();
}

}  // namespace

Mat gamma_apply(const Mat& s, const Mat& a, int sign) {
  const double sg = sign < 0 ? -1.0 : 1.0;
  return ad_func_apply(s, a, [sg](double d) { return gamma_fn(sg * d); });
}

Mat sqrt_gamma_apply(const Mat& s, const Mat& a, int sign) {
  const double sg = sign < 0 ? -1.0 : 1.0;
  return ad_func_apply(s, a, [sg](double d) { return std::sqrt(gamma_fn(sg * d)); });
}

Mat dexp(const Mat& s, const Mat& ds) {
  const HermEig e = herm_eig(s);
  Mat t = e.vectors.adjoint() * ds * e.vectors;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      t(i, j) *= std::exp(e.values[i]) * gamma_fn(e.values[j] - e.values[i]);
  return e.vectors * t * e.vectors.adjoint();
}

DecayFit weighted_norms(const MatField& s, const Grid3& g, double mu, double y_fit, double y_lo) {
  if (s.nodes() != g.nodes()) throw DomainError("weighted_norms: grid/field mismatch");
  DecayFit out;
  std::vector<double> plane_max(g.ny(), 0.0);
  for (std::size_t i = 0; i < s.nodes(); ++i) {
    const double v = s[i].norm();
    out.sup_weighted = std::max(out.sup_weighted, std::pow(g.y_at(i), -mu) * v);
    plane_max[g.iy_of(i)] = std::max(plane_max[g.iy_of(i)], v);
  }
  std::vector<double> lx, ly;
  for (int k = 0; k < g.ny(); ++k) {
    const double y = g.y()[k];
    if (y < y_lo || y > y_fit || plane_max[k] <= 0.0) continue;
    lx.push_back(std::log(y));
    ly.push_back(std::log(plane_max[k]));
  }
  if (lx.size() >= 3) {
    const double n = double(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
      sx += lx[k];
      sy += ly[k];
      sxx += lx[k] * lx[k];
      sxy += lx[k] * ly[k];
    }
    const double den = n * sxx - sx * sx;
    if (den > 0.0) out.alpha = (n * sxy - sx * sy) / den;
  }
  return out;
}

}  // namespace nahmlab
