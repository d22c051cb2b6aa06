#include "nahmlab/solver.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <array>
#include <map>
#include <memory>
#include <mutex>

#include "nahmlab/krylov.hpp"
#include "nahmlab/liealg.hpp"

namespace nahmlab {

namespace {

using Index = std::ptrdiff_t;

struct NodeEig {
  RVec lam;
  Mat V;
};

Mat exp_from(const NodeEig& e, double a) {
  RVec d = (a * e.lam).array().exp().matrix();
  return e.V * d.cast<cplx>().asDiagonal() * e.V.adjoint();
}

// d/du exp(a (s + u ds)) at u = 0.
Mat dexp_from(const NodeEig& e, const Mat& ds, double a) {
  Mat t = a * (e.V.adjoint() * ds * e.V);
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j) t(i, j) *= std::exp(a * e.lam[i]) * gamma_fn(a * (e.lam[j] - e.lam[i]));
  return e.V * t * e.V.adjoint();
}

Mat hermitize(const Mat& a) { return 0.5 * (a + a.adjoint()); }

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Owns an in-place batch of 2D complex transforms over the periodic plane.
class PlaneFFT {
 public:
  PlaneFFT(int nx, int nz, int batch) : nx_(nx), nz_(nz), batch_(batch), buf_(std::size_t(nx) * nz * batch) {
    int n[2] = {nz, nx};
    auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fwd_ = fftw_plan_many_dft(2, n, batch, p, nullptr, 1, nx * nz, p, nullptr, 1, nx * nz, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_many_dft(2, n, batch, p, nullptr, 1, nx * nz, p, nullptr, 1, nx * nz, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~PlaneFFT() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  PlaneFFT(const PlaneFFT&) = delete;
  PlaneFFT& operator=(const PlaneFFT&) = delete;

  std::vector<cplx>& data() { return buf_; }
  void forward() { fftw_execute(fwd_); }
  void backward() {
    fftw_execute(bwd_);
    const double s = 1.0 / (double(nx_) * nz_);
    for (auto& v : buf_) v *= s;
  }

 private:
  int nx_, nz_, batch_;
  std::vector<cplx> buf_;
  fftw_plan fwd_{}, bwd_{};
};

double stencil_symbol(int m, int n) {
  const double th = 2.0 * kPi * m / n;
  return (8.0 * std::sin(th) - std::sin(2.0 * th)) * n / 6.0;
}

double compact_symbol(int m, int n) {
  const double s = std::sin(kPi * m / n);
  return 4.0 * s * s * n * n;
}

class FrameProblem {
 public:
  struct Eval {
    MatField H, K, Kinv, Nt, N;
    std::vector<NodeEig> eig;
    std::unique_ptr<MomentOperator> op;
  };

  FrameProblem(const Grid3& g, const MatField& phi, MatField frame, double t)
      : g_(&g), phi_(&phi), k_(std::move(frame)), t_(t) {
    kinv_ = MatField(k_.dim(), k_.nodes());
    for (std::size_t i = 0; i < k_.nodes(); ++i) kinv_[i] = k_.at(i).inverse();
  }

  const Grid3& grid() const { return *g_; }
  double t() const { return t_; }
  void set_t(double t) { t_ = t; }
  const MatField& frame() const { return k_; }

  Eval evaluate(const MatField& s) const {
    const Grid3& g = *g_;
    const int N = k_.dim();
    const Index nodes = Index(g.nodes());
    Eval e;
    e.H = MatField(N, g.nodes());
    e.K = MatField(N, g.nodes());
    e.Kinv = MatField(N, g.nodes());
    e.eig.resize(g.nodes());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < nodes; ++i) {
      Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(s.at(i)));
      NodeEig& ne = e.eig[i];
      ne.lam = es.eigenvalues();
      ne.V = es.eigenvectors();
      const Mat k = k_.at(i);
      e.H[i] = hermitize(k.adjoint() * exp_from(ne, 1.0) * k);
      e.K[i] = exp_from(ne, 0.5) * k;
      e.Kinv[i] = kinv_.at(i) * exp_from(ne, -0.5);
    }
    e.op = std::make_unique<MomentOperator>(g, *phi_, e.H);
    e.Nt = MatField(N, g.nodes());
    e.N = MatField(N, g.nodes());
    const MatField& om = e.op->omega();
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < nodes; ++i) {
      if (g.on_y_boundary(std::size_t(i))) {
        e.N[i] = s[i];
        continue;
      }
      const Mat nt = e.K[i] * om[i] * e.Kinv[i];
      e.Nt[i] = nt;
      e.N[i] = herm_traceless(nt) + t_ * s.at(i);
    }
    return e;
  }

  MatField jacobian(const Eval& e, const MatField& ds) const {
    const Grid3& g = *g_;
    const int N = k_.dim();
    const Index nodes = Index(g.nodes());
    MatField dH(N, g.nodes());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < nodes; ++i) {
      const Mat k = k_.at(i);
      dH[i] = hermitize(k.adjoint() * dexp_from(e.eig[i], ds.at(i), 1.0) * k);
    }
    const MatField dOm = e.op->derivative(dH);
    MatField out(N, g.nodes());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < nodes; ++i) {
      if (g.on_y_boundary(std::size_t(i))) {
        out[i] = ds[i];
        continue;
      }
      const Mat Z = dexp_from(e.eig[i], ds.at(i), 0.5) * exp_from(e.eig[i], -0.5);
      const Mat nt = e.Nt.at(i);
      out[i] = herm_traceless(Z * nt - nt * Z + e.K[i] * dOm[i] * e.Kinv[i]) + t_ * ds.at(i);
    }
    return out;
  }

 private:
  const Grid3* g_;
  const MatField* phi_;
  MatField k_, kinv_;
  double t_;
};

std::vector<double> node_weights(const Grid3& g) {
  std::vector<double> w(g.nodes());
  for (std::size_t i = 0; i < g.nodes(); ++i) w[i] = g.y_at(i) * g.y_at(i);
  return w;
}

double weighted_sup(const MatField& n, const std::vector<double>& w) {
  double m = 0.0;
  for (std::size_t i = 0; i < n.nodes(); ++i) m = std::max(m, w[i] * n[i].norm());
  return m;
}

double weighted_l2(const MatField& n, const std::vector<double>& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n.nodes(); ++i) acc += std::pow(w[i] * n[i].norm(), 2);
  return std::sqrt(acc);
}

// Block-tridiagonal-in-y solve of the x-averaged Jacobian plus the Fourier symbol of the x Laplacian.
class FourierLinePrecond {
 public:
  FourierLinePrecond(const FrameProblem& P, const FrameProblem::Eval& e, double shift)
      : g_(P.grid()), d_(P.frame().dim() * P.frame().dim() - 1), ny_(g_.ny()),
        fft_(g_.nx(), g_.nz(), ny_ * d_) {
    const int N = P.frame().dim();
    const std::size_t plane = g_.plane();
    const int colors = std::min(3, ny_);
    // blocks[k][0..2]: coupling of row plane k to column planes k-1, k, k+1.
    std::vector<std::array<Eigen::MatrixXd, 3>> blocks(ny_);
    for (auto& b : blocks)
      for (auto& m : b) m = Eigen::MatrixXd::Zero(d_, d_);
    const auto& basis = hermitian_basis(N);
    for (int c = 0; c < colors; ++c)
      for (int comp = 0; comp < d_; ++comp) {
        MatField probe(N, g_.nodes());
        for (std::size_t i = 0; i < g_.nodes(); ++i)
          if (g_.iy_of(i) % 3 == c) probe[i] = basis[comp];
        const MatField resp = P.jacobian(e, probe);
        for (int k = 0; k < ny_; ++k) {
          int found = -2;
          for (int o = -1; o <= 1; ++o)
            if (k + o >= 0 && k + o < ny_ && (k + o) % 3 == c) found = o;
          if (found == -2) continue;
          Eigen::VectorXd avg = Eigen::VectorXd::Zero(d_);
          for (std::size_t p = 0; p < plane; ++p) avg += herm_coeffs(resp.at(std::size_t(k) * plane + p));
          blocks[k][found + 1].col(comp) = avg / double(plane);
        }
      }
    double scale = 0.0;
    for (const auto& b : blocks) scale = std::max(scale, b[1].norm());
    const double delta = shift * std::max(scale, 1.0);

    const int nx = g_.nx(), nz = g_.nz();
    lu_.resize(std::size_t(nx) * nz);
    lower_.resize(ny_);
    upper_.resize(ny_);
    for (int k = 0; k < ny_; ++k) {
      lower_[k] = blocks[k][0].cast<cplx>();
      upper_[k] = blocks[k][2].cast<cplx>();
    }
    for (int mz = 0; mz < nz; ++mz)
      for (int mx = 0; mx < nx; ++mx) {
        const double lam = 0.25 * (std::pow(stencil_symbol(mx, nx), 2) + std::pow(stencil_symbol(mz, nz), 2));
        auto& fac = lu_[std::size_t(mz) * nx + mx];
        fac.reserve(ny_);
        Eigen::MatrixXcd prev;
        for (int k = 0; k < ny_; ++k) {
          Eigen::MatrixXcd D = blocks[k][1].cast<cplx>();
          const bool boundary = !g_.is2d() && (k == 0 || k == ny_ - 1);
          if (!boundary) D.diagonal().array() += lam + delta;
          if (k > 0) D -= lower_[k] * fac.back().solve(upper_[k - 1]);
          fac.emplace_back(D);
        }
      }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) {
    const std::size_t plane = g_.plane();
    auto& buf = fft_.data();
    for (int k = 0; k < ny_; ++k)
      for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < d_; ++c)
          buf[(std::size_t(k) * d_ + c) * plane + p] = u[(std::size_t(k) * plane + p) * d_ + c];
    fft_.forward();
    const Index modes = Index(plane);
#pragma omp parallel for schedule(static)
    for (Index m = 0; m < modes; ++m) {
      const auto& fac = lu_[m];
      std::vector<Eigen::VectorXcd> y(ny_);
      for (int k = 0; k < ny_; ++k) {
        Eigen::VectorXcd b(d_);
        for (int c = 0; c < d_; ++c) b[c] = buf[(std::size_t(k) * d_ + c) * plane + m];
        if (k > 0) b -= lower_[k] * fac[k - 1].solve(y[k - 1]);
        y[k] = b;
      }
      Eigen::VectorXcd x = fac[ny_ - 1].solve(y[ny_ - 1]);
      for (int k = ny_ - 1; k >= 0; --k) {
        if (k < ny_ - 1) x = fac[k].solve(Eigen::VectorXcd(y[k] - upper_[k] * x));
        for (int c = 0; c < d_; ++c) buf[(std::size_t(k) * d_ + c) * plane + m] = x[c];
      }
    }
    fft_.backward();
    Eigen::VectorXd out(u.size());
    for (int k = 0; k < ny_; ++k)
      for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < d_; ++c)
          out[(std::size_t(k) * plane + p) * d_ + c] = buf[(std::size_t(k) * d_ + c) * plane + p].real();
    return out;
  }

 private:
  const Grid3& g_;
  int d_, ny_;
  PlaneFFT fft_;
  std::vector<std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>>> lu_;
  std::vector<Eigen::MatrixXcd> lower_, upper_;
};

struct NewtonOutcome {
  bool converged = false;
  MatField s;
  NewtonRecord record;
  int gmres_total = 0;
};

using IterateHook = std::function<void(const MatField&)>;

NewtonOutcome newton_solve(const FrameProblem& P, MatField s, double tol, const SolverOptions& opt,
                           const IterateHook& hook) {
  const Grid3& g = P.grid();
  const int N = s.dim();
  const int d = N * N - 1;
  const auto w = node_weights(g);
  Eigen::VectorXd D(g.nodes() * d);
  for (std::size_t i = 0; i < g.nodes(); ++i) D.segment(i * d, d).setConstant(w[i]);

  NewtonOutcome out;
  out.record.t = P.t();
  auto ev = P.evaluate(s);
  double merit = weighted_l2(ev.N, w);
  for (int it = 0;; ++it) {
    const double sup = weighted_sup(ev.N, w);
    out.record.residual_sup.push_back(sup);
    out.record.merit.push_back(merit);
    if (hook) hook(s);
    if (sup <= tol) {
      out.converged = true;
      break;
    }
    if (it >= opt.max_newton) break;

    std::unique_ptr<FourierLinePrecond> M;
    if (opt.precond == Preconditioner::FourierLine) M = std::make_unique<FourierLinePrecond>(P, ev, opt.precond_shift);
    const LinearOp A = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return D.cwiseProduct(to_coeffs(P.jacobian(ev, from_coeffs(v, N, g.nodes()))));
    };
    const LinearOp Minv = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      Eigen::VectorXd u = v.cwiseQuotient(D);
      return M ? M->apply(u) : u;
    };
    const Eigen::VectorXd rhs = -D.cwiseProduct(to_coeffs(ev.N));
    const GmresResult lin = gmres(A, rhs, Minv, {opt.gmres_tol, opt.gmres_restart, opt.gmres_max_iter});
    out.record.gmres_iterations.push_back(lin.iterations);
    out.gmres_total += lin.iterations;
    const MatField ds = from_coeffs(lin.x, N, g.nodes());

    if (opt.linearization_check_every > 0 && it % opt.linearization_check_every == 0) {
      const double eps = 1e-6 * std::max(1.0, sup_norm(s)) / std::max(sup_norm(ds), 1e-300);
      MatField sp = s, sm = s;
      sp.axpy(eps, ds);
      sm.axpy(-eps, ds);
      MatField fd = P.evaluate(sp).N - P.evaluate(sm).N;
      fd *= 1.0 / (2.0 * eps);
      const MatField jd = P.jacobian(ev, ds);
      out.record.linearization_check.push_back(weighted_l2(fd - jd, w) / std::max(weighted_l2(jd, w), 1e-300));
    }

    double lam = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= opt.max_backtracks; ++bt, lam *= 0.5) {
      MatField trial = s;
      trial.axpy(lam, ds);
      FrameProblem::Eval ev_try;
      try {
        ev_try = P.evaluate(trial);
      } catch (const DomainError&) {
        continue;  // step left the admissible set
      }
      const double m_try = weighted_l2(ev_try.N, w);
      if (m_try <= std::sqrt(std::max(0.0, 1.0 - 2.0 * opt.armijo * lam)) * merit) {
        s = std::move(trial);
        ev = std::move(ev_try);
        merit = m_try;
        accepted = true;
        break;
      }
    }
    out.record.step_length.push_back(accepted ? lam : 0.0);
    if (!accepted) break;
  }
  out.record.converged = out.converged;
  out.s = std::move(s);
  return out;
}

MatField identity_field(int N, std::size_t nodes) { return MatField::constant(identity(N), nodes); }

double frame_norm(const Mat& k, const Mat& kinv, const Mat& a) { return (k * a * kinv).norm(); }

}  // namespace

Eigen::VectorXd to_coeffs(const MatField& s) {
  const int N = s.dim();
  const int d = N * N - 1;
  Eigen::VectorXd out(s.nodes() * d);
  for (std::size_t i = 0; i < s.nodes(); ++i) out.segment(i * d, d) = herm_coeffs(s.at(i));
  return out;
}

MatField from_coeffs(const Eigen::VectorXd& c, int N, std::size_t nodes) {
  const int d = N * N - 1;
  if (c.size() != Index(nodes) * d) throw DomainError("from_coeffs: size mismatch");
  MatField out(N, nodes);
  for (std::size_t i = 0; i < nodes; ++i) out[i] = herm_from_coeffs(N, c.data() + i * d);
  return out;
}

double smooth_cutoff(double y, double y_c) {
  if (y <= y_c) return 1.0;
  if (y >= 2.0 * y_c) return 0.0;
  const double u = (2.0 * y_c - y) / y_c;  // 1 at y_c, 0 at 2 y_c
  const auto f = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
  return f(u) / (f(u) + f(1.0 - u));
}

Hitchin2DResult hitchin2d_solve(const MatField& phi, const Grid3& grid2d, const SolverOptions& opt, double tol) {
  if (!grid2d.is2d()) throw DomainError("hitchin2d: grid must be a 2D slice");
  if (phi.nodes() != grid2d.nodes()) throw DomainError("hitchin2d: grid/field mismatch");
  const int N = phi.dim();
  const FrameProblem P(grid2d, phi, identity_field(N, grid2d.nodes()), 0.0);
  SolverOptions o = opt;
  o.max_newton = std::max(opt.max_newton, 40);
  o.gmres_tol = std::min(opt.gmres_tol, 1e-6);
  NewtonOutcome res = newton_solve(P, MatField(N, grid2d.nodes()), tol, o, {});
  Hitchin2DResult out;
  out.history = res.record;
  if (!res.converged) throw SolverError("hitchin2d: Newton did not converge", res.record.residual_sup);
  const auto ev = P.evaluate(res.s);
  out.H = ev.H;
  out.residual = res.record.residual_sup.back();
  for (std::size_t i = 0; i < out.H.nodes(); ++i)
    out.det_defect = std::max(out.det_defect, std::abs(out.H.at(i).determinant() - 1.0));
  return out;
}

Hitchin2DResult hitchin2d_solve(const LieContext& ctx, const HiggsData& phi, const Grid3& grid2d,
                                const SolverOptions& opt, double tol) {
  if (phi.n != ctx.n) throw DomainError("hitchin2d: rank mismatch");
  const MatField pf = phi_field(phi, grid2d);
  Hitchin2DResult out = hitchin2d_solve(pf, grid2d, opt, tol);
  out.dbar_residual = phi.dbar_residual();
  return out;
}

namespace {

// Graded pieces of the model residual in the model frame for constant Hitchin-section data:
// Omega_hat(y) = sum_p F_p y^p.
std::map<int, Mat> model_residual_grades(const LieContext& ctx, const Mat& phi) {
  const int N = ctx.dim();
  std::map<int, Mat> phi_m;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      if (std::abs(phi(a, b)) > 0.0) {
        auto [it, inserted] = phi_m.try_emplace(a - b, Mat::Zero(N, N));
        it->second(a, b) = phi(a, b);
      }
  std::map<int, Mat> F;
  for (const auto& [m, A] : phi_m)
    for (const auto& [m2, B] : phi_m) {
      auto [it, inserted] = F.try_emplace(m + m2, Mat::Zero(N, N));
      it->second += commutator(A, B.adjoint());
    }
  // The y part of the model cancels the y^{-2} term exactly.
  if (auto it = F.find(-2); it != F.end()) {
    Mat e = Mat::Zero(N, N);
    for (int a = 0; a < N; ++a) e(a, a) = double(-ctx.n + 2 * a);
    it->second += e;
    if (it->second.norm() > 1e-12) throw ConsistencyError("model metric does not cancel the leading y^-2 term");
    F.erase(it);
  }
  return F;
}

}  // namespace

BackgroundMetric build_background(const LieContext& ctx, const HiggsData& phi, const MatField* H_inf, const Grid3& g,
                                  const BackgroundSpec& spec) {
  if (g.is2d()) throw DomainError("background: grid must be 3D");
  if (spec.order < 0 || spec.order > 1) throw DomainError("background: improvement order must be 0 or 1");
  if (!(spec.y_c > 0.0)) throw DomainError("background: y_c must be positive");
  if (phi.n != ctx.n) throw DomainError("background: rank mismatch");
  const int N = ctx.dim();
  const std::size_t plane = g.plane();
  if (H_inf && (H_inf->nodes() != plane || H_inf->dim() != N))
    throw DomainError("background: far-field metric must live on the 2D slice of the grid");

  BackgroundMetric out;
  out.order = spec.order;
  out.y_c = spec.y_c;
  out.far_field_model = (H_inf == nullptr);
  out.H = MatField(N, g.nodes());
  out.frame = MatField(N, g.nodes());
  out.blend.resize(g.ny());
  for (int k = 0; k < g.ny(); ++k) out.blend[k] = H_inf ? smooth_cutoff(g.y()[k], spec.y_c) : 1.0;

  // Knot profiles, one per knot.
  std::vector<TodaProfile> profiles;
  if (phi.kind == HiggsKind::KnotLocal) {
    for (const auto& kp : phi.knots) {
      if (int(kp.weights.size()) != ctx.n) throw DomainError("background: knot weight count must equal n");
      if (ctx.n == 1)
        profiles.push_back(sl2_knot_profile(ctx, kp.weights[0]));
      else if (ctx.n == 2)
        profiles.push_back(sl3_knot_profile(ctx, kp.weights[0] + 1, kp.weights[1] + 1));
      else
        profiles.push_back(toda_bvp_solve(ctx, kp.weights, toda_default_grid()));
    }
  }

  // Optional algebraic correction y^{p+2} S in the model frame.
  Mat S;
  if (spec.order == 1) {
    if (phi.kind != HiggsKind::HitchinSection)
      throw DomainError("background: the order-1 correction needs Hitchin-section data");
    for (const auto& q : phi.q)
      if (!trig_is_constant(q)) throw DomainError("background: the order-1 correction needs constant differentials");
    const auto F = model_residual_grades(ctx, phi.eval(0.0, 0.0));
    for (const auto& [p, Fp] : F) {
      if (Fp.norm() <= 1e-12) continue;
      const Eigen::MatrixXd C = casimir_matrix(ctx);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (C + C.transpose()));
      const Eigen::VectorXd f = herm_coeffs(Fp);
      const double shift = double((p + 1) * (p + 2));
      Eigen::VectorXd sol = Eigen::VectorXd::Zero(f.size());
      for (Index j = 0; j < es.eigenvalues().size(); ++j) {
        const Eigen::VectorXd v = es.eigenvectors().col(j);
        const double proj = v.dot(f);
        const double den = es.eigenvalues()[j] - shift;
        if (std::abs(den) < 1e-8) {
          if (std::abs(proj) > 1e-10 * std::max(1.0, f.norm()))
            throw DomainError("background: the leading error term y^" + std::to_string(p) +
                              " sits at the indicial root " + std::to_string(p + 2) +
                              "; a y^j log y correction would be needed");
          continue;
        }
        sol -= v * (proj / den);
      }
      S = herm_from_coeffs(N, sol.data());
      out.correction_power = p;
      break;
    }
  }

  const Mat e0 = ctx.sl2_zero;
  const Index nodes = Index(g.nodes());
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
  for (Index i = 0; i < nodes; ++i) {
    const double y = g.y_at(std::size_t(i));
    const int iy = g.iy_of(std::size_t(i));
    const double beta = out.blend[iy];
    // Diagonal log of the model metric.
    RVec lam(N);
    for (int a = 0; a < N; ++a) lam[a] = -e0(a, a).real() * std::log(y);
    for (std::size_t kk = 0; kk < profiles.size(); ++kk) {
      const double r = std::max(std::abs(knot_coordinate(phi.knots[kk], g.x2(std::size_t(i)), g.x3(std::size_t(i)))), 1e-14);
      const Mat hm = knot_model_metric(ctx, profiles[kk], KnotChart::from_ry(r, y));
      for (int a = 0; a < N; ++a) {
        const double v = hm(a, a).real();
        if (!(v > 0.0) || !std::isfinite(v)) bad = true;
        lam[a] += std::log(v) + e0(a, a).real() * std::log(y);
      }
    }
    Mat halfexp = Mat::Zero(N, N);
    for (int a = 0; a < N; ++a) halfexp(a, a) = std::exp(0.5 * beta * lam[a]);
    Mat k = halfexp;
    if (H_inf && beta < 1.0) k = herm_pow((*H_inf).at(std::size_t(i) % plane), 0.5 * (1.0 - beta)) * halfexp;
    if (out.correction_power >= 0) {
      const double c = smooth_cutoff(y, spec.y_c) * std::pow(y, out.correction_power + 2);
      k = herm_exp(Mat(0.5 * c * S)) * k;
    }
    out.frame[i] = k;
    out.H[i] = hermitize(k.adjoint() * k);
  }
  if (bad) throw DomainError("background: knot model metric is not finite and positive");
  return out;
}

BackgroundMetric perturb_background(const BackgroundMetric& b, const MatField& s0) {
  if (!b.H.same_shape(s0)) throw DomainError("perturb_background: shape mismatch");
  BackgroundMetric out = b;
  for (std::size_t i = 0; i < s0.nodes(); ++i) {
    const Mat k = b.frame.at(i);
    const Mat sh = hermitize(k * s0.at(i) * k.inverse());
    const Mat kn = herm_exp(Mat(0.5 * sh)) * k;
    out.frame[i] = kn;
    out.H[i] = hermitize(kn.adjoint() * kn);
  }
  return out;
}

std::vector<double> comparison_solve(const std::vector<double>& f, const Grid3& g) {
  if (g.is2d()) throw DomainError("comparison problem needs a 3D grid");
  if (f.size() != g.nodes()) throw DomainError("comparison problem: size mismatch");
  const int nx = g.nx(), nz = g.nz(), ny = g.ny();
  const std::size_t plane = g.plane();
  const auto& y = g.y();
  PlaneFFT fft(nx, nz, ny);
  auto& buf = fft.data();
  for (std::size_t i = 0; i < f.size(); ++i) buf[i] = f[i];
  fft.forward();
  const Index modes = Index(plane);
#pragma omp parallel for schedule(static)
  for (Index m = 0; m < modes; ++m) {
    const int mx = int(m % nx), mz = int(m / nx);
    const double lam = 0.25 * (compact_symbol(mx, nx) + compact_symbol(mz, nz));
    // Thomas algorithm on interior planes 1..ny-2, Dirichlet at both ends.
    const int n = ny - 2;
    std::vector<double> a(n), b(n), c(n);
    std::vector<cplx> r(n);
    for (int j = 0; j < n; ++j) {
      const int k = j + 1;
      const double w = g.y_weight(k);
      const double up = 1.0 / ((y[k + 1] - y[k]) * w), dn = 1.0 / ((y[k] - y[k - 1]) * w);
      a[j] = -dn;
      c[j] = -up;
      b[j] = lam + up + dn;
      r[j] = buf[std::size_t(k) * plane + m];
    }
    for (int j = 1; j < n; ++j) {
      const double mlt = a[j] / b[j - 1];
      b[j] -= mlt * c[j - 1];
      r[j] -= mlt * r[j - 1];
    }
    std::vector<cplx> x(n);
    x[n - 1] = r[n - 1] / b[n - 1];
    for (int j = n - 2; j >= 0; --j) x[j] = (r[j] - c[j] * x[j + 1]) / b[j];
    buf[m] = 0.0;
    buf[std::size_t(ny - 1) * plane + m] = 0.0;
    for (int j = 0; j < n; ++j) buf[std::size_t(j + 1) * plane + m] = x[j];
  }
  fft.backward();
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = buf[i].real();
  return out;
}

double continuity_residual(const MatField& phi, const MatField& frame, const MatField& s, double t, const Grid3& g) {
  const FrameProblem P(g, phi, frame, t);
  return weighted_sup(P.evaluate(s).N, node_weights(g));
}

SolverState continuity_solve(const MatField& phi, const BackgroundMetric& background, const Grid3& g,
                             const SolverOptions& opt) {
  if (g.is2d()) throw DomainError("continuity solve needs a 3D grid");
  if (!background.H.same_shape(phi) || phi.nodes() != g.nodes()) throw DomainError("continuity solve: grid/field mismatch");
  const int N = phi.dim();
  const Index nodes = Index(g.nodes());

  // Trivial start: kappa = Omega_{H_b}, background shifted to H_b e^kappa, s = -kappa at t = 1.
  const MomentOperator op_b(g, phi, background.H);
  // Under-resolved singular backgrounds can make kappa large enough to overflow e^kappa; its spectrum is
  // clamped there and t = 1 is then solved by Newton instead of being exact.
  MatField kappa(N, g.nodes()), frame(N, g.nodes());
  std::size_t clamped = 0;
#pragma omp parallel for schedule(static) reduction(+ : clamped)
  for (Index i = 0; i < nodes; ++i) {
    const Mat k = background.frame.at(i);
    Mat kh = Mat::Zero(N, N);
    if (!g.on_y_boundary(std::size_t(i))) kh = herm_traceless(k * op_b.omega()[i] * k.inverse());
    if (kh.norm() > opt.shift_clamp) {
      HermEig e = herm_eig(kh);
      for (Index a = 0; a < e.values.size(); ++a) e.values[a] = std::clamp(e.values[a], -opt.shift_clamp, opt.shift_clamp);
      kh = herm_traceless(e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint());
      ++clamped;
    }
    kappa[i] = kh;
    frame[i] = herm_exp(Mat(0.5 * kh)) * k;
  }
  MatField s = kappa;
  s *= -1.0;

  SolverState st;
  st.frame = frame;
  st.clamped_nodes = clamped;
  FrameProblem P(g, phi, frame, 1.0);
  const auto w = node_weights(g);
  st.start_residual = weighted_sup(P.evaluate(s).N, w);

  // Scalar comparison bound from |Omega| of the shifted background.
  std::vector<double> bound_field;
  if (opt.max_principle) {
    MatField Hm(N, g.nodes());
    for (Index i = 0; i < nodes; ++i) Hm[i] = hermitize(frame.at(i).adjoint() * frame.at(i));
    const MomentOperator op_m(g, phi, Hm);
    std::vector<double> f(g.nodes(), 0.0);
    for (Index i = 0; i < nodes; ++i)
      if (!g.on_y_boundary(std::size_t(i)))
        f[i] = frame_norm(frame.at(i), frame.at(i).inverse(), op_m.omega().at(i));
    bound_field = comparison_solve(f, g);
    st.max_principle.bound = *std::max_element(bound_field.begin(), bound_field.end());
  }
  auto sup_s = [&](const MatField& x) { return sup_norm(x); };
  const IterateHook hook = [&](const MatField& x) {
    if (opt.max_principle) st.max_principle.iterate_sup.push_back(sup_s(x));
  };

  std::vector<double> all_history;
  double t = 1.0, dt = opt.t_step;
  if (clamped > 0) {
    NewtonOutcome res = newton_solve(P, s, opt.tol * opt.path_tol_factor, opt, hook);
    st.total_gmres += res.gmres_total;
    all_history.insert(all_history.end(), res.record.residual_sup.begin(), res.record.residual_sup.end());
    st.history.push_back(res.record);
    if (!res.converged) throw SolverError("continuity path: Newton failed at t = 1 after clamping the start shift", all_history);
    s = std::move(res.s);
  }
  st.t_schedule.push_back(1.0);
  if (opt.max_principle) {
    st.max_principle.converged_sup.push_back(sup_s(s));
  }
  while (t > 0.0) {
    const double t_new = std::max(0.0, t - dt);
    P.set_t(t_new);
    const double tol_here = t_new == 0.0 ? opt.tol : opt.tol * opt.path_tol_factor;
    NewtonOutcome res = newton_solve(P, s, tol_here, opt, hook);
    st.total_gmres += res.gmres_total;
    all_history.insert(all_history.end(), res.record.residual_sup.begin(), res.record.residual_sup.end());
    st.history.push_back(res.record);
    if (res.converged) {
      s = std::move(res.s);
      t = t_new;
      st.t_schedule.push_back(t);
      if (opt.max_principle) st.max_principle.converged_sup.push_back(sup_s(s));
      dt = std::min(2.0 * dt, opt.t_step_max);
    } else {
      st.t_failed.push_back(t_new);
      dt *= 0.5;
      if (dt < opt.t_step_min)
        throw SolverError("continuity path stalled at t = " + std::to_string(t) + " (t-step below " +
                              std::to_string(opt.t_step_min) + ")",
                          all_history);
    }
  }

  st.t = 0.0;
  st.s = s;
  const auto ev = P.evaluate(s);
  st.H = ev.H;
  st.residual_norm = weighted_sup(ev.N, w);
  if (opt.max_principle) {
    const double b = st.max_principle.bound;
    for (double v : st.max_principle.converged_sup)
      if (v > b * (1.0 + 1e-9) + 1e-12) st.max_principle.ok = false;
  }

  // Total correction relative to the background, for the decay fit.
  MatField s_tot(N, g.nodes());
  for (Index i = 0; i < nodes; ++i) {
    const Mat k = background.frame.at(i);
    const Mat ki = k.inverse();
    s_tot[i] = herm_log(hermitize(ki.adjoint() * st.H.at(i) * ki));
  }
  st.decay = weighted_norms(s_tot, g, 0.5, opt.fit_y_hi, opt.fit_y_lo_factor * g.y_min());
  return st;
}

SolverState knot_solve(const LieContext& ctx, const HiggsData& phi, const Grid3& g, const SolverOptions& opt) {
  if (phi.kind != HiggsKind::KnotLocal || phi.knots.empty()) throw DomainError("knot solve needs knot-local Higgs data");
  for (const auto& q : phi.q)
    for (const auto& term : q)
      if (std::abs(term.coef) > 0.0)
        throw DomainError("knot solve supports vanishing differentials only (no flat far-field metric otherwise)");
  const BackgroundMetric b = build_background(ctx, phi, nullptr, g, {});
  const MatField pf = phi_field(phi, g);
  return continuity_solve(pf, b, g, opt);
}

double metric_distance(const MatField& H1, const Grid3& g1, const MatField& H2, const Grid3& g2, double y_max) {
  if (g1.nx() != g2.nx() || g1.nz() != g2.nz()) throw DomainError("metric_distance: periodic grids differ");
  double worst = 0.0;
  std::size_t matched = 0;
  for (int k1 = 0; k1 < g1.ny(); ++k1) {
    const double y = g1.y()[k1];
    if (y > y_max) continue;
    int k2 = -1;
    for (int k = 0; k < g2.ny(); ++k)
      if (std::abs(g2.y()[k] - y) <= 1e-10 * y) k2 = k;
    if (k2 < 0) continue;
    for (int iz = 0; iz < g1.nz(); ++iz)
      for (int ix = 0; ix < g1.nx(); ++ix) {
        const Mat a = H1.at(g1.index(ix, iz, k1));
        const Mat b = H2.at(g2.index(ix, iz, k2));
        const Mat am = herm_pow(a, -0.5);
        worst = std::max(worst, herm_log(hermitize(am * b * am)).norm());
        ++matched;
      }
  }
  if (matched == 0) throw DomainError("metric_distance: no matching nodes");
  return worst;
}

}  // namespace nahmlab
