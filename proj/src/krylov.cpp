#include "nahmlab/krylov.hpp"

#include <cmath>

namespace nahmlab {

GmresResult gmres(const LinearOp& A, const Eigen::VectorXd& b, const LinearOp& precond, const GmresOptions& opt) {
  const auto apply_m = [&](const Eigen::VectorXd& v) { return precond ? precond(v) : v; };
  GmresResult res;
  res.x = Eigen::VectorXd::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  const int m = opt.restart;
  Eigen::VectorXd r = b;
  double beta = bnorm;
  while (res.iterations < opt.max_iter) {
    std::vector<Eigen::VectorXd> V{r / beta};
    Eigen::MatrixXd Hh = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd gvec = Eigen::VectorXd::Zero(m + 1);
    gvec[0] = beta;
    int j = 0;
    for (; j < m && res.iterations < opt.max_iter; ++j) {
      ++res.iterations;
      Eigen::VectorXd w = A(apply_m(V[j]));
      // Modified Gram-Schmidt with one reorthogonalization pass.
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const double h = V[i].dot(w);
          Hh(i, j) += h;
          w -= h * V[i];
        }
      Hh(j + 1, j) = w.norm();
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * Hh(i, j) + sn[i] * Hh(i + 1, j);
        Hh(i + 1, j) = -sn[i] * Hh(i, j) + cs[i] * Hh(i + 1, j);
        Hh(i, j) = t;
      }
      const double den = std::hypot(Hh(j, j), Hh(j + 1, j));
      cs[j] = den == 0.0 ? 1.0 : Hh(j, j) / den;
      sn[j] = den == 0.0 ? 0.0 : Hh(j + 1, j) / den;
      const double hj1 = Hh(j + 1, j);
      Hh(j, j) = den;
      Hh(j + 1, j) = 0.0;
      gvec[j + 1] = -sn[j] * gvec[j];
      gvec[j] = cs[j] * gvec[j];
      const double rel = std::abs(gvec[j + 1]) / bnorm;
      res.history.push_back(rel);
      if (rel <= opt.rel_tol || hj1 == 0.0) {
        ++j;
        break;
      }
      V.push_back(w / hj1);
    }
    Eigen::VectorXd y = Hh.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(gvec.head(j));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(b.size());
    for (int i = 0; i < j; ++i) u += y[i] * V[i];
    res.x += apply_m(u);
    r = b - A(res.x);
    beta = r.norm();
    res.rel_residual = beta / bnorm;
    if (res.rel_residual <= opt.rel_tol * 1.0001) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace nahmlab
