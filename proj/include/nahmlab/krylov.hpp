#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace nahmlab {

using LinearOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct GmresOptions {
  double rel_tol = 1e-8;
  int restart = 60;
  int max_iter = 600;
};

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
  std::vector<double> history;
};

/// Restarted GMRES for A M^{-1} u = b with x = M^{-1} u. Pass an empty precond for M = I.
GmresResult gmres(const LinearOp& A, const Eigen::VectorXd& b, const LinearOp& precond, const GmresOptions& opt = {});

}  // namespace nahmlab
