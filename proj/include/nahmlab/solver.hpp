#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nahmlab/moment.hpp"
#include "nahmlab/models.hpp"

namespace nahmlab {

/// Real coefficient vector of a Hermitian traceless field in hermitian_basis (node-major).
Eigen::VectorXd to_coeffs(const MatField& s);
MatField from_coeffs(const Eigen::VectorXd& c, int N, std::size_t nodes);

/// Smooth step: 1 for y <= y_c, 0 for y >= 2 y_c.
double smooth_cutoff(double y, double y_c);

enum class Preconditioner { FourierLine, Diagonal };

struct SolverOptions {
  double tol = 1e-6;            // sup y^2 |Omega|_H at t = 0
  double path_tol_factor = 10;  // intermediate t use tol * factor
  double t_step = 0.25;
  double t_step_max = 0.5;
  double t_step_min = 1e-6;
  int max_newton = 25;
  double armijo = 1e-4;
  int max_backtracks = 8;
  double gmres_tol = 1e-4;
  int gmres_restart = 80;
  int gmres_max_iter = 800;
  Preconditioner precond = Preconditioner::FourierLine;
  double precond_shift = 1e-10;  // relative diagonal shift
  int linearization_check_every = 10;
  bool max_principle = true;
  double shift_clamp = 2.0;  // eigenvalue bound on the start shift kappa (frame norm)
  double fit_y_lo_factor = 3.0;  // decay fit over [factor * y_min, fit_y_hi]
  double fit_y_hi = 1.0;
};

struct NewtonRecord {
  double t = 0.0;
  std::vector<double> residual_sup;  // sup y^2 |N_t|
  std::vector<double> merit;         // sqrt(sum (y^2 |N_t|)^2)
  std::vector<int> gmres_iterations;
  std::vector<double> step_length;
  std::vector<double> linearization_check;  // relative FD mismatch at spot checks
  bool converged = false;
};

struct MaxPrincipleReport {
  double bound = 0.0;                   // sup of the comparison solution
  std::vector<double> iterate_sup;      // sup |s| at every accepted Newton iterate
  std::vector<double> converged_sup;    // sup |s| at converged t values
  bool ok = true;                       // converged values within the bound
};

struct SolverState {
  double t = 1.0;
  MatField s;       // correction in the frame: H = frame^dag e^s frame
  MatField frame;   // frame of the shifted background H_b e^kappa
  MatField H;
  double residual_norm = 0.0;
  double start_residual = 0.0;  // |N_1(-kappa)| at the trivial start
  std::size_t clamped_nodes = 0;  // nodes where kappa hit shift_clamp
  std::vector<double> t_schedule;
  std::vector<double> t_failed;
  std::vector<NewtonRecord> history;
  MaxPrincipleReport max_principle;
  DecayFit decay;
  int total_gmres = 0;
};

struct Hitchin2DResult {
  MatField H;  // on the 2D slice
  double residual = 0.0;
  double det_defect = 0.0;
  double dbar_residual = 0.0;
  NewtonRecord history;
};

/// Newton on H = e^s for F_H + [phi, phi^dag_H] = 0 on the periodic 2D slice, starting at the identity.
Hitchin2DResult hitchin2d_solve(const LieContext& ctx, const HiggsData& phi, const Grid3& grid2d,
                                const SolverOptions& opt = {}, double tol = 1e-10);
/// Same with explicit node values of phi.
Hitchin2DResult hitchin2d_solve(const MatField& phi, const Grid3& grid2d, const SolverOptions& opt = {},
                                double tol = 1e-10);

struct BackgroundSpec {
  double y_c = 1.0;
  int order = 0;  // 0 or 1
};

struct BackgroundMetric {
  MatField H;
  MatField frame;  // H = frame^dag frame
  int order = 0;
  double y_c = 1.0;
  std::vector<double> blend;  // beta(y) per y node (1 means pure model)
  int correction_power = -1;  // p in the y^{p+2} correction, -1 if none
  bool far_field_model = false;
};

/// Background from the Nahm or knot model near y = 0 blended into the far field H_inf (given on the 2D slice
/// of the grid) above y_c. Without H_inf the model is used at every y.
BackgroundMetric build_background(const LieContext& ctx, const HiggsData& phi, const MatField* H_inf, const Grid3& grid,
                                  const BackgroundSpec& spec = {});

/// Background H e^{s0} with s0 H-self-adjoint, frame updated accordingly.
BackgroundMetric perturb_background(const BackgroundMetric& b, const MatField& s0);

/// Continuity path t = 1 -> 0 for Ad(e^{s/2}) Omega_H + t s = 0 with Dirichlet s = 0 on both y faces.
SolverState continuity_solve(const MatField& phi, const BackgroundMetric& background, const Grid3& grid,
                             const SolverOptions& opt = {});

/// Knot problem: knot-local phi, background from the knot model metrics. Far field is the model itself.
SolverState knot_solve(const LieContext& ctx, const HiggsData& phi, const Grid3& grid, const SolverOptions& opt = {});

/// max_node |log(H1^{-1} H2)| over nodes with y <= y_max (sets of matching nodes given by y value).
double metric_distance(const MatField& H1, const Grid3& g1, const MatField& H2, const Grid3& g2,
                       double y_max = 1e300);

/// Solution w of -P w = f with w = 0 on both y faces; P is the compact 5-point x Laplacian / 4 plus the y flux
/// second difference.
std::vector<double> comparison_solve(const std::vector<double>& f, const Grid3& g);

/// Recompute sup y^2 |N_t(s)| from scratch.
double continuity_residual(const MatField& phi, const MatField& frame, const MatField& s, double t, const Grid3& g);

}  // namespace nahmlab
