#pragma once

#include <functional>
#include <vector>

#include "nahmlab/liealg.hpp"

namespace nahmlab {

/// exp(-log y e0) = diag(y^-n, y^-n+2, ..., y^n).
Mat nahm_model_metric(const LieContext& ctx, double y);

/// Half-space coordinates around a knot point.
struct KnotChart {
  double r = 0, y = 0, R = 0, psi = 0, sigma = 0, theta = 0;

  static KnotChart from_ry(double r, double y, double theta = 0.0);
  static KnotChart from_polar(double R, double psi, double theta = 0.0);
};

/// Solution of the repulsive Toda system q_i'' = sum_j A_ij e^{q_j}, q = A chi.
class TodaProfile {
 public:
  enum class Source { ClosedForm, NumericBVP };
  using ExtFn = std::function<std::vector<long double>(long double)>;

  TodaProfile(const LieContext& ctx, std::vector<int> weights, Source source, ExtFn chi_ext);

  int n() const { return int(weights_.size()); }
  const std::vector<int>& weights() const { return weights_; }
  Source source() const { return source_; }

  std::vector<double> chi(double sigma) const;
  std::vector<double> q(double sigma) const;
  /// Extended-precision evaluation (closed forms are evaluated in long double throughout).
  std::vector<long double> chi_ext(long double sigma) const { return chi_fn_(sigma); }
  std::vector<long double> q_ext(long double sigma) const;

  /// Collocation grid and values (numeric profiles only).
  std::vector<double> sigma_nodes;
  std::vector<std::vector<double>> q_nodes;      // [node][i]
  std::vector<std::vector<double>> residual_nodes;  // discrete collocation residual

 private:
  Eigen::MatrixXi cartan_;
  std::vector<int> weights_;
  Source source_;
  ExtFn chi_fn_;
};

TodaProfile sl2_knot_profile(const LieContext& ctx, int r);
TodaProfile sl3_knot_profile(const LieContext& ctx, int m1, int m2);

/// Log-graded sigma grid: spacing min(rel * sigma, max_step).
std::vector<double> toda_default_grid(double sigma_min = 1e-3, double sigma_max = 12.0, double rel = 2e-3,
                                      double max_step = 4e-3);

/// Newton on second-order collocation with Dirichlet asymptote at sigma_min and the limit slope at sigma_max.
TodaProfile toda_bvp_solve(const LieContext& ctx, const std::vector<int>& weights, const std::vector<double>& sigma_grid);

/// max |q_i'' - sum_j A_ij e^{q_j}| on [lo, hi]. Closed forms use a Richardson finite-difference oracle;
/// numeric profiles report the collocation residual at grid nodes in the range.
double toda_residual(const TodaProfile& p, double lo, double hi, int samples = 400);

/// max_j |q_j^a - q_j^b| over [lo, hi], at the collocation nodes of a numeric profile when there is one.
double toda_profile_distance(const TodaProfile& a, const TodaProfile& b, double lo, double hi, int samples = 400);

/// max_j |q_j(sigma) + 2 log sigma - log B_j|.
double toda_boundary_defect(const TodaProfile& p, double sigma);

/// Diagonal model metric exp(sum_i (chi_i - 2 sum_j Ainv_ij (r_j+1) log r) H_i).
Mat knot_model_metric(const LieContext& ctx, const TodaProfile& profile, const KnotChart& chart);

/// lambda_{k+1}/lambda_k for k = 1..n at a chart point.
std::vector<double> lambda_ratios(const LieContext& ctx, const TodaProfile& profile, const KnotChart& chart);

struct LambdaRatioReport {
  double sup = 0.0;                 // over the supplied samples
  std::vector<double> along_R;      // max ratio at R = 2^-k, psi = pi/4
  std::vector<double> along_psi;    // max ratio at psi = 2^-k, R = 1
  double at_small_R = 0.0;          // R = 1e-4, psi = pi/4
  double at_small_psi = 0.0;        // psi = 1e-4, R = 1
  bool limits_ok = false;           // both sequences decrease to below 1e-3
};

LambdaRatioReport lambda_ratio_bound(const LieContext& ctx, const TodaProfile& profile,
                                     const std::vector<KnotChart>& ball_samples);

}  // namespace nahmlab
