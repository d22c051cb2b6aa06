#pragma once

#include <random>
#include <vector>

#include "nahmlab/solver.hpp"

namespace nahmlab {

/// Second variation of M(K e^{ts}, K) at one t, by the two routes.
struct SecondVariation {
  double direct = 0.0;          // sum_w Re Tr(s L_{H_t} s), Gateaux route
  double sum_of_squares = 0.0;  // |del_A s|^2 + |dy_A s|^2 + |[phi^dag_H, s]|^2
  double boundary = 0.0;        // Re Tr(s dy_A s) at y = Y minus at y = y_min (x directions are periodic)
  double eps_quad = 0.0;        // |direct - sum_of_squares - boundary| plus roundoff
};

struct FunctionalReport {
  double value = 0.0;  // M(H, K)
  std::vector<double> u_nodes, u_weights;  // Gauss-Legendre on [0, 1]
  std::vector<double> t_samples;
  std::vector<double> first_variation;  // m'(t)
  std::vector<SecondVariation> second_variation;
  double eps_quad = 0.0;  // max over samples
};

/// s = log(K^{-1} H), checked traceless and zero on both y faces.
MatField relative_log(const MatField& H, const MatField& K, const Grid3& g);

/// m'(t) = sum_w Re Tr(s Omega_{K e^{ts}}).
double first_variation(const MatField& K, const MatField& s, const MatField& phi, const Grid3& g, double t);
SecondVariation second_variation(const MatField& K, const MatField& s, const MatField& phi, const Grid3& g, double t);

/// M(K e^{ts}, K) = t * int_0^1 m'(t u) du by Gauss-Legendre with the given node count (8 or 16).
double donaldson_along(const MatField& K, const MatField& s, const MatField& phi, const Grid3& g, double t,
                       int quad_nodes = 8);

FunctionalReport donaldson_value(const MatField& H, const MatField& K, const MatField& phi, const Grid3& g,
                                 std::vector<double> t_samples = {0.0, 0.25, 0.5, 0.75, 1.0}, int quad_nodes = 8);

/// Smooth random direction k^{-1} s_hat k with s_hat Hermitian traceless, a sin bump in log y (zero on both faces)
/// times low Fourier modes, and sup |s_hat| equal to amplitude.
MatField random_direction(const MatField& frame, const Grid3& g, std::mt19937_64& rng, double amplitude);

/// Perturbation supported in 0.1 < y < 1, Hermitian in the frame, scaled to sup frame norm amplitude.
MatField compact_perturbation(const MatField& frame, const Grid3& g, double amplitude);

struct UniquenessReport {
  double distance = 0.0;  // sup over nodes |log(H1^{-1} H2)|
  SolverState first, second;
};

/// Solve from two backgrounds and compare the converged metrics.
UniquenessReport uniqueness_test(const MatField& phi, const BackgroundMetric& b1, const BackgroundMetric& b2,
                                 const Grid3& g, const SolverOptions& opt = {});

}  // namespace nahmlab
