#pragma once

// Instance generators shared by the unit tests and the acceptance binary.

#include <random>
#include <vector>

#include "nahmlab/holo.hpp"

namespace nahmlab::fixtures {

/// Polynomial matrix with first row e_1 and an invertible constant term: conjugating by it keeps the line e_1
/// and multiplies every wedge by a unit.
inline PolyMatrix random_unimodular_fixing_e1(int N, int order, std::mt19937& rng, int degree = 3) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PolyMatrix g(N, N, order);
  g(0, 0) = Series::constant(1.0, order);
  for (int i = 1; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      Series s(order);
      for (int k = 0; k <= degree && k < order; ++k) s[k] = 0.3 * cplx(u(rng), u(rng));
      if (i == j) s[0] += 1.0;
      g(i, j) = s;
    }
  return g;
}

struct PlantedDivisor {
  std::vector<int> weights;
  PolyMatrix phi;  // g * knot-local * g^{-1}
};

/// Knot-local field with random weights in [0, max_weight] and random constant lower part, conjugated by a
/// random frame change fixing e_1.
inline PlantedDivisor planted_divisor(int n, int order, std::mt19937& rng, int max_weight = 3) {
  std::uniform_int_distribution<int> w(0, max_weight);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PlantedDivisor out;
  for (int i = 0; i < n; ++i) out.weights.push_back(w(rng));
  Mat lower = Mat::Zero(n + 1, n + 1);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= i; ++j) lower(i, j) = cplx(u(rng), u(rng));
  lower.diagonal().array() -= lower.trace() / double(n + 1);
  const PolyMatrix base = knot_local_polymatrix(out.weights, lower, order);
  const PolyMatrix g = random_unimodular_fixing_e1(n + 1, order, rng);
  out.phi = g * base * inverse(g);
  return out;
}

}  // namespace nahmlab::fixtures
