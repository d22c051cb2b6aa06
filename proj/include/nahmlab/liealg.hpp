#pragma once

#include <vector>

#include <boost/rational.hpp>

#include "nahmlab/types.hpp"

namespace nahmlab {

using Rational = boost::rational<long long>;

/// Structure data of sl(n+1). Immutable after construction.
struct LieContext {
  int n = 0;
  Eigen::MatrixXi cartan;
  std::vector<std::vector<Rational>> cartan_inv;
  std::vector<int> weights;  // B_i = i(n+1-i)
  // Chevalley generators E_j^+, E_j^-, H_j (integer entries).
  std::vector<Eigen::MatrixXi> e_plus, e_minus, h_basis;
  // Principal sl2 triple.
  Mat sl2_plus, sl2_zero, sl2_minus;

  int dim() const { return n + 1; }
  double cartan_inv_value(int i, int j) const {
    return boost::rational_cast<double>(cartan_inv[i][j]);
  }
};

LieContext build_lie_context(int n);

/// Orthonormal basis of Hermitian traceless N x N matrices under Re Tr(a b).
const std::vector<Mat>& hermitian_basis(int N);

/// Coefficients of a Hermitian traceless matrix in hermitian_basis(N).
Eigen::VectorXd herm_coeffs(const Mat& a);
Mat herm_from_coeffs(int N, const double* c);

/// Casimir operator of the principal sl2 acting on traceless matrices.
Mat casimir_apply(const LieContext& ctx, const Mat& s);

/// Matrix of casimir_apply in hermitian_basis (symmetric, size (N^2-1)^2).
Eigen::MatrixXd casimir_matrix(const LieContext& ctx);

/// Sorted eigenvalues of casimir_matrix.
std::vector<double> casimir_spectrum(const LieContext& ctx);

/// Union of {-j, j+1} over Casimir eigenvalues j(j+1), computed from the spectrum.
std::vector<int> indicial_roots(const LieContext& ctx);

/// Report of exact identity checks for one rank.
struct LieCheck {
  int n = 0;
  bool cartan_inverse_exact = false;
  bool weights_match = false;
  bool chevalley_exact = false;
  double sl2_error = 0.0;       // max residual of the sl2 relations (scaled)
  double casimir_error = 0.0;   // max |eigenvalue - j(j+1)|
  bool casimir_multiplicities = false;
  bool indicial_roots_match = false;
  bool ok() const;
};

LieCheck verify_lie_context(const LieContext& ctx);

}  // namespace nahmlab
