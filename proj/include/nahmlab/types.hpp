#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nahmlab {

using cplx = std::complex<double>;

/// Largest matrix size handled (rank cap n <= 8).
inline constexpr int kMaxDim = 9;

/// Small dense complex matrix with stack storage.
using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

inline constexpr double kPi = 3.14159265358979323846;

/// Invalid input: wrong shape, out-of-range parameter, singular argument.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Internal self-check failed (e.g. a computed spectrum is not of the expected form).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Truncated data did not determine the answer; retry at higher order.
class InconclusiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solve failed. Carries the residual history.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }
  double final_residual() const noexcept { return history_.empty() ? -1.0 : history_.back(); }

 private:
  std::vector<double> history_;
};

inline Mat identity(int n) { return Mat::Identity(n, n); }

inline Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

/// Hermitian traceless part.
inline Mat herm_traceless(const Mat& a) {
  Mat h = 0.5 * (a + a.adjoint());
  const cplx tr = h.trace() / double(a.rows());
  h.diagonal().array() -= tr;
  return h;
}

}  // namespace nahmlab
