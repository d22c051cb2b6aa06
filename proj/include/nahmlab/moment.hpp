#pragma once

#include <vector>

#include "nahmlab/field.hpp"
#include "nahmlab/holo.hpp"
#include "nahmlab/models.hpp"

namespace nahmlab {

/// phi evaluated at every node (y-independent).
MatField phi_field(const HiggsData& phi, const Grid3& g);

/// H^{-1} phi^dagger H.
Mat adjoint_higgs(const Mat& H, const Mat& phi);
MatField adjoint_higgs(const MatField& H, const MatField& phi);

/// Omega at a fixed metric, with everything needed for its exact directional derivative.
///
/// x terms use the composed periodic stencils. The y term is a flux difference of
/// log(H_k^{-1} H_{k+1}) / (y_{k+1} - y_k) over the dual cell y_k * dlog y. Boundary y planes
/// carry no equation and are set to zero. The raw value is projected onto its H-self-adjoint
/// traceless part.
class MomentOperator {
 public:
  MomentOperator(const Grid3& g, const MatField& phi, MatField H);

  const Grid3& grid() const { return *g_; }
  const MatField& metric() const { return H_; }
  const MatField& metric_inverse() const { return Hinv_; }
  /// H^{-1} del H at nodes.
  const MatField& connection() const { return A_; }
  /// Unsymmetrized residual.
  const MatField& raw() const { return R_; }
  const MatField& omega() const { return omega_; }

  /// d/de Omega(H + e dH).
  MatField derivative(const MatField& dH) const;
  /// Derivative of the unsymmetrized residual.
  MatField raw_derivative(const MatField& dH) const;

  /// Half-node y connection log(H_k^{-1} H_{k+1}) / dy, indexed [k * plane + p].
  const std::vector<Mat>& y_connection() const { return Ay_; }

 private:
  struct HalfNode {
    Mat V, Vinv, L, G, Hk_inv;
  };

  const Grid3* g_;
  const MatField* phi_;
  MatField H_, Hinv_, dH_, A_, phidag_, R_, omega_;
  std::vector<Mat> Ay_;
  std::vector<HalfNode> half_;
};

struct ResidualField {
  MatField omega;
  double sup = 0.0;     // max |Omega|
  double sup_y2 = 0.0;  // max y^2 |Omega|
  double trace_max = 0.0;
  /// max over nodes of the anti-Hermitian part of H^{1/2} Omega H^{-1/2}.
  double hermiticity_defect = 0.0;
};

ResidualField omega_residual(const MatField& H, const MatField& phi, const Grid3& g);
ResidualField summarize_residual(const MatField& omega, const MatField& H, const Grid3& g);

/// Gateaux derivative of Omega at H in direction H s (s is H-self-adjoint).
MatField linearization_apply(const MomentOperator& op, const MatField& s);
/// Second route: covariant operator form -dbar(del_A s) - dy(dy_A s) + [phi, [phi^dag_H, s]],
/// projected like Omega. Agrees with the Gateaux route to discretization error where Omega = 0.
MatField linearization_operator_form(const MomentOperator& op, const MatField& phi, const MatField& s);

/// gamma(sign * ad_s) a for a diagonalizable s with real spectrum (e.g. H-self-adjoint).
Mat gamma_general(const Mat& s, const Mat& a, int sign);

struct ExpansionCheck {
  double residual = 0.0;  // max y^2 |Omega_H - Omega_H0 - gamma(-s) L s - Q(s)| over interior nodes
  double scale = 0.0;     // max y^2 |Omega_H - Omega_H0|
  MatField linear;        // gamma(-s) L_{H0} s
  MatField remainder;     // Q(s)
};

/// Expansion of Omega at H = H0 e^s around H0, both sides assembled on the grid (raw residuals).
ExpansionCheck expansion_identity_check(const MatField& H0, const MatField& phi, const MatField& s, const Grid3& g);

struct NormCheck {
  double residual = 0.0;             // max y^2 |lhs - rhs|
  double scale = 0.0;                // max y^2 |lhs|
  double inequality_violation = 0.0; // max y^2 (-P|s|^2/2 - lhs), <= 0 when the inequality holds
  std::vector<double> lhs, rhs, laplacian_term;
};

/// Re Tr((Omega_H - Omega_H0) s) against -P|s|^2/2 plus the gradient squares weighted by gamma(-s).
NormCheck norm_identity_check(const MatField& H0, const MatField& phi, const MatField& s, const Grid3& g);

struct UnitaryGauge {
  MatField A_z, phi_z, A_y, phi_1;
};

/// Fields in unitary gauge with g = H^{1/2}.
UnitaryGauge unitary_gauge(const MatField& H, const MatField& phi, const Grid3& g);

struct OrderStudy {
  std::vector<int> intervals;
  std::vector<double> error;  // interior sup y^2 |Omega| of the Nahm model
  double order = 0.0;         // least-squares slope of -log error against log intervals
};

/// Discrete residual of the Nahm model metric (phi = principal nilpotent) on stretched meshes of
/// [y_min, y_max] with the given interval counts.
OrderStudy nahm_residual_order(const LieContext& ctx, const std::vector<int>& intervals, double y_min = 0.01,
                               double y_max = 8.0, double amplitude = 0.3);

/// H e^s at every node, with s H-self-adjoint.
MatField metric_times_exp(const MatField& H, const MatField& s);

}  // namespace nahmlab
