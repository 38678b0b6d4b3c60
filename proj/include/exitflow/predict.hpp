#pragma once

#include "exitflow/model.hpp"

#include <Eigen/Core>

namespace exitflow {

// Exponent ladder rho[i] = sum_{j<i} (lambda_j / lambda_i - 1).
// rho[0] = 0 and the ladder is strictly increasing.
struct ExponentLadder {
  VectorXd rho;
};
ExponentLadder compute_rho(const VectorXd& lambdas);

// Covariance of the Gaussian limit process:
//   C[j][k] = sum_l sigma0[j][l] sigma0[k][l] / (lambda_j + lambda_k).
// Symmetric positive definite whenever sigma(0) is surjective.
struct LimitCovariance {
  MatrixXd C;
};
LimitCovariance limit_covariance(const MatrixXd& sigma0, const VectorXd& lambdas);

enum class ChiBackend { Adaptive, GaussLaguerre };

struct ChiSettings {
  ChiBackend backend = ChiBackend::Adaptive;
  double rel_tol = 1e-10;
  int laguerre_nodes = 64;
};

struct ChiValue {
  double plus = 0.0;
  double minus = 0.0;
  double error = 0.0;  // estimated quadrature error
};

// Half-line Gaussian moment weights chi^i_{+-}(y) for a fixed index.
// The trailing coordinates of the Gaussian are integrated out exactly
// (Schur complement of the covariance), which leaves one quadrature
// dimension carrying the |x^i + y^i|^p kink at the half-line endpoint.
class ChiEvaluator {
 public:
  ChiEvaluator(int index, const LimitCovariance& cov, const VectorXd& lambdas,
               ChiSettings settings = {});

  ChiValue operator()(const VectorXd& y) const;

  int index() const { return index_; }
  double power() const { return power_; }

 private:
  double half_line_integral(double a, double beta) const;

  int index_;  // 0-based
  double power_;
  MatrixXd precision_;  // inverse of the leading (index+1) block of C
  double log_norm_;     // log of (2 pi)^{-(i+1)/2} det(C_FF)^{-1/2}
  ChiSettings settings_;
  Eigen::VectorXd lag_nodes_a_, lag_weights_a_;    // alpha = (p-1)/2
  Eigen::VectorXd lag_nodes_b_, lag_weights_b_;    // alpha = p/2
};

// One-call convenience wrapper.
ChiValue chi_pm(const VectorXd& y, int index, const LimitCovariance& cov,
                const VectorXd& lambdas, ChiSettings settings = {});

// Limit measure of a target set, together with the per-face split used by
// the conditional law. All values are per the evaluation chart B_L.
struct MuValue {
  double total = 0.0;
  double plus = 0.0;   // contribution of the + face
  double minus = 0.0;  // contribution of the - face
  int index = 0;       // 0-based index of the target
};

// mu^i_L of a target. For linear drift on a box domain the Poincare map
// to partial B_L is evaluated in closed form; for the built-in nonlinear
// system it is computed by the flow module (see flow.hpp); preimage
// targets carry their rectangle on partial B_L explicitly.
MuValue mu_of_target(const TargetSet& target, const SystemSpec& spec,
                     const DomainSpec& domain, double L,
                     ChiSettings settings = {});

// Prefactor c_A = L^{-sum_{j<i} lambda_j/lambda_i} prod_{j<i}(b^j - a^j)
// prod_{j>i} 1{0 in (a^j, b^j)} of the box asymptotics, with i the face
// axis of the rectangle.
double c_A(const TargetSet& target, const VectorXd& lambdas, double L);

// Normalized limiting conditional exit law on the target: uniform over
// the leading-coordinate rectangle on each face, faces weighted by
// chi^i_{+-}(xi0), trailing coordinates degenerate at zero.
struct ConditionalFaceLaw {
  int sign = 0;
  double weight = 0.0;
  std::vector<Interval> support;  // entries j < index
};

struct ConditionalLawDescription {
  int index = 0;  // 0-based
  int axis = 0;
  std::vector<ConditionalFaceLaw> faces;
  bool chart_coordinates = false;  // true if stated on B_L rather than on the boundary
};

ConditionalLawDescription predicted_conditional_law(const TargetSet& target,
                                                    const SystemSpec& spec,
                                                    const DomainSpec& domain,
                                                    double L,
                                                    ChiSettings settings = {});

}  // namespace exitflow
