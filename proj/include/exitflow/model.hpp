#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace exitflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class DriftKind { Linear, Shear2D, Custom };

// System near a repelling equilibrium at the origin: drift b with
// b(0) = 0 and diagonalizable linearization diag(lambda), constant
// diffusion matrix sigma(0), and a smooth conjugacy f taking b to the
// linear field (f = identity when b is already linear).
struct SystemSpec {
  int dim = 0;
  int noise_dim = 0;
  VectorXd lambdas;  // strictly decreasing, all positive
  DriftKind drift_kind = DriftKind::Linear;
  double shear_c = 0.0;  // Shear2D: b = (l1 x1, l2 x2 + c x1^2)
  MatrixXd sigma0;       // d x n
  VectorXd xi0;          // X_0 = eps * xi0

  // Custom drift/conjugacy hooks; unused for the built-in kinds.
  std::function<VectorXd(const VectorXd&)> drift_fn;
  std::function<VectorXd(const VectorXd&)> conj_fn;
  std::function<VectorXd(const VectorXd&)> conj_inv_fn;

  VectorXd drift(const VectorXd& x) const;
  void drift_into(const VectorXd& x, VectorXd& out) const;
  // f and f^{-1}: to_linear maps x-space to the linearizing chart.
  VectorXd to_linear(const VectorXd& x) const;
  VectorXd from_linear(const VectorXd& y) const;

  double shear_coeff() const { return shear_c / (2.0 * lambdas[0] - lambdas[1]); }

  static SystemSpec linear(VectorXd lambdas, MatrixXd sigma0, VectorXd xi0 = {});
  static SystemSpec shear2d(double l1, double l2, double c, MatrixXd sigma0,
                            VectorXd xi0 = {});
};

// Domain containing the origin; either a centered box [-L,L]^d or a
// smooth sublevel set {g < 0} with supplied gradient.
struct DomainSpec {
  enum class Kind { Box, Smooth };
  Kind kind = Kind::Box;
  double half_side = 1.0;  // Box
  std::function<double(const VectorXd&)> level_fn;
  std::function<VectorXd(const VectorXd&)> gradient_fn;

  // Negative inside, zero on the boundary, positive outside.
  double level(const VectorXd& x) const;

  static DomainSpec box(double L);
  static DomainSpec smooth(std::function<double(const VectorXd&)> g,
                           std::function<VectorXd(const VectorXd&)> grad);
};

// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
  double length() const { return hi - lo; }
};

// Rectangle on a box face: axis is the face coordinate (0-based), sign
// selects the face(s), intervals[j] constrains coordinate j for j != axis.
// The entry intervals[axis] is ignored.
struct FaceRectangle {
  int axis = 0;
  int sign = 0;  // +1, -1, or 0 for both faces
  std::vector<Interval> intervals;

  bool has_sign(int s) const { return sign == 0 || sign == s; }
};

// Boundary subset whose exit probability and conditional law we study.
// FaceRectangle lives directly on the domain boundary (box domains);
// BoundaryPreimage is zeta_L^{-1} of a rectangle on the small box B_L.
struct TargetSet {
  enum class Kind { FaceRectangle, BoundaryPreimage };
  Kind kind = Kind::FaceRectangle;
  FaceRectangle rect;
  double pullback_half_side = 0.0;  // BoundaryPreimage: L of the B_L chart
  std::string name;
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const;
  std::string summary() const;
};

// Checks the standing assumptions: eigenvalue ordering, surjectivity of
// sigma(0), the conjugacy identities, and transversality of b on the
// boundary. Returns failures as entries instead of throwing.
ValidationReport validate_system(const SystemSpec& spec);
ValidationReport validate_system(const SystemSpec& spec, const DomainSpec& domain);

// Index of the target: the smallest k (0-based) such that the closure of
// the rectangle meets span(e_0..e_k). For a face rectangle this is the
// smallest k >= axis with 0 in [a^m, b^m] for every m > k.
int index_of_target(const TargetSet& target, const SystemSpec& spec);

// Low-discrepancy points in [-scale, scale]^dim (Kronecker lattice).
std::vector<VectorXd> sample_points(int dim, int count, double scale);

}  // namespace exitflow
