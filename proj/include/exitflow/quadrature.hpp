#pragma once

#include <Eigen/Core>

#include <functional>

namespace exitflow {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
};

// Adaptive Gauss-Kronrod (G7,K15) on a finite interval.
QuadResult adaptive_quadrature(const std::function<double(double)>& f, double a,
                               double b, double abs_tol = 1e-12,
                               double rel_tol = 1e-10, int max_subdivisions = 2000);

// Nodes and weights for the weight t^alpha e^{-t} on [0, inf)
// (generalized Gauss-Laguerre via the Golub-Welsch eigenproblem).
struct GaussRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};
GaussRule gauss_laguerre(int n, double alpha);

}  // namespace exitflow
