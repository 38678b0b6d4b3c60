#pragma once

#include "exitflow/model.hpp"

#include <Eigen/Core>

#include <optional>
#include <utility>
#include <vector>

namespace exitflow {

struct FlowResult {
  VectorXd exit_point;
  double exit_time = 0.0;
  bool exited = false;
  std::vector<std::pair<double, VectorXd>> path;  // filled when requested
};

struct IntegratorOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  double horizon = 0.0;  // 0: use 50 / lambda_d
  bool record_path = false;
};

// Closed-form linear flow (x^j e^{lambda_j t})_j.
template <typename DerivedX, typename DerivedL>
VectorXd linear_flow(const Eigen::MatrixBase<DerivedX>& x,
                     const Eigen::MatrixBase<DerivedL>& lambdas, double t) {
  return (lambdas.array() * t).exp().matrix().asDiagonal() * x;
}

// Closed-form exit of the linear flow from the box [-L,L]^d starting
// inside: the binding coordinate solves |x^j| e^{lambda_j t} = L first.
struct LinearExit {
  double time = 0.0;
  int axis = 0;
  VectorXd point;
};
LinearExit linear_box_exit(const VectorXd& x, const VectorXd& lambdas, double L);

// Integrates dx/dt = b(x) (or backward) with an adaptive Dormand-Prince
// 5(4) pair; boundary crossings are refined by bisection over partial
// steps re-taken from the last accepted state.
VectorXd flow_to_time(const VectorXd& x, double t, const SystemSpec& spec,
                      const IntegratorOptions& opts = {});

// First exit of the forward orbit of x from the domain.
FlowResult deterministic_exit(const VectorXd& x, const SystemSpec& spec,
                              const DomainSpec& domain,
                              const IntegratorOptions& opts = {});

// Poincare map psi_L: from a point of f^{-1}(partial B_L) to partial D
// along the forward flow.
FlowResult poincare_psi(const VectorXd& x, const SystemSpec& spec,
                        const DomainSpec& domain, double L,
                        const IntegratorOptions& opts = {});

// zeta_L = f o psi_L^{-1}: follow the orbit of a boundary point backward
// until its image under f reaches partial B_L; returns that image.
// The repelling origin is attracting in reversed time, so the backward
// problem is well conditioned.
FlowResult zeta_L(const VectorXd& boundary_point, const SystemSpec& spec,
                  const DomainSpec& domain, double L,
                  const IntegratorOptions& opts = {});

}  // namespace exitflow
