#include "exitflow/flow.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace exitflow {

LinearExit linear_box_exit(const VectorXd& x, const VectorXd& lambdas, double L) {
  LinearExit out;
  out.time = std::numeric_limits<double>::infinity();
  const int d = static_cast<int>(x.size());
  for (int j = 0; j < d; ++j) {
    const double aj = std::abs(x[j]);
    if (aj <= 0.0) continue;
    const double tj = std::log(L / aj) / lambdas[j];
    if (tj < out.time) {
      out.time = tj;
      out.axis = j;
    }
  }
  if (!std::isfinite(out.time))
    throw std::invalid_argument("linear_box_exit: starting point is the origin");
  out.point = linear_flow(x, lambdas, out.time);
  out.point[out.axis] = (x[out.axis] > 0 ? L : -L);  // pin the binding face
  return out;
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640,
                 e5 = -2187.0 / 6784 + 92097.0 / 339200, e6 = 11.0 / 84 - 187.0 / 2100,
                 e7 = -1.0 / 40;

class Stepper {
 public:
  Stepper(const SystemSpec& spec, bool backward)
      : spec_(spec), sign_(backward ? -1.0 : 1.0), k_(7, VectorXd(spec.dim)) {}

  void rhs(const VectorXd& x, VectorXd& out) const {
    spec_.drift_into(x, out);
    out *= sign_;
  }

  // One trial step from (x, f0 = rhs(x)); writes the 5th-order result and
  // returns the embedded error estimate.
  double step(const VectorXd& x, const VectorXd& f0, double h, VectorXd& out,
              double rel_tol, double abs_tol) {
    k_[0] = f0;
    rhs(x + h * a21 * k_[0], k_[1]);
    rhs(x + h * (a31 * k_[0] + a32 * k_[1]), k_[2]);
    rhs(x + h * (a41 * k_[0] + a42 * k_[1] + a43 * k_[2]), k_[3]);
    rhs(x + h * (a51 * k_[0] + a52 * k_[1] + a53 * k_[2] + a54 * k_[3]), k_[4]);
    rhs(x + h * (a61 * k_[0] + a62 * k_[1] + a63 * k_[2] + a64 * k_[3] + a65 * k_[4]),
        k_[5]);
    out = x + h * (b1 * k_[0] + b3 * k_[2] + b4 * k_[3] + b5 * k_[4] + b6 * k_[5]);
    rhs(out, k_[6]);
    const VectorXd err =
        h * (e1 * k_[0] + e3 * k_[2] + e4 * k_[3] + e5 * k_[4] + e6 * k_[5] +
             e7 * k_[6]);
    double scale = 0.0;
    for (int j = 0; j < err.size(); ++j) {
      const double s = abs_tol + rel_tol * std::max(std::abs(x[j]), std::abs(out[j]));
      if (s > 0.0) scale = std::max(scale, std::abs(err[j]) / s);
    }
    return scale;  // <= 1 means accept
  }

  const VectorXd& last_f() const { return k_[6]; }  // FSAL

 private:
  const SystemSpec& spec_;
  double sign_;
  std::vector<VectorXd> k_;
};

// Integrate until `event` becomes >= 0 or the horizon passes. The event
// crossing is refined by bisection on partial steps from the bracketing
// state, which keeps full integrator accuracy at the crossing.
template <typename EventFn>
FlowResult integrate_until(const VectorXd& x0, const SystemSpec& spec, bool backward,
                           const EventFn& event, double horizon,
                           const IntegratorOptions& opts) {
  FlowResult res;
  Stepper st(spec, backward);
  VectorXd x = x0, xn(spec.dim), f0(spec.dim);
  st.rhs(x, f0);
  double t = 0.0;
  double h = 1e-4;
  if (opts.record_path) res.path.emplace_back(0.0, x);

  if (event(x) >= 0.0) {  // already at/past the section
    res.exit_point = x;
    res.exit_time = 0.0;
    res.exited = true;
    return res;
  }

  while (t < horizon) {
    h = std::min(h, horizon - t);
    const double err = st.step(x, f0, h, xn, opts.rel_tol, opts.abs_tol);
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }
    if (event(xn) >= 0.0) {
      // Bracketed in (t, t+h]: bisect the partial-step length.
      double lo = 0.0, hi = h;
      VectorXd xmid(spec.dim);
      for (int it = 0; it < 100 && (hi - lo) > 1e-16 * std::max(1.0, t); ++it) {
        const double mid = 0.5 * (lo + hi);
        st.step(x, f0, mid, xmid, opts.rel_tol, opts.abs_tol);
        (event(xmid) >= 0.0 ? hi : lo) = mid;
      }
      st.step(x, f0, hi, xmid, opts.rel_tol, opts.abs_tol);
      res.exit_point = xmid;
      res.exit_time = t + hi;
      res.exited = true;
      if (opts.record_path) res.path.emplace_back(res.exit_time, xmid);
      return res;
    }
    t += h;
    x.swap(xn);
    f0 = st.last_f();
    if (opts.record_path) res.path.emplace_back(t, x);
    h *= std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2));
  }
  res.exit_point = x;
  res.exit_time = t;
  res.exited = false;
  return res;
}

double default_horizon(const SystemSpec& spec, const IntegratorOptions& opts) {
  if (opts.horizon > 0.0) return opts.horizon;
  return 50.0 / spec.lambdas[spec.dim - 1];
}

}  // namespace

VectorXd flow_to_time(const VectorXd& x, double t, const SystemSpec& spec,
                      const IntegratorOptions& opts) {
  const bool backward = t < 0.0;
  const double T = std::abs(t);
  Stepper st(spec, backward);
  VectorXd cur = x, next(spec.dim), f0(spec.dim);
  st.rhs(cur, f0);
  double s = 0.0, h = 1e-4;
  while (s < T) {
    h = std::min(h, T - s);
    const double err = st.step(cur, f0, h, next, opts.rel_tol, opts.abs_tol);
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }
    s += h;
    cur.swap(next);
    f0 = st.last_f();
    h *= std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2));
  }
  return cur;
}

FlowResult deterministic_exit(const VectorXd& x, const SystemSpec& spec,
                              const DomainSpec& domain,
                              const IntegratorOptions& opts) {
  if (x.squaredNorm() == 0.0)
    throw std::invalid_argument("deterministic_exit: x must differ from the origin");
  return integrate_until(
      x, spec, /*backward=*/false, [&](const VectorXd& p) { return domain.level(p); },
      default_horizon(spec, opts), opts);
}

FlowResult poincare_psi(const VectorXd& x, const SystemSpec& spec,
                        const DomainSpec& domain, double L,
                        const IntegratorOptions& opts) {
  const double chart = spec.to_linear(x).cwiseAbs().maxCoeff();
  if (std::abs(chart - L) > 1e-6 * std::max(1.0, L))
    throw std::invalid_argument("poincare_psi: f(x) must lie on partial B_L");
  return deterministic_exit(x, spec, domain, opts);
}

FlowResult zeta_L(const VectorXd& boundary_point, const SystemSpec& spec,
                  const DomainSpec& domain, double L, const IntegratorOptions& opts) {
  if (domain.level(boundary_point) < -1e-6)
    throw std::invalid_argument("zeta_L: point must lie on the domain boundary");
  // Backward orbit enters B_L when max_j |f(x)_j| drops to L.
  FlowResult res = integrate_until(
      boundary_point, spec, /*backward=*/true,
      [&](const VectorXd& p) { return L - spec.to_linear(p).cwiseAbs().maxCoeff(); },
      default_horizon(spec, opts), opts);
  if (res.exited) res.exit_point = spec.to_linear(res.exit_point);
  return res;
}

}  // namespace exitflow
