#include "exitflow/predict.hpp"

#include "exitflow/flow.hpp"
#include "exitflow/quadrature.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace exitflow {

ExponentLadder compute_rho(const VectorXd& lambdas) {
  const int d = static_cast<int>(lambdas.size());
  ExponentLadder out;
  out.rho = VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < i; ++j) s += lambdas[j] / lambdas[i] - 1.0;
    out.rho[i] = s;
  }
  return out;
}

LimitCovariance limit_covariance(const MatrixXd& sigma0, const VectorXd& lambdas) {
  const int d = static_cast<int>(lambdas.size());
  LimitCovariance out;
  out.C.resize(d, d);
  const MatrixXd gram = sigma0 * sigma0.transpose();
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) out.C(j, k) = gram(j, k) / (lambdas[j] + lambdas[k]);
  Eigen::LLT<MatrixXd> llt(out.C);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("limit covariance is numerically singular");
  return out;
}

namespace {

double sinhc(double z) {
  if (std::abs(z) < 1e-4) return 1.0 + z * z / 6.0;
  return std::sinh(z) / z;
}

// cosh/sinh terms can overflow before the Laguerre weight pulls them
// back down; switch to log space when the argument is large.
double weighted_cosh(double w, double z) {
  z = std::abs(z);
  if (z < 600.0) return w * std::cosh(z);
  return 0.5 * std::exp(z + std::log(w)) * (1.0 + std::exp(-2.0 * z));
}

double weighted_sinh_over_z(double w, double z) {
  const double az = std::abs(z);
  if (az < 600.0) return w * sinhc(z);
  return 0.5 * std::exp(az + std::log(w) - std::log(az)) *
         (1.0 - std::exp(-2.0 * az)) * (z < 0 ? -1.0 : 1.0);
}

}  // namespace

ChiEvaluator::ChiEvaluator(int index, const LimitCovariance& cov,
                           const VectorXd& lambdas, ChiSettings settings)
    : index_(index), settings_(settings) {
  const int d = static_cast<int>(lambdas.size());
  if (index < 0 || index >= d) throw std::invalid_argument("chi index out of range");
  double p = 0.0;
  for (int j = 0; j < index; ++j) p += lambdas[j] / lambdas[index];
  power_ = p;

  const int m = index + 1;
  const MatrixXd block = cov.C.topLeftCorner(m, m);
  Eigen::LLT<MatrixXd> llt(block);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("leading covariance block fails to factor");
  precision_ = llt.solve(MatrixXd::Identity(m, m));
  double log_det = 0.0;
  for (int j = 0; j < m; ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
  log_norm_ = -0.5 * (m * std::log(2.0 * M_PI) + log_det);

  const GaussRule ra = gauss_laguerre(settings_.laguerre_nodes, (power_ - 1.0) / 2.0);
  const GaussRule rb = gauss_laguerre(settings_.laguerre_nodes, power_ / 2.0);
  lag_nodes_a_ = ra.nodes;
  lag_weights_a_ = ra.weights;
  lag_nodes_b_ = rb.nodes;
  lag_weights_b_ = rb.weights;
}

double ChiEvaluator::half_line_integral(double a, double beta) const {
  // J(p, a, beta) = int_0^inf s^p exp(-a s^2 / 2 + beta s) ds.
  const double p = power_;
  if (settings_.backend == ChiBackend::GaussLaguerre) {
    // Substituting t = a s^2 / 2 absorbs s^p and the Gaussian decay into
    // generalized Laguerre weights; splitting exp(beta s) into cosh+sinh
    // keeps both residual factors entire in t. Far-tail nodes carry true
    // weights of order e^{-t_k}, far below the eigensolver's absolute
    // accuracy, so the summation stops once the analytic envelope
    // e^{-t + |beta| s(t)} t^{alpha+1} of a true term drops out of range;
    // the noise weights would otherwise be amplified by cosh(beta s).
    const double scale = std::pow(2.0, (p - 1.0) / 2.0) * std::pow(a, -(p + 1.0) / 2.0);
    const auto tail_sum = [&](const Eigen::VectorXd& nodes,
                              const Eigen::VectorXd& weights, double alpha,
                              bool odd_part) {
      double sum = 0.0;
      double prev_env = -1e300;
      for (int k = 0; k < nodes.size(); ++k) {
        const double t = nodes[k];
        const double s = std::sqrt(2.0 * t / a);
        const double env =
            -t + std::abs(beta) * s + (alpha + 1.0) * std::log1p(t);
        if (env < prev_env && env < std::log(std::max(std::abs(sum), 1e-300)) - 50.0)
          break;
        prev_env = std::max(prev_env, env);
        sum += odd_part ? weighted_sinh_over_z(weights[k], beta * s)
                        : weighted_cosh(weights[k], beta * s);
      }
      return sum;
    };
    const double even = tail_sum(lag_nodes_a_, lag_weights_a_, (p - 1.0) / 2.0, false);
    const double odd = tail_sum(lag_nodes_b_, lag_weights_b_, p / 2.0, true);
    return scale * (even + beta * std::sqrt(2.0 / a) * odd);
  }

  // Adaptive route: truncate where the integrand falls below 1e-14 of its
  // peak, then Gauss-Kronrod on [0, S] (the |.|^p kink sits at s = 0).
  const auto g = [p, a, beta](double s) {
    return (p > 0.0 ? std::pow(s, p) : 1.0) * std::exp(-0.5 * a * s * s + beta * s);
  };
  const double mode =
      p > 0.0 ? (beta + std::sqrt(beta * beta + 4.0 * a * p)) / (2.0 * a)
              : std::max(0.0, beta / a);
  const double peak = g(std::max(mode, 1e-300));
  double S = mode + 10.0 / std::sqrt(a);
  while (g(S) > 1e-16 * peak) S *= 1.5;
  const QuadResult q =
      adaptive_quadrature(g, 0.0, S, 1e-250, settings_.rel_tol, 4000);
  if (!q.converged)
    throw std::runtime_error("chi quadrature did not converge within budget");
  return q.value;
}

ChiValue ChiEvaluator::operator()(const VectorXd& y) const {
  const int m = index_ + 1;
  const VectorXd u0 = -y.head(m);
  const VectorXd pu0 = precision_ * u0;
  const double quad0 = u0.dot(pu0);
  const double a = precision_(index_, index_);
  const double pref = std::exp(log_norm_ - 0.5 * quad0);

  ChiValue out;
  out.plus = pref * half_line_integral(a, -pu0[index_]);
  out.minus = pref * half_line_integral(a, pu0[index_]);
  out.error = settings_.rel_tol * (out.plus + out.minus);
  return out;
}

ChiValue chi_pm(const VectorXd& y, int index, const LimitCovariance& cov,
                const VectorXd& lambdas, ChiSettings settings) {
  return ChiEvaluator(index, cov, lambdas, settings)(y);
}

namespace {

double leading_power_sum(const VectorXd& lambdas, int index) {
  double s = 0.0;
  for (int j = 0; j < index; ++j) s += lambdas[j] / lambdas[index];
  return s;
}

// H^{i-1} factor of a rectangle trace on a face of B_L: the product of
// the leading interval lengths if every trailing interval contains 0.
double rectangle_trace(const FaceRectangle& rect, int index, const double* scale) {
  double area = 1.0;
  for (int j = 0; j < index; ++j)
    area *= rect.intervals[j].length() * (scale ? scale[j] : 1.0);
  for (int j = index + 1; j < static_cast<int>(rect.intervals.size()); ++j)
    if (!rect.intervals[j].contains(0.0)) return 0.0;
  return area;
}

// Numeric trace length of zeta_L(face segment) on the matching face of
// B_L for the built-in 2D nonlinear system. The image of the segment is
// an arc on the box boundary; runs that wrap past a corner are clipped
// at the corner, whose leading coordinate is exactly +-L.
double shear_trace_length(const SystemSpec& spec, const DomainSpec& domain,
                          const FaceRectangle& rect, int face_sign, double L) {
  const double LD = domain.half_side;
  const Interval seg = rect.intervals[0];
  const int grid = 512;

  const auto image = [&](double x1) {
    VectorXd p(2);
    p[0] = x1;
    p[1] = face_sign * LD;
    const FlowResult r = zeta_L(p, spec, domain, L);
    if (!r.exited) throw std::runtime_error("zeta_L failed during trace computation");
    return r.exit_point;
  };
  const auto on_face = [&](const VectorXd& q) {
    return std::abs(q[1]) >= std::abs(q[0]);
  };

  double lo = 0.0, hi = -0.0;
  bool any = false, open_lo = false, open_hi = false;
  std::vector<VectorXd> imgs(grid + 1);
  for (int k = 0; k <= grid; ++k)
    imgs[k] = image(seg.lo + seg.length() * k / grid);
  for (int k = 0; k <= grid; ++k) {
    if (!on_face(imgs[k])) continue;
    const double q0 = imgs[k][0];
    if (!any) {
      lo = hi = q0;
      any = true;
    } else {
      lo = std::min(lo, q0);
      hi = std::max(hi, q0);
    }
    // A neighbor off the face means the arc crossed a corner there.
    if (k > 0 && !on_face(imgs[k - 1])) open_lo = true;
    if (k < grid && !on_face(imgs[k + 1])) open_hi = true;
  }
  if (!any) return 0.0;
  // Wrapped runs extend to the nearer corner of the face.
  if (open_lo) lo = (std::abs(-L - lo) < std::abs(L - lo)) ? -L : L;
  if (open_hi) hi = (std::abs(L - hi) < std::abs(-L - hi)) ? L : -L;
  lo = std::max(lo, -L);
  hi = std::min(hi, L);
  return std::max(0.0, hi - lo);
}

}  // namespace

MuValue mu_of_target(const TargetSet& target, const SystemSpec& spec,
                     const DomainSpec& domain, double L, ChiSettings settings) {
  MuValue out;
  const int index = index_of_target(target, spec);
  out.index = index;
  const FaceRectangle& rect = target.rect;
  if (index != rect.axis) return out;  // trace misses span(e_0..e_index)

  const LimitCovariance cov = limit_covariance(spec.sigma0, spec.lambdas);
  const ChiValue chi = ChiEvaluator(index, cov, spec.lambdas, settings)(spec.xi0);
  const double lpow = std::pow(L, -leading_power_sum(spec.lambdas, index));

  if (target.kind == TargetSet::Kind::BoundaryPreimage) {
    const double Lp = target.pullback_half_side > 0.0 ? target.pullback_half_side : L;
    const double scale = std::pow(Lp, -leading_power_sum(spec.lambdas, index));
    const double area = rectangle_trace(rect, index, nullptr);
    if (rect.has_sign(+1)) out.plus = scale * chi.plus * area;
    if (rect.has_sign(-1)) out.minus = scale * chi.minus * area;
    out.total = out.plus + out.minus;
    return out;
  }

  if (domain.kind != DomainSpec::Kind::Box)
    throw std::invalid_argument(
        "face-rectangle targets on smooth domains are not supported; use a "
        "boundary-preimage target");
  const double LD = domain.half_side;
  if (L > LD + 1e-12)
    throw std::invalid_argument("chart half side must not exceed the domain's");

  switch (spec.drift_kind) {
    case DriftKind::Linear: {
      // zeta_L contracts leading coordinate j by (L / L_D)^{lambda_j / lambda_i}.
      std::vector<double> scale(std::max(index, 1));
      for (int j = 0; j < index; ++j)
        scale[j] = std::pow(L / LD, spec.lambdas[j] / spec.lambdas[index]);
      const double area = rectangle_trace(rect, index, scale.data());
      if (rect.has_sign(+1)) out.plus = lpow * chi.plus * area;
      if (rect.has_sign(-1)) out.minus = lpow * chi.minus * area;
      out.total = out.plus + out.minus;
      return out;
    }
    case DriftKind::Shear2D: {
      if (index == 0) {
        // H^0 factor: does the target face segment contain the N^1 point?
        for (int sign : {+1, -1}) {
          if (!rect.has_sign(sign)) continue;
          VectorXd seed(2);
          seed[0] = sign * 1e-3 * LD;
          seed[1] = 0.0;
          const FlowResult r =
              deterministic_exit(spec.from_linear(seed), spec, domain);
          const bool hit = r.exited && std::abs(r.exit_point[0] - sign * LD) < 1e-6 &&
                           rect.intervals[1].contains(r.exit_point[1], 1e-9);
          const double w = hit ? (sign > 0 ? chi.plus : chi.minus) : 0.0;
          (sign > 0 ? out.plus : out.minus) = w;
        }
        out.total = out.plus + out.minus;
        return out;
      }
      for (int sign : {+1, -1}) {
        if (!rect.has_sign(sign)) continue;
        const double len = shear_trace_length(spec, domain, rect, sign, L);
        (sign > 0 ? out.plus : out.minus) =
            lpow * (sign > 0 ? chi.plus : chi.minus) * len;
      }
      out.total = out.plus + out.minus;
      return out;
    }
    case DriftKind::Custom:
      throw std::invalid_argument("mu for custom drifts is not supported");
  }
  return out;
}

double c_A(const TargetSet& target, const VectorXd& lambdas, double L) {
  const FaceRectangle& rect = target.rect;
  const int axis = rect.axis;
  double value = std::pow(L, -leading_power_sum(lambdas, axis));
  for (int j = 0; j < axis; ++j) value *= rect.intervals[j].length();
  for (int j = axis + 1; j < static_cast<int>(rect.intervals.size()); ++j)
    if (!(rect.intervals[j].lo < 0.0 && 0.0 < rect.intervals[j].hi)) return 0.0;
  return value;
}

ConditionalLawDescription predicted_conditional_law(const TargetSet& target,
                                                    const SystemSpec& spec,
                                                    const DomainSpec& domain,
                                                    double L, ChiSettings settings) {
  const MuValue mu = mu_of_target(target, spec, domain, L, settings);
  if (!(mu.total > 0.0))
    throw std::domain_error("conditional law undefined: mu of the target is zero");

  ConditionalLawDescription law;
  law.index = mu.index;
  law.axis = target.rect.axis;
  law.chart_coordinates = target.kind == TargetSet::Kind::BoundaryPreimage ||
                          spec.drift_kind != DriftKind::Linear;
  for (int sign : {+1, -1}) {
    const double part = sign > 0 ? mu.plus : mu.minus;
    if (part <= 0.0) continue;
    ConditionalFaceLaw face;
    face.sign = sign;
    face.weight = part / mu.total;
    for (int j = 0; j < mu.index; ++j) face.support.push_back(target.rect.intervals[j]);
    law.faces.push_back(std::move(face));
  }
  return law;
}

}  // namespace exitflow
