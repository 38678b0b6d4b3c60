#include "exitflow/model.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace exitflow {

VectorXd SystemSpec::drift(const VectorXd& x) const {
  VectorXd out(dim);
  drift_into(x, out);
  return out;
}

void SystemSpec::drift_into(const VectorXd& x, VectorXd& out) const {
  switch (drift_kind) {
    case DriftKind::Linear:
      out = lambdas.cwiseProduct(x);
      return;
    case DriftKind::Shear2D:
      out[0] = lambdas[0] * x[0];
      out[1] = lambdas[1] * x[1] + shear_c * x[0] * x[0];
      return;
    case DriftKind::Custom:
      out = drift_fn(x);
      return;
  }
}

VectorXd SystemSpec::to_linear(const VectorXd& x) const {
  switch (drift_kind) {
    case DriftKind::Linear:
      return x;
    case DriftKind::Shear2D: {
      VectorXd y = x;
      y[1] -= shear_coeff() * x[0] * x[0];
      return y;
    }
    case DriftKind::Custom:
      return conj_fn ? conj_fn(x) : x;
  }
  return x;
}

VectorXd SystemSpec::from_linear(const VectorXd& y) const {
  switch (drift_kind) {
    case DriftKind::Linear:
      return y;
    case DriftKind::Shear2D: {
      VectorXd x = y;
      x[1] += shear_coeff() * y[0] * y[0];
      return x;
    }
    case DriftKind::Custom:
      return conj_inv_fn ? conj_inv_fn(y) : y;
  }
  return y;
}

SystemSpec SystemSpec::linear(VectorXd lambdas, MatrixXd sigma0, VectorXd xi0) {
  SystemSpec s;
  s.dim = static_cast<int>(lambdas.size());
  s.noise_dim = static_cast<int>(sigma0.cols());
  s.lambdas = std::move(lambdas);
  s.sigma0 = std::move(sigma0);
  s.xi0 = xi0.size() ? std::move(xi0) : VectorXd::Zero(s.dim).eval();
  s.drift_kind = DriftKind::Linear;
  return s;
}

SystemSpec SystemSpec::shear2d(double l1, double l2, double c, MatrixXd sigma0,
                               VectorXd xi0) {
  if (std::abs(2.0 * l1 - l2) < 1e-12)
    throw std::invalid_argument("shear2d requires lambda2 != 2*lambda1");
  SystemSpec s;
  s.dim = 2;
  s.noise_dim = static_cast<int>(sigma0.cols());
  s.lambdas = (VectorXd(2) << l1, l2).finished();
  s.sigma0 = std::move(sigma0);
  s.xi0 = xi0.size() ? std::move(xi0) : VectorXd::Zero(2).eval();
  s.drift_kind = DriftKind::Shear2D;
  s.shear_c = c;
  return s;
}

double DomainSpec::level(const VectorXd& x) const {
  if (kind == Kind::Box) return x.cwiseAbs().maxCoeff() - half_side;
  return level_fn(x);
}

DomainSpec DomainSpec::box(double L) {
  DomainSpec d;
  d.kind = Kind::Box;
  d.half_side = L;
  return d;
}

DomainSpec DomainSpec::smooth(std::function<double(const VectorXd&)> g,
                              std::function<VectorXd(const VectorXd&)> grad) {
  DomainSpec d;
  d.kind = Kind::Smooth;
  d.half_side = 0.0;  // no box geometry; may hold a chart-size hint
  d.level_fn = std::move(g);
  d.gradient_fn = std::move(grad);
  return d;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "[ok]   " : "[FAIL] ") << c.name << "  residual=" << c.residual;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  return os.str();
}

std::vector<VectorXd> sample_points(int dim, int count, double scale) {
  // Kronecker lattice with irrational strides; deterministic and
  // reasonably equidistributed for the residual checks below.
  static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  std::vector<VectorXd> pts;
  pts.reserve(count);
  for (int k = 1; k <= count; ++k) {
    VectorXd p(dim);
    for (int j = 0; j < dim; ++j) {
      const double alpha = std::sqrt(primes[j % 12]);
      const double frac = std::fmod(k * alpha, 1.0);
      p[j] = (2.0 * frac - 1.0) * scale;
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

namespace {

constexpr double kResidualTol = 1e-8;
constexpr int kSamplePoints = 100;

MatrixXd jacobian_fd(const std::function<VectorXd(const VectorXd&)>& f,
                     const VectorXd& x, double h = 1e-6) {
  const int d = static_cast<int>(x.size());
  MatrixXd J(d, d);
  VectorXd xp = x, xm = x;
  for (int j = 0; j < d; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

void check_spec_only(const SystemSpec& spec, ValidationReport& rep) {
  // Eigenvalue ordering.
  {
    double worst = 0.0;
    bool ok = spec.dim >= 1 && spec.lambdas.size() == spec.dim;
    for (int j = 0; ok && j < spec.dim; ++j) {
      if (spec.lambdas[j] <= 0.0) {
        ok = false;
        worst = -spec.lambdas[j];
      }
      if (j + 1 < spec.dim && spec.lambdas[j] <= spec.lambdas[j + 1]) {
        ok = false;
        worst = std::max(worst, spec.lambdas[j + 1] - spec.lambdas[j]);
      }
    }
    rep.checks.push_back({"eigenvalues strictly decreasing and positive", ok, worst,
                          ok ? "" : "eigenvalues not strictly decreasing"});
  }

  // sigma(0) surjective.
  {
    bool ok = spec.noise_dim >= spec.dim && spec.sigma0.rows() == spec.dim &&
              spec.sigma0.cols() == spec.noise_dim;
    double ratio = 0.0;
    if (ok) {
      Eigen::JacobiSVD<MatrixXd> svd(spec.sigma0);
      const auto& sv = svd.singularValues();
      ratio = sv[sv.size() - 1] / std::max(sv[0], 1e-300);
      ok = sv[0] > 0.0 && ratio > 1e-10;
    }
    rep.checks.push_back({"sigma(0) surjective", ok, ratio,
                          ok ? "" : "sigma(0) not surjective"});
  }

  if (!rep.checks[0].passed) return;  // conjugacy checks need valid lambdas

  const auto f = [&](const VectorXd& x) { return spec.to_linear(x); };
  const auto finv = [&](const VectorXd& y) { return spec.from_linear(y); };
  const auto pts = sample_points(spec.dim, kSamplePoints, 0.5);

  // f(0) = 0 and Df(0) = I.
  {
    const VectorXd z = VectorXd::Zero(spec.dim);
    const double r0 = f(z).norm();
    const double rJ = (jacobian_fd(f, z) - MatrixXd::Identity(spec.dim, spec.dim))
                          .cwiseAbs()
                          .maxCoeff();
    const double r = std::max(r0, rJ);
    rep.checks.push_back({"f(0)=0 and Df(0)=I", r < kResidualTol, r, ""});
  }

  // f(f^{-1}(x)) = x on sample points.
  {
    double worst = 0.0;
    for (const auto& p : pts)
      worst = std::max(worst, (f(finv(p)) - p).norm() / (1.0 + p.norm()));
    rep.checks.push_back({"f o f^{-1} = id", worst < kResidualTol, worst, ""});
  }

  // Df(x) b(x) = diag(lambda) f(x): f conjugates b to the linear field.
  {
    double worst = 0.0;
    for (const auto& p : pts) {
      const VectorXd lhs = jacobian_fd(f, p) * spec.drift(p);
      const VectorXd rhs = spec.lambdas.cwiseProduct(f(p));
      worst = std::max(worst, (lhs - rhs).norm() / (1.0 + rhs.norm()));
    }
    // Central differences limit the achievable residual here.
    rep.checks.push_back({"pushforward Df*b = diag(lambda)*f", worst < 1e-6, worst, ""});
  }
}

void check_transversality(const SystemSpec& spec, const DomainSpec& domain,
                          ValidationReport& rep) {
  double worst = 1e300;
  bool ok = true;
  if (domain.kind == DomainSpec::Kind::Box) {
    const double L = domain.half_side;
    if (L <= 0.0) {
      rep.checks.push_back({"domain half side positive", false, -L, ""});
      return;
    }
    const auto pts = sample_points(spec.dim, kSamplePoints, L * 0.999);
    for (const auto& p : pts) {
      for (int axis = 0; axis < spec.dim; ++axis) {
        for (int sgn : {-1, 1}) {
          VectorXd q = p;
          q[axis] = sgn * L;
          const double inner = sgn * spec.drift(q)[axis];
          worst = std::min(worst, inner);
          ok = ok && inner > 0.0;
        }
      }
    }
  } else {
    if (domain.level(VectorXd::Zero(spec.dim)) >= 0.0) {
      rep.checks.push_back({"domain contains origin", false, 0.0, "g(0) >= 0"});
      return;
    }
    // Boundary points found by bisecting g along rays from the origin.
    const auto dirs = sample_points(spec.dim, kSamplePoints, 1.0);
    for (const auto& d0 : dirs) {
      if (d0.norm() < 1e-12) continue;
      const VectorXd dir = d0.normalized();
      double lo = 0.0, hi = 1.0;
      while (domain.level(hi * dir) < 0.0 && hi < 1e6) hi *= 2.0;
      if (hi >= 1e6) continue;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (domain.level(mid * dir) < 0.0 ? lo : hi) = mid;
      }
      const VectorXd x = hi * dir;
      const VectorXd n = domain.gradient_fn(x).normalized();
      const double inner = n.dot(spec.drift(x));
      worst = std::min(worst, inner);
      ok = ok && inner > 0.0;
    }
  }
  rep.checks.push_back({"b transversal to boundary (outward)", ok, worst, ""});
}

}  // namespace

ValidationReport validate_system(const SystemSpec& spec) {
  ValidationReport rep;
  check_spec_only(spec, rep);
  return rep;
}

ValidationReport validate_system(const SystemSpec& spec, const DomainSpec& domain) {
  ValidationReport rep;
  check_spec_only(spec, rep);
  if (rep.all_passed()) check_transversality(spec, domain, rep);
  return rep;
}

int index_of_target(const TargetSet& target, const SystemSpec& spec) {
  const FaceRectangle& r = target.rect;
  const int d = spec.dim;
  if (r.axis < 0 || r.axis >= d)
    throw std::invalid_argument("target face axis out of range");
  if (static_cast<int>(r.intervals.size()) != d)
    throw std::invalid_argument("target interval list must have one entry per axis");
  for (int k = r.axis; k < d; ++k) {
    bool all_contain_zero = true;
    for (int m = k + 1; m < d; ++m)
      all_contain_zero = all_contain_zero && r.intervals[m].contains(0.0);
    if (all_contain_zero) return k;
  }
  // Unreachable: k = d-1 has no trailing intervals to fail.
  throw std::logic_error("target closure misses every span(e_0..e_k)");
}

}  // namespace exitflow
