#include "exitflow/stats.hpp"

#include <algorithm>
#include <cmath>

namespace exitflow {

double PowerLawFit::constant() const { return std::exp(intercept); }

PowerLawFit fit_exponent(const std::vector<LadderPoint>& points) {
  if (points.size() < 3)
    throw UnderPoweredError("exponent fit needs at least 3 ladder points");
  for (const auto& p : points) {
    if (p.hits == 0)
      throw UnderPoweredError("exponent fit refuses cells with zero hits");
    if (p.hits < 25)
      throw UnderPoweredError("exponent fit needs >= 25 hits per ladder point");
    if (p.hits > p.trials) throw std::invalid_argument("hits exceed trials");
  }

  PowerLawFit fit;
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (const auto& p : points) {
    const double phat = static_cast<double>(p.hits) / p.trials;
    const double x = std::log(p.epsilon);
    const double y = std::log(phat);
    // Delta method: var(log p-hat) = (1 - p) / (n p).
    const double var = std::max((1.0 - phat) / (p.trials * phat), 1e-300);
    const double w = 1.0 / var;
    fit.weights.push_back(w);
    sw += w;
    swx += w * x;
    swy += w * y;
    swxx += w * x * x;
    swxy += w * x * y;
  }
  const double det = sw * swxx - swx * swx;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  fit.slope_se = std::sqrt(sw / det);
  fit.intercept_se = std::sqrt(swxx / det);

  double ss_res = 0, ss_tot = 0;
  const double ybar = swy / sw;
  for (std::size_t m = 0; m < points.size(); ++m) {
    const double x = std::log(points[m].epsilon);
    const double y = std::log(static_cast<double>(points[m].hits) / points[m].trials);
    const double yhat = fit.intercept + fit.slope * x;
    ss_res += fit.weights[m] * (y - yhat) * (y - yhat);
    ss_tot += fit.weights[m] * (y - ybar) * (y - ybar);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

WilsonInterval wilson_interval(std::int64_t k, std::int64_t n, double z) {
  WilsonInterval w;
  if (n <= 0) return w;
  const double p = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  w.lo = std::max(0.0, center - half);
  w.hi = std::min(1.0, center + half);
  return w;
}

namespace {

// Asymptotic Kolmogorov distribution Q(t) = 2 sum (-1)^{k-1} e^{-2 k^2 t^2}.
double kolmogorov_pvalue(double t) {
  if (t < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

KsResult ks_uniform_test(std::vector<double> samples, Interval support) {
  KsResult r;
  r.n = static_cast<int>(samples.size());
  if (r.n < 200)
    throw UnderPoweredError("KS test needs >= 200 samples (asymptotic critical values)");
  std::sort(samples.begin(), samples.end());
  const double len = support.length();
  double d = 0.0;
  for (int i = 0; i < r.n; ++i) {
    const double u = std::clamp((samples[i] - support.lo) / len, 0.0, 1.0);
    d = std::max(d, std::max((i + 1.0) / r.n - u, u - static_cast<double>(i) / r.n));
  }
  r.statistic = d;
  const double rn = std::sqrt(static_cast<double>(r.n));
  r.p_value = kolmogorov_pvalue(d * (rn + 0.12 + 0.11 / rn));
  return r;
}

double binomial_test_pvalue(std::int64_t k, std::int64_t n, double w) {
  const double mean = n * w;
  const double sd = std::sqrt(n * w * (1.0 - w));
  if (sd == 0.0) return k == (w > 0.5 ? n : 0) ? 1.0 : 0.0;
  const double z = (std::abs(static_cast<double>(k) - mean) - 0.5) / sd;
  return std::clamp(2.0 * (1.0 - normal_cdf(std::max(z, 0.0))), 0.0, 1.0);
}

GoFReport test_conditional_law(const std::vector<VectorXd>& samples,
                               const ConditionalLawDescription& law, double level) {
  GoFReport rep;
  rep.level = level;
  if (samples.size() < 200)
    throw UnderPoweredError("conditional-law test needs >= 200 conditioned samples");
  const int d = static_cast<int>(samples.front().size());

  for (const auto& s : samples)
    (s[law.axis] > 0 ? rep.face_plus : rep.face_minus)++;

  bool pass = true;

  // KS per leading coordinate, both faces pooled (the predicted marginal
  // is the same uniform law on each face for rectangle targets).
  for (int j = 0; j < law.index; ++j) {
    std::vector<double> coords;
    coords.reserve(samples.size());
    for (const auto& s : samples) coords.push_back(s[j]);
    const Interval sup = law.faces.front().support[j];
    KsResult ks = ks_uniform_test(std::move(coords), sup);
    pass = pass && ks.p_value >= level;
    rep.ks_marginals.push_back(ks);
  }

  // Face weights against chi_+ : chi_-.
  double w_plus = 0.0;
  for (const auto& f : law.faces)
    if (f.sign > 0) w_plus = f.weight;
  if (law.faces.size() == 2) {
    rep.face_binomial_p =
        binomial_test_pvalue(rep.face_plus, rep.face_plus + rep.face_minus, w_plus);
    pass = pass && rep.face_binomial_p >= level;
  } else {
    const int expected_sign = law.faces.front().sign;
    const auto wrong = expected_sign > 0 ? rep.face_minus : rep.face_plus;
    pass = pass && wrong == 0;
  }

  for (int j = law.index + 1; j < d; ++j) {
    std::vector<double> abs_coords;
    abs_coords.reserve(samples.size());
    for (const auto& s : samples) abs_coords.push_back(std::abs(s[j]));
    rep.transverse_medians.push_back(median_abs(std::move(abs_coords)));
  }

  rep.pass = pass;
  return rep;
}

double median_abs(std::vector<double> values) {
  if (values.empty()) return 0.0;
  for (double& v : values) v = std::abs(v);
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double med = values[mid];
  if (values.size() % 2 == 0) {
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    med = 0.5 * (med + lower);
  }
  return med;
}

CollapseRate transverse_collapse_rate(
    const std::vector<std::pair<double, std::vector<double>>>& abs_samples_per_eps) {
  if (abs_samples_per_eps.size() < 2)
    throw UnderPoweredError("collapse rate needs at least 2 epsilon values");
  CollapseRate out;
  std::vector<double> xs, ys;
  bool all_zero = true;
  for (const auto& [eps, vals] : abs_samples_per_eps) {
    const double med = median_abs(vals);
    if (med > 0.0) all_zero = false;
    xs.push_back(std::log(eps));
    ys.push_back(med > 0.0 ? std::log(med) : 0.0);
  }
  if (all_zero) {
    out.exact_collapse = true;
    return out;
  }
  const auto n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t m = 0; m < xs.size(); ++m) {
    sx += xs[m];
    sy += ys[m];
    sxx += xs[m] * xs[m];
    sxy += xs[m] * ys[m];
  }
  const double det = n * sxx - sx * sx;
  out.slope = (n * sxy - sx * sy) / det;
  const double intercept = (sy - out.slope * sx) / n;
  if (xs.size() > 2) {
    double ss = 0.0;
    for (std::size_t m = 0; m < xs.size(); ++m) {
      const double r = ys[m] - intercept - out.slope * xs[m];
      ss += r * r;
    }
    out.se = std::sqrt(ss / (n - 2.0) * n / det);
  }
  return out;
}

}  // namespace exitflow
