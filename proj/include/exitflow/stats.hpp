#pragma once

#include "exitflow/predict.hpp"

#include <stdexcept>
#include <vector>

namespace exitflow {

// Raised when a statistical routine receives too little data to say
// anything at the requested level (CLI exit code 4).
struct UnderPoweredError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LadderPoint {
  double epsilon = 0.0;
  std::int64_t hits = 0;
  std::int64_t trials = 0;
};

struct PowerLawFit {
  double slope = 0.0;      // estimated exponent rho
  double intercept = 0.0;  // log of the constant
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double r_squared = 0.0;
  std::vector<double> weights;  // per-point WLS weights
  double constant() const;      // exp(intercept)
};

// Weighted least squares of log(k/n) on log(eps); weights are the
// delta-method variances of log p-hat. Needs >= 3 points with >= 25 hits.
PowerLawFit fit_exponent(const std::vector<LadderPoint>& points);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
};
WilsonInterval wilson_interval(std::int64_t k, std::int64_t n, double z = 1.959964);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n = 0;
};

// One-sample Kolmogorov-Smirnov against the uniform law on [lo, hi],
// p-value from the asymptotic Kolmogorov distribution (n >= 200 enforced).
KsResult ks_uniform_test(std::vector<double> samples, Interval support);

// Two-sided binomial test of k successes in n trials against probability w.
double binomial_test_pvalue(std::int64_t k, std::int64_t n, double w);

struct GoFReport {
  std::vector<KsResult> ks_marginals;      // one per leading coordinate
  double face_binomial_p = 1.0;
  std::int64_t face_plus = 0, face_minus = 0;
  std::vector<double> transverse_medians;  // median |x^j| per trailing coordinate
  double level = 0.01;
  bool pass = false;
};

// Tests conditioned exit samples against the predicted limiting law:
// KS per leading marginal, binomial test of the face split, medians of
// the trailing coordinates. Needs >= 200 conditioned samples.
GoFReport test_conditional_law(const std::vector<VectorXd>& samples,
                               const ConditionalLawDescription& law,
                               double level = 0.01);

struct CollapseRate {
  double slope = 0.0;
  double se = 0.0;
  bool exact_collapse = false;  // all samples identically zero
};

// Regression of log median|x^j| on log eps across the ladder; the slope
// approaches 1 - lambda_j / lambda_i for the transverse coordinate j.
CollapseRate transverse_collapse_rate(
    const std::vector<std::pair<double, std::vector<double>>>& abs_samples_per_eps);

double median_abs(std::vector<double> values);

}  // namespace exitflow
