#include "exitflow/stats.hpp"

#include "exitflow/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace exitflow;

TEST_CASE("noiseless power law is recovered exactly") {
  std::vector<LadderPoint> pts;
  for (double eps : {0.3, 0.2, 0.1, 0.05}) {
    const std::int64_t n = 1000000;
    pts.push_back({eps, static_cast<std::int64_t>(std::llround(0.5 * eps * n)), n});
  }
  const PowerLawFit fit = fit_exponent(pts);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(fit.constant() == doctest::Approx(0.5).epsilon(1e-2));
  CHECK(fit.r_squared > 0.9999);
}

TEST_CASE("binomial ladder samples recover the generating exponent") {
  // Oracle: the known generating law p = 0.3 eps^{0.75}.
  CounterRng rng(77, 0);
  std::uint64_t ctr = 0;
  std::vector<LadderPoint> pts;
  for (double eps : {0.3, 0.2, 0.1, 0.05}) {
    const std::int64_t n = 1000000;
    const double p = 0.3 * std::pow(eps, 0.75);
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) k += rng.uniform(ctr++) < p;
    pts.push_back({eps, k, n});
  }
  const PowerLawFit fit = fit_exponent(pts);
  CHECK(std::abs(fit.slope - 0.75) < 2.0 * fit.slope_se);
  CHECK(fit.slope_se < 0.01);
}

TEST_CASE("constant probability gives slope zero") {
  CounterRng rng(79, 0);
  std::uint64_t ctr = 0;
  std::vector<LadderPoint> pts;
  for (double eps : {0.3, 0.2, 0.1}) {
    const std::int64_t n = 400000;
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) k += rng.uniform(ctr++) < 0.25;
    pts.push_back({eps, k, n});
  }
  const PowerLawFit fit = fit_exponent(pts);
  CHECK(std::abs(fit.slope) < 2.0 * fit.slope_se);
}

TEST_CASE("fit refuses under-powered input") {
  std::vector<LadderPoint> two = {{0.2, 100, 1000}, {0.1, 50, 1000}};
  CHECK_THROWS_AS(fit_exponent(two), UnderPoweredError);
  std::vector<LadderPoint> zero = {{0.3, 100, 1000}, {0.2, 0, 1000}, {0.1, 40, 1000}};
  CHECK_THROWS_AS(fit_exponent(zero), UnderPoweredError);
}

TEST_CASE("fit slope is invariant under rescaling the ladder") {
  std::vector<LadderPoint> pts, scaled;
  for (double eps : {0.4, 0.28, 0.2, 0.14}) {
    const std::int64_t n = 500000;
    const auto k = static_cast<std::int64_t>(std::llround(0.4 * std::pow(eps, 1.3) * n));
    pts.push_back({eps, k, n});
    scaled.push_back({2.0 * eps, k, n});
  }
  const PowerLawFit a = fit_exponent(pts);
  const PowerLawFit b = fit_exponent(scaled);
  CHECK(a.slope == doctest::Approx(b.slope).epsilon(1e-9));
  CHECK(a.intercept != doctest::Approx(b.intercept).epsilon(1e-3));
}

TEST_CASE("wilson interval contains the point estimate") {
  for (auto [k, n] : std::vector<std::pair<std::int64_t, std::int64_t>>{
           {0, 100}, {1, 100}, {50, 100}, {100, 100}, {3, 100000}}) {
    const WilsonInterval w = wilson_interval(k, n);
    const double p = static_cast<double>(k) / n;
    CHECK(w.lo <= p);
    CHECK(w.hi >= p);
    CHECK(w.lo >= 0.0);
    CHECK(w.hi <= 1.0);
  }
}

TEST_CASE("KS test calibration under the null") {
  // Samples drawn from the hypothesized law: p-values spread over (0,1).
  CounterRng rng(100, 0);
  std::uint64_t ctr = 0;
  int rejections = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> xs;
    for (int i = 0; i < 500; ++i) xs.push_back(2.0 * rng.uniform(ctr++) - 1.0);
    const KsResult r = ks_uniform_test(std::move(xs), {-1.0, 1.0});
    rejections += r.p_value < 0.05;
  }
  CHECK(rejections < 0.05 * trials + 3 * std::sqrt(0.05 * 0.95 * trials) + 1);
}

TEST_CASE("KS test rejects a point mass") {
  std::vector<double> xs(500, 0.1234);
  const KsResult r = ks_uniform_test(std::move(xs), {-1.0, 1.0});
  CHECK(r.statistic > 0.4);
  CHECK(r.p_value < 1e-6);
}

TEST_CASE("KS test needs 200 samples") {
  std::vector<double> xs(150, 0.0);
  CHECK_THROWS_AS(ks_uniform_test(std::move(xs), {-1.0, 1.0}), UnderPoweredError);
}

TEST_CASE("conditional law test passes on its own law and fails on point mass") {
  ConditionalLawDescription law;
  law.index = 1;
  law.axis = 1;
  law.faces = {{+1, 0.5, {{-1.0, 1.0}}}, {-1, 0.5, {{-1.0, 1.0}}}};

  CounterRng rng(55, 0);
  std::uint64_t ctr = 0;
  std::vector<VectorXd> good, bad;
  for (int i = 0; i < 3000; ++i) {
    VectorXd s(2);
    s[0] = 2.0 * rng.uniform(ctr++) - 1.0;
    s[1] = rng.uniform(ctr++) < 0.5 ? 1.0 : -1.0;
    good.push_back(s);
    VectorXd p(2);
    p << 0.22, 1.0;
    bad.push_back(p);
  }
  const GoFReport ok = test_conditional_law(good, law);
  CHECK(ok.pass);
  REQUIRE(ok.ks_marginals.size() == 1);
  CHECK(ok.ks_marginals[0].p_value >= 0.01);

  const GoFReport fail = test_conditional_law(bad, law);
  CHECK_FALSE(fail.pass);
}

TEST_CASE("conditional law test is order-invariant") {
  ConditionalLawDescription law;
  law.index = 1;
  law.axis = 1;
  law.faces = {{+1, 0.5, {{-1.0, 1.0}}}, {-1, 0.5, {{-1.0, 1.0}}}};
  CounterRng rng(56, 0);
  std::uint64_t ctr = 0;
  std::vector<VectorXd> samples;
  for (int i = 0; i < 500; ++i) {
    VectorXd s(2);
    s[0] = 2.0 * rng.uniform(ctr++) - 1.0;
    s[1] = rng.uniform(ctr++) < 0.5 ? 1.0 : -1.0;
    samples.push_back(s);
  }
  const GoFReport a = test_conditional_law(samples, law);
  std::reverse(samples.begin(), samples.end());
  const GoFReport b = test_conditional_law(samples, law);
  CHECK(a.ks_marginals[0].statistic == b.ks_marginals[0].statistic);
  CHECK(a.face_binomial_p == b.face_binomial_p);
}

TEST_CASE("transverse collapse rate recovers a synthetic exponent") {
  // median |x| = 0.7 eps^{0.5} exactly.
  std::vector<std::pair<double, std::vector<double>>> data;
  for (double eps : {0.2, 0.14, 0.1, 0.07}) {
    std::vector<double> vals;
    CounterRng rng(60, static_cast<std::uint64_t>(1e3 * eps));
    std::uint64_t ctr = 0;
    for (int i = 0; i < 4001; ++i)
      vals.push_back(0.7 * std::pow(eps, 0.5) * std::tan(M_PI * rng.uniform(ctr++) / 2));
    data.emplace_back(eps, std::move(vals));
  }
  const CollapseRate r = transverse_collapse_rate(data);
  CHECK_FALSE(r.exact_collapse);
  CHECK(std::abs(r.slope - 0.5) < 0.1);
}

TEST_CASE("degenerate transverse coordinate reports exact collapse") {
  std::vector<std::pair<double, std::vector<double>>> data = {
      {0.2, std::vector<double>(100, 0.0)}, {0.1, std::vector<double>(100, 0.0)}};
  const CollapseRate r = transverse_collapse_rate(data);
  CHECK(r.exact_collapse);
}

TEST_CASE("single ladder point is rejected for collapse") {
  std::vector<std::pair<double, std::vector<double>>> data = {
      {0.2, std::vector<double>(100, 0.1)}};
  CHECK_THROWS_AS(transverse_collapse_rate(data), UnderPoweredError);
}
