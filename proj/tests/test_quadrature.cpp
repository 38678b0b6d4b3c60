#include "exitflow/quadrature.hpp"

#include <doctest.h>

#include <cmath>

using namespace exitflow;

TEST_CASE("adaptive quadrature on smooth and kinked integrands") {
  auto r = adaptive_quadrature([](double x) { return x * x; }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0 / 3).epsilon(1e-12));

  r = adaptive_quadrature([](double x) { return std::sin(x); }, 0.0, M_PI);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));

  r = adaptive_quadrature([](double x) { return std::abs(x - 1.0 / 3); }, 0.0, 1.0);
  CHECK(r.converged);
  // 1/2 ((1/3)^2 + (2/3)^2)
  CHECK(r.value == doctest::Approx(0.5 * (1.0 / 9 + 4.0 / 9)).epsilon(1e-10));
}

TEST_CASE("gauss-laguerre rules reproduce gamma moments") {
  for (double alpha : {0.0, -0.5, 0.5, 1.0, 2.5}) {
    const GaussRule rule = gauss_laguerre(64, alpha);
    REQUIRE(rule.nodes.size() == 64);
    CHECK(rule.nodes.minCoeff() > 0.0);

    // Moment k of t^alpha e^{-t} is Gamma(alpha + k + 1).
    for (int k = 0; k <= 3; ++k) {
      double sum = 0.0;
      for (int i = 0; i < 64; ++i)
        sum += rule.weights[i] * std::pow(rule.nodes[i], k);
      CHECK(sum == doctest::Approx(std::tgamma(alpha + k + 1)).epsilon(1e-10));
    }
  }
}

TEST_CASE("gauss-laguerre integrates a non-polynomial residual") {
  // int_0^inf t^{-1/2} e^{-t} cosh(sqrt(t)) dt = sqrt(pi) e^{1/4}.
  const GaussRule rule = gauss_laguerre(64, -0.5);
  double sum = 0.0;
  for (int i = 0; i < 64; ++i)
    sum += rule.weights[i] * std::cosh(std::sqrt(rule.nodes[i]));
  CHECK(sum == doctest::Approx(std::sqrt(M_PI) * std::exp(0.25)).epsilon(1e-10));
}
