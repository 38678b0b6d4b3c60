#include "exitflow/sde.hpp"

#include "exitflow/predict.hpp"

#include <doctest.h>

#include <cmath>

using namespace exitflow;

namespace {

SystemSpec linear21() {
  return SystemSpec::linear((VectorXd(2) << 2.0, 1.0).finished(),
                            MatrixXd::Identity(2, 2));
}

}  // namespace

TEST_CASE("one-dimensional symmetric exit splits evenly") {
  auto spec = SystemSpec::linear(VectorXd::Ones(1), MatrixXd::Identity(1, 1));
  SimConfig cfg;
  cfg.epsilon = 0.3;
  cfg.seed = 99;
  cfg.n_trajectories = 20000;
  SimStats stats;
  const auto samples = simulate_exits_collect(spec, DomainSpec::box(1.0), cfg, &stats);
  // A tail of order eps^7 outlasts the default horizon in one dimension.
  CHECK(stats.non_exited < 20);
  std::int64_t right = 0;
  for (const auto& s : samples) right += s.face_sign > 0;
  const double p = static_cast<double>(right) / samples.size();
  const double se = std::sqrt(0.25 / samples.size());
  CHECK(std::abs(p - 0.5) < 3.0 * se);
}

TEST_CASE("exit locations satisfy the boundary equation") {
  const auto spec = linear21();
  SimConfig cfg;
  cfg.epsilon = 0.2;
  cfg.seed = 5;
  cfg.n_trajectories = 2000;
  const auto samples = simulate_exits_collect(spec, DomainSpec::box(1.0), cfg);
  REQUIRE(!samples.empty());
  for (const auto& s : samples) {
    CHECK(std::abs(s.location.cwiseAbs().maxCoeff() - 1.0) < 1e-9);
    CHECK(std::abs(s.location[s.face_axis]) == doctest::Approx(1.0));
    CHECK(s.time > 0.0);
  }
}

TEST_CASE("thread count does not change the sample sequence") {
  const auto spec = linear21();
  SimConfig cfg;
  cfg.epsilon = 0.25;
  cfg.seed = 1234;
  cfg.n_trajectories = 3000;
  cfg.threads = 1;
  const auto one = simulate_exits_collect(spec, DomainSpec::box(1.0), cfg);
  cfg.threads = 8;
  const auto eight = simulate_exits_collect(spec, DomainSpec::box(1.0), cfg);
  REQUIRE(one.size() == eight.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].trajectory_id == eight[i].trajectory_id);
    CHECK(one[i].time == eight[i].time);
    CHECK((one[i].location - eight[i].location).norm() == 0.0);
  }
}

TEST_CASE("vanishing noise concentrates exits near the leading trace point") {
  auto spec = linear21();
  spec.xi0 = (VectorXd(2) << 1.0, 0.0).finished();
  SimConfig cfg;
  cfg.epsilon = 1e-6;
  cfg.seed = 7;
  cfg.n_trajectories = 400;
  const auto samples = simulate_exits_collect(spec, DomainSpec::box(1.0), cfg);
  REQUIRE(samples.size() == 400);
  std::vector<double> dist;
  VectorXd q(2);
  q << 1.0, 0.0;
  for (const auto& s : samples) dist.push_back((s.location - q).norm());
  std::sort(dist.begin(), dist.end());
  CHECK(dist[dist.size() / 2] < 0.05);
}

TEST_CASE("halving dt moves face probabilities by less than two standard errors") {
  const auto spec = linear21();
  const std::int64_t n = 100000;
  double p[2];
  for (int run = 0; run < 2; ++run) {
    SimConfig cfg;
    cfg.epsilon = 0.3;
    cfg.dt = run == 0 ? 2e-3 : 1e-3;
    cfg.seed = 31337 + run;  // independent noise, only dt systematic
    cfg.n_trajectories = n;
    std::int64_t hits = 0;
    simulate_exits(spec, DomainSpec::box(1.0), cfg, [&](const ExitSample& s) {
      hits += s.face_axis == 1;
    });
    p[run] = static_cast<double>(hits) / n;
  }
  const double se = std::sqrt(2.0 * p[1] * (1.0 - p[1]) / n);
  CHECK(std::abs(p[0] - p[1]) < 2.0 * se);
}

TEST_CASE("configs violating the step and horizon guards are rejected") {
  const auto spec = linear21();
  SimConfig cfg;
  cfg.epsilon = 0.2;
  cfg.n_trajectories = 10;
  cfg.dt = 0.06;  // above 0.1 / lambda_1
  CHECK_THROWS_AS(simulate_exits_collect(spec, DomainSpec::box(1.0), cfg),
                  std::invalid_argument);
  cfg.dt = 0.0;
  cfg.max_time = 1.0;  // below (4 / lambda_d) log(1/eps)
  CHECK_THROWS_AS(simulate_exits_collect(spec, DomainSpec::box(1.0), cfg),
                  std::invalid_argument);
}

TEST_CASE("recorded paths start at eps*xi0 and end at the exit") {
  auto spec = linear21();
  spec.xi0 = (VectorXd(2) << 0.5, 0.5).finished();
  SimConfig cfg;
  cfg.epsilon = 0.2;
  cfg.seed = 44;
  cfg.n_trajectories = 3;
  cfg.record_paths = true;
  const auto samples = simulate_exits_collect(spec, DomainSpec::box(1.0), cfg);
  REQUIRE(samples.size() == 3);
  for (const auto& s : samples) {
    REQUIRE(s.path.size() >= 2);
    CHECK((s.path.front().second - 0.2 * spec.xi0).norm() == 0.0);
    CHECK(s.path.back().first == s.time);
    CHECK((s.path.back().second - VectorXd(s.location)).norm() == 0.0);
  }
}

TEST_CASE("gaussian limit samples match the limit covariance") {
  const auto spec = linear21();
  const double T = 18.5;  // e^{-lambda_d T} < 1e-8
  const auto samples = simulate_gaussian_limit(spec, T, 200000, 2021);
  const auto cov = limit_covariance(spec.sigma0, spec.lambdas);
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const MatrixXd centered = samples.colwise() - mean;
  const MatrixXd chat = centered * centered.transpose() / (samples.cols() - 1.0);
  const double n = static_cast<double>(samples.cols());
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(mean[j]) < 3.0 * std::sqrt(cov.C(j, j) / n));
    for (int k = 0; k < 2; ++k) {
      const double se =
          std::sqrt((cov.C(j, j) * cov.C(k, k) + cov.C(j, k) * cov.C(j, k)) / n);
      CHECK(std::abs(chat(j, k) - cov.C(j, k)) < 3.0 * se);
    }
  }
}

TEST_CASE("gaussian limit variance increases toward its limit") {
  const auto spec = linear21();
  const auto cov = limit_covariance(spec.sigma0, spec.lambdas);
  double prev = 0.0;
  for (double T : {0.2, 0.5, 1.0, 2.0, 19.0}) {
    const auto samples = simulate_gaussian_limit(spec, T, 40000, 11);
    const double var = samples.row(0).squaredNorm() / samples.cols();
    CHECK(var > prev - 0.01);
    prev = var;
  }
  CHECK(prev == doctest::Approx(cov.C(0, 0)).epsilon(0.05));
}

TEST_CASE("flow tracking deviation vanishes with the noise") {
  const auto spec = linear21();
  const auto domain = DomainSpec::box(1.0);
  SimConfig cfg;
  cfg.seed = 3;
  cfg.n_trajectories = 200;
  cfg.dt = 1e-4;

  cfg.epsilon = 1e-9;
  const auto quiet = flow_tracking_diagnostic(spec, domain, 0.25, cfg);
  CHECK(quiet.count > 0);
  CHECK(quiet.q99 < 1e-2);  // Euler-vs-flow discretization error only

  cfg.epsilon = 0.1;
  const auto loud = flow_tracking_diagnostic(spec, domain, 0.25, cfg);
  cfg.epsilon = 0.05;
  const auto half = flow_tracking_diagnostic(spec, domain, 0.25, cfg);
  CHECK(half.q99 < loud.q99);
}

TEST_CASE("tracking deviation grows with the horizon within the linear bound") {
  // Perturbed-initial-condition oracle: for the linear field the flow
  // spread is exactly max_j |delta_j| e^{lambda_j t} <= |delta| e^{lambda_1 t}.
  const auto spec = linear21();
  SimConfig cfg;
  cfg.seed = 13;
  cfg.n_trajectories = 300;
  cfg.epsilon = 0.02;
  const auto near = flow_tracking_diagnostic(spec, DomainSpec::box(1.0), 0.25, cfg);
  const auto far = flow_tracking_diagnostic(spec, DomainSpec::box(2.0), 0.25, cfg);
  CHECK(far.q50 >= near.q50);

  // Tracking from partial B_L to the boundary lasts about log(L_D/L)/lambda_2;
  // the deviation stays within the Gronwall envelope of an epsilon-size kick.
  const double horizon = std::log(2.0 / 0.25) / 1.0 + 1.0;
  const double bound = 10.0 * cfg.epsilon * std::exp(2.0 * horizon);
  CHECK(far.max < bound);
}
