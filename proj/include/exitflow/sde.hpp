#pragma once

#include "exitflow/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace exitflow {

struct SimConfig {
  double epsilon = 0.1;
  double dt = 0.0;        // 0: min(1e-3, 0.02/lambda_1, 0.1 eps^{2/3})
  double max_time = 0.0;  // 0: (8/lambda_d) log(1/eps); must stay >= (4/lambda_d) log(1/eps)
  std::uint64_t seed = 0;
  std::int64_t n_trajectories = 0;
  int threads = 1;            // 0: hardware concurrency
  bool record_paths = false;  // attach per-step paths to samples (smoke scale only)
};

double default_dt(const SystemSpec& spec, double epsilon);
double default_max_time(const SystemSpec& spec, double epsilon);

struct ExitSample {
  Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 8, 1> location;
  double time = 0.0;
  int face_axis = -1;  // -1 on smooth domains
  int face_sign = 0;
  std::int64_t trajectory_id = 0;
  double epsilon = 0.0;
  std::vector<std::pair<double, VectorXd>> path;  // only with record_paths
};

struct SimStats {
  std::int64_t trials = 0;
  std::int64_t exited = 0;
  std::int64_t non_exited = 0;
};

// Euler-Maruyama exit sampler. Trajectories use independent counter-based
// streams keyed by (seed, trajectory_id), are simulated in parallel, and
// are handed to the sink in trajectory order, so identical (seed, config)
// produce identical output for any thread count. The boundary crossing is
// located by linear interpolation of the domain level function between the
// last inside and first outside point, then projected onto the boundary.
using ExitSink = std::function<void(const ExitSample&)>;
SimStats simulate_exits(const SystemSpec& spec, const DomainSpec& domain,
                        const SimConfig& config, const ExitSink& sink);

std::vector<ExitSample> simulate_exits_collect(const SystemSpec& spec,
                                               const DomainSpec& domain,
                                               const SimConfig& config,
                                               SimStats* stats = nullptr);

// Samples of the Gaussian limit process Z_T^j = int_0^T e^{-lambda_j s}
// sigma^j_l(0) dW^l_s, one column per sample. Increments over each step
// are exact (the integrand is deterministic), so the step count controls
// cost, not bias; T only needs e^{-lambda_d T} negligible.
MatrixXd simulate_gaussian_limit(const SystemSpec& spec, double T,
                                 std::int64_t n_samples, std::uint64_t seed,
                                 int n_steps = 64, int threads = 1);

// Follow-the-flow diagnostic: run the SDE to its first exit from the
// conjugacy chart f^{-1}(B_L), then measure the sup deviation between the
// continued noisy path and the deterministic flow started at that exit
// point, until the domain boundary.
struct FlowTrackingSummary {
  double q50 = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
  double max = 0.0;
  std::int64_t count = 0;
  std::int64_t failed = 0;  // trajectories that missed the horizon
  double epsilon = 0.0;
};
FlowTrackingSummary flow_tracking_diagnostic(const SystemSpec& spec,
                                             const DomainSpec& domain, double L,
                                             const SimConfig& config);

}  // namespace exitflow
