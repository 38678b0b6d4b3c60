#pragma once

#include "exitflow/model.hpp"
#include "exitflow/predict.hpp"
#include "exitflow/sde.hpp"
#include "exitflow/stats.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace exitflow {

struct BudgetRule {
  enum class Mode { Fixed, TargetHits };
  Mode mode = Mode::TargetHits;
  std::int64_t fixed_n = 100000;
  std::int64_t hits_target = 2000;
  std::int64_t cap = 100000000;
};

struct ExperimentPlan {
  SystemSpec system;
  DomainSpec domain;
  std::vector<TargetSet> targets;
  std::vector<double> epsilons;  // strictly decreasing ladder in (0,1)
  BudgetRule budget;
  std::uint64_t seed = 0;
  double dt = 0.0;        // 0: per-epsilon default
  double max_time = 0.0;  // 0: per-epsilon default
  int threads = 1;
  double chart_half_side = 0.0;  // L of B_L; 0: domain size (linear) or half of it
  std::string name = "campaign";

  double chart_L() const;
};

struct TargetPrediction {
  std::string name;
  int index = 0;  // 0-based
  double rho = 0.0;
  MuValue mu;
  double c_a = 0.0;
};

struct CellResult {
  double epsilon = 0.0;
  int target = 0;  // position in plan.targets
  std::int64_t trials = 0;
  std::int64_t hits = 0;
  std::int64_t non_exited = 0;
  double dt = 0.0;
  WilsonInterval wilson;
  std::vector<VectorXd> conditional_samples;
};

struct TargetReport {
  TargetPrediction prediction;
  std::optional<PowerLawFit> fit;
  std::string fit_failure;  // reason when fit is absent
  std::optional<GoFReport> gof;       // at the smallest usable epsilon
  double gof_epsilon = 0.0;
  std::vector<CollapseRate> collapse;  // per trailing coordinate
};

struct ExperimentResult {
  std::string config_hash;
  std::vector<TargetPrediction> predictions;
  std::vector<CellResult> cells;
  std::vector<TargetReport> reports;
};

struct RunOptions {
  std::string out_dir;        // empty: no files written
  bool write_samples = false; // stream raw exits as JSONL
};

// Planned number of trajectories for one epsilon: fixed, or sized so the
// expected number of conditioned hits reaches the target given the
// predictor value mu eps^rho (capped).
std::int64_t planned_trials(const ExperimentPlan& plan,
                            const std::vector<TargetPrediction>& preds, double eps);

// Membership of an exit sample in a target. Box targets test coordinate
// intervals on the face directly; preimage targets map the exit location
// through zeta_L first. Points within 1e-9 of an edge count as inside
// (closed intervals).
bool classify_exit(const ExitSample& sample, const TargetSet& target,
                   const SystemSpec& spec, const DomainSpec& domain, double L);

TargetPrediction predict_target(const TargetSet& target, const SystemSpec& spec,
                                const DomainSpec& domain, double L);

// Runs the full epsilon ladder against every target: one simulation per
// epsilon, each exit classified against each target. Deterministic given
// (plan, seed).
ExperimentResult run_plan(const ExperimentPlan& plan, const RunOptions& io = {});

// Recomputes counts, fits and GoF reports from stored JSONL samples.
ExperimentResult refit_from_samples(const ExperimentPlan& plan,
                                    const std::string& dir);

std::string plan_hash(const ExperimentPlan& plan);
std::string summary_to_json(const ExperimentPlan& plan, const ExperimentResult& result);
std::string jsonl_path(const std::string& dir, const ExperimentPlan& plan,
                       std::size_t eps_index);
std::string summary_path(const std::string& dir, const ExperimentPlan& plan);
void write_summary_file(const ExperimentPlan& plan, const ExperimentResult& result,
                        const std::string& dir);

// One JSONL record {trajectory_id, epsilon, time, location[], face}.
std::string exit_record_json(const ExitSample& sample);
bool parse_exit_record(const std::string& line, int dim, ExitSample& out);

}  // namespace exitflow
