#include "exitflow/config.hpp"
#include "exitflow/experiment.hpp"
#include "exitflow/flow.hpp"
#include "exitflow/predict.hpp"
#include "exitflow/report.hpp"
#include "exitflow/stats.hpp"
#include "exitflow/toml.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;
using namespace exitflow;

constexpr int kOk = 0;
constexpr int kValidationError = 2;
constexpr int kIoError = 3;
constexpr int kUnderPowered = 4;

struct CommonOpts {
  std::string config_path;
  std::int64_t seed = -1;
  int threads = 0;
  std::string out_dir;
};

CampaignConfig load_with_overrides(const CommonOpts& opts) {
  CampaignConfig cfg = load_config(opts.config_path);
  if (opts.seed >= 0) cfg.plan.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.threads > 0) cfg.plan.threads = opts.threads;
  if (!opts.out_dir.empty()) cfg.io.out_dir = opts.out_dir;
  return cfg;
}

int cmd_predict(const CommonOpts& opts) {
  const CampaignConfig cfg = load_with_overrides(opts);
  const ExperimentPlan& plan = cfg.plan;
  const ValidationReport report = validate_system(plan.system, plan.domain);
  if (!report.all_passed()) {
    std::cerr << "system validation failed:\n" << report.summary();
    return kValidationError;
  }
  const double L = plan.chart_L();
  const ExponentLadder ladder = compute_rho(plan.system.lambdas);
  const LimitCovariance cov = limit_covariance(plan.system.sigma0, plan.system.lambdas);

  json out;
  out["rho"] = std::vector<double>(ladder.rho.data(), ladder.rho.data() + plan.system.dim);
  {
    std::vector<std::vector<double>> c(plan.system.dim,
                                       std::vector<double>(plan.system.dim));
    for (int i = 0; i < plan.system.dim; ++i)
      for (int j = 0; j < plan.system.dim; ++j) c[i][j] = cov.C(i, j);
    out["C"] = c;
  }
  out["chart_half_side"] = L;
  json targets = json::array();
  for (const auto& t : plan.targets) {
    const TargetPrediction pred = predict_target(t, plan.system, plan.domain, L);
    const ChiValue chi =
        chi_pm(plan.system.xi0, pred.index, cov, plan.system.lambdas);
    json jt;
    jt["name"] = pred.name;
    jt["index"] = pred.index + 1;
    jt["rho"] = pred.rho;
    jt["mu"] = pred.mu.total;
    jt["mu_plus"] = pred.mu.plus;
    jt["mu_minus"] = pred.mu.minus;
    jt["c_A"] = pred.c_a;
    jt["chi_plus"] = chi.plus;
    jt["chi_minus"] = chi.minus;
    targets.push_back(std::move(jt));
  }
  out["targets"] = std::move(targets);
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int cmd_simulate(const CommonOpts& opts, bool write_samples_flag) {
  CampaignConfig cfg = load_with_overrides(opts);
  if (write_samples_flag) cfg.io.write_samples = true;
  const ExperimentResult result = run_plan(cfg.plan, cfg.io);
  std::cout << "wrote " << summary_path(cfg.io.out_dir, cfg.plan) << "\n";
  if (cfg.io.write_samples)
    for (std::size_t ei = 0; ei < cfg.plan.epsilons.size(); ++ei)
      std::cout << "wrote " << jsonl_path(cfg.io.out_dir, cfg.plan, ei) << "\n";
  for (const auto& rep : result.reports) {
    if (rep.fit)
      std::cout << rep.prediction.name << ": fitted slope "
                << rep.fit->slope << " (predicted " << rep.prediction.rho
                << "), constant " << rep.fit->constant() << " (predicted "
                << rep.prediction.mu.total << ")\n";
  }
  return kOk;
}

int cmd_fit(const CommonOpts& opts) {
  const CampaignConfig cfg = load_with_overrides(opts);
  const ExperimentResult result = refit_from_samples(cfg.plan, cfg.io.out_dir);
  std::cout << summary_to_json(cfg.plan, result) << "\n";
  bool any_fit = false;
  for (const auto& rep : result.reports) any_fit = any_fit || rep.fit.has_value();
  if (!any_fit) {
    std::cerr << "under-powered statistics: no target had enough hits to fit\n";
    return kUnderPowered;
  }
  return kOk;
}

int cmd_report(const std::string& summary_file, const std::string& svg_file) {
  std::ifstream in(summary_file);
  if (!in) {
    std::cerr << "cannot open summary: " << summary_file << "\n";
    return kIoError;
  }
  json summary = json::parse(in, nullptr, false);
  if (summary.is_discarded()) {
    std::cerr << "corrupt summary JSON: " << summary_file << "\n";
    return kIoError;
  }
  std::cout << render_table(summary);
  if (!svg_file.empty()) {
    std::ofstream svg(svg_file, std::ios::binary);
    if (!svg) {
      std::cerr << "cannot open SVG output: " << svg_file << "\n";
      return kIoError;
    }
    svg << render_svg(summary);
    std::cout << "wrote " << svg_file << "\n";
  }
  return kOk;
}

int cmd_validate_flow(const CommonOpts& opts, int n_points,
                      const std::string& csv_file) {
  const CampaignConfig cfg = load_with_overrides(opts);
  const ExperimentPlan& plan = cfg.plan;
  if (plan.system.drift_kind != DriftKind::Linear) {
    std::cerr << "validate-flow compares against the closed-form linear exit "
                 "map and needs a linear system\n";
    return kValidationError;
  }
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!csv_file.empty()) {
    file.open(csv_file, std::ios::binary);
    if (!file) {
      std::cerr << "cannot open CSV output: " << csv_file << "\n";
      return kIoError;
    }
    os = &file;
  }
  const int d = plan.system.dim;
  *os << "point,numeric_exit,numeric_time,closed_form_exit,closed_form_time,"
         "position_error,time_error\n";
  const auto pts = sample_points(d, n_points, 0.5 * plan.domain.half_side);
  double worst = 0.0;
  const auto join = [](const VectorXd& v) {
    std::string s;
    for (int j = 0; j < v.size(); ++j) s += (j ? " " : "") + std::to_string(v[j]);
    return s;
  };
  for (const auto& p : pts) {
    if (p.cwiseAbs().maxCoeff() < 1e-3) continue;
    const FlowResult num = deterministic_exit(p, plan.system, plan.domain);
    const LinearExit ref = linear_box_exit(p, plan.system.lambdas,
                                           plan.domain.half_side);
    const double perr = (num.exit_point - ref.point).norm();
    const double terr = std::abs(num.exit_time - ref.time);
    worst = std::max(worst, perr);
    *os << join(p) << "," << join(num.exit_point) << "," << num.exit_time << ","
        << join(ref.point) << "," << ref.time << "," << perr << "," << terr << "\n";
  }
  std::cerr << "max position error: " << worst << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exit-location asymptotics near a repelling equilibrium"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool write_samples = false;
  std::string summary_file, svg_file, csv_file;
  int n_points = 1000;

  const auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config)
      sub->add_option("--config", opts.config_path, "campaign TOML file")
          ->required();
    sub->add_option("--seed", opts.seed, "override the config seed");
    sub->add_option("--threads", opts.threads, "override worker thread count");
    sub->add_option("--out", opts.out_dir, "override the output directory");
  };

  auto* predict = app.add_subcommand("predict", "print the analytic predictor");
  add_common(predict);
  auto* simulate = app.add_subcommand("simulate", "run the campaign");
  add_common(simulate);
  simulate->add_flag("--write-samples", write_samples, "stream raw exits as JSONL");
  auto* fit = app.add_subcommand("fit", "re-run statistics on stored JSONL");
  add_common(fit);
  auto* report = app.add_subcommand("report", "render a summary table and SVG");
  report->add_option("--summary", summary_file, "summary JSON path")->required();
  report->add_option("--svg", svg_file, "write a log-log SVG plot here");
  auto* vflow = app.add_subcommand("validate-flow",
                                   "compare numeric exits with the linear closed form");
  add_common(vflow);
  vflow->add_option("--points", n_points, "number of sample points");
  vflow->add_option("--csv", csv_file, "CSV output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (predict->parsed()) return cmd_predict(opts);
    if (simulate->parsed()) return cmd_simulate(opts, write_samples);
    if (fit->parsed()) return cmd_fit(opts);
    if (report->parsed()) return cmd_report(summary_file, svg_file);
    if (vflow->parsed()) return cmd_validate_flow(opts, n_points, csv_file);
  } catch (const UnderPoweredError& e) {
    std::cerr << "under-powered statistics: " << e.what() << "\n";
    return kUnderPowered;
  } catch (const TomlError& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return kValidationError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidationError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::domain_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}
