#include "exitflow/experiment.hpp"

#include "exitflow/flow.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace exitflow {

namespace {

using nlohmann::json;

constexpr double kEdgeTol = 1e-9;
constexpr std::size_t kMaxStoredSamples = 200000;

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string face_code(const ExitSample& s) {
  if (s.face_axis < 0) return {};
  return std::to_string(s.face_axis + 1) + (s.face_sign > 0 ? "+" : "-");
}

}  // namespace

double ExperimentPlan::chart_L() const {
  if (chart_half_side > 0.0) return chart_half_side;
  if (domain.kind == DomainSpec::Kind::Box)
    return system.drift_kind == DriftKind::Linear ? domain.half_side
                                                  : 0.5 * domain.half_side;
  return domain.half_side > 0.0 ? domain.half_side : 0.5;
}

std::int64_t planned_trials(const ExperimentPlan& plan,
                            const std::vector<TargetPrediction>& preds, double eps) {
  if (plan.budget.mode == BudgetRule::Mode::Fixed) return plan.budget.fixed_n;
  std::int64_t n = plan.budget.hits_target;
  for (const auto& pred : preds) {
    if (pred.mu.total <= 0.0) continue;
    const double p = std::min(1.0, pred.mu.total * std::pow(eps, pred.rho));
    const double need = std::ceil(plan.budget.hits_target / p);
    n = std::max(n, static_cast<std::int64_t>(need));
  }
  return std::min(n, plan.budget.cap);
}

bool classify_exit(const ExitSample& sample, const TargetSet& target,
                   const SystemSpec& spec, const DomainSpec& domain, double L) {
  const FaceRectangle& rect = target.rect;
  if (target.kind == TargetSet::Kind::FaceRectangle) {
    if (sample.face_axis != rect.axis || !rect.has_sign(sample.face_sign))
      return false;
    for (int j = 0; j < static_cast<int>(sample.location.size()); ++j) {
      if (j == rect.axis) continue;
      if (!rect.intervals[j].contains(sample.location[j], kEdgeTol)) return false;
    }
    return true;
  }
  // Preimage target: pull the exit point back to partial B_L.
  const double Lp = target.pullback_half_side > 0.0 ? target.pullback_half_side : L;
  VectorXd loc = sample.location;
  const FlowResult r = zeta_L(loc, spec, domain, Lp);
  if (!r.exited) return false;
  const VectorXd& q = r.exit_point;
  int binding = 0;
  q.cwiseAbs().maxCoeff(&binding);
  if (binding != rect.axis) return false;
  const int sign = q[binding] > 0 ? 1 : -1;
  if (!rect.has_sign(sign)) return false;
  for (int j = 0; j < static_cast<int>(q.size()); ++j) {
    if (j == rect.axis) continue;
    if (!rect.intervals[j].contains(q[j], kEdgeTol)) return false;
  }
  return true;
}

TargetPrediction predict_target(const TargetSet& target, const SystemSpec& spec,
                                const DomainSpec& domain, double L) {
  TargetPrediction pred;
  pred.name = target.name;
  pred.index = index_of_target(target, spec);
  pred.rho = compute_rho(spec.lambdas).rho[pred.index];
  pred.mu = mu_of_target(target, spec, domain, L);
  const double cL = target.kind == TargetSet::Kind::BoundaryPreimage
                        ? (target.pullback_half_side > 0 ? target.pullback_half_side : L)
                        : (domain.kind == DomainSpec::Kind::Box ? domain.half_side : L);
  pred.c_a = c_A(target, spec.lambdas, cL);
  return pred;
}

ExperimentResult run_plan(const ExperimentPlan& plan, const RunOptions& io) {
  const ValidationReport report = validate_system(plan.system, plan.domain);
  if (!report.all_passed())
    throw std::invalid_argument("plan rejected, system validation failed:\n" +
                                report.summary());
  if (plan.epsilons.empty()) throw std::invalid_argument("empty epsilon ladder");
  for (std::size_t m = 0; m < plan.epsilons.size(); ++m) {
    const double e = plan.epsilons[m];
    if (!(e > 0.0 && e < 1.0))
      throw std::invalid_argument("epsilons must lie in (0,1)");
    if (m > 0 && e >= plan.epsilons[m - 1])
      throw std::invalid_argument("epsilon ladder must be strictly decreasing");
  }
  if (plan.budget.fixed_n <= 0 || plan.budget.hits_target <= 0 || plan.budget.cap <= 0)
    throw std::invalid_argument("budgets must be positive");

  const double L = plan.chart_L();
  ExperimentResult result;
  result.config_hash = plan_hash(plan);
  for (const auto& t : plan.targets)
    result.predictions.push_back(predict_target(t, plan.system, plan.domain, L));

  if (!io.out_dir.empty()) std::filesystem::create_directories(io.out_dir);

  for (std::size_t ei = 0; ei < plan.epsilons.size(); ++ei) {
    const double eps = plan.epsilons[ei];
    SimConfig cfg;
    cfg.epsilon = eps;
    cfg.dt = plan.dt;
    cfg.max_time = plan.max_time;
    cfg.seed = plan.seed + ei;  // fresh streams per ladder point
    cfg.threads = plan.threads;
    cfg.n_trajectories = planned_trials(plan, result.predictions, eps);

    std::vector<CellResult> cells(plan.targets.size());
    for (std::size_t t = 0; t < plan.targets.size(); ++t) {
      cells[t].epsilon = eps;
      cells[t].target = static_cast<int>(t);
      cells[t].trials = cfg.n_trajectories;
      cells[t].dt = cfg.dt > 0 ? cfg.dt : default_dt(plan.system, eps);
    }

    std::ofstream jsonl;
    if (io.write_samples && !io.out_dir.empty()) {
      jsonl.open(jsonl_path(io.out_dir, plan, ei), std::ios::binary);
      if (!jsonl) throw std::runtime_error("cannot open JSONL output file");
    }

    const SimStats stats = simulate_exits(
        plan.system, plan.domain, cfg, [&](const ExitSample& s) {
          if (jsonl.is_open()) jsonl << exit_record_json(s) << '\n';
          for (std::size_t t = 0; t < plan.targets.size(); ++t) {
            if (!classify_exit(s, plan.targets[t], plan.system, plan.domain, L))
              continue;
            ++cells[t].hits;
            if (cells[t].conditional_samples.size() < kMaxStoredSamples)
              cells[t].conditional_samples.push_back(s.location);
          }
        });

    if (stats.non_exited > 1e-4 * stats.trials)
      throw std::runtime_error(
          "cell aborted at epsilon " + fmt_double(eps) + ": non-exit fraction " +
          fmt_double(static_cast<double>(stats.non_exited) / stats.trials) +
          " exceeds 1e-4 (horizon too short)");

    for (auto& c : cells) {
      c.non_exited = stats.non_exited;
      c.wilson = wilson_interval(c.hits, c.trials);
      result.cells.push_back(std::move(c));
    }
  }

  // Fits, GoF and collapse rates per target.
  for (std::size_t t = 0; t < plan.targets.size(); ++t) {
    TargetReport rep;
    rep.prediction = result.predictions[t];

    std::vector<LadderPoint> pts;
    for (const auto& c : result.cells)
      if (c.target == static_cast<int>(t) && c.hits >= 25)
        pts.push_back({c.epsilon, c.hits, c.trials});
    try {
      rep.fit = fit_exponent(pts);
    } catch (const UnderPoweredError& e) {
      rep.fit_failure = e.what();
    }

    const CellResult* gof_cell = nullptr;
    for (const auto& c : result.cells)
      if (c.target == static_cast<int>(t) && c.conditional_samples.size() >= 200)
        if (!gof_cell || c.epsilon < gof_cell->epsilon) gof_cell = &c;
    if (gof_cell && result.predictions[t].mu.total > 0.0) {
      const auto law = predicted_conditional_law(plan.targets[t], plan.system,
                                                 plan.domain, L);
      std::vector<VectorXd> samples;
      samples.reserve(gof_cell->conditional_samples.size());
      for (const auto& v : gof_cell->conditional_samples) samples.push_back(v);
      rep.gof = test_conditional_law(samples, law);
      rep.gof_epsilon = gof_cell->epsilon;
    }

    const int index = result.predictions[t].index;
    const int d = plan.system.dim;
    for (int j = index + 1; j < d; ++j) {
      std::vector<std::pair<double, std::vector<double>>> per_eps;
      for (const auto& c : result.cells) {
        if (c.target != static_cast<int>(t) || c.conditional_samples.size() < 25)
          continue;
        std::vector<double> abs_vals;
        abs_vals.reserve(c.conditional_samples.size());
        for (const auto& v : c.conditional_samples) abs_vals.push_back(std::abs(v[j]));
        per_eps.emplace_back(c.epsilon, std::move(abs_vals));
      }
      if (per_eps.size() >= 2) rep.collapse.push_back(transverse_collapse_rate(per_eps));
    }

    result.reports.push_back(std::move(rep));
  }

  if (!io.out_dir.empty()) write_summary_file(plan, result, io.out_dir);
  return result;
}

ExperimentResult refit_from_samples(const ExperimentPlan& plan, const std::string& dir) {
  // Same accumulation as run_plan, with samples replayed from disk.
  const double L = plan.chart_L();
  ExperimentResult result;
  result.config_hash = plan_hash(plan);
  for (const auto& t : plan.targets)
    result.predictions.push_back(predict_target(t, plan.system, plan.domain, L));

  for (std::size_t ei = 0; ei < plan.epsilons.size(); ++ei) {
    const double eps = plan.epsilons[ei];
    std::ifstream in(jsonl_path(dir, plan, ei));
    if (!in)
      throw std::runtime_error("missing JSONL file for epsilon " + fmt_double(eps));
    std::vector<CellResult> cells(plan.targets.size());
    for (std::size_t t = 0; t < plan.targets.size(); ++t) {
      cells[t].epsilon = eps;
      cells[t].target = static_cast<int>(t);
      cells[t].trials = planned_trials(plan, result.predictions, eps);
      cells[t].dt = plan.dt > 0 ? plan.dt : default_dt(plan.system, eps);
    }
    std::string line;
    std::int64_t seen = 0;
    ExitSample s;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (!parse_exit_record(line, plan.system.dim, s))
        throw std::runtime_error("corrupt JSONL record: " + line);
      ++seen;
      for (std::size_t t = 0; t < plan.targets.size(); ++t) {
        if (!classify_exit(s, plan.targets[t], plan.system, plan.domain, L)) continue;
        ++cells[t].hits;
        if (cells[t].conditional_samples.size() < kMaxStoredSamples)
          cells[t].conditional_samples.push_back(s.location);
      }
    }
    for (auto& c : cells) {
      c.non_exited = c.trials - seen;
      c.wilson = wilson_interval(c.hits, c.trials);
      result.cells.push_back(std::move(c));
    }
  }

  for (std::size_t t = 0; t < plan.targets.size(); ++t) {
    TargetReport rep;
    rep.prediction = result.predictions[t];
    std::vector<LadderPoint> pts;
    for (const auto& c : result.cells)
      if (c.target == static_cast<int>(t) && c.hits >= 25)
        pts.push_back({c.epsilon, c.hits, c.trials});
    try {
      rep.fit = fit_exponent(pts);
    } catch (const UnderPoweredError& e) {
      rep.fit_failure = e.what();
    }
    result.reports.push_back(std::move(rep));
  }
  return result;
}

std::string plan_hash(const ExperimentPlan& plan) {
  std::string s;
  const auto add = [&s](const std::string& part) {
    s += part;
    s += '|';
  };
  for (int j = 0; j < plan.system.dim; ++j) add(fmt_double(plan.system.lambdas[j]));
  add(std::to_string(static_cast<int>(plan.system.drift_kind)));
  add(fmt_double(plan.system.shear_c));
  for (int j = 0; j < plan.system.sigma0.rows(); ++j)
    for (int k = 0; k < plan.system.sigma0.cols(); ++k)
      add(fmt_double(plan.system.sigma0(j, k)));
  for (int j = 0; j < plan.system.xi0.size(); ++j) add(fmt_double(plan.system.xi0[j]));
  add(plan.domain.kind == DomainSpec::Kind::Box ? "box" : "smooth");
  add(fmt_double(plan.domain.half_side));
  for (const auto& t : plan.targets) {
    add(t.name);
    add(std::to_string(static_cast<int>(t.kind)));
    add(std::to_string(t.rect.axis));
    add(std::to_string(t.rect.sign));
    add(fmt_double(t.pullback_half_side));
    for (const auto& iv : t.rect.intervals) {
      add(fmt_double(iv.lo));
      add(fmt_double(iv.hi));
    }
  }
  for (double e : plan.epsilons) add(fmt_double(e));
  add(std::to_string(static_cast<int>(plan.budget.mode)));
  add(std::to_string(plan.budget.fixed_n));
  add(std::to_string(plan.budget.hits_target));
  add(std::to_string(plan.budget.cap));
  add(std::to_string(plan.seed));
  add(fmt_double(plan.dt));
  add(fmt_double(plan.max_time));
  add(fmt_double(plan.chart_half_side));

  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(s)));
  return std::string(buf, 16);
}

std::string exit_record_json(const ExitSample& s) {
  std::string out = "{\"trajectory_id\":" + std::to_string(s.trajectory_id);
  out += ",\"epsilon\":" + fmt_double(s.epsilon);
  out += ",\"time\":" + fmt_double(s.time);
  out += ",\"location\":[";
  for (int j = 0; j < s.location.size(); ++j) {
    if (j) out += ',';
    out += fmt_double(s.location[j]);
  }
  out += "]";
  const std::string face = face_code(s);
  out += face.empty() ? ",\"face\":null" : ",\"face\":\"" + face + "\"";
  out += "}";
  return out;
}

bool parse_exit_record(const std::string& line, int dim, ExitSample& out) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.contains("location")) return false;
  const auto& loc = j["location"];
  if (static_cast<int>(loc.size()) != dim) return false;
  out.location.resize(dim);
  for (int k = 0; k < dim; ++k) out.location[k] = loc[k].get<double>();
  out.trajectory_id = j["trajectory_id"].get<std::int64_t>();
  out.epsilon = j["epsilon"].get<double>();
  out.time = j["time"].get<double>();
  out.face_axis = -1;
  out.face_sign = 0;
  if (j.contains("face") && j["face"].is_string()) {
    const std::string f = j["face"].get<std::string>();
    out.face_axis = std::stoi(f.substr(0, f.size() - 1)) - 1;
    out.face_sign = f.back() == '+' ? 1 : -1;
  }
  return true;
}

std::string jsonl_path(const std::string& dir, const ExperimentPlan& plan,
                       std::size_t eps_index) {
  return dir + "/" + plan.name + "-" + plan_hash(plan) + "-eps" +
         std::to_string(eps_index) + ".jsonl";
}

std::string summary_path(const std::string& dir, const ExperimentPlan& plan) {
  return dir + "/" + plan.name + "-" + plan_hash(plan) + ".summary.json";
}

std::string summary_to_json(const ExperimentPlan& plan,
                            const ExperimentResult& result) {
  json root;
  root["name"] = plan.name;
  root["config_hash"] = result.config_hash;

  json sys;
  sys["dim"] = plan.system.dim;
  sys["noise_dim"] = plan.system.noise_dim;
  sys["lambdas"] = std::vector<double>(
      plan.system.lambdas.data(), plan.system.lambdas.data() + plan.system.dim);
  sys["drift"] = plan.system.drift_kind == DriftKind::Linear    ? "linear"
                 : plan.system.drift_kind == DriftKind::Shear2D ? "shear2d"
                                                                : "custom";
  sys["shear_c"] = plan.system.shear_c;
  sys["xi0"] = std::vector<double>(plan.system.xi0.data(),
                                   plan.system.xi0.data() + plan.system.xi0.size());
  {
    std::vector<std::vector<double>> rows;
    for (int r = 0; r < plan.system.sigma0.rows(); ++r) {
      std::vector<double> row;
      for (int c = 0; c < plan.system.sigma0.cols(); ++c)
        row.push_back(plan.system.sigma0(r, c));
      rows.push_back(std::move(row));
    }
    sys["sigma0"] = rows;
  }
  root["system"] = sys;
  root["domain"] = {{"kind", plan.domain.kind == DomainSpec::Kind::Box ? "box"
                                                                       : "smooth"},
                    {"half_side", plan.domain.half_side}};
  root["epsilons"] = plan.epsilons;
  root["seed"] = plan.seed;
  root["chart_half_side"] = plan.chart_L();

  json targets = json::array();
  for (std::size_t t = 0; t < plan.targets.size(); ++t) {
    const auto& pred = result.predictions[t];
    json jt;
    jt["name"] = pred.name;
    jt["index"] = pred.index + 1;  // 1-based in reports
    jt["rho"] = pred.rho;
    jt["mu"] = pred.mu.total;
    jt["mu_plus"] = pred.mu.plus;
    jt["mu_minus"] = pred.mu.minus;
    jt["c_A"] = pred.c_a;

    json cells = json::array();
    for (const auto& c : result.cells) {
      if (c.target != static_cast<int>(t)) continue;
      json jc;
      jc["epsilon"] = c.epsilon;
      jc["trials"] = c.trials;
      jc["hits"] = c.hits;
      jc["non_exited"] = c.non_exited;
      jc["dt"] = c.dt;
      jc["p_hat"] = c.trials ? static_cast<double>(c.hits) / c.trials : 0.0;
      jc["wilson_lo"] = c.wilson.lo;
      jc["wilson_hi"] = c.wilson.hi;
      jc["predicted"] = pred.mu.total * std::pow(c.epsilon, pred.rho);
      cells.push_back(std::move(jc));
    }
    jt["cells"] = std::move(cells);

    if (t < result.reports.size()) {
      const auto& rep = result.reports[t];
      if (rep.fit) {
        jt["fit"] = {{"slope", rep.fit->slope},
                     {"slope_se", rep.fit->slope_se},
                     {"intercept", rep.fit->intercept},
                     {"intercept_se", rep.fit->intercept_se},
                     {"constant", rep.fit->constant()},
                     {"r_squared", rep.fit->r_squared}};
      } else if (!rep.fit_failure.empty()) {
        jt["fit_failure"] = rep.fit_failure;
      }
      if (rep.gof) {
        json jg;
        jg["epsilon"] = rep.gof_epsilon;
        jg["pass"] = rep.gof->pass;
        jg["level"] = rep.gof->level;
        jg["face_binomial_p"] = rep.gof->face_binomial_p;
        jg["face_plus"] = rep.gof->face_plus;
        jg["face_minus"] = rep.gof->face_minus;
        json ks = json::array();
        for (const auto& k : rep.gof->ks_marginals)
          ks.push_back({{"statistic", k.statistic}, {"p_value", k.p_value}, {"n", k.n}});
        jg["ks_marginals"] = std::move(ks);
        jg["transverse_medians"] = rep.gof->transverse_medians;
        jt["gof"] = std::move(jg);
      }
      if (!rep.collapse.empty()) {
        json jc = json::array();
        for (const auto& c : rep.collapse)
          jc.push_back({{"slope", c.slope},
                        {"se", c.se},
                        {"exact_collapse", c.exact_collapse}});
        jt["collapse"] = std::move(jc);
      }
    }
    targets.push_back(std::move(jt));
  }
  root["targets"] = std::move(targets);
  return root.dump(2);
}

void write_summary_file(const ExperimentPlan& plan, const ExperimentResult& result,
                        const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(summary_path(dir, plan), std::ios::binary);
  if (!out) throw std::runtime_error("cannot open summary output file");
  out << summary_to_json(plan, result) << '\n';
}

}  // namespace exitflow
