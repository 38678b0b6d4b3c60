#include "exitflow/config.hpp"

#include "exitflow/toml.hpp"

#include <fstream>
#include <sstream>

namespace exitflow {

namespace {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(const TomlDoc& doc) : doc_(doc) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    const int line = doc_.line_of(path);
    std::string where = line ? "line " + std::to_string(line) + ", " : "";
    throw ConfigError(where + "'" + path + "': " + msg);
  }

  const json* find(const std::string& dotted) const {
    const json* node = &doc_.root;
    std::string part;
    std::istringstream ss(dotted);
    while (std::getline(ss, part, '.')) {
      if (!node->is_object() || !node->contains(part)) return nullptr;
      node = &(*node)[part];
    }
    return node;
  }

  double number(const std::string& path, double fallback) const {
    const json* v = find(path);
    if (!v) return fallback;
    if (!v->is_number()) fail(path, "expected a number");
    return v->get<double>();
  }

  std::int64_t integer(const std::string& path, std::int64_t fallback) const {
    const json* v = find(path);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(path, "expected an integer");
    return v->get<std::int64_t>();
  }

  std::string str(const std::string& path, const std::string& fallback) const {
    const json* v = find(path);
    if (!v) return fallback;
    if (!v->is_string()) fail(path, "expected a string");
    return v->get<std::string>();
  }

  bool boolean(const std::string& path, bool fallback) const {
    const json* v = find(path);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(path, "expected a boolean");
    return v->get<bool>();
  }

  std::vector<double> number_list(const std::string& path) const {
    const json* v = find(path);
    if (!v || !v->is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(path, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const TomlDoc& doc() const { return doc_; }

 private:
  const TomlDoc& doc_;
};

VectorXd to_vector(const std::vector<double>& v) {
  VectorXd out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

MatrixXd parse_sigma(const Reader& r, int dim) {
  const json* v = r.find("system.sigma");
  int noise_dim = static_cast<int>(r.integer("system.noise_dim", dim));
  if (noise_dim < dim) r.fail("system.noise_dim", "noise dimension must be >= dim");
  if (!v || (v->is_string() && v->get<std::string>() == "identity")) {
    MatrixXd s = MatrixXd::Zero(dim, noise_dim);
    for (int j = 0; j < dim; ++j) s(j, j) = 1.0;
    return s;
  }
  if (!v->is_array()) r.fail("system.sigma", "expected \"identity\" or a matrix");
  const auto rows = static_cast<int>(v->size());
  if (rows != dim) r.fail("system.sigma", "matrix must have dim rows");
  const auto cols = static_cast<int>((*v)[0].size());
  MatrixXd s(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto& row = (*v)[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      r.fail("system.sigma", "ragged matrix rows");
    for (int j = 0; j < cols; ++j) {
      if (!row[j].is_number()) r.fail("system.sigma", "matrix entries must be numbers");
      s(i, j) = row[j].get<double>();
    }
  }
  if (cols < dim) r.fail("system.sigma", "sigma must have at least dim columns");
  if (r.find("system.noise_dim") && cols != noise_dim)
    r.fail("system.noise_dim", "conflicts with the sigma matrix width");
  return s;
}

TargetSet parse_target(const Reader& r, const json& jt, const std::string& path,
                       int dim, double L) {
  TargetSet t;
  t.name = jt.value("name", path);
  const std::string kind = jt.value("kind", std::string("face"));
  if (kind == "face")
    t.kind = TargetSet::Kind::FaceRectangle;
  else if (kind == "preimage")
    t.kind = TargetSet::Kind::BoundaryPreimage;
  else
    r.fail(path + ".kind", "expected \"face\" or \"preimage\"");

  if (!jt.contains("face_axis")) r.fail(path + ".face_axis", "required");
  const int axis1 = jt["face_axis"].get<int>();
  if (axis1 < 1 || axis1 > dim)
    r.fail(path + ".face_axis", "must be in 1.." + std::to_string(dim));
  t.rect.axis = axis1 - 1;

  const std::string sign = jt.value("sign", std::string("both"));
  if (sign == "both")
    t.rect.sign = 0;
  else if (sign == "+")
    t.rect.sign = 1;
  else if (sign == "-")
    t.rect.sign = -1;
  else
    r.fail(path + ".sign", "expected \"+\", \"-\" or \"both\"");

  t.pullback_half_side = jt.value("pullback_half_side", 0.0);

  const double extent = t.kind == TargetSet::Kind::BoundaryPreimage
                            ? (t.pullback_half_side > 0 ? t.pullback_half_side : L)
                            : L;
  t.rect.intervals.assign(dim, Interval{-extent, extent});
  if (jt.contains("intervals")) {
    const auto& arr = jt["intervals"];
    if (!arr.is_array() || static_cast<int>(arr.size()) != dim - 1)
      r.fail(path + ".intervals",
             "expected dim-1 [lo, hi] pairs (axes other than face_axis, ascending)");
    int slot = 0;
    for (int j = 0; j < dim; ++j) {
      if (j == t.rect.axis) continue;
      const auto& pair = arr[slot++];
      if (!pair.is_array() || pair.size() != 2)
        r.fail(path + ".intervals", "each entry must be [lo, hi]");
      const double lo = pair[0].get<double>();
      const double hi = pair[1].get<double>();
      if (!(lo < hi)) r.fail(path + ".intervals", "need lo < hi");
      if (lo < -extent - 1e-12 || hi > extent + 1e-12)
        r.fail(path + ".intervals", "interval exceeds the face");
      t.rect.intervals[j] = Interval{lo, hi};
    }
  }
  return t;
}

}  // namespace

CampaignConfig parse_config(const std::string& toml_text) {
  const TomlDoc doc = parse_toml(toml_text);
  const Reader r(doc);
  CampaignConfig cfg;
  ExperimentPlan& plan = cfg.plan;

  plan.name = r.str("name", "campaign");

  // System block.
  if (!r.find("system.lambdas")) r.fail("system.lambdas", "required");
  const VectorXd lambdas = to_vector(r.number_list("system.lambdas"));
  const int dim = static_cast<int>(lambdas.size());
  if (dim < 1) r.fail("system.lambdas", "at least one eigenvalue required");
  const MatrixXd sigma0 = parse_sigma(r, dim);
  VectorXd xi0 = VectorXd::Zero(dim);
  if (r.find("system.xi0")) {
    xi0 = to_vector(r.number_list("system.xi0"));
    if (xi0.size() != dim) r.fail("system.xi0", "length must equal dim");
  }
  const std::string drift = r.str("system.drift", "linear");
  if (drift == "linear") {
    plan.system = SystemSpec::linear(lambdas, sigma0, xi0);
  } else if (drift == "shear2d") {
    if (dim != 2) r.fail("system.drift", "shear2d requires exactly 2 eigenvalues");
    plan.system = SystemSpec::shear2d(lambdas[0], lambdas[1],
                                      r.number("system.shear_c", 0.5), sigma0, xi0);
  } else {
    r.fail("system.drift", "expected \"linear\" or \"shear2d\"");
  }

  // Domain block.
  const std::string kind = r.str("domain.kind", "box");
  bool smooth_domain = false;
  double L = 1.0;
  if (kind == "box") {
    L = r.number("domain.half_side", 1.0);
    if (!(L > 0)) r.fail("domain.half_side", "must be positive");
    plan.domain = DomainSpec::box(L);
  } else if (kind == "ellipsoid") {
    smooth_domain = true;
    const std::vector<double> radii = r.number_list("domain.radii");
    if (static_cast<int>(radii.size()) != dim)
      r.fail("domain.radii", "need one radius per dimension");
    double inv2 = 0.0;
    for (double rad : radii) {
      if (!(rad > 0)) r.fail("domain.radii", "radii must be positive");
      inv2 += 1.0 / (rad * rad);
    }
    plan.domain = DomainSpec::smooth(
        [radii](const VectorXd& x) {
          double g = -1.0;
          for (int j = 0; j < x.size(); ++j) {
            const double u = x[j] / radii[j];
            g += u * u;
          }
          return g;
        },
        [radii](const VectorXd& x) {
          VectorXd g(x.size());
          for (int j = 0; j < x.size(); ++j)
            g[j] = 2.0 * x[j] / (radii[j] * radii[j]);
          return g;
        });
    // Largest box that stays inside the ellipsoid, halved for margin.
    L = 0.5 / std::sqrt(inv2);
    plan.domain.half_side = L;
  } else {
    r.fail("domain.kind", "expected \"box\" or \"ellipsoid\"");
  }

  // Targets.
  const json* targets = r.find("targets");
  if (!targets || !targets->is_array() || targets->empty())
    r.fail("targets", "at least one [[targets]] block required");
  plan.chart_half_side = r.number("simulation.chart_half_side", 0.0);
  if (smooth_domain && plan.chart_half_side <= 0.0) plan.chart_half_side = L;
  for (std::size_t i = 0; i < targets->size(); ++i) {
    const std::string path = "targets[" + std::to_string(i) + "]";
    try {
      plan.targets.push_back(parse_target(
          r, (*targets)[i], path, dim,
          plan.chart_half_side > 0 ? plan.chart_half_side : L));
    } catch (const nlohmann::json::exception& e) {
      r.fail(path, std::string("malformed field: ") + e.what());
    }
    if (smooth_domain && plan.targets.back().kind == TargetSet::Kind::FaceRectangle)
      r.fail(path + ".kind",
             "smooth domains need \"preimage\" targets (no faces to name)");
  }

  // Ladder block.
  if (!r.find("ladder.epsilons")) r.fail("ladder.epsilons", "required");
  plan.epsilons = r.number_list("ladder.epsilons");
  const std::string budget = r.str("ladder.budget", "target_hits");
  if (budget == "fixed")
    plan.budget.mode = BudgetRule::Mode::Fixed;
  else if (budget == "target_hits")
    plan.budget.mode = BudgetRule::Mode::TargetHits;
  else
    r.fail("ladder.budget", "expected \"fixed\" or \"target_hits\"");
  plan.budget.fixed_n = r.integer("ladder.n_fixed", plan.budget.fixed_n);
  plan.budget.hits_target = r.integer("ladder.hits_target", plan.budget.hits_target);
  plan.budget.cap = r.integer("ladder.n_cap", plan.budget.cap);

  // Simulation block.
  plan.dt = r.number("simulation.dt", 0.0);
  plan.max_time = r.number("simulation.max_time", 0.0);
  plan.seed = static_cast<std::uint64_t>(r.integer("simulation.seed", 0));
  plan.threads = static_cast<int>(r.integer("simulation.threads", 1));

  // Output block.
  cfg.io.out_dir = r.str("output.dir", "out");
  cfg.io.write_samples = r.boolean("output.write_samples", false);
  return cfg;
}

CampaignConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace exitflow
