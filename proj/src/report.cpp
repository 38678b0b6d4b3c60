#include "exitflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace exitflow {

namespace {

using nlohmann::json;

std::string num(double v, int prec = 5) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

}  // namespace

std::string render_table(const json& summary) {
  std::ostringstream os;
  os << "campaign: " << summary.value("name", std::string("?")) << "   hash: "
     << summary.value("config_hash", std::string("?")) << "\n";
  if (!summary.contains("targets") || summary["targets"].empty()) {
    os << "no cells\n";
    return os.str();
  }
  for (const auto& t : summary["targets"]) {
    os << "\ntarget " << t.value("name", std::string("?")) << "  index="
       << t.value("index", 0) << "  rho=" << num(t.value("rho", 0.0))
       << "  mu=" << num(t.value("mu", 0.0)) << "\n";
    os << "  epsilon      trials        hits     p_hat        CI(95%)            "
          "mu*eps^rho\n";
    for (const auto& c : t["cells"]) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "  %-10.4g %11lld %11lld  %-10.4g [%.4g, %.4g]   %-10.4g\n",
                    c.value("epsilon", 0.0),
                    static_cast<long long>(c.value("trials", std::int64_t{0})),
                    static_cast<long long>(c.value("hits", std::int64_t{0})),
                    c.value("p_hat", 0.0), c.value("wilson_lo", 0.0),
                    c.value("wilson_hi", 0.0), c.value("predicted", 0.0));
      os << line;
    }
    if (t.contains("fit")) {
      const auto& f = t["fit"];
      os << "  fit: slope " << num(f.value("slope", 0.0)) << " +- "
         << num(f.value("slope_se", 0.0), 3) << " (predicted "
         << num(t.value("rho", 0.0)) << "), constant "
         << num(f.value("constant", 0.0)) << " (predicted " << num(t.value("mu", 0.0))
         << "), R^2 " << num(f.value("r_squared", 0.0), 4) << "\n";
    } else if (t.contains("fit_failure")) {
      os << "  fit: unavailable (" << t["fit_failure"].get<std::string>() << ")\n";
    }
    if (t.contains("gof")) {
      const auto& g = t["gof"];
      os << "  gof at eps=" << num(g.value("epsilon", 0.0)) << ": "
         << (g.value("pass", false) ? "pass" : "FAIL");
      for (const auto& k : g["ks_marginals"])
        os << "  KS D=" << num(k.value("statistic", 0.0), 3)
           << " p=" << num(k.value("p_value", 0.0), 3);
      os << "  faces p=" << num(g.value("face_binomial_p", 1.0), 3) << "\n";
    }
    if (t.contains("collapse")) {
      for (const auto& c : t["collapse"])
        os << "  transverse collapse slope " << num(c.value("slope", 0.0)) << " +- "
           << num(c.value("se", 0.0), 3) << "\n";
    }
  }
  return os.str();
}

std::string render_svg(const json& summary) {
  constexpr int W = 720, H = 480, ML = 70, MR = 20, MT = 30, MB = 50;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
     << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

  struct Pt {
    double x, y;
  };
  struct Series {
    std::string name;
    std::vector<Pt> pts;
    double slope = 0, intercept = 0;
    bool has_fit = false;
    double rho = 0, mu = 0;
  };
  std::vector<Series> series;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  if (summary.contains("targets")) {
    for (const auto& t : summary["targets"]) {
      Series s;
      s.name = t.value("name", std::string("?"));
      s.rho = t.value("rho", 0.0);
      s.mu = t.value("mu", 0.0);
      for (const auto& c : t["cells"]) {
        const double p = c.value("p_hat", 0.0);
        if (p <= 0.0) continue;
        Pt pt{std::log10(c.value("epsilon", 1.0)), std::log10(p)};
        xmin = std::min(xmin, pt.x);
        xmax = std::max(xmax, pt.x);
        ymin = std::min(ymin, pt.y);
        ymax = std::max(ymax, pt.y);
        s.pts.push_back(pt);
      }
      if (t.contains("fit")) {
        s.has_fit = true;
        s.slope = t["fit"].value("slope", 0.0);
        s.intercept = t["fit"].value("intercept", 0.0);
      }
      if (!s.pts.empty()) series.push_back(std::move(s));
    }
  }
  if (series.empty()) {
    os << "<text x=\"" << W / 2 << "\" y=\"" << H / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\">no cells</text>\n</svg>\n";
    return os.str();
  }
  const double padx = 0.05 * std::max(xmax - xmin, 0.1);
  const double pady = 0.05 * std::max(ymax - ymin, 0.1);
  xmin -= padx;
  xmax += padx;
  ymin -= pady;
  ymax += pady;
  const auto X = [&](double x) {
    return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
  };
  const auto Y = [&](double y) {
    return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);
  };

  // Axes with a few ticks.
  os << "<g stroke=\"black\" fill=\"none\"><path d=\"M" << ML << " " << MT << " V"
     << H - MB << " H" << W - MR << "\"/></g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + (xmax - xmin) * i / 4.0;
    const double y = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << X(x) << "\" y=\"" << H - MB + 16
       << "\" text-anchor=\"middle\">" << num(std::pow(10, x), 3) << "</text>\n";
    os << "<text x=\"" << ML - 6 << "\" y=\"" << Y(y) + 4
       << "\" text-anchor=\"end\">" << num(std::pow(10, y), 3) << "</text>\n";
    os << "<line x1=\"" << X(x) << "\" y1=\"" << H - MB << "\" x2=\"" << X(x)
       << "\" y2=\"" << H - MB + 4 << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ML - 4 << "\" y1=\"" << Y(y) << "\" x2=\"" << ML
       << "\" y2=\"" << Y(y) << "\" stroke=\"black\"/>\n";
  }
  os << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\">epsilon</text>\n";
  os << "<text x=\"16\" y=\"" << (MT + H - MB) / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (MT + H - MB) / 2 << ")\">exit probability</text>\n</g>\n";

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* col = colors[i % 5];
    // log10 p = slope*log10(eps) + intercept/ln(10) for the fitted line,
    // and rho*log10(eps) + log10(mu) for the predictor.
    const double lx0 = xmin + padx, lx1 = xmax - padx;
    if (s.has_fit) {
      const double ly0 = s.slope * lx0 + s.intercept / std::log(10.0);
      const double ly1 = s.slope * lx1 + s.intercept / std::log(10.0);
      os << "<line x1=\"" << X(lx0) << "\" y1=\"" << Y(ly0) << "\" x2=\"" << X(lx1)
         << "\" y2=\"" << Y(ly1) << "\" stroke=\"" << col << "\"/>\n";
    }
    if (s.mu > 0) {
      const double py0 = s.rho * lx0 + std::log10(s.mu);
      const double py1 = s.rho * lx1 + std::log10(s.mu);
      os << "<line x1=\"" << X(lx0) << "\" y1=\"" << Y(py0) << "\" x2=\"" << X(lx1)
         << "\" y2=\"" << Y(py1) << "\" stroke=\"" << col
         << "\" stroke-dasharray=\"5,4\"/>\n";
    }
    for (const auto& p : s.pts)
      os << "<circle cx=\"" << X(p.x) << "\" cy=\"" << Y(p.y)
         << "\" r=\"3.5\" fill=\"" << col << "\"/>\n";
    os << "<text x=\"" << W - MR - 8 << "\" y=\"" << MT + 16 + 16 * i
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
       << col << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace exitflow
