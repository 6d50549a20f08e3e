#ifndef PTNET_HARNESS_HPP
#define PTNET_HARNESS_HPP

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "transport.hpp"

namespace ptnet {

// ---------------------------------------------------------------------------
// Problem files

/// Parsed problem file. Fields: m, T_hat, domain {lo, hi}, field {omega,
/// components} or field {generator, d_y}, u0, f, eps, samples, lip_samples,
/// seed, kind, direction, alpha, dy_list, dy_eps, limits.
struct ExperimentConfig {
  nlohmann::json doc;
  std::string name = "problem";
  std::size_t m = 1;
  double T_hat = 1.0;
  Box D;
  std::vector<double> eps;
  std::size_t samples = 1000;
  std::size_t lip_samples = 400;
  std::uint64_t seed = 1;
  std::string kind = "char";
  Direction direction = Direction::Forward;
  double alpha = 0.0;
  std::vector<std::size_t> dy_list;
  double dy_eps = 0.05;
  std::size_t dy_samples = 200;
  BuildLimits limits;

  /// 64-bit FNV-1a of the canonical JSON dump.
  std::string hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : doc.dump()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

namespace detail {

inline std::vector<FieldComponent> components_for(const ExperimentConfig& c, const nlohmann::json& field,
                                                  std::size_t d_y, Vec& omega) {
  std::vector<FieldComponent> comps;
  if (field.contains("generator")) {
    // d_y copies of one catalog entry with phase shifted by phase_step per copy
    const nlohmann::json& g = field.at("generator");
    const double step = g.value("phase_step", 0.0);
    for (std::size_t j = 0; j < d_y; ++j) {
      nlohmann::json e = g;
      e.erase("phase_step");
      e["phase"] = g.value("phase", 0.0) + step * double(j);
      comps.push_back(catalog::from_json(c.m, e));
    }
    omega.assign(d_y, field.value("omega_total", 1.0) / double(d_y));
  } else {
    for (const auto& e : field.at("components")) comps.push_back(catalog::from_json(c.m, e));
    omega = field.at("omega").get<Vec>();
  }
  return comps;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  c.doc = j;
  c.name = j.value("name", "problem");
  c.m = j.value("m", std::size_t{1});
  c.T_hat = j.value("T_hat", 1.0);
  require(c.m >= 1 && c.T_hat > 0.0, "config: need m >= 1 and T_hat > 0");
  const Vec lo = j.contains("domain") ? j["domain"].at("lo").get<Vec>() : Vec(c.m, -1.0);
  const Vec hi = j.contains("domain") ? j["domain"].at("hi").get<Vec>() : Vec(c.m, 1.0);
  require(lo.size() == c.m && hi.size() == c.m, "config: domain must have m coordinates");
  c.D = Box(lo, hi);
  c.eps = j.value("eps", std::vector<double>{});
  c.samples = j.value("samples", c.samples);
  c.lip_samples = j.value("lip_samples", c.lip_samples);
  c.seed = j.value("seed", c.seed);
  c.kind = j.value("kind", c.kind);
  require(c.kind == "char" || c.kind == "solution", "config: kind must be char or solution");
  const std::string dir = j.value("direction", "forward");
  require(dir == "forward" || dir == "backward", "config: direction must be forward or backward");
  c.direction = dir == "forward" ? Direction::Forward : Direction::Backward;
  c.alpha = j.value("alpha", 0.0);
  c.dy_list = j.value("dy_list", std::vector<std::size_t>{});
  c.dy_eps = j.value("dy_eps", c.dy_eps);
  c.dy_samples = j.value("dy_samples", c.dy_samples);
  if (j.contains("limits")) {
    c.limits.max_weights = j["limits"].value("max_weights", c.limits.max_weights);
    c.limits.max_q = j["limits"].value("max_q", c.limits.max_q);
    c.limits.max_interp_nodes = j["limits"].value("max_interp_nodes", c.limits.max_interp_nodes);
  }
  require(j.contains("field"), "config: missing field");
  for (std::size_t i = 1; i < c.eps.size(); ++i)
    require(c.eps[i] < c.eps[i - 1], "config: eps ladder must be strictly decreasing");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("config: malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

/// Convection field of the config; d_y overrides the generator count.
inline AffineConvection make_convection(const ExperimentConfig& c, std::size_t d_y = 0) {
  const nlohmann::json& field = c.doc.at("field");
  const std::size_t dy = d_y ? d_y : field.value("d_y", std::size_t{1});
  Vec omega;
  std::vector<FieldComponent> comps = detail::components_for(c, field, dy, omega);
  Vec lo = c.D.lo, hi = c.D.hi;
  const double a_bound = field.value("inflate", 2.0 * c.T_hat);
  for (std::size_t i = 0; i < c.m; ++i) {
    lo[i] -= a_bound;
    hi[i] += a_bound;
  }
  lo.insert(lo.begin(), 0.0);
  hi.insert(hi.begin(), c.T_hat);
  ConvectionOptions opt;
  opt.seed = c.seed;
  return AffineConvection(c.m, omega, std::move(comps), Box(lo, hi), opt);
}

inline TransportProblem make_problem(const ExperimentConfig& c, std::size_t d_y = 0) {
  TransportProblem p;
  p.conv = std::make_shared<const AffineConvection>(make_convection(c, d_y));
  if (c.doc.contains("u0")) p.u0 = catalog::data_from_json(c.m, c.doc["u0"], c.T_hat);
  if (c.doc.contains("f")) p.f = catalog::data_from_json(c.m, c.doc["f"], c.T_hat);
  p.T_hat = c.T_hat;
  p.D = c.D;
  return p;
}

// ---------------------------------------------------------------------------
// Reports and CSV

enum class Status { Pass, Fail, Skip };

inline const char* to_string(Status s) { return s == Status::Pass ? "PASS" : s == Status::Fail ? "FAIL" : "SKIP"; }

struct CertReport {
  double eps = 0.0;
  double measured_err = 0.0;
  double size = 0.0;
  std::size_t depth = 0;
  double predicted = 0.0;
  double lip_xy = 0.0, lip_t = 0.0;
  double lip_xy_threshold = 0.0, lip_t_threshold = 0.0;
  bool lip_pass = true;
  double oracle_tol = 0.0;
  Status status = Status::Skip;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;  // reported in JSON only; CSV stays reproducible
  std::string note;
  nlohmann::json build;

  nlohmann::json to_json() const {
    return {{"eps", eps},
            {"measured_err", measured_err},
            {"size", size},
            {"depth", depth},
            {"predicted", predicted},
            {"lip_xy", lip_xy},
            {"lip_t", lip_t},
            {"lip_xy_threshold", lip_xy_threshold},
            {"lip_t_threshold", lip_t_threshold},
            {"lip_pass", lip_pass},
            {"oracle_tol", oracle_tol},
            {"status", to_string(status)},
            {"seed", seed},
            {"wall_seconds", wall_seconds},
            {"note", note},
            {"build", build}};
  }
};

inline constexpr const char* kCsvHeader = "eps,measured_err,size,depth,predicted,lip_xy,lip_t,status,seed";

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string to_csv(const std::vector<CertReport>& rows) {
  std::string s = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    s += fmt(r.eps) + "," + fmt(r.measured_err) + "," + fmt(r.size) + "," + std::to_string(r.depth) + "," +
         fmt(r.predicted) + "," + fmt(r.lip_xy) + "," + fmt(r.lip_t) + "," + to_string(r.status) + "," +
         std::to_string(r.seed) + "\n";
  }
  return s;
}

struct CsvRow {
  double eps = 0.0, size = 0.0;
  std::string status;
};

inline std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "parse_csv: empty input");
  std::vector<std::string> head;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) head.push_back(cell);
  }
  auto col = [&](const std::string& name) {
    const auto it = std::find(head.begin(), head.end(), name);
    require(it != head.end(), "parse_csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - head.begin());
  };
  const std::size_t ce = col("eps"), cs = col("size"), cst = col("status");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    require(cells.size() == head.size(), "parse_csv: ragged row");
    rows.push_back({std::stod(cells[ce]), std::stod(cells[cs]), cells[cst]});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rate fits

struct RateFit {
  double slope = 0.0, intercept = 0.0;
  double residual = 0.0;  // RMS residual in log2 size
  std::size_t rows = 0;
  nlohmann::json to_json() const {
    return {{"slope", slope}, {"intercept", intercept}, {"residual", residual}, {"rows", rows}};
  }
};

/// Least squares of log2 size against log2(1/eps).
inline RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& size) {
  require(eps.size() == size.size(), "fit_rate: column length mismatch");
  require(eps.size() >= 3, "fit_rate: need at least 3 rows");
  const std::size_t n = eps.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  Vec x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(eps[i] > 0.0 && size[i] > 0.0, "fit_rate: eps and size must be positive");
    x[i] = std::log2(1.0 / eps[i]);
    y[i] = std::log2(size[i]);
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = double(n) * sxx - sx * sx;
  if (!(std::abs(den) > 1e-12 * double(n) * sxx)) throw InvalidInput("fit_rate: degenerate eps ladder");
  RateFit f;
  f.rows = n;
  f.slope = (double(n) * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / double(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ss += r * r;
  }
  f.residual = std::sqrt(ss / double(n));
  return f;
}

/// Fit over the non-SKIP rows of a convergence CSV.
inline RateFit fit_rate(const std::string& csv) {
  std::vector<double> e, s;
  for (const auto& r : parse_csv(csv))
    if (r.status != "SKIP") {
      e.push_back(r.eps);
      s.push_back(r.size);
    }
  return fit_rate(e, s);
}

// ---------------------------------------------------------------------------
// Experiments

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline CertReport char_rung(const ExperimentConfig& c, const AffineConvection& a, double eps, Direction dir,
                            std::size_t samples) {
  CertReport r;
  r.eps = eps;
  r.seed = c.seed;
  const auto t0 = std::chrono::steady_clock::now();
  BuildOptions bo;
  bo.limits = c.limits;
  r.predicted = predicted_complexity(a, c.T_hat, eps, PredictKind::Char);
  try {
    const CharNetwork n = build_char_net(a, c.D, c.T_hat, eps, dir, bo);
    r.size = n.size();
    r.depth = n.depth();
    r.build = n.report();
    const CharCertificate cert = certify_char(n, samples, c.seed);
    r.measured_err = cert.measured_sup_error;
    r.oracle_tol = cert.oracle_tol;
    if (c.lip_samples > 0) {
      const LipschitzReport lr = lipschitz_certificate(n, c.lip_samples, c.seed);
      r.lip_xy = lr.xy_lower;
      r.lip_t = lr.t_lower;
      r.lip_xy_threshold = lr.xy_threshold;
      r.lip_t_threshold = lr.t_threshold;
      r.lip_pass = lr.pass;
    }
    r.status = cert.pass && r.lip_pass && r.oracle_tol <= eps / 10.0 ? Status::Pass : Status::Fail;
  } catch (const ResourceCeiling& e) {
    r.status = Status::Skip;
    r.predicted = e.predicted_cost;
    r.note = e.what();
  }
  r.wall_seconds = seconds_since(t0);
  return r;
}

inline CertReport solution_rung(const ExperimentConfig& c, const TransportProblem& p, double eps) {
  CertReport r;
  r.eps = eps;
  r.seed = c.seed;
  const auto t0 = std::chrono::steady_clock::now();
  SolutionOptions so;
  so.alpha = c.alpha;
  so.build.limits = c.limits;
  r.predicted = predicted_complexity(*p.conv, c.T_hat, eps, PredictKind::Solution, c.alpha);
  try {
    const SolutionNetwork n = build_solution_net(p, eps, so);
    r.size = n.size();
    r.depth = n.depth();
    r.build = n.report();
    const SolutionCertificate cert = certify_solution(n, p, c.samples, c.seed);
    r.measured_err = cert.measured_sup_error;
    r.oracle_tol = cert.oracle_tol;
    if (c.lip_samples > 0) {
      const LipschitzReport lr = lipschitz_certificate(n, p, c.lip_samples, c.seed);
      r.lip_xy = lr.xy_lower;
      r.lip_t = lr.t_lower;
      r.lip_xy_threshold = lr.xy_threshold;
      r.lip_t_threshold = lr.t_threshold;
      r.lip_pass = lr.pass;
    }
    r.status = cert.pass && r.lip_pass ? Status::Pass : Status::Fail;
  } catch (const ResourceCeiling& e) {
    r.status = Status::Skip;
    r.predicted = e.predicted_cost;
    r.note = e.what();
  }
  r.wall_seconds = seconds_since(t0);
  return r;
}

}  // namespace detail

struct ExperimentResult {
  std::vector<CertReport> rows;
  std::string csv;
  nlohmann::json report;
  bool ok() const {
    for (const auto& r : rows)
      if (r.status == Status::Fail) return false;
    return true;
  }
};

/// One row per eps rung, in ladder order; rungs run sequentially.
inline ExperimentResult run_convergence(const ExperimentConfig& c) {
  require(!c.eps.empty(), "run_convergence: empty eps ladder");
  ExperimentResult out;
  if (c.kind == "char") {
    const AffineConvection a = make_convection(c);
    for (double e : c.eps) out.rows.push_back(detail::char_rung(c, a, e, c.direction, c.samples));
  } else {
    const TransportProblem p = make_problem(c);
    for (double e : c.eps) out.rows.push_back(detail::solution_rung(c, p, e));
  }
  out.csv = to_csv(out.rows);
  out.report = {{"name", c.name}, {"config_hash", c.hash()}, {"kind", c.kind}, {"rows", nlohmann::json::array()}};
  for (const auto& r : out.rows) out.report["rows"].push_back(r.to_json());
  std::vector<double> e, s;
  for (const auto& r : out.rows)
    if (r.status != Status::Skip) {
      e.push_back(r.eps);
      s.push_back(r.size);
    }
  if (e.size() >= 3) out.report["fit"] = fit_rate(e, s).to_json();
  return out;
}

struct DyScaling {
  std::vector<std::size_t> d_y;
  std::vector<CertReport> rows;
  std::vector<double> ratios;      // size(d_y[i+1]) / size(d_y[i])
  double slope_origin = 0.0;       // least squares size = k d_y
  double relative_residual = 0.0;  // max |size - k d_y| / size
  std::string csv;
  nlohmann::json report;
};

inline constexpr const char* kDyCsvHeader = "d_y,eps,measured_err,size,depth,predicted,status,seed";

/// Characteristic builds at fixed eps for each d_y of the config.
inline DyScaling run_dy_scaling(const ExperimentConfig& c) {
  require(!c.dy_list.empty(), "run_dy_scaling: empty d_y list");
  DyScaling out;
  out.d_y = c.dy_list;
  ExperimentConfig cc = c;
  cc.lip_samples = 0;
  for (std::size_t dy : c.dy_list) {
    const AffineConvection a = make_convection(c, dy);
    out.rows.push_back(detail::char_rung(cc, a, c.dy_eps, c.direction, c.dy_samples));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (out.rows[i].status == Status::Skip) continue;
    num += double(out.d_y[i]) * out.rows[i].size;
    den += double(out.d_y[i]) * double(out.d_y[i]);
  }
  out.slope_origin = den > 0.0 ? num / den : 0.0;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (out.rows[i].status == Status::Skip) continue;
    out.relative_residual = std::max(out.relative_residual,
                                     std::abs(out.rows[i].size - out.slope_origin * double(out.d_y[i])) / out.rows[i].size);
    if (i + 1 < out.rows.size() && out.rows[i + 1].status != Status::Skip)
      out.ratios.push_back(out.rows[i + 1].size / out.rows[i].size);
  }
  out.csv = std::string(kDyCsvHeader) + "\n";
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const CertReport& r = out.rows[i];
    out.csv += std::to_string(out.d_y[i]) + "," + fmt(r.eps) + "," + fmt(r.measured_err) + "," + fmt(r.size) + "," +
               std::to_string(r.depth) + "," + fmt(r.predicted) + "," + to_string(r.status) + "," +
               std::to_string(r.seed) + "\n";
  }
  out.report = {{"name", c.name},
                {"config_hash", c.hash()},
                {"d_y", out.d_y},
                {"ratios", out.ratios},
                {"slope_origin", out.slope_origin},
                {"relative_residual", out.relative_residual},
                {"rows", nlohmann::json::array()}};
  for (const auto& r : out.rows) out.report["rows"].push_back(r.to_json());
  return out;
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string label;
  Vec x, y;
  std::string color = "#1f77b4";
};

/// Log-log line chart (base 2) of the given series.
inline std::string svg_loglog(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.x[i] > 0.0 && s.y[i] > 0.0)) continue;
      x0 = std::min(x0, std::log2(s.x[i]));
      x1 = std::max(x1, std::log2(s.x[i]));
      y0 = std::min(y0, std::log2(s.y[i]));
      y1 = std::max(y1, std::log2(s.y[i]));
    }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y1 = y0 + 1;
  auto px = [&](double v) { return ml + (std::log2(v) - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (std::log2(v) - y0) / (y1 - y0) * (H - mt - mb); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel
    << " (log2)</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << H / 2
    << ")\">" << ylabel << " (log2)</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << ml + (W - ml - mr) * k / 4.0 << "\" y=\"" << H - mb + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(xv) << "</text>\n";
    o << "<text x=\"" << ml - 6 << "\" y=\"" << H - mb - (H - mt - mb) * k / 4.0 + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(yv) << "</text>\n";
  }
  double ly = mt + 6;
  for (const auto& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.x[i] > 0.0 && s.y[i] > 0.0) o << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.x[i] > 0.0 && s.y[i] > 0.0)
        o << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"3\" fill=\"" << s.color
          << "\"/>\n";
    o << "<text x=\"" << ml + 10 << "\" y=\"" << ly + 10 << "\" font-size=\"11\" fill=\"" << s.color << "\">" << s.label
      << "</text>\n";
    ly += 16;
  }
  o << "</svg>\n";
  return o.str();
}

/// Measured and predicted size against 1/eps; the prediction is rescaled to
/// meet the measured curve at the first rung.
inline std::string convergence_svg(const ExperimentResult& r, const std::string& title) {
  Series meas{"measured size", {}, {}, "#1f77b4"}, pred{"predicted (rescaled)", {}, {}, "#d62728"};
  double scale = 0.0;
  for (const auto& row : r.rows) {
    if (row.status == Status::Skip) continue;
    if (scale == 0.0 && row.predicted > 0.0) scale = row.size / row.predicted;
    meas.x.push_back(1.0 / row.eps);
    meas.y.push_back(row.size);
    pred.x.push_back(1.0 / row.eps);
    pred.y.push_back(row.predicted * scale);
  }
  return svg_loglog({meas, pred}, title, "1/eps", "size");
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// Property suites

struct PropertyResult {
  std::string name;
  bool pass = false;
  nlohmann::json detail;
};

/// Picard iterates for a(t, x; y) = y cos x on |I| = 1/(2L), L = 2:
/// sup over samples of |z - Phi^k| <= 2^{-k-1}, k = 1..6.
inline PropertyResult check_picard_contraction(std::size_t n_samples, std::uint64_t seed, double oracle_tol = 1e-9) {
  PropertyResult r{"picard_contraction", true, {}};
  const FieldFn a = [](double, const double* x, const double* y, double* o) { o[0] = y[0] * std::cos(x[0]); };
  const double L = 2.0;
  const MacroGrid g = macro_grid(1.0, L);
  const double I = g.I;
  const std::size_t cells = 256;
  OdeConfig cfg;
  cfg.tol = oracle_tol;
  Rng rng(seed);
  Vec worst(6, 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vec x{rng.uniform(-2.0, 2.0)}, y{rng.uniform(-1.0, 1.0)};
    const Trajectory z = rk4_dense(a, 1, 0.0, I, x, y, cfg);
    for (std::size_t k = 1; k <= 6; ++k) {
      const PicardTrajectory p = picard_numeric(a, 1, 0.0, I, x, y, k, cells, L);
      for (std::size_t c = 0; c <= cells; ++c)
        worst[k - 1] = std::max(worst[k - 1], std::abs(p.nodes()[c][0] - z(I * double(c) / double(cells))[0]));
    }
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 1; k <= 6; ++k) {
    const double bound = std::exp2(-double(k) - 1.0);
    rows.push_back({{"k", k}, {"measured", worst[k - 1]}, {"bound", bound}});
    if (worst[k - 1] > bound) r.pass = false;
  }
  r.detail = {{"I", I}, {"samples", n_samples}, {"oracle_tol", oracle_tol}, {"iterates", rows}};
  return r;
}

/// Quadrature and rho-gate bounds on random Lipschitz functions
/// g(s) = sum_k c_k sin(w_k s + p_k) + d |s - s0|, with the network gate.
inline PropertyResult check_quadrature(std::size_t n_functions, std::uint64_t seed) {
  PropertyResult r{"quadrature", true, {}};
  Rng rng(seed);
  std::size_t violations = 0, checks = 0;
  double gate_err = 0.0;
  for (std::size_t fi = 0; fi < n_functions; ++fi) {
    const double t0 = rng.uniform(-1.0, 1.0), len = rng.uniform(0.1, 2.0), t1 = t0 + len;
    const std::size_t q = 1 + rng.next() % 40;
    const std::size_t nk = 1 + rng.next() % 3;
    Vec c(nk), w(nk), ph(nk);
    double lip = 0.0, sup = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
      c[k] = rng.uniform(-1.0, 1.0);
      w[k] = rng.uniform(0.5, 20.0);
      ph[k] = rng.uniform(0.0, 6.3);
      lip += std::abs(c[k] * w[k]);
      sup += std::abs(c[k]);
    }
    const double d = rng.uniform(-1.0, 1.0), s0 = rng.uniform(t0, t1);
    lip += std::abs(d);
    sup += std::abs(d) * len;
    auto g = [&](double s) {
      double v = d * std::abs(s - s0);
      for (std::size_t k = 0; k < nk; ++k) v += c[k] * std::sin(w[k] * s + ph[k]);
      return v;
    };
    const ReluNetwork gate = rho_gate(t0, t1, q);
    const double h = len / double(q);
    Vec gi(q), gbar(q);
    for (std::size_t i = 0; i < q; ++i) {
      const double a = t0 + double(i) * h, b = i + 1 == q ? t1 : a + h;
      gi[i] = g(0.5 * (a + b));
      gbar[i] = adaptive_simpson(g, a, b, 1e-13) / (b - a);
    }
    for (int s = 0; s < 20; ++s) {
      const double t = rng.uniform(t0, t1), t2 = rng.uniform(t0, t1);
      const Vec rho = gate.eval({t}), rho2 = gate.eval({t2});
      const double exact = adaptive_simpson(g, t0, t, 1e-13);
      double mid = 0.0, avg = 0.0, sr = 0.0, var = 0.0;
      for (std::size_t i = 0; i < q; ++i) {
        const double a = t0 + double(i) * h, b = i + 1 == q ? t1 : a + h;
        gate_err = std::max(gate_err, std::abs(rho[i] - std::clamp(t - a, 0.0, b - a)));
        mid += rho[i] * gi[i];
        avg += rho[i] * gbar[i];
        sr += rho[i];
        var += std::abs(rho[i] - rho2[i]);
      }
      checks += 4;
      if (std::abs(exact - avg) > len * sup / (2.0 * double(q)) + 1e-12) ++violations;
      if (std::abs(exact - mid) > len * len * lip / (2.0 * double(q)) + 1e-12) ++violations;
      if (var > std::abs(t - t2) + 1e-12) ++violations;
      gate_err = std::max(gate_err, std::abs(sr - (t - t0)));
      if (sr > len + 1e-12) ++violations;
    }
  }
  r.pass = violations == 0 && gate_err <= 1e-12;
  r.detail = {{"functions", n_functions}, {"checks", checks}, {"violations", violations}, {"gate_identity_err", gate_err}};
  return r;
}

/// Product network error and gradient for delta in {1e-2, 1e-3}, and the
/// size band size / (delta^{-s} log2(1/delta)) of Lipschitz-stable
/// interpolants for delta = 2^{-k}, k = 4..kmax.
inline PropertyResult check_product_interpolation(std::size_t n_samples, std::uint64_t seed, int kmax = 10) {
  PropertyResult r{"product_interpolation", true, {}};
  r.detail["product"] = nlohmann::json::array();
  for (double d : {1e-2, 1e-3}) {
    const ReluNetwork p = product_net(2, d);
    Rng rng(seed);
    double err = 0.0, gerr = 0.0;
    const double fd = 1e-7;
    for (std::size_t k = 0; k < n_samples; ++k) {
      const Vec x = rng.point(Box::cube(2, 0.0, 1.0));
      err = std::max(err, std::abs(p.eval(x)[0] - x[0] * x[1]));
      if (k % 10) continue;
      for (int j = 0; j < 2; ++j) {
        Vec a = x, b = x;
        a[j] = std::min(1.0, x[j] + fd);
        b[j] = std::max(0.0, x[j] - fd);
        const double g = (p.eval(a)[0] - p.eval(b)[0]) / (a[j] - b[j]);
        gerr = std::max(gerr, std::abs(g - x[1 - j]));
      }
    }
    const bool ok = err <= d && gerr <= 10.0 * d;
    r.pass = r.pass && ok;
    r.detail["product"].push_back({{"delta", d}, {"sup_err", err}, {"grad_err", gerr}, {"size", p.size()}, {"pass", ok}});
  }
  r.detail["interpolation"] = nlohmann::json::array();
  for (std::size_t s : {1u, 2u}) {
    const double lip = s == 1 ? 1.0 : 0.1;
    auto g = [lip, s](const double* x) {
      double v = 0.0;
      for (std::size_t i = 0; i < s; ++i) v += std::sin(3.0 * x[i]);
      return 0.999 * lip * v / (3.0 * double(s));
    };
    double lo = 1e300, hi = 0.0;
    nlohmann::json pts = nlohmann::json::array();
    Rng rng(seed + s);
    double worst_rel = 0.0;
    for (int k = 4; k <= kmax; ++k) {
      const double d = std::exp2(-k);
      SampledFunction sf = sample_for(g, Box::cube(s, 0.0, 1.0), lip, 1.0, d);
      sf.fn = nullptr;
      const LipStableNet n = lip_stable_net(sf, d);
      const double ratio = double(n.report.size) / (std::pow(1.0 / d, double(s)) * double(k));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      double err = 0.0;
      for (std::size_t t = 0; t < 2000; ++t) {
        const Vec x = rng.point(Box::cube(s, 0.0, 1.0));
        err = std::max(err, std::abs(n.eval(x.data()) - g(x.data())));
      }
      worst_rel = std::max(worst_rel, err / d);
      pts.push_back({{"k", k}, {"size", n.report.size}, {"ratio", ratio}, {"sup_err", err}});
    }
    const bool ok = hi / lo <= 4.0 && worst_rel <= 1.0;
    r.pass = r.pass && ok;
    r.detail["interpolation"].push_back({{"s", s}, {"band", hi / lo}, {"points", pts}, {"pass", ok}});
  }
  return r;
}

namespace detail {

inline Factor random_factor(Rng& rng, std::size_t n) {
  if (rng.next() % 2 == 0) {
    Vec w(n * n), b(n);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b) v = rng.uniform(-0.2, 0.2);
    return Factor::linear(n, n, w, b);
  }
  std::vector<Component> comps;
  for (std::size_t i = 0; i < n; ++i) {
    const double amp = rng.uniform(0.2, 1.5), w = rng.uniform(0.5, 2.0);
    const std::size_t dep = rng.next() % n;
    comps.push_back({{dep}, [amp, w](const double* x) { return amp * std::sin(w * x[0]); }, amp * w, amp});
  }
  return Factor::generic(n, comps, Box::cube(n, -6.0, 6.0));
}

}  // namespace detail

/// Complexity additivity, regularizer ordering with sampled intervals, and
/// implantation soundness on random two-factor representations.
inline PropertyResult check_composition_algebra(std::uint64_t seed, std::size_t n_reps = 50, std::size_t n_implant = 20) {
  PropertyResult r{"composition_algebra", true, {}};
  Rng rng(seed);
  std::size_t add_fail = 0, order_fail = 0, implant_fail = 0;
  for (std::size_t t = 0; t < n_reps; ++t) {
    const std::size_t n = 1 + rng.next() % 2;
    std::vector<Factor> fa, fb;
    const std::size_t da = 1 + rng.next() % 3, db = 1 + rng.next() % 3;
    for (std::size_t j = 0; j < da; ++j) fa.push_back(detail::random_factor(rng, n));
    for (std::size_t j = 0; j < db; ++j) fb.push_back(detail::random_factor(rng, n));
    const CompRep a(fa), b(fb);
    if (complexity(compose_reps(b, a)) != complexity(a) + complexity(b)) ++add_fail;
    if (complexity(sum_reps(a, b)) != complexity(a) + complexity(b)) ++add_fail;
    // R° <= R <= max(1, R°)^depth, and sampled lower <= upper
    const double r0 = regularizer_upper(a, Regularizer::LipFactors), rf = regularizer_upper(a, Regularizer::LipFull);
    if (!(r0 <= rf * (1 + 1e-14) && rf <= std::pow(std::max(1.0, r0), double(a.depth())) * (1 + 1e-12))) ++order_fail;
    for (Regularizer reg : {Regularizer::LipFactors, Regularizer::LipFull}) {
      const Interval iv = comp_norm_interval(a, reg, Box::cube(n, -1.0, 1.0), 200, seed + t);
      // difference quotients of close points carry ~1e-12 relative rounding
      if (iv.lower > iv.upper * (1 + 1e-9)) ++order_fail;
    }
  }
  double worst_ratio = 0.0;
  for (std::size_t t = 0; t < n_implant; ++t) {
    const Box d1 = Box::cube(1, -1.0, 1.0);
    const double a1 = rng.uniform(0.3, 1.0), w1 = rng.uniform(0.5, 3.0), c2 = rng.uniform(-0.5, 0.5),
                 l2 = rng.uniform(0.3, 1.5);
    Factor g1 = Factor::generic(1, {{{0}, [a1, w1](const double* x) { return a1 * std::sin(w1 * x[0]); }, a1 * w1, a1}}, d1);
    Factor g2 = Factor::generic(
        1, {{{0}, [c2, l2](const double* x) { return l2 * std::abs(x[0] - c2); }, l2, l2 * 1.5}}, d1);
    const CompRep rep({g1, g2});
    const double delta = rng.uniform(0.005, 0.05);
    const ImplantResult res = implant(rep, {delta, delta});
    double err = 0.0;
    for (std::size_t i = 0; i <= 2000; ++i) {
      const Vec x{-1.0 + 2.0 * double(i) / 2000.0};
      err = std::max(err, std::abs(res.rep.eval(x)[0] - rep.eval(x)[0]));
    }
    worst_ratio = std::max(worst_ratio, err / res.error_bound);
    if (err > res.error_bound) ++implant_fail;
  }
  r.pass = add_fail == 0 && order_fail == 0 && implant_fail == 0;
  r.detail = {{"reps", n_reps},
              {"additivity_failures", add_fail},
              {"ordering_failures", order_fail},
              {"implant_reps", n_implant},
              {"implant_failures", implant_fail},
              {"worst_measured_over_bound", worst_ratio}};
  return r;
}

}  // namespace ptnet

#endif
