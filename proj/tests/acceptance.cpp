// Acceptance run: one PASS/FAIL line per criterion, evidence in --out.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "ptnet/harness.hpp"

using namespace ptnet;

namespace {

// pinned tolerances and budgets
constexpr double kPicardOracleTol = 1e-9;
constexpr std::size_t kPicardSamples = 1000;
constexpr double kPicardSeconds = 5.0;
constexpr std::size_t kQuadratureFunctions = 100;
constexpr double kQuadratureSeconds = 5.0;
constexpr std::size_t kProductSamples = 10000;
constexpr double kProductSeconds = 60.0;
constexpr double kAlgebraSeconds = 30.0;
constexpr std::size_t kCharSamples = 10000;
constexpr double kCharSeconds = 300.0;
constexpr double kSlopeLo = 1.5, kSlopeHi = 3.5;
constexpr double kRatioLo = 1.6, kRatioHi = 2.5;
constexpr double kSolutionEps = 0.1;
constexpr std::size_t kSolutionSamples = 300;
constexpr double kSolutionSeconds = 300.0;
constexpr double kSignFactor = 10.0;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Line {
  int id;
  bool pass;
  std::string text;
};

std::vector<Line> g_lines;
nlohmann::json g_report = nlohmann::json::object();

void emit(int id, bool pass, const std::string& text, nlohmann::json detail) {
  std::cout << "CRIT " << id << (id < 10 ? "  " : " ") << (pass ? "PASS" : "FAIL") << "  " << text << std::endl;
  g_lines.push_back({id, pass, text});
  detail["pass"] = pass;
  g_report[std::to_string(id)] = std::move(detail);
}

std::string num(double v) { return fmt(v); }

std::string config_dir() {
#ifdef PTNET_CONFIG_DIR
  return PTNET_CONFIG_DIR;
#else
  return "configs";
#endif
}

// u0 hat, f = 0, a(y) = 0.6 y_1 + 0.4 y_2
TransportProblem constant_field_problem() {
  TransportProblem p;
  p.conv = std::make_shared<const AffineConvection>(
      AffineConvection(1, {1.0, 1.0}, {catalog::constant({0.6}), catalog::constant({0.4})}, Box({0.0, -4.0}, {1.0, 4.0})));
  p.u0 = catalog::data_hat({0.0}, 1.0);
  p.T_hat = 1.0;
  p.D = Box::cube(1, -1.0, 1.0);
  return p;
}

// u0 = 0, f = 1, autonomous affine field
TransportProblem unit_source_problem() {
  TransportProblem p;
  p.conv = std::make_shared<const AffineConvection>(AffineConvection(
      1, {0.5, 0.5}, {catalog::cosine(1, 1.0, 0.3), catalog::piecewise_linear(1, {-1.0, 1.0}, {-1.0, 0.5})},
      Box({0.0, -4.0}, {1.0, 4.0})));
  p.f = catalog::data_constant(1.0);
  p.T_hat = 1.0;
  p.D = Box::cube(1, -1.0, 1.0);
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string out_dir = "acceptance_out";
  std::uint64_t seed = 1;
  app.add_option("--out", out_dir, "evidence directory");
  app.add_option("--seed", seed, "base seed");
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(out_dir);
  const std::string dir = config_dir();
  const auto t_all = Clock::now();

  // 1. Picard contraction
  {
    const auto t0 = Clock::now();
    const PropertyResult r = check_picard_contraction(kPicardSamples, seed, kPicardOracleTol);
    const double s = since(t0);
    std::string worst;
    for (const auto& it : r.detail["iterates"]) worst += " k" + it["k"].dump() + "=" + num(it["measured"].get<double>());
    emit(1, r.pass && s < kPicardSeconds, "Picard |z - Phi^k| <= 2^{-k-1}, k=1..6:" + worst + " (" + num(s) + " s)",
         {{"detail", r.detail}, {"seconds", s}});
  }

  // 2. Quadrature lemmas and gate identities
  {
    const auto t0 = Clock::now();
    const PropertyResult r = check_quadrature(kQuadratureFunctions, seed);
    const double s = since(t0);
    emit(2, r.pass && s < kQuadratureSeconds,
         "quadrature: " + r.detail["violations"].dump() + " violations in " + r.detail["checks"].dump() +
             " checks, gate identity err " + num(r.detail["gate_identity_err"].get<double>()) + " (" + num(s) + " s)",
         {{"detail", r.detail}, {"seconds", s}});
  }

  // 3. Product and interpolation networks
  {
    const auto t0 = Clock::now();
    const PropertyResult r = check_product_interpolation(kProductSamples, seed, 10);
    const double s = since(t0);
    std::string txt = "product/interp:";
    for (const auto& p : r.detail["product"])
      txt += " d=" + num(p["delta"].get<double>()) + " err=" + num(p["sup_err"].get<double>()) +
             " grad=" + num(p["grad_err"].get<double>());
    for (const auto& p : r.detail["interpolation"]) txt += " band(s=" + p["s"].dump() + ")=" + num(p["band"].get<double>());
    emit(3, r.pass && s < kProductSeconds, txt + " (" + num(s) + " s)", {{"detail", r.detail}, {"seconds", s}});
  }

  // 4. Composition algebra
  {
    const auto t0 = Clock::now();
    const PropertyResult r = check_composition_algebra(seed, 50, 20);
    const double s = since(t0);
    emit(4, r.pass && s < kAlgebraSeconds,
         "algebra: additivity failures " + r.detail["additivity_failures"].dump() + ", ordering failures " +
             r.detail["ordering_failures"].dump() + ", implant failures " + r.detail["implant_failures"].dump() +
             " (worst measured/bound " + num(r.detail["worst_measured_over_bound"].get<double>()) + ", " + num(s) + " s)",
         {{"detail", r.detail}, {"seconds", s}});
  }

  // 5, 6. End-to-end characteristics and rate slope
  ExperimentConfig cfg5 = load_config(dir + "/affine_m1_dy4.json");
  cfg5.eps = {0.1, 0.05, 0.025};
  cfg5.samples = kCharSamples;
  cfg5.seed = seed;
  const auto t5 = Clock::now();
  const ExperimentResult r5 = run_convergence(cfg5);
  {
    const ExperimentResult& r = r5;
    const double s = since(t5);
    write_text(out_dir + "/criterion5.csv", r.csv);
    write_text(out_dir + "/criterion5.svg", convergence_svg(r, "characteristic networks, m=1, d_y=4"));
    bool ok = s < kCharSeconds && r.rows.size() == 3;
    std::string txt = "char nets m=1 d_y=4 vs RK4 at eps/100, 10^4 samples:";
    for (const auto& row : r.rows) {
      ok = ok && row.status == Status::Pass && row.measured_err <= row.eps && row.oracle_tol <= row.eps / 100.0;
      txt += " eps=" + num(row.eps) + " err=" + num(row.measured_err);
    }
    emit(5, ok, txt + " (" + num(s) + " s)", r.report);

    std::vector<double> e, sz;
    for (const auto& row : r.rows) {
      e.push_back(row.eps);
      sz.push_back(row.size);
    }
    bool fit_ok = false;
    RateFit fit;
    try {
      fit = fit_rate(e, sz);
      fit_ok = fit.slope >= kSlopeLo && fit.slope <= kSlopeHi;
    } catch (const InvalidInput&) {
    }
    emit(6, fit_ok, "rate slope log2 size vs log2(1/eps) = " + num(fit.slope) + " (band [" + num(kSlopeLo) + ", " +
                        num(kSlopeHi) + "], target 2)",
         fit.to_json());
  }

  // 7. d_y linearity
  std::string csv7;
  {
    ExperimentConfig c = cfg5;
    c.dy_list = {2, 4, 8};
    c.dy_eps = 0.05;
    const DyScaling r = run_dy_scaling(c);
    csv7 = r.csv;
    write_text(out_dir + "/criterion7.csv", r.csv);
    bool ok = r.ratios.size() == 2;
    std::string txt = "d_y in {2,4,8} at eps=0.05, size ratios:";
    for (double q : r.ratios) {
      ok = ok && q >= kRatioLo && q <= kRatioHi;
      txt += " " + num(q);
    }
    for (const auto& row : r.rows) ok = ok && row.status == Status::Pass;
    emit(7, ok, txt + " (band [" + num(kRatioLo) + ", " + num(kRatioHi) + "])", r.report);
  }

  // 8. Lipschitz stability of the criterion-5 builds
  {
    const ExperimentResult& r = r5;
    std::size_t viol = 0;
    std::string lip;
    for (const auto& row : r.rows) {
      if (!row.lip_pass || row.lip_xy > row.lip_xy_threshold || row.lip_t > row.lip_t_threshold) ++viol;
      lip += " xy " + num(row.lip_xy) + "<=" + num(row.lip_xy_threshold) + ", t " + num(row.lip_t) + "<=" +
             num(row.lip_t_threshold) + ";";
    }
    emit(8, viol == 0 && r.rows.size() == 3, "Lipschitz certificates, " + std::to_string(viol) + " violations:" + lip,
         {{"violations", viol}});
  }

  // 9, 10. Solution networks and sign
  {
    const auto t0 = Clock::now();
    // (a) f = 0, constant field, closed form
    const TransportProblem pa = constant_field_problem();
    const SolutionNetwork na = build_solution_net(pa, kSolutionEps);
    const SolutionCertificate ca = certify_solution(
        na, pa.D,
        [](double t, const Vec& x, const Vec& y) {
          return std::max(0.0, 1.0 - std::abs(x[0] - t * (0.6 * y[0] + 0.4 * y[1])));
        },
        kSolutionSamples, seed, 1e-12);
    // (b) u0 = 0, f = 1
    const TransportProblem pb = unit_source_problem();
    const SolutionNetwork nb = build_solution_net(pb, kSolutionEps);
    const SolutionCertificate cb = certify_solution(
        nb, pb.D, [](double t, const Vec&, const Vec&) { return t; }, kSolutionSamples / 3, seed, 1e-12);
    // (c) affine field, hat u0, Lipschitz source, oracle reference
    ExperimentConfig cc = load_config(dir + "/solution_affine.json");
    const TransportProblem pc = make_problem(cc);
    SolutionOptions po;
    po.build.limits = cc.limits;
    const SolutionNetwork plus = build_solution_net(pc, kSolutionEps, po);
    const SolutionCertificate cp = certify_solution(plus, pc, kSolutionSamples, seed);
    const double s = since(t0);
    const bool ok9 = ca.pass && cb.pass && cp.pass && s < kSolutionSeconds;
    emit(9, ok9,
         "solution nets eps=0.1: (a) err " + num(ca.measured_sup_error) + " (b) err " + num(cb.measured_sup_error) +
             " (c) err " + num(cp.measured_sup_error) + " (" + num(s) + " s)",
         {{"a", ca.to_json()}, {"b", cb.to_json()}, {"c", cp.to_json()}, {"c_build", plus.report()}, {"seconds", s}});

    SolutionOptions mo = po;
    mo.sign = SourceSign::Minus;
    const SolutionNetwork minus = build_solution_net(pc, kSolutionEps, mo);
    const SolutionCertificate cm = certify_solution(minus, pc, kSolutionSamples, seed);
    const bool ok10 = cp.pass && cm.measured_sup_error > kSignFactor * kSolutionEps;
    emit(10, ok10,
         "sign: plus err " + num(cp.measured_sup_error) + " <= " + num(kSolutionEps) + ", minus err " +
             num(cm.measured_sup_error) + " > " + num(kSignFactor * kSolutionEps) + "; resolved sign: plus",
         {{"plus", cp.to_json()}, {"minus", cm.to_json()}, {"resolved", "plus"}});
  }

  // 11. Determinism: criteria 7 and a reduced criterion-5 ladder re-run with the same seed
  {
    ExperimentConfig c = cfg5;
    c.dy_list = {2, 4, 8};
    c.dy_eps = 0.05;
    const std::string again7 = run_dy_scaling(c).csv;
    c.samples = 500;
    const std::string r1 = run_convergence(c).csv, r2 = run_convergence(c).csv;
    const ExperimentConfig smoke = load_config(dir + "/smoke_const.json");
    const std::string s1 = run_convergence(smoke).csv, s2 = run_convergence(smoke).csv;
    const bool ok = again7 == csv7 && r1 == r2 && s1 == s2;
    emit(11, ok, std::string("same-seed reruns byte-identical: criterion-7 CSV ") + (again7 == csv7 ? "yes" : "no") +
                     ", convergence CSV " + (r1 == r2 ? "yes" : "no") + ", smoke CSV " + (s1 == s2 ? "yes" : "no"),
         {{"criterion7", again7 == csv7}, {"convergence", r1 == r2}, {"smoke", s1 == s2}});
  }

  std::size_t passed = 0;
  for (const auto& l : g_lines) passed += l.pass;
  g_report["total_seconds"] = since(t_all);
  g_report["seed"] = seed;
  write_text(out_dir + "/acceptance.json", g_report.dump(2) + "\n");
  std::cout << passed << "/" << g_lines.size() << " criteria passed (" << num(since(t_all)) << " s)" << std::endl;
  return passed == g_lines.size() ? 0 : 1;
}
