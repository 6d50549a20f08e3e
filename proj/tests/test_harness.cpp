#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "ptnet/harness.hpp"

using namespace ptnet;

namespace {

std::string config_path(const char* name) { return std::string(PTNET_CONFIG_DIR) + "/" + name; }

ExperimentConfig small_affine() {
  ExperimentConfig c = load_config(config_path("affine_m1_dy4.json"));
  c.eps = {0.2, 0.1, 0.05};
  c.samples = 150;
  c.lip_samples = 100;
  c.dy_list = {1, 2, 4};
  c.dy_eps = 0.1;
  c.dy_samples = 50;
  return c;
}

}  // namespace

TEST(FitRate, SyntheticSlopeTwo) {
  std::vector<double> e, s;
  for (double x : {0.1, 0.05, 0.025, 0.0125}) {
    e.push_back(x);
    s.push_back(std::pow(1.0 / x, 2.0));
  }
  const RateFit f = fit_rate(e, s);
  EXPECT_NEAR(f.slope, 2.0, 1e-9);
  EXPECT_NEAR(f.intercept, 0.0, 1e-9);
  EXPECT_LT(f.residual, 1e-9);
}

TEST(FitRate, FromCsvSkipsSkipRows) {
  const std::string csv = std::string(kCsvHeader) +
                          "\n0.1,0,100,1,0,0,0,PASS,1\n0.05,0,400,1,0,0,0,PASS,1\n0.025,0,1600,1,0,0,0,PASS,1\n"
                          "0.01,0,0,0,5e9,0,0,SKIP,1\n";
  EXPECT_NEAR(fit_rate(csv).slope, 2.0, 1e-9);
}

TEST(FitRate, Errors) {
  EXPECT_THROW(fit_rate({0.1, 0.05}, {1.0, 2.0}), InvalidInput);
  EXPECT_THROW(fit_rate({0.1, 0.1, 0.1}, {1.0, 2.0, 3.0}), InvalidInput);
  EXPECT_THROW(fit_rate({0.1, 0.05, 0.0}, {1.0, 2.0, 3.0}), InvalidInput);
}

TEST(Config, ParsesAndValidates) {
  const ExperimentConfig c = load_config(config_path("affine_m1_dy4.json"));
  EXPECT_EQ(c.m, 1u);
  EXPECT_EQ(c.eps.size(), 3u);
  const AffineConvection a = make_convection(c);
  EXPECT_EQ(a.d_y(), 4u);
  EXPECT_NEAR(a.A(), 1.0, 1e-15);
  EXPECT_NEAR(a.L(), 1.1, 1e-15);
  EXPECT_EQ(make_convection(c, 8).d_y(), 8u);
  EXPECT_EQ(c.hash(), load_config(config_path("affine_m1_dy4.json")).hash());

  nlohmann::json j = c.doc;
  j["eps"] = {0.1, 0.2, 0.05};
  EXPECT_THROW(parse_config(j), InvalidInput);
  j = c.doc;
  j["kind"] = "pressure";
  EXPECT_THROW(parse_config(j), InvalidInput);
  EXPECT_THROW(load_config(config_path("missing.json")), InvalidInput);
}

TEST(Config, SolutionProblem) {
  const ExperimentConfig c = load_config(config_path("solution_affine.json"));
  const TransportProblem p = make_problem(c);
  EXPECT_FALSE(p.u0.zero);
  EXPECT_FALSE(p.f.zero);
  EXPECT_GE(p.M(), 1.0);
}

TEST(RunConvergence, ConstantSmokeAllPass) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_convergence(load_config(config_path("smoke_const.json")));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) EXPECT_EQ(row.status, Status::Pass) << row.to_json().dump();
  EXPECT_LT(secs, 10.0);
  EXPECT_EQ(r.csv.substr(0, r.csv.find('\n')), kCsvHeader);
  EXPECT_TRUE(r.ok());
}

TEST(RunConvergence, AffineLadderAndDeterminism) {
  const ExperimentConfig c = small_affine();
  const ExperimentResult a = run_convergence(c), b = run_convergence(c);
  for (const auto& row : a.rows) EXPECT_EQ(row.status, Status::Pass) << row.to_json().dump();
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_TRUE(a.report.contains("fit"));
  EXPECT_GT(a.rows[2].size, a.rows[0].size);
}

TEST(RunConvergence, RefusalIsSkipRow) {
  ExperimentConfig c = small_affine();
  c.eps = {0.1, 1e-5};
  c.limits.max_q = 1000;
  const ExperimentResult r = run_convergence(c);
  EXPECT_EQ(r.rows[0].status, Status::Pass);
  EXPECT_EQ(r.rows[1].status, Status::Skip);
  EXPECT_GT(r.rows[1].predicted, 0.0);
  EXPECT_NE(r.csv.find("SKIP"), std::string::npos);
  EXPECT_TRUE(r.ok());
}

TEST(RunDyScaling, BaselineRatiosAndDeterminism) {
  const ExperimentConfig c = small_affine();
  const DyScaling a = run_dy_scaling(c), b = run_dy_scaling(c);
  ASSERT_EQ(a.rows.size(), 3u);
  EXPECT_EQ(a.d_y.front(), 1u);
  for (double r : a.ratios) {
    EXPECT_GE(r, 1.6);
    EXPECT_LE(r, 2.5);
  }
  EXPECT_EQ(a.csv, b.csv);
}

TEST(Svg, ContainsSeries) {
  ExperimentResult r;
  for (double e : {0.1, 0.05, 0.025}) {
    CertReport row;
    row.eps = e;
    row.size = 1.0 / (e * e);
    row.predicted = 2.0 / (e * e);
    row.status = Status::Pass;
    r.rows.push_back(row);
  }
  const std::string svg = convergence_svg(r, "test");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Properties, PicardContraction) { EXPECT_TRUE(check_picard_contraction(50, 1).pass); }

TEST(Properties, Quadrature) {
  const PropertyResult r = check_quadrature(30, 2);
  EXPECT_TRUE(r.pass) << r.detail.dump();
}

TEST(Properties, CompositionAlgebra) {
  const PropertyResult r = check_composition_algebra(3, 10, 3);
  EXPECT_TRUE(r.pass) << r.detail.dump();
}

TEST(Properties, ProductInterpolationSmall) {
  const PropertyResult r = check_product_interpolation(500, 4, 7);
  EXPECT_TRUE(r.pass) << r.detail.dump();
}
