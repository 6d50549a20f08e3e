#include <gtest/gtest.h>

#include <cmath>

#include "ptnet/oracle.hpp"

using namespace ptnet;

namespace {

FieldFn const_field(double c) {
  return [c](double, const double*, const double*, double* o) { o[0] = c; };
}
FieldFn y_field() {
  return [](double, const double*, const double* y, double* o) { o[0] = y[0]; };
}
FieldFn yx_field() {
  return [](double, const double* x, const double* y, double* o) { o[0] = y[0] * x[0]; };
}
FieldFn ycos_field() {
  return [](double t, const double* x, const double* y, double* o) { o[0] = y[0] * std::cos(x[0]) + 0.3 * t; };
}

double hat(double x) { return std::max(0.0, 1.0 - std::abs(x)); }

}  // namespace

TEST(Rk4Char, ConstantFieldExact) {
  const OdeResult r = rk4_char(const_field(1.7), 1, 0.2, 1.4, {0.5}, {}, {8, 1e-12, false});
  EXPECT_NEAR(r.z[0], 0.5 + 1.2 * 1.7, 1e-14);
}

TEST(Rk4Char, ParameterField) {
  const OdeResult r = rk4_char(y_field(), 1, 0.0, 1.0, {0.0}, {0.3});
  EXPECT_NEAR(r.z[0], 0.3, 1e-14);
}

TEST(Rk4Char, LinearFieldExponential) {
  OdeConfig cfg{256, 1e-12, false};
  for (double y : {-0.8, 0.4, 1.0}) {
    const OdeResult r = rk4_char(yx_field(), 1, 0.0, 1.0, {1.3}, {y}, cfg);
    EXPECT_NEAR(r.z[0], 1.3 * std::exp(y), 1e-9);
  }
}

TEST(Rk4Char, RichardsonMeetsTolerance) {
  const OdeResult r = rk4_char(yx_field(), 1, 0.0, 2.0, {1.0}, {1.0}, {4, 1e-11, true});
  EXPECT_LE(r.err_est, 1e-11);
  EXPECT_NEAR(r.z[0], std::exp(2.0), 1e-9);
}

TEST(Rk4Char, NonfiniteFieldThrows) {
  FieldFn bad = [](double, const double*, const double*, double* o) { o[0] = std::nan(""); };
  EXPECT_THROW(rk4_char(bad, 1, 0.0, 1.0, {0.0}, {}), InvalidInput);
}

TEST(Rk4Char, SemigroupProperty) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const Vec x{rng.uniform(-1, 1)}, y{rng.uniform(-1, 1)};
    const double t = rng.uniform(0.2, 1.0), tau = rng.uniform(0.0, t);
    const Vec whole = rk4_char(ycos_field(), 1, 0.0, t, x, y).z;
    const Vec mid = rk4_char(ycos_field(), 1, 0.0, tau, x, y).z;
    const Vec split = rk4_char(ycos_field(), 1, tau, t, mid, y).z;
    EXPECT_NEAR(whole[0], split[0], 1e-9);
  }
}

TEST(Rk4Char, ForwardBackwardInversion) {
  Rng rng(9);
  for (int k = 0; k < 50; ++k) {
    const Vec x{rng.uniform(-1, 1)}, y{rng.uniform(-1, 1)};
    const Vec fw = rk4_char(ycos_field(), 1, 0.0, 1.0, x, y).z;
    const Vec bw = rk4_char(ycos_field(), 1, 1.0, 0.0, fw, y).z;
    EXPECT_NEAR(bw[0], x[0], 1e-8);
  }
}

TEST(Rk4Dense, HermiteInterpolantTracksTrajectory) {
  const Trajectory tr = rk4_dense(yx_field(), 1, 0.0, 1.0, {1.0}, {0.7});
  for (double t = 0.0; t <= 1.0; t += 0.013) EXPECT_NEAR(tr(t)[0], std::exp(0.7 * t), 1e-9);
}

TEST(OracleTolerance, Enforced) {
  EXPECT_NO_THROW(require_oracle_tolerance({16, 1e-3, true}, 0.01));
  EXPECT_THROW(require_oracle_tolerance({16, 2e-3, true}, 0.01), InvalidInput);
  EXPECT_THROW(require_oracle_tolerance({2, 1e-6, true}, 0.01), InvalidInput);
}

TEST(AdaptiveSimpson, Polynomial) {
  EXPECT_NEAR(adaptive_simpson([](double s) { return s * s * s - s; }, -1.0, 2.0, 1e-12), 2.25, 1e-12);
  EXPECT_NEAR(adaptive_simpson([](double s) { return std::exp(s); }, 0.0, 1.0, 1e-12), std::exp(1.0) - 1.0, 1e-11);
}

TEST(SolutionOracle, ConstantFieldTransport) {
  OracleProblem p;
  p.a = y_field();
  p.u0 = [](const double* x, const double*) { return hat(x[0]); };
  p.support = Box::cube(1, -1.0, 1.0);
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const double t = rng.uniform(0, 1), x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    EXPECT_NEAR(solution_oracle(p, t, {x}, {y}).value, hat(x - t * y), 1e-12);
  }
}

TEST(SolutionOracle, UnitSource) {
  OracleProblem p;
  p.a = ycos_field();
  p.u0 = [](const double*, const double*) { return 0.0; };
  p.f = [](double, const double*, const double*) { return 1.0; };
  p.support = Box::cube(1, -5.0, 5.0);
  for (double t : {0.0, 0.3, 1.0}) EXPECT_NEAR(solution_oracle(p, t, {0.2}, {0.5}).value, t, 1e-12);
}

TEST(SolutionOracle, ManufacturedPolynomial) {
  // u = p(x - t y) + t^2 solves u_t + y u_x = 2t with u0 = p
  auto poly = [](double s) { return 0.5 + s - 0.7 * s * s + 0.2 * s * s * s; };
  OracleProblem p;
  p.a = y_field();
  p.u0 = [&](const double* x, const double*) { return poly(x[0]); };
  p.f = [](double t, const double*, const double*) { return 2.0 * t; };
  p.support = Box::cube(1, -10.0, 10.0);
  Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    const double t = rng.uniform(0, 1), x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    EXPECT_NEAR(solution_oracle(p, t, {x}, {y}).value, poly(x - t * y) + t * t, 1e-8);
  }
}

TEST(SolutionOracle, OutOfSupportFoot) {
  OracleProblem p;
  p.a = const_field(1.0);
  p.u0 = [](const double*, const double*) { return 3.0; };
  p.support = Box::cube(1, 0.0, 1.0);
  const OracleValue v = solution_oracle(p, 1.0, {0.5}, {0.0});
  EXPECT_TRUE(v.out_of_support);
  EXPECT_EQ(v.value, 0.0);
}

TEST(ExactConst, Examples) {
  const ExactConst e = exact_const(y_field(), 1, 1, Box::cube(2, -1.0, 1.0));
  EXPECT_NEAR(e.z(0.5, {1.0}, {-0.4})[0], 0.8, 1e-15);
  auto u0 = [](const double* x, const double*) { return hat(x[0]); };
  EXPECT_NEAR(e.u(u0, 1.0, {0.25}, {0.25}), 1.0, 1e-15);
}

TEST(ExactConst, RejectsVaryingField) {
  EXPECT_THROW(exact_const(yx_field(), 1, 1, Box::cube(2, -1.0, 1.0)), InvalidInput);
}

TEST(ExactConst, AgreesWithRk4) {
  const ExactConst e = exact_const(y_field(), 1, 1, Box::cube(2, -1.0, 1.0));
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const double t = rng.uniform(0, 1), x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    EXPECT_NEAR(rk4_char(y_field(), 1, 0.0, t, {x}, {y}).z[0], e.z(t, {x}, {y})[0], 1e-12);
  }
}
