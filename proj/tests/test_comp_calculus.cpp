#include <gtest/gtest.h>

#include <cmath>

#include "ptnet/comp_calculus.hpp"

using namespace ptnet;

namespace {

Factor scalar_linear(double w) { return Factor::linear(1, 1, {w}, {0.0}); }

// x -> (lip * sin(x_i / 1), ...) with one dependency per output
Factor sine_factor(std::size_t n, double lip, const Box& dom) {
  std::vector<Component> comps;
  for (std::size_t i = 0; i < n; ++i)
    comps.push_back({{i}, [lip](const double* x) { return lip * std::sin(x[0]); }, lip, lip});
  return Factor::generic(n, comps, dom);
}

double max_err_1d(const std::function<double(double)>& a, const std::function<double(double)>& b, double lo,
                  double hi, std::size_t n) {
  double e = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
    e = std::max(e, std::abs(a(x) - b(x)));
  }
  return e;
}

}  // namespace

TEST(SInfinity, SingleLinearFactorIsOne) {
  CompRep r({Factor::linear(2, 3, Vec(6, 1.0), Vec(2, 0.0))});
  EXPECT_EQ(s_infinity(r), 1u);
}

TEST(SInfinity, IdentityOnlyIsZero) {
  CompRep r({Factor::identity(4)});
  EXPECT_EQ(s_infinity(r), 0u);
}

TEST(SInfinity, IgnoresFinalFactor) {
  const Box dom = Box::cube(3, -1.0, 1.0);
  std::vector<Component> c = {{{0, 1}, [](const double* x) { return x[0] * x[1]; }, 1.0, 1.0},
                              {{2}, [](const double* x) { return x[0]; }, 1.0, 1.0}};
  Factor g = Factor::generic(3, c, dom);
  Factor wide = Factor::generic(2, {{{0, 1}, [](const double* x) { return x[0] + x[1]; }, 2.0, 2.0}},
                                Box::cube(2, -1.0, 1.0));
  EXPECT_EQ(s_infinity(CompRep({g, Factor::linear(1, 2, {1.0, 1.0}, {0.0})})), 2u);
  EXPECT_EQ(s_infinity(CompRep({Factor::identity(3), Factor::linear(1, 3, Vec(3, 1.0), {0.0})})), 0u);
  EXPECT_EQ(s_infinity(CompRep({g, wide})), 2u);
}

TEST(Complexity, CompositionAddsExactly) {
  const Box dom = Box::cube(5, -1.0, 1.0);
  // 5 = 2 + 3 dependencies; 8 = 4 + 4
  Factor a = Factor::generic(5,
                             {{{0, 1}, [](const double*) { return 0.0; }, 1.0, 1.0},
                              {{2, 3, 4}, [](const double*) { return 0.0; }, 1.0, 1.0}},
                             dom);
  Factor b = Factor::generic(2,
                             {{{0, 1}, [](const double*) { return 0.0; }, 1.0, 1.0},
                              {{0, 1}, [](const double*) { return 0.0; }, 1.0, 1.0},
                              {{0, 1}, [](const double*) { return 0.0; }, 1.0, 1.0},
                              {{0, 1}, [](const double*) { return 0.0; }, 1.0, 1.0}},
                             Box::cube(2, -1.0, 1.0));
  CompRep ra({a}), rb({b});
  EXPECT_EQ(complexity(ra), 5u);
  EXPECT_EQ(complexity(rb), 8u);
  EXPECT_EQ(complexity(compose_reps(rb, ra)), 13u);
}

TEST(Complexity, IdentityIsZero) { EXPECT_EQ(complexity(CompRep({Factor::identity(7)})), 0u); }

TEST(Complexity, SumAndParallelAreAdditive) {
  const Box dom = Box::cube(2, -1.0, 1.0);
  CompRep a({sine_factor(2, 1.0, dom), Factor::linear(1, 2, {1.0, 1.0}, {0.0})});
  CompRep b({Factor::linear(1, 2, {1.0, -1.0}, {0.5})});
  const CompRep s = sum_reps(a, b), p = parallel_reps(a, b);
  EXPECT_EQ(complexity(s), complexity(a) + complexity(b));
  EXPECT_EQ(complexity(p), complexity(a) + complexity(b));
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vec x = rng.point(dom);
    EXPECT_NEAR(s.eval(x)[0], a.eval(x)[0] + b.eval(x)[0], 1e-14);
    const Vec px = p.eval(x);
    ASSERT_EQ(px.size(), 2u);
    EXPECT_DOUBLE_EQ(px[0], a.eval(x)[0]);
    EXPECT_DOUBLE_EQ(px[1], b.eval(x)[0]);
  }
}

TEST(CompNorm, SingleAffineFactor) {
  CompRep r({scalar_linear(2.0)});
  const Interval iv = comp_norm_interval(r, Regularizer::LipFull, Box::cube(1, -1.0, 1.0), 200);
  EXPECT_DOUBLE_EQ(iv.upper, 2.0);
  EXPECT_NEAR(iv.lower, 2.0, 1e-12);
}

TEST(CompNorm, ContractionChain) {
  CompRep r({scalar_linear(0.5), scalar_linear(0.5)});
  const CompNormReport rep = comp_norm_report(r, Regularizer::LipFull, Box::cube(1, -1.0, 1.0), 500, 2);
  EXPECT_DOUBLE_EQ(rep.tail_upper[0], 0.25);
  EXPECT_LE(rep.tail_lower[0], 0.25 + 1e-15);
  EXPECT_NEAR(rep.tail_lower[0], 0.25, 1e-12);
  EXPECT_LE(rep.lower, rep.upper);
}

TEST(CompNorm, MissingLipschitzDataThrows) {
  Factor g = Factor::generic(1, {{{0}, [](const double* x) { return x[0]; }}}, Box::cube(1, 0.0, 1.0));
  EXPECT_THROW(comp_norm_interval(CompRep({g}), Regularizer::LipFull, Box::cube(1, 0.0, 1.0), 10),
               InvalidInput);
}

TEST(CompNorm, RegularizerAlgebraOnUpperBounds) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const double l1 = rng.uniform(0.2, 3.0), l2 = rng.uniform(0.2, 3.0), l3 = rng.uniform(0.2, 3.0);
    CompRep a({scalar_linear(l1), scalar_linear(l2)}), b({scalar_linear(l3)});
    for (Regularizer reg : {Regularizer::LipFull, Regularizer::LipFactors}) {
      const double ra = regularizer_upper(a, reg), rb = regularizer_upper(b, reg);
      EXPECT_LE(regularizer_upper(compose_reps(b, a), reg), std::max({ra, rb, ra * rb}) * (1 + 1e-14));
      EXPECT_LE(regularizer_upper(parallel_reps(a, b), reg), std::max(ra, rb) * (1 + 1e-14));
    }
  }
}

TEST(CompNorm, OrderingOfRegularizers) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Factor> f;
    const std::size_t n = 1 + rng.next() % 4;
    for (std::size_t j = 0; j < n; ++j) f.push_back(scalar_linear(rng.uniform(-2.0, 2.0)));
    CompRep r(f);
    const double r0 = regularizer_upper(r, Regularizer::LipFactors);
    const double rf = regularizer_upper(r, Regularizer::LipFull);
    EXPECT_LE(r0, rf);
    EXPECT_LE(rf, std::max(1.0, std::pow(r0, double(n))) * (1 + 1e-14));
  }
}

TEST(GammaInverse, Examples) {
  EXPECT_NEAR(gamma_inverse(GrowthFunction::alg(1.0, 2.0), 9.0), 3.0, 1e-14);
  EXPECT_NEAR(gamma_inverse(GrowthFunction::exp(1.0, 1.0), std::exp(1.0)), 1.0, 1e-14);
  const GrowthFunction g = GrowthFunction::alg(2.0, 0.5);
  EXPECT_NEAR(gamma_inverse(g, 8.0), 16.0, 1e-12);
  EXPECT_NEAR(g(16.0), 8.0, 1e-14);
}

TEST(GammaInverse, DomainErrors) {
  EXPECT_THROW(gamma_inverse(GrowthFunction::alg(1.0, 1.0), 0.0), InvalidInput);
  EXPECT_THROW(gamma_inverse(GrowthFunction::exp(2.0, 1.0), 2.0), InvalidInput);
  EXPECT_THROW(GrowthFunction::alg(-1.0, 1.0), InvalidInput);
}

TEST(GammaInverse, JsonRoundTrip) {
  const GrowthFunction g = GrowthFunction::exp(1.5, 0.25);
  const GrowthFunction h = GrowthFunction::from_json(g.to_json());
  EXPECT_EQ(h.kind(), GrowthFunction::Kind::Exp);
  EXPECT_DOUBLE_EQ(h.c(), 1.5);
  EXPECT_DOUBLE_EQ(h.alpha(), 0.25);
}

TEST(NearInverse, SquareRoot) { EXPECT_NEAR(near_inverse(1.0, 1.0, 2.0, 0.0)(25.0), 5.0, 1e-12); }

TEST(NearInverse, RoundTripWithinFactorFour) {
  const auto inv = near_inverse(1.0, 1.0, 1.0, 1.0);
  auto phi = [](double s) { return s * std::abs(std::log2(s)); };
  for (double e = 4.0; e <= 20.0; e += 0.25) {
    const double r = std::exp2(e);
    const double ratio = phi(inv(r)) / r;
    EXPECT_GE(ratio, 0.25) << r;
    EXPECT_LE(ratio, 4.0) << r;
  }
}

TEST(NearInverse, CharacteristicRateShape) {
  // zeta = m+1 = 2, beta = 2, b1 = d_y: proportional to
  // (r/d_y)^{1/2} |log2(r/d_y)|^{-1} with constant 2 (= zeta^{beta/zeta})
  const double dy = 4.0;
  const auto inv = near_inverse(dy, 1.0, 2.0, 2.0);
  for (double r : {64.0, 1e3, 1e5, 1e8}) {
    const double shape = std::sqrt(r / dy) / std::abs(std::log2(r / dy));
    EXPECT_NEAR(inv(r) / shape, 2.0, 1e-12);
  }
}

TEST(NearInverse, ParameterErrors) {
  EXPECT_THROW(near_inverse(0.0, 1.0, 1.0, 0.0), InvalidInput);
  EXPECT_THROW(near_inverse(1.0, 1.0, 1.0, -1.0), InvalidInput);
  EXPECT_THROW(near_inverse(1.0, 1.0, 1.0, 0.0)(-2.0), InvalidInput);
}

TEST(NEpsilon, Examples) {
  EXPECT_EQ(n_epsilon(GrowthFunction::alg(1.0, 1.0), 1.0, 0.1), 10u);
  EXPECT_EQ(n_epsilon(GrowthFunction::exp(1.0, 1.0), std::exp(2.0), 1.0), 2u);
  EXPECT_EQ(n_epsilon(GrowthFunction::alg(2.0, 2.0), 8.0, 0.5), 3u);
  EXPECT_THROW(n_epsilon(GrowthFunction::alg(1.0, 1.0), 1.0, 0.0), InvalidInput);
}

TEST(AclassSeminorm, Examples) {
  const GrowthFunction g = GrowthFunction::alg(1.0, 1.5);
  EXPECT_DOUBLE_EQ(aclass_seminorm_upper({{1.0, 0.0, 1.0}}, g), 1.0);
  std::vector<ApproximantSample> s;
  for (double n : {1.0, 4.0, 16.0, 64.0}) s.push_back({n, 1.0 / g(n), 1.0});
  EXPECT_NEAR(aclass_seminorm_upper(s, g), 2.0, 1e-14);
}

TEST(Implant, ExactFactorsPassThrough) {
  CompRep r({Factor::linear(2, 2, {1.0, 2.0, -1.0, 0.5}, {0.1, 0.0}), Factor::identity(2),
             Factor::linear(1, 2, {1.0, 1.0}, {0.0})});
  const ImplantResult res = implant(r, Vec(3, 0.01));
  EXPECT_EQ(res.error_bound, 0.0);
  ASSERT_TRUE(res.relu_only());
  const ReluNetwork net = res.network();
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const Vec x = rng.point(Box::cube(2, -3.0, 3.0));
    EXPECT_NEAR(net.eval(x)[0], r.eval(x)[0], 1e-12);
  }
}

TEST(Implant, TwoFactorErrorBound) {
  const Box d1 = Box::cube(1, -1.0, 1.0);
  Factor g1 = Factor::generic(1, {{{0}, [](const double* x) { return std::sin(x[0]); }, 1.0, 1.0}}, d1);
  Factor g2 = Factor::generic(1, {{{0}, [](const double* x) { return std::abs(x[0] - 0.2); }, 1.0, 1.2}}, d1);
  CompRep r({g1, g2});
  const ImplantResult res = implant(r, {0.01, 0.01});
  EXPECT_NEAR(res.error_bound, 0.02, 1e-15);
  const ReluNetwork net = res.network();
  const double err = max_err_1d([&](double x) { return net.eval(Vec{x})[0]; },
                                [&](double x) { return r.eval(Vec{x})[0]; }, -1.0, 1.0, 4000);
  EXPECT_LE(err, res.error_bound);
  EXPECT_GT(res.budget, double(res.size));
}

TEST(Implant, PreservesSparsity) {
  const Box dom = Box::cube(3, -1.0, 1.0);
  std::vector<Component> c = {
      {{0, 1}, [](const double* x) { return 0.5 * (x[0] + x[1]); }, 1.0, 1.0},
      {{2}, [](const double* x) { return std::cos(x[0]); }, 1.0, 1.0},
      {{1, 2}, [](const double* x) { return 0.5 * std::max(x[0], x[1]); }, 0.5, 0.5},
  };
  CompRep r({Factor::generic(3, c, dom), Factor::linear(1, 3, {1.0, 1.0, 1.0}, {0.0})});
  const ImplantResult res = implant(r, {0.1, 0.0});
  ASSERT_EQ(res.rep.factor(0).kind(), Factor::Kind::Net);
  for (std::size_t cnt : dependency_counts(res.rep.factor(0).network())) EXPECT_LE(cnt, s_infinity(r));
  const ReluNetwork net = res.network();
  Rng rng(4);
  double err = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const Vec x = rng.point(dom);
    err = std::max(err, std::abs(net.eval(x)[0] - r.eval(x)[0]));
  }
  EXPECT_LE(err, res.error_bound);
}

TEST(Implant, RejectsBadDelta) {
  Factor g = Factor::generic(1, {{{0}, [](const double* x) { return x[0]; }, 1.0, 1.0}}, Box::cube(1, 0.0, 1.0));
  EXPECT_THROW(implant(CompRep({g}), {0.0}), InvalidInput);
  EXPECT_THROW(implant(CompRep({g}), {0.1, 0.1}), InvalidInput);
}

TEST(ImplantForAccuracy, ConstantExactFamily) {
  const Box d = Box::cube(1, 0.0, 1.0);
  auto family = [&](std::size_t) {
    Factor g = Factor::generic(1, {{{0}, [](const double* x) { return 0.5 * x[0] * x[0]; }, 1.0, 0.5}}, d);
    return FamilyMember{CompRep({g}), 0.0};
  };
  for (double eps : {0.2, 0.05, 0.01}) {
    const AccuracyImplant a = implant_for_accuracy(family, GrowthFunction::alg(1.0, 1.0), 0.5, 1.0, eps);
    EXPECT_LE(a.total_bound, eps);
    const ReluNetwork net = a.implanted.network();
    const double err = max_err_1d([&](double x) { return net.eval(Vec{x})[0]; },
                                  [](double x) { return 0.5 * x * x; }, 0.0, 1.0, 3000);
    EXPECT_LE(err, eps);
  }
}

TEST(ImplantForAccuracy, LipschitzOneDimensional) {
  // v(x) = |x - 0.3|; G_N is v with its kink rounded over width 1/N,
  // sup error 1/(2N) = gamma(N)^{-1} |v| / 2 for Alg{1,1}, |v| = 1.
  const Box d = Box::cube(1, 0.0, 1.0);
  auto v = [](double x) { return std::abs(x - 0.3); };
  auto family = [&](std::size_t n) {
    const double w = 1.0 / double(n);
    auto gn = [w](const double* x) {
      const double u = x[0] - 0.3;
      return std::abs(u) < w ? 0.5 * (u * u / w + w) : std::abs(u);
    };
    return FamilyMember{CompRep({Factor::generic(1, {{{0}, gn, 1.0, 0.7 + w}}, d)}), 0.5 * w};
  };
  const double eps = 0.05;
  const AccuracyImplant a = implant_for_accuracy(family, GrowthFunction::alg(1.0, 1.0), 1.0, 1.0, eps);
  EXPECT_EQ(a.n_eps, 40u);
  EXPECT_LE(a.total_bound, eps);
  const ReluNetwork net = a.implanted.network();
  const double err = max_err_1d([&](double x) { return net.eval(Vec{x})[0]; }, v, 0.0, 1.0, 10000);
  EXPECT_LE(err, eps);
}

TEST(Describe, SerializesKindsAndLipschitzData) {
  const Box dom = Box::cube(2, -1.0, 1.0);
  CompRep r({sine_factor(2, 0.5, dom), Factor::identity(2), Factor::linear(1, 2, {1.0, 1.0}, {0.0})});
  const auto j = r.describe();
  ASSERT_EQ(j["factors"].size(), 3u);
  EXPECT_EQ(j["factors"][0]["kind"], "generic");
  EXPECT_DOUBLE_EQ(j["factors"][0]["components"][1]["lip"].get<double>(), 0.5);
  EXPECT_EQ(j["factors"][1]["kind"], "identity");
  EXPECT_EQ(j["factors"][2]["kind"], "linear");
}
