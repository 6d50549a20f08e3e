#include <gtest/gtest.h>

#include <ptnet/relu_net.hpp>

using namespace ptnet;

namespace {

ReluNetwork hat_net() {
  return ReluNetwork(1, {AffineLayer::dense(3, 1, {1, 1, 1}, {1, 0, -1}, Activation::ReLU),
                         AffineLayer::dense(1, 3, {1, -2, 1}, {0}, Activation::Identity)});
}

ReluNetwork random_net(Rng& rng, std::size_t in, std::vector<std::size_t> widths, std::size_t out) {
  std::vector<AffineLayer> layers;
  std::size_t cols = in;
  widths.push_back(out);
  for (std::size_t li = 0; li < widths.size(); ++li) {
    const std::size_t rows = widths[li];
    Vec w(rows * cols), b(rows);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-0.5, 0.5);
    layers.push_back(AffineLayer::dense(rows, cols, w, b,
                                        li + 1 == widths.size() ? Activation::Identity : Activation::ReLU));
    cols = rows;
  }
  return ReluNetwork(in, std::move(layers));
}

// straight-line dense forward pass, written independently of AffineLayer::apply
Vec naive_eval(const ReluNetwork& net, Vec x) {
  for (const auto& l : net.layers()) {
    const Vec w = l.dense_weights();
    Vec y(l.rows());
    for (std::size_t r = 0; r < l.rows(); ++r) {
      double s = l.biases()[r];
      for (std::size_t c = 0; c < l.cols(); ++c) s += w[r * l.cols() + c] * x[c];
      y[r] = l.activation() == Activation::ReLU ? std::max(0.0, s) : s;
    }
    x = y;
  }
  return x;
}

}  // namespace

TEST(ReluNet, IdentityEval) {
  const Vec y = eval(identity_net(2), {1.0, -2.0});
  EXPECT_EQ(y, (Vec{1.0, -2.0}));
}

TEST(ReluNet, HatAtHalf) { EXPECT_DOUBLE_EQ(hat_net().eval({0.5})[0], 0.5); }

TEST(ReluNet, RandomNetMatchesNaiveLoops) {
  Rng rng(11);
  const ReluNetwork net = random_net(rng, 3, {5, 4}, 2);
  for (int k = 0; k < 100; ++k) {
    const Vec x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Vec a = net.eval(x), b = naive_eval(net, x);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  }
}

TEST(ReluNet, EvalRejectsWrongDimension) { EXPECT_THROW(identity_net(2).eval({1.0}), InvalidInput); }

TEST(ReluNet, ConstructorChecks) {
  EXPECT_THROW(ReluNetwork(2, {AffineLayer::dense(1, 3, {1, 1, 1}, {0}, Activation::Identity)}), InvalidInput);
  EXPECT_THROW(ReluNetwork(1, {AffineLayer::dense(1, 1, {1}, {0}, Activation::ReLU)}), InvalidInput);
  EXPECT_THROW(AffineLayer::dense(2, 1, {1, 1}, {0}, Activation::ReLU), InvalidInput);
}

TEST(ReluNet, SizeCountsNonzeros) {
  const ReluNetwork net(2, {AffineLayer::dense(2, 2, {1, 0, 0, 2}, {0, 3}, Activation::ReLU),
                            AffineLayer::dense(1, 2, {1, 1}, {0}, Activation::Identity)});
  EXPECT_EQ(net.size(), 5u);
  EXPECT_EQ(net.depth(), 2u);
}

TEST(Compose, IdentityLeavesNetUnchanged) {
  Rng rng(3);
  const ReluNetwork n = random_net(rng, 2, {4}, 3);
  const ReluNetwork c = compose(identity_net(3), n);
  for (int k = 0; k < 100; ++k) {
    const Vec x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec a = c.eval(x), b = n.eval(x);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  }
}

TEST(Compose, HatOfScaledInput) {
  const ReluNetwork c = compose(hat_net(), affine_net(1, 1, {2.0}, {0.0}));
  EXPECT_DOUBLE_EQ(c.eval({0.25})[0], 0.5);
}

TEST(Compose, RandomNetsAgreeWithSequentialEvaluation) {
  Rng rng(5);
  const ReluNetwork inner = random_net(rng, 3, {6, 5}, 4);
  const ReluNetwork outer = random_net(rng, 4, {7}, 2);
  const ReluNetwork c = compose(outer, inner);
  EXPECT_EQ(c.depth(), inner.depth() + outer.depth() - 1);
  for (int k = 0; k < 1000; ++k) {
    const Vec x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Vec a = c.eval(x), b = outer.eval(inner.eval(x));
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
  EXPECT_EQ(static_cast<long>(c.size()),
            static_cast<long>(outer.size() + inner.size()) + fusion_term(outer, inner));
}

TEST(Compose, DimensionMismatchRejected) {
  EXPECT_THROW(compose(identity_net(2), identity_net(3)), InvalidInput);
}

TEST(Parallelize, TwoIdentities) {
  const Vec y = parallelize({identity_net(1), identity_net(1)}).eval({3.0});
  EXPECT_EQ(y, (Vec{3.0, 3.0}));
}

TEST(Parallelize, SumWithNegationIsZero) {
  Rng rng(8);
  const ReluNetwork n = random_net(rng, 2, {5, 3}, 2);
  const ReluNetwork z = sum({n, negate(n)});
  for (int k = 0; k < 100; ++k) {
    const Vec y = z.eval({rng.uniform(-3, 3), rng.uniform(-3, 3)});
    EXPECT_LE(std::abs(y[0]), 1e-12);
    EXPECT_LE(std::abs(y[1]), 1e-12);
  }
}

TEST(Parallelize, MixedDepthsAndPassthrough) {
  Rng rng(9);
  const ReluNetwork a = random_net(rng, 2, {3}, 2);           // depth 2
  const ReluNetwork b = random_net(rng, 2, {4, 3, 3, 2}, 1);  // depth 5
  const ReluNetwork p = parallelize({a, b});
  EXPECT_EQ(p.depth(), 5u);
  EXPECT_EQ(p.out_dim(), 3u);
  for (int k = 0; k < 200; ++k) {
    const Vec x = {rng.uniform(-4, 4), rng.uniform(-4, 4)};
    const Vec y = p.eval(x), ya = a.eval(x), yb = b.eval(x);
    EXPECT_NEAR(y[0], ya[0], 1e-12);
    EXPECT_NEAR(y[1], ya[1], 1e-12);
    EXPECT_NEAR(y[2], yb[0], 1e-12);
  }
  // a signed affine map passes exactly through padding
  const ReluNetwork neg = affine_net(1, 1, {-1.0}, {0.0});
  const ReluNetwork padded = pad_to_depth(neg, 4);
  EXPECT_EQ(padded.eval({2.5})[0], -2.5);
  EXPECT_EQ(padded.eval({-7.0})[0], 7.0);
}

TEST(Parallelize, SizeOverheadMatchesPassthroughCost) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t da = 1 + rng.next() % 3, db = 1 + rng.next() % 5;
    std::vector<std::size_t> wa(da - 1, 3), wb(db - 1, 2);
    const ReluNetwork a = random_net(rng, 2, wa, 1 + rng.next() % 3);
    const ReluNetwork b = random_net(rng, 2, wb, 1 + rng.next() % 3);
    const std::size_t D = std::max(a.depth(), b.depth());
    const ReluNetwork p = parallelize({a, b});
    EXPECT_EQ(p.size(), a.size() + b.size() + passthrough_cost(a, D) + passthrough_cost(b, D));
  }
}

TEST(Parallelize, EmptyListRejected) {
  EXPECT_THROW(parallelize({}), InvalidInput);
  EXPECT_THROW(sum({identity_net(1), identity_net(2)}), InvalidInput);
}

TEST(RhoGate, BranchValues) {
  const ReluNetwork g = rho_gate(0.0, 1.0, 2);
  EXPECT_EQ(g.eval({-1.0}), (Vec{0.0, 0.0}));
  EXPECT_EQ(g.eval({0.25}), (Vec{0.25, 0.0}));
  const Vec y = g.eval({0.9});
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_NEAR(y[1], 0.4, 1e-15);
}

TEST(RhoGate, SumAndVariationIdentities) {
  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    const double t0 = rng.uniform(-1, 1), len = rng.uniform(0.1, 2.0);
    const std::size_t q = 1 + rng.next() % 17;
    const ReluNetwork g = rho_gate(t0, t0 + len, q);
    const double t = rng.uniform(t0 - 0.5, t0 + len + 0.5), tp = rng.uniform(t0 - 0.5, t0 + len + 0.5);
    const Vec a = g.eval({t}), b = g.eval({tp});
    double s = 0.0, var = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      s += a[i];
      var += std::abs(a[i] - b[i]);
    }
    EXPECT_NEAR(s, std::clamp(t - t0, 0.0, len), 1e-12);
    const double tc = std::clamp(t, t0, t0 + len), tpc = std::clamp(tp, t0, t0 + len);
    EXPECT_LE(var, std::abs(t - tp) + 1e-12);
    EXPECT_NEAR(var, std::abs(tc - tpc), 1e-12);
  }
}

TEST(LipLowerBound, Examples) {
  const ReluNetwork c = affine_net(1, 1, {0.0}, {2.0});
  EXPECT_EQ(lip_lower_bound(c, Box::cube(1, 0, 1), 1000, 1), 0.0);
  const ReluNetwork three = affine_net(1, 1, {3.0}, {0.0});
  EXPECT_GE(lip_lower_bound(three, Box::cube(1, 0, 1), 10000, 1), 2.99);
  const ReluNetwork hat = compose(hat_net(), affine_net(1, 1, {10.0}, {-5.0}));
  const double l = lip_lower_bound(hat, Box::cube(1, 0, 1), 10000, 1);
  EXPECT_GE(l, 9.9);
  EXPECT_LE(l, 10.0 + 1e-9);
  EXPECT_THROW(lip_lower_bound(three, Box({0.0}, {0.0}), 10, 1), InvalidInput);
}

TEST(LipLowerBound, DeterministicForSeed) {
  Rng rng(1);
  const ReluNetwork n = random_net(rng, 2, {8}, 1);
  EXPECT_EQ(lip_lower_bound(n, Box::cube(2, -1, 1), 500, 42), lip_lower_bound(n, Box::cube(2, -1, 1), 500, 42));
  EXPECT_LE(lip_lower_bound(n, Box::cube(2, -1, 1), 500, 42), lip_upper_bound(n) + 1e-12);
}

TEST(Serialization, RoundTripIsBitExact) {
  Rng rng(13);
  const ReluNetwork n = random_net(rng, 3, {4, 4}, 2);
  const ReluNetwork m = deserialize(serialize(n));
  ASSERT_EQ(m.depth(), n.depth());
  for (std::size_t l = 0; l < n.depth(); ++l) {
    EXPECT_EQ(m.layer(l).dense_weights(), n.layer(l).dense_weights());
    EXPECT_EQ(m.layer(l).biases(), n.layer(l).biases());
    EXPECT_EQ(m.layer(l).activation(), n.layer(l).activation());
  }
  EXPECT_EQ(serialize(m), serialize(n));
}

TEST(Serialization, RejectsUnknownActivation) {
  auto j = to_json(identity_net(1));
  j["layers"][0]["activation"] = "tanh";
  EXPECT_THROW(network_from_json(j), InvalidInput);
}

TEST(DependencyCounts, BlockStructure) {
  const ReluNetwork p = parallelize_blocks({identity_net(1), affine_net(1, 2, {1, 1}, {0})});
  EXPECT_EQ(dependency_counts(p), (std::vector<std::size_t>{1, 2}));
}

TEST(PiecewiseLinearEvaluator, MatchesForwardPass) {
  Rng rng(14);
  const ReluNetwork n = random_net(rng, 1, {40}, 1);
  const PiecewiseLinearEvaluator pl(n);
  for (int k = 0; k < 1000; ++k) {
    const double x = rng.uniform(-3, 3);
    EXPECT_NEAR(pl(x), n.eval({x})[0], 1e-12);
  }
  EXPECT_THROW(PiecewiseLinearEvaluator(random_net(rng, 1, {3, 3}, 1)), InvalidInput);
}
