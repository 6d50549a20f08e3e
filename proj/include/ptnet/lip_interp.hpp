#ifndef PTNET_LIP_INTERP_HPP
#define PTNET_LIP_INTERP_HPP

#include <functional>
#include <memory>
#include <string>

#include "relu_net.hpp"

namespace ptnet {

/// Uniform grid with q subdivisions per axis (h = 1/q in unit coordinates)
/// over an axis-aligned box; nodes are enumerated with the first axis slowest.
struct GridSpec {
  std::size_t s = 1;
  std::size_t q = 1;
  Box box;

  GridSpec() = default;
  GridSpec(std::size_t dim, std::size_t subdiv, Box b) : s(dim), q(subdiv), box(std::move(b)) {
    require(s >= 1, "GridSpec: dimension must be positive");
    require(q >= 1, "GridSpec: q must be positive");
    require(box.dim() == s, "GridSpec: box dimension mismatch");
    require(!box.degenerate(), "GridSpec: degenerate box");
  }
  static GridSpec unit(std::size_t dim, std::size_t subdiv) {
    return GridSpec(dim, subdiv, Box::cube(dim, 0.0, 1.0));
  }

  double h() const { return 1.0 / static_cast<double>(q); }
  std::size_t node_count() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < s; ++i) n *= q + 1;
    return n;
  }
  std::vector<std::size_t> multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(s);
    for (std::size_t k = s; k-- > 0;) {
      idx[k] = flat % (q + 1);
      flat /= q + 1;
    }
    return idx;
  }
  std::size_t flat_index(const std::vector<std::size_t>& idx) const {
    std::size_t f = 0;
    for (std::size_t k = 0; k < s; ++k) f = f * (q + 1) + idx[k];
    return f;
  }
  Vec node(const std::vector<std::size_t>& idx) const {
    Vec x(s);
    for (std::size_t k = 0; k < s; ++k)
      x[k] = idx[k] == q ? box.hi[k]
                         : box.lo[k] + box.width(k) * static_cast<double>(idx[k]) / static_cast<double>(q);
    return x;
  }
};

/// Nodal samples of g with declared max-norm Lipschitz and sup bounds.
/// The evaluator is optional and only used for validation reports.
struct SampledFunction {
  GridSpec grid;
  Vec values;
  double lip_bound = 0.0;
  double sup_bound = 0.0;
  std::function<double(const double*)> fn;

  static SampledFunction sample(std::function<double(const double*)> g, const GridSpec& grid,
                                double lip, double sup) {
    SampledFunction sf;
    sf.grid = grid;
    sf.lip_bound = lip;
    sf.sup_bound = sup;
    sf.values.resize(grid.node_count());
    for (std::size_t f = 0; f < sf.values.size(); ++f) {
      Vec x = grid.node(grid.multi_index(f));
      sf.values[f] = g(x.data());
    }
    sf.fn = std::move(g);
    return sf;
  }
};

/// Constants of the Lipschitz-stable interpolation construction for one
/// input dimension s.
struct Calibration {
  std::size_t s = 1;
  double c1 = 8.0;  // size <= c1 Lip^s delta^-s log2(1/delta)   (unit cube)
  double c2 = 2.0;  // depth <= c2 log2(1/delta)
  double c3 = 1.0;  // Lip(N_delta) <= c3 (1 + sup g) Lip(g)
  double C = 0.5;   // |g - g_h| <= C h Lip(g)
  double c_star = 0.25;

  nlohmann::json to_json() const {
    return {{"s", s}, {"c1", c1}, {"c2", c2}, {"c3", c3}, {"C", C}, {"c_star", c_star}};
  }
};

/// Shipped defaults (from `ptnet_cli calibrate`, rounded up). C is the
/// analytic worst case min(1, s/2) for multilinear interpolation of a
/// max-norm Lipschitz function, c_star = 1 / (2 * 2^s) since at most 2^s
/// tensor hats are nonzero at any point.
inline Calibration default_calibration(std::size_t s) {
  Calibration c;
  c.s = s;
  c.C = std::min(1.0, 0.5 * static_cast<double>(s));
  c.c_star = 1.0 / (2.0 * std::exp2(static_cast<double>(s)));
  switch (s) {
    case 1:
      c.c1 = 4.0;
      c.c2 = 1.0;
      c.c3 = 1.0;
      break;
    case 2:
      c.c1 = 160.0;
      c.c2 = 2.5;
      c.c3 = 1.0;
      break;
    default:
      c.c1 = 160.0 * std::exp2(3.0 * static_cast<double>(s - 2));
      c.c2 = 2.5 + static_cast<double>(s - 2);
      c.c3 = 1.0;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Hat functions and products

/// phi(x/h - i) with phi(x) = (1-|x|)_+ = relu(x+1) - 2 relu(x) + relu(x-1).
inline ReluNetwork hat1d(double h, long i) {
  require(h > 0.0, "hat1d: h must be positive");
  const ReluNetwork base(1, {AffineLayer::dense(3, 1, {1.0, 1.0, 1.0}, {1.0, 0.0, -1.0}, Activation::ReLU),
                             AffineLayer::dense(1, 3, {1.0, -2.0, 1.0}, {0.0}, Activation::Identity)});
  return compose(base, affine_net(1, 1, {1.0 / h}, {-static_cast<double>(i)}));
}

/// The same hat as relu(1 - relu(u) - relu(-u)), u = x/h - i. One layer
/// deeper than hat1d, but exactly 0 in floating point off the support.
inline ReluNetwork tent1d(double h, long i) {
  const double a = 1.0 / h, b = -static_cast<double>(i);
  return ReluNetwork(1, {AffineLayer::dense(2, 1, {a, -a}, {b, -b}, Activation::ReLU),
                         AffineLayer::dense(1, 2, {-1.0, -1.0}, {1.0}, Activation::ReLU),
                         AffineLayer::dense(1, 1, {1.0}, {0.0}, Activation::Identity)});
}

/// relu(x) - relu(x-1): clamps to [0,1].
inline ReluNetwork clamp01_net() {
  return ReluNetwork(1, {AffineLayer::dense(2, 1, {1.0, 1.0}, {0.0, -1.0}, Activation::ReLU),
                         AffineLayer::dense(1, 2, {1.0, -1.0}, {0.0}, Activation::Identity)});
}

/// Piecewise-linear interpolant of t^2 at 2^m + 1 nodes of [0,1], built as
/// t - sum_k g_k(t) / 4^k with g_k the k-fold sawtooth; depth m + 1, width 3.
/// Input is assumed in [0,1].
inline ReluNetwork square_net(std::size_t m) {
  require(m >= 1, "square_net: m >= 1");
  std::vector<AffineLayer> layers;
  // hidden 1: a = relu(t), b = relu(t - 1/2); accumulator is a itself.
  layers.push_back(AffineLayer::dense(2, 1, {1.0, 1.0}, {0.0, -0.5}, Activation::ReLU));
  double w = 0.25;  // 4^{-k}
  for (std::size_t k = 1; k < m; ++k) {
    // g_k = 2a - 4b; S_k = acc - w g_k; next: relu(g_k), relu(g_k - 1/2), relu(S_k)
    AffineLayer l(k == 1 ? 2 : 3, Activation::ReLU);
    const std::size_t acc = k == 1 ? 0 : 2;
    l.push(0, 2.0);
    l.push(1, -4.0);
    l.end_row(0.0);
    l.push(0, 2.0);
    l.push(1, -4.0);
    l.end_row(-0.5);
    if (k == 1) {
      l.push(0, 1.0 - 2.0 * w);
      l.push(1, 4.0 * w);
    } else {
      l.push(0, -2.0 * w);
      l.push(1, 4.0 * w);
      l.push(acc, 1.0);
    }
    l.end_row(0.0);
    layers.push_back(std::move(l));
    w *= 0.25;
  }
  AffineLayer out(m == 1 ? 2 : 3, Activation::Identity);
  if (m == 1) {
    out.push(0, 1.0 - 2.0 * w);
    out.push(1, 4.0 * w);
  } else {
    out.push(0, -2.0 * w);
    out.push(1, 4.0 * w);
    out.push(2, 1.0);
  }
  out.end_row(0.0);
  layers.push_back(std::move(out));
  return ReluNetwork(1, std::move(layers));
}

/// Sawtooth depth used by product_net(s, delta): the pairwise product then
/// has value error <= 2^{-2m-1} and gradient error <= 1.5 * 2^{-m}.
inline std::size_t product_levels(std::size_t s, double delta) {
  return std::max<std::size_t>(1, guarded_ceil(std::log2(2.0 * static_cast<double>(s - 1) / delta)));
}

namespace detail {

/// (u, v) -> 2 f((u+v)/2) - f(u)/2 - f(v)/2 after clamping u, v to [0,1].
inline ReluNetwork pair_product(std::size_t m) {
  const ReluNetwork clamp2 = parallelize_blocks({clamp01_net(), clamp01_net()});
  const ReluNetwork pre = affine_net(3, 2, {0.5, 0.5, 1.0, 0.0, 0.0, 1.0}, {0.0, 0.0, 0.0});
  const ReluNetwork sq = square_net(m);
  const ReluNetwork squares = parallelize_blocks({sq, sq, sq});
  const ReluNetwork post = affine_net(1, 3, {2.0, -0.5, -0.5}, {0.0});
  return compose(post, compose(squares, compose(pre, clamp2)));
}

/// min of k inputs via min(a,b) = a - relu(a-b) on a balanced tree.
inline ReluNetwork min_net(std::size_t k) {
  const ReluNetwork min2(2, {AffineLayer::dense(3, 2, {1.0, 0.0, -1.0, 0.0, 1.0, -1.0}, {0.0, 0.0, 0.0},
                                                Activation::ReLU),
                             AffineLayer::dense(1, 3, {1.0, -1.0, -1.0}, {0.0}, Activation::Identity)});
  ReluNetwork acc = identity_net(k);
  std::size_t width = k;
  while (width > 1) {
    std::vector<ReluNetwork> blocks;
    for (std::size_t i = 0; i + 1 < width; i += 2) blocks.push_back(min2);
    if (width % 2) blocks.push_back(identity_net(1));
    acc = compose(parallelize_blocks(blocks), acc);
    width = (width + 1) / 2;
  }
  return acc;
}

inline ReluNetwork relu_out() {
  return ReluNetwork(1, {AffineLayer::dense(1, 1, {1.0}, {0.0}, Activation::ReLU),
                         AffineLayer::dense(1, 1, {1.0}, {0.0}, Activation::Identity)});
}

}  // namespace detail

/// Approximates nu -> prod_j nu_j on [0,1]^s (inputs are clamped) with sup
/// and gradient error below delta; pairwise products on a balanced tree.
/// Returns exactly 0 at the origin.
inline ReluNetwork product_net(std::size_t s, double delta) {
  require(s >= 2, "product_net: s >= 2");
  require(delta > 0.0 && delta < 1.0, "product_net: delta must lie in (0,1)");
  const std::size_t m = product_levels(s, delta);
  const ReluNetwork p2 = detail::pair_product(m);
  ReluNetwork acc = identity_net(s);
  std::size_t width = s;
  while (width > 1) {
    std::vector<ReluNetwork> blocks;
    for (std::size_t i = 0; i + 1 < width; i += 2) blocks.push_back(p2);
    if (width % 2) blocks.push_back(identity_net(1));
    acc = compose(parallelize_blocks(blocks), acc);
    width = (width + 1) / 2;
  }
  return acc;
}

/// Tensor hat prod_j phi(x_j/h - i_j) on unit coordinates: tents feed a
/// product net and the result passes relu(min(P, tent_1, ..., tent_s)),
/// which is exactly 0 off the support and keeps the product error.
inline ReluNetwork tensor_hat(const std::vector<long>& idx, double h, double delta) {
  const std::size_t s = idx.size();
  require(s >= 1, "tensor_hat: empty index");
  require(h > 0.0, "tensor_hat: h must be positive");
  std::vector<ReluNetwork> tents;
  for (long i : idx) tents.push_back(tent1d(h, i));
  if (s == 1) return tents[0];
  const ReluNetwork H = parallelize_blocks(tents);
  const ReluNetwork inner = parallelize({product_net(s, delta), identity_net(s)});
  const ReluNetwork gate = compose(detail::relu_out(), detail::min_net(s + 1));
  return compose(gate, compose(inner, H));
}

// ---------------------------------------------------------------------------
// Lipschitz-stable interpolation network

struct GridTooCoarse : InvalidInput {
  std::size_t required_q;
  GridTooCoarse(const std::string& w, std::size_t q) : InvalidInput(w), required_q(q) {}
};

struct LipStableReport {
  double h = 0.0;          // node spacing in unit coordinates
  std::size_t q = 0;
  double h_required = 0.0;
  double delta_star = 0.0; // product tolerance inside tensor hats (0 when s = 1)
  double C = 0.0;
  std::size_t terms = 0;   // nonzero nodal values
  std::size_t size = 0;
  std::size_t depth = 0;
  double measured_sup_error = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json to_json() const {
    return {{"h", h},         {"q", q},         {"h_required", h_required},
            {"delta_star", delta_star},         {"C", C},
            {"terms", terms}, {"size", size},   {"depth", depth},
            {"measured_sup_error", measured_sup_error}};
  }
};

/// Sum of scaled, shifted copies of one base tensor hat. Only the 2^s
/// terms whose support contains x are evaluated; the others are exactly 0,
/// so this agrees with the assembled network up to summation rounding.
class LocalHatSum {
 public:
  LocalHatSum(ReluNetwork base, GridSpec grid, Vec values)
      : base_(std::move(base)), grid_(std::move(grid)), values_(std::move(values)) {}

  double operator()(const double* x) const {
    const std::size_t s = grid_.s, q = grid_.q;
    const double h = grid_.h();
    thread_local Vec u, z;
    thread_local std::vector<std::size_t> lo;
    u.resize(s);
    z.resize(s);
    lo.resize(s);
    for (std::size_t k = 0; k < s; ++k) {
      u[k] = (x[k] - grid_.box.lo[k]) / grid_.box.width(k);
      const double c = std::floor(u[k] / h);
      lo[k] = c <= 0.0 ? 0 : std::min<std::size_t>(q - 1, static_cast<std::size_t>(c));
    }
    double acc = 0.0, y = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t{1} << s); ++corner) {
      std::size_t flat = 0;
      for (std::size_t k = 0; k < s; ++k) {
        const std::size_t i = lo[k] + ((corner >> k) & 1u);
        flat = flat * (q + 1) + i;
        z[k] = u[k] - static_cast<double>(i) * h;
      }
      const double v = values_[flat];
      if (v == 0.0) continue;
      base_.eval(z.data(), &y);
      acc += v * y;
    }
    return acc;
  }

  const GridSpec& grid() const { return grid_; }

 private:
  ReluNetwork base_;
  GridSpec grid_;
  Vec values_;
};

struct LipStableNet {
  ReluNetwork net;
  LipStableReport report;
  std::shared_ptr<const LocalHatSum> local;

  /// Fast evaluation of net at x (see LocalHatSum).
  double eval(const double* x) const { return (*local)(x); }
};

/// Lipschitz constant in unit coordinates of the box.
inline double unit_lipschitz(double lip, const Box& box) { return lip * box.max_width(); }

/// Smallest q with h = 1/q <= delta / (2 C Lip_unit).
inline std::size_t required_q(double lip, const Box& box, double delta, const Calibration& cal) {
  const double lu = unit_lipschitz(lip, box);
  if (!(lu > 0.0)) return 1;
  return std::max<std::size_t>(1, guarded_ceil(2.0 * cal.C * lu / delta));
}

inline SampledFunction sample_for(std::function<double(const double*)> g, const Box& box, double lip,
                                  double sup, double delta) {
  const Calibration cal = default_calibration(box.dim());
  return SampledFunction::sample(std::move(g), GridSpec(box.dim(), required_q(lip, box, delta, cal), box),
                                 lip, sup);
}

/// N_delta = sum_i g(ih) N_{i,delta*} composed with the affine map of the
/// box onto [0,1]^s; |g - N_delta| <= delta on the box.
inline LipStableNet lip_stable_net(const SampledFunction& sf, double delta, const Calibration& cal) {
  require(delta > 0.0 && delta < 1.0, "lip_stable_net: delta must lie in (0,1)");
  const GridSpec& g = sf.grid;
  require(sf.values.size() == g.node_count(), "lip_stable_net: value count != (q+1)^s");
  const std::size_t s = g.s;
  LipStableReport rep;
  rep.q = g.q;
  rep.h = g.h();
  rep.C = cal.C;
  const double lu = unit_lipschitz(sf.lip_bound, g.box);
  rep.h_required = lu > 0.0 ? delta / (2.0 * cal.C * lu) : 1.0;
  if (rep.h > rep.h_required * (1.0 + 1e-12)) {
    const std::size_t need = required_q(sf.lip_bound, g.box, delta, cal);
    throw GridTooCoarse("lip_stable_net: grid too coarse, need q >= " + std::to_string(need), need);
  }
  const double h = rep.h;
  if (s > 1) rep.delta_star = cal.c_star * delta / std::max(1.0, sf.sup_bound);

  const ReluNetwork base = s == 1 ? hat1d(h, 0) : tensor_hat(std::vector<long>(s, 0), h, rep.delta_star);
  std::vector<ReluNetwork> terms;
  for (std::size_t f = 0; f < sf.values.size(); ++f) {
    const double v = sf.values[f];
    if (v == 0.0) continue;
    const auto idx = g.multi_index(f);
    Vec shift(s);
    for (std::size_t k = 0; k < s; ++k) shift[k] = -static_cast<double>(idx[k]) * h;
    terms.push_back(scale(shift_input(base, shift), v));
  }
  rep.terms = terms.size();
  // unit map x -> (x - lo) / width
  Vec w(s * s, 0.0), b(s);
  for (std::size_t k = 0; k < s; ++k) {
    w[k * s + k] = 1.0 / g.box.width(k);
    b[k] = -g.box.lo[k] / g.box.width(k);
  }
  const ReluNetwork unit = affine_net(s, s, w, b);
  ReluNetwork body;
  if (terms.empty()) {
    body = ReluNetwork(s, {AffineLayer::dense(1, s, Vec(s, 0.0), {0.0}, Activation::Identity)});
  } else {
    body = sum(terms);
  }
  LipStableNet out{compose(body, unit), rep, std::make_shared<const LocalHatSum>(base, g, sf.values)};
  out.report.size = out.net.size();
  out.report.depth = out.net.depth();

  if (sf.fn) {
    const std::size_t per_axis = std::max<std::size_t>(
        2, std::min<std::size_t>(4 * g.q + 1,
                                 static_cast<std::size_t>(std::pow(20000.0, 1.0 / static_cast<double>(s)))));
    GridSpec vg(s, per_axis - 1, g.box);
    double err = 0.0;
    for (std::size_t f = 0; f < vg.node_count(); ++f) {
      Vec x = vg.node(vg.multi_index(f));
      err = std::max(err, std::abs(out.eval(x.data()) - sf.fn(x.data())));
    }
    out.report.measured_sup_error = err;
  }
  return out;
}

inline LipStableNet lip_stable_net(const SampledFunction& sf, double delta) {
  return lip_stable_net(sf, delta, default_calibration(sf.grid.s));
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationEvidence {
  Calibration cal;
  std::vector<std::size_t> grid_sizes;
  double measured_C = 0.0;
  nlohmann::json to_json() const {
    nlohmann::json j = cal.to_json();
    j["evidence_grid_sizes"] = grid_sizes;
    j["measured_C"] = measured_C;
    return j;
  }
};

/// Measures c1, c2, c3 (and the interpolation constant) on a fixed family
/// of test functions over the unit cube, for delta = 2^-k, k = 3..kmax.
inline CalibrationEvidence calibrate(std::size_t s, std::size_t kmax = 8) {
  require(s >= 1 && s <= 3, "calibrate: s must be 1, 2 or 3");
  CalibrationEvidence ev;
  Calibration base = default_calibration(s);
  ev.cal = base;
  ev.cal.c1 = ev.cal.c2 = ev.cal.c3 = 0.0;
  const Box box = Box::cube(s, 0.0, 1.0);
  struct TestFn {
    std::function<double(const double*)> g;
    double lip, sup;
  };
  const std::size_t sd = s;
  std::vector<TestFn> fns = {
      {[sd](const double* x) {
         double r = 0.0;
         for (std::size_t k = 0; k < sd; ++k) r += std::sin(3.0 * x[k] + 0.3 * static_cast<double>(k));
         return r / static_cast<double>(sd);
       },
       3.0, 1.0},
      {[sd](const double* x) {
         double r = 0.0;
         for (std::size_t k = 0; k < sd; ++k) r = std::max(r, std::abs(x[k] - 0.37));
         return 1.0 - r;
       },
       1.0, 1.0},
  };
  const std::size_t kmax_s = s == 1 ? kmax : (s == 2 ? std::min<std::size_t>(kmax, 6) : 4);
  for (std::size_t k = 3; k <= kmax_s; ++k) {
    const double delta = std::exp2(-static_cast<double>(k));
    for (const auto& tf : fns) {
      SampledFunction sf = sample_for(tf.g, box, tf.lip, tf.sup, delta);
      ev.grid_sizes.push_back(sf.grid.q);
      LipStableNet n = lip_stable_net(sf, delta, base);
      const double scale_law = std::pow(tf.lip / delta, static_cast<double>(s)) * std::log2(1.0 / delta);
      ev.cal.c1 = std::max(ev.cal.c1, static_cast<double>(n.report.size) / scale_law);
      ev.cal.c2 = std::max(ev.cal.c2, static_cast<double>(n.report.depth) / std::log2(1.0 / delta));
      const double lip = sampled_lipschitz([&](const double* x, double* y) { *y = n.eval(x); }, 1, box,
                                           4000, 7 + k);
      ev.cal.c3 = std::max(ev.cal.c3, lip / ((1.0 + tf.sup) * tf.lip));
      ev.measured_C = std::max(ev.measured_C, n.report.measured_sup_error / (n.report.h * tf.lip));
    }
  }
  return ev;
}

}  // namespace ptnet

#endif
