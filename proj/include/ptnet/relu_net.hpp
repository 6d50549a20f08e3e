#ifndef PTNET_RELU_NET_HPP
#define PTNET_RELU_NET_HPP

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace ptnet {

enum class Activation { ReLU, Identity };

/// x -> act(W x + b). W is kept in row-major CSR form; explicit zeros are
/// never stored, so size() is the nonzero count of weights plus biases.
class AffineLayer {
 public:
  AffineLayer() = default;
  AffineLayer(std::size_t cols, Activation act) : cols_(cols), act_(act) {}

  static AffineLayer dense(std::size_t rows, std::size_t cols, const Vec& w, const Vec& b,
                           Activation act) {
    require(w.size() == rows * cols, "AffineLayer: weight count != rows*cols");
    require(b.size() == rows, "AffineLayer: bias length != rows");
    AffineLayer l(cols, act);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) l.push(c, w[r * cols + c]);
      l.end_row(b[r]);
    }
    return l;
  }

  /// Appends an entry to the row under construction; zeros are dropped.
  void push(std::size_t col, double v) {
    if (v == 0.0) return;
    col_.push_back(static_cast<std::uint32_t>(col));
    val_.push_back(v);
  }
  void end_row(double b) {
    bias_.push_back(b);
    row_ptr_.push_back(val_.size());
  }

  std::size_t rows() const { return bias_.size(); }
  std::size_t cols() const { return cols_; }
  Activation activation() const { return act_; }
  void set_activation(Activation a) { act_ = a; }
  const Vec& biases() const { return bias_; }
  std::size_t nnz() const { return val_.size(); }

  std::size_t size() const {
    std::size_t nb = 0;
    for (double b : bias_) nb += (b != 0.0);
    return val_.size() + nb;
  }

  std::size_t row_begin(std::size_t r) const { return row_ptr_[r]; }
  std::size_t row_end(std::size_t r) const { return row_ptr_[r + 1]; }
  std::size_t col_at(std::size_t k) const { return col_[k]; }
  double val_at(std::size_t k) const { return val_[k]; }

  double weight(std::size_t r, std::size_t c) const {
    double s = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      if (col_[k] == c) s += val_[k];
    return s;
  }

  Vec dense_weights() const {
    Vec w(rows() * cols_, 0.0);
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) w[r * cols_ + col_[k]] += val_[k];
    return w;
  }

  void apply(const double* in, double* out) const {
    const std::size_t n = rows();
    for (std::size_t r = 0; r < n; ++r) {
      double s = bias_[r];
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * in[col_[k]];
      out[r] = (act_ == Activation::ReLU && s < 0.0) ? 0.0 : s;
    }
  }

  /// Copy with every weight and bias multiplied by c.
  AffineLayer scaled(double c) const {
    AffineLayer l(cols_, act_);
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) l.push(col_[k], c * val_[k]);
      l.end_row(c * bias_[r]);
    }
    return l;
  }

 private:
  std::size_t cols_ = 0;
  Activation act_ = Activation::Identity;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_;
  Vec val_;
  Vec bias_;
};

class ReluNetwork {
 public:
  ReluNetwork() = default;
  ReluNetwork(std::size_t in_dim, std::vector<AffineLayer> layers)
      : in_(in_dim), layers_(std::move(layers)) {
    require(!layers_.empty(), "ReluNetwork: no layers");
    require(in_ > 0, "ReluNetwork: in_dim must be positive");
    std::size_t d = in_;
    for (const auto& l : layers_) {
      require(l.cols() == d, "ReluNetwork: consecutive layers incompatible");
      d = l.rows();
    }
    require(d > 0, "ReluNetwork: out_dim must be positive");
    require(layers_.back().activation() == Activation::Identity,
            "ReluNetwork: final layer must be Identity");
    out_ = d;
  }

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<AffineLayer>& layers() const { return layers_; }
  const AffineLayer& layer(std::size_t i) const { return layers_[i]; }

  std::size_t size() const {
    std::size_t s = 0;
    for (const auto& l : layers_) s += l.size();
    return s;
  }
  std::size_t max_width() const {
    std::size_t w = in_;
    for (const auto& l : layers_) w = std::max(w, l.rows());
    return w;
  }

  void eval(const double* x, double* y) const {
    thread_local Vec a, b;
    const std::size_t w = max_width();
    if (a.size() < w) {
      a.resize(w);
      b.resize(w);
    }
    std::copy(x, x + in_, a.begin());
    for (const auto& l : layers_) {
      l.apply(a.data(), b.data());
      std::swap(a, b);
    }
    std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(out_), y);
  }

  Vec eval(const Vec& x) const {
    require(x.size() == in_, "eval: input dimension mismatch");
    Vec y(out_);
    eval(x.data(), y.data());
    return y;
  }

 private:
  std::size_t in_ = 0, out_ = 0;
  std::vector<AffineLayer> layers_;
};

inline Vec eval(const ReluNetwork& net, const Vec& x) { return net.eval(x); }

// ---------------------------------------------------------------------------
// Elementary networks

/// Single Identity layer x -> W x + b, W dense row-major (rows x cols).
inline ReluNetwork affine_net(std::size_t rows, std::size_t cols, const Vec& w, const Vec& b) {
  return ReluNetwork(cols, {AffineLayer::dense(rows, cols, w, b, Activation::Identity)});
}

inline ReluNetwork identity_net(std::size_t n) {
  AffineLayer l(n, Activation::Identity);
  for (std::size_t i = 0; i < n; ++i) {
    l.push(i, 1.0);
    l.end_row(0.0);
  }
  return ReluNetwork(n, {l});
}

/// x -> (x[idx_0], x[idx_1], ...).
inline ReluNetwork selection_net(std::size_t in_dim, const std::vector<std::size_t>& idx) {
  require(!idx.empty(), "selection_net: empty index list");
  AffineLayer l(in_dim, Activation::Identity);
  for (std::size_t i : idx) {
    require(i < in_dim, "selection_net: index out of range");
    l.push(i, 1.0);
    l.end_row(0.0);
  }
  return ReluNetwork(in_dim, {l});
}

/// Output multiplied by c (final layer rescaled).
inline ReluNetwork scale(const ReluNetwork& net, double c) {
  auto layers = net.layers();
  layers.back() = layers.back().scaled(c);
  return ReluNetwork(net.in_dim(), std::move(layers));
}

inline ReluNetwork negate(const ReluNetwork& net) { return scale(net, -1.0); }

/// net(x + shift): translation of the input, folded into the first layer biases.
inline ReluNetwork shift_input(const ReluNetwork& net, const Vec& shift) {
  require(shift.size() == net.in_dim(), "shift_input: dimension mismatch");
  auto layers = net.layers();
  const AffineLayer& f = net.layer(0);
  AffineLayer g(f.cols(), f.activation());
  for (std::size_t r = 0; r < f.rows(); ++r) {
    double b = f.biases()[r];
    for (std::size_t k = f.row_begin(r); k < f.row_end(r); ++k) {
      g.push(f.col_at(k), f.val_at(k));
      b += f.val_at(k) * shift[f.col_at(k)];
    }
    g.end_row(b);
  }
  layers[0] = std::move(g);
  return ReluNetwork(net.in_dim(), std::move(layers));
}

// ---------------------------------------------------------------------------
// Composition algebra

namespace detail {

/// outer_first o inner_last, both affine; activation taken from outer_first.
inline AffineLayer fuse(const AffineLayer& outer, const AffineLayer& inner) {
  AffineLayer f(inner.cols(), outer.activation());
  Vec acc(inner.cols(), 0.0);
  std::vector<char> mark(inner.cols(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t r = 0; r < outer.rows(); ++r) {
    double b = outer.biases()[r];
    touched.clear();
    for (std::size_t k = outer.row_begin(r); k < outer.row_end(r); ++k) {
      const std::size_t c = outer.col_at(k);
      const double v = outer.val_at(k);
      b += v * inner.biases()[c];
      for (std::size_t kk = inner.row_begin(c); kk < inner.row_end(c); ++kk) {
        const std::size_t cc = inner.col_at(kk);
        if (!mark[cc]) {
          mark[cc] = 1;
          touched.push_back(cc);
        }
        acc[cc] += v * inner.val_at(kk);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t cc : touched) {
      f.push(cc, acc[cc]);
      acc[cc] = 0.0;
      mark[cc] = 0;
    }
    f.end_row(b);
  }
  return f;
}

}  // namespace detail

/// outer o inner; the inner Identity output layer is fused into the outer
/// first affine layer, so depth(result) = depth(outer) + depth(inner) - 1.
inline ReluNetwork compose(const ReluNetwork& outer, const ReluNetwork& inner) {
  require(inner.out_dim() == outer.in_dim(), "compose: inner.out_dim != outer.in_dim");
  std::vector<AffineLayer> layers;
  layers.reserve(outer.depth() + inner.depth() - 1);
  for (std::size_t i = 0; i + 1 < inner.depth(); ++i) layers.push_back(inner.layer(i));
  layers.push_back(detail::fuse(outer.layer(0), inner.layers().back()));
  for (std::size_t i = 1; i < outer.depth(); ++i) layers.push_back(outer.layer(i));
  return ReluNetwork(inner.in_dim(), std::move(layers));
}

/// size(compose(outer, inner)) - size(outer) - size(inner); may be negative.
inline long fusion_term(const ReluNetwork& outer, const ReluNetwork& inner) {
  return static_cast<long>(compose(outer, inner).size()) - static_cast<long>(outer.size()) -
         static_cast<long>(inner.size());
}

/// Extra weights paid by pad_to_depth(net, target):
/// size(last layer) for doubling it, plus 2*out_dim per added layer.
inline std::size_t passthrough_cost(const ReluNetwork& net, std::size_t target) {
  if (target <= net.depth()) return 0;
  return net.layers().back().size() + (target - net.depth()) * 2 * net.out_dim();
}

/// Extends depth with the exact passthrough x = relu(x) - relu(-x).
inline ReluNetwork pad_to_depth(const ReluNetwork& net, std::size_t target) {
  require(target >= net.depth(), "pad_to_depth: target below current depth");
  if (target == net.depth()) return net;
  const std::size_t o = net.out_dim();
  std::vector<AffineLayer> layers(net.layers().begin(), net.layers().end() - 1);
  const AffineLayer& last = net.layers().back();
  AffineLayer dbl(last.cols(), Activation::ReLU);
  for (double sgn : {1.0, -1.0})
    for (std::size_t r = 0; r < last.rows(); ++r) {
      for (std::size_t k = last.row_begin(r); k < last.row_end(r); ++k)
        dbl.push(last.col_at(k), sgn * last.val_at(k));
      dbl.end_row(sgn * last.biases()[r]);
    }
  layers.push_back(std::move(dbl));
  for (std::size_t d = net.depth() + 1; d < target; ++d) {
    AffineLayer id(2 * o, Activation::ReLU);
    for (std::size_t r = 0; r < 2 * o; ++r) {
      id.push(r, 1.0);
      id.end_row(0.0);
    }
    layers.push_back(std::move(id));
  }
  AffineLayer out(2 * o, Activation::Identity);
  for (std::size_t r = 0; r < o; ++r) {
    out.push(r, 1.0);
    out.push(o + r, -1.0);
    out.end_row(0.0);
  }
  layers.push_back(std::move(out));
  return ReluNetwork(net.in_dim(), std::move(layers));
}

namespace detail {

inline ReluNetwork stack(const std::vector<ReluNetwork>& nets, bool add_outputs) {
  require(!nets.empty(), "parallelize/sum: empty list");
  const std::size_t in = nets[0].in_dim();
  std::size_t depth = 0;
  for (const auto& n : nets) {
    require(n.in_dim() == in, "parallelize/sum: in_dim mismatch");
    if (add_outputs) require(n.out_dim() == nets[0].out_dim(), "sum: out_dim mismatch");
    depth = std::max(depth, n.depth());
  }
  std::vector<ReluNetwork> padded;
  padded.reserve(nets.size());
  for (const auto& n : nets) padded.push_back(n.depth() == depth ? n : pad_to_depth(n, depth));

  std::vector<AffineLayer> layers;
  std::vector<std::size_t> col_off(padded.size(), 0);
  for (std::size_t li = 0; li < depth; ++li) {
    const bool last = li + 1 == depth;
    std::size_t cols = in;
    if (li > 0) {
      cols = 0;
      for (std::size_t p = 0; p < padded.size(); ++p) {
        col_off[p] = cols;
        cols += padded[p].layer(li).cols();
      }
    }
    const Activation act = padded[0].layer(li).activation();
    AffineLayer l(cols, act);
    if (last && add_outputs) {
      const std::size_t o = padded[0].out_dim();
      for (std::size_t r = 0; r < o; ++r) {
        double b = 0.0;
        for (std::size_t p = 0; p < padded.size(); ++p) {
          const AffineLayer& src = padded[p].layer(li);
          for (std::size_t k = src.row_begin(r); k < src.row_end(r); ++k)
            l.push(col_off[p] + src.col_at(k), src.val_at(k));
          b += src.biases()[r];
        }
        l.end_row(b);
      }
    } else {
      for (std::size_t p = 0; p < padded.size(); ++p) {
        const AffineLayer& src = padded[p].layer(li);
        require(src.activation() == act, "parallelize: activation pattern mismatch");
        const std::size_t off = li == 0 ? 0 : col_off[p];
        for (std::size_t r = 0; r < src.rows(); ++r) {
          for (std::size_t k = src.row_begin(r); k < src.row_end(r); ++k)
            l.push(off + src.col_at(k), src.val_at(k));
          l.end_row(src.biases()[r]);
        }
      }
    }
    layers.push_back(std::move(l));
  }
  return ReluNetwork(in, std::move(layers));
}

}  // namespace detail

/// Stacked outputs (out_dim = sum of out_dims); shallower nets are padded
/// to the common depth, see passthrough_cost().
inline ReluNetwork parallelize(const std::vector<ReluNetwork>& nets) {
  return detail::stack(nets, false);
}

/// Pointwise sum of equally shaped nets.
inline ReluNetwork sum(const std::vector<ReluNetwork>& nets) { return detail::stack(nets, true); }

/// Input-wise parallelization: net_k acts on its own block of inputs, the
/// blocks being laid out consecutively.
inline ReluNetwork parallelize_blocks(const std::vector<ReluNetwork>& nets) {
  require(!nets.empty(), "parallelize_blocks: empty list");
  std::size_t in = 0;
  for (const auto& n : nets) in += n.in_dim();
  std::vector<ReluNetwork> lifted;
  std::size_t off = 0;
  for (const auto& n : nets) {
    std::vector<std::size_t> idx(n.in_dim());
    std::iota(idx.begin(), idx.end(), off);
    lifted.push_back(compose(n, selection_net(in, idx)));
    off += n.in_dim();
  }
  return parallelize(lifted);
}

// ---------------------------------------------------------------------------
// Quadrature gates

/// Output i-1 is rho_i(t) = relu(t - tau_{i-1}) - relu(t - tau_i),
/// tau_i = t0 + i (t1 - t0) / q, i = 1..q.
inline ReluNetwork rho_gate(double t0, double t1, std::size_t q) {
  require(q >= 1, "rho_gate: q must be >= 1");
  require(t1 > t0, "rho_gate: |I| must be positive");
  AffineLayer h(1, Activation::ReLU);
  for (std::size_t i = 0; i <= q; ++i) {
    const double tau = i == q ? t1 : t0 + static_cast<double>(i) * (t1 - t0) / static_cast<double>(q);
    h.push(0, 1.0);
    h.end_row(-tau);
  }
  AffineLayer o(q + 1, Activation::Identity);
  for (std::size_t i = 0; i < q; ++i) {
    o.push(i, 1.0);
    o.push(i + 1, -1.0);
    o.end_row(0.0);
  }
  return ReluNetwork(1, {h, o});
}

// ---------------------------------------------------------------------------
// Sampled Lipschitz estimate

/// Largest max-norm difference quotient over sampled pairs; half the pairs
/// are independent uniform points, half are local perturbations at scales
/// spread over twelve octaves. A lower bound on the true constant.
template <class F>
double sampled_lipschitz(F&& f, std::size_t out_dim, const Box& box, std::size_t n_samples,
                         std::uint64_t seed) {
  require(!box.degenerate(), "lip_lower_bound: degenerate box");
  Rng rng(seed);
  const std::size_t d = box.dim();
  Vec fx(out_dim), fy(out_dim);
  double best = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    Vec x = rng.point(box);
    Vec y(d);
    if (k % 2 == 0) {
      y = rng.point(box);
    } else {
      const double s = box.max_width() * std::exp2(-1.0 - 12.0 * rng.uniform());
      const std::size_t lead = static_cast<std::size_t>(rng.next() % d);
      for (std::size_t i = 0; i < d; ++i) {
        double dir = i == lead ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : rng.uniform(-1.0, 1.0);
        y[i] = std::clamp(x[i] + s * dir, box.lo[i], box.hi[i]);
      }
    }
    const double den = dist_inf(x, y);
    if (!(den > 0.0)) continue;
    f(x.data(), fx.data());
    f(y.data(), fy.data());
    best = std::max(best, dist_inf(fx, fy) / den);
  }
  return best;
}

inline double lip_lower_bound(const ReluNetwork& net, const Box& box, std::size_t n_samples,
                              std::uint64_t seed) {
  require(box.dim() == net.in_dim(), "lip_lower_bound: box dimension != in_dim");
  return sampled_lipschitz([&](const double* x, double* y) { net.eval(x, y); }, net.out_dim(), box,
                           n_samples, seed);
}

/// Upper bound on the max-norm Lipschitz constant: product of the
/// infinity-norms (max absolute row sums) of the layers.
inline double lip_upper_bound(const ReluNetwork& net) {
  double p = 1.0;
  for (const auto& l : net.layers()) {
    double m = 0.0;
    for (std::size_t r = 0; r < l.rows(); ++r) {
      double s = 0.0;
      for (std::size_t k = l.row_begin(r); k < l.row_end(r); ++k) s += std::abs(l.val_at(k));
      m = std::max(m, s);
    }
    p *= m;
  }
  return p;
}

/// For each output, the number of inputs it can depend on through
/// nonzero weights.
inline std::vector<std::size_t> dependency_counts(const ReluNetwork& net) {
  const std::size_t words = (net.in_dim() + 63) / 64;
  std::vector<std::uint64_t> cur(net.in_dim() * words, 0);
  for (std::size_t i = 0; i < net.in_dim(); ++i) cur[i * words + i / 64] |= 1ull << (i % 64);
  for (const auto& l : net.layers()) {
    std::vector<std::uint64_t> nxt(l.rows() * words, 0);
    for (std::size_t r = 0; r < l.rows(); ++r)
      for (std::size_t k = l.row_begin(r); k < l.row_end(r); ++k)
        for (std::size_t w = 0; w < words; ++w) nxt[r * words + w] |= cur[l.col_at(k) * words + w];
    cur.swap(nxt);
  }
  std::vector<std::size_t> out(net.out_dim());
  for (std::size_t r = 0; r < net.out_dim(); ++r) {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words; ++w) c += static_cast<std::size_t>(__builtin_popcountll(cur[r * words + w]));
    out[r] = c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fast exact evaluation of one-input, one-hidden-layer scalar networks

/// Evaluates x -> b + sum_k c_k relu(w_k x + b_k) in O(log n) by sorting
/// the breakpoints and keeping prefix sums of the active affine pieces.
/// Agrees with ReluNetwork::eval up to summation-order rounding.
class PiecewiseLinearEvaluator {
 public:
  explicit PiecewiseLinearEvaluator(const ReluNetwork& net) {
    require(net.in_dim() == 1 && net.out_dim() == 1 && net.depth() == 2 &&
                net.layer(0).activation() == Activation::ReLU,
            "PiecewiseLinearEvaluator: need a 1-input, 1-output, one-hidden-layer net");
    const AffineLayer& h = net.layer(0);
    const AffineLayer& o = net.layer(1);
    base_ = o.biases()[0];
    Vec cw(h.rows(), 0.0);
    for (std::size_t k = o.row_begin(0); k < o.row_end(0); ++k) cw[o.col_at(k)] += o.val_at(k);
    struct P {
      double theta, slope, icpt;
    };
    std::vector<P> pos, neg;
    for (std::size_t r = 0; r < h.rows(); ++r) {
      const double c = cw[r];
      if (c == 0.0) continue;
      const double w = h.weight(r, 0);
      const double b = h.biases()[r];
      if (w == 0.0) {
        base_ += c * relu(b);
      } else if (w > 0.0) {
        pos.push_back({-b / w, c * w, c * b});
      } else {
        neg.push_back({-b / w, c * w, c * b});
      }
    }
    auto by_theta = [](const P& a, const P& b) { return a.theta < b.theta; };
    std::sort(pos.begin(), pos.end(), by_theta);
    std::sort(neg.begin(), neg.end(), by_theta);
    pos_theta_.resize(pos.size());
    pos_slope_.assign(pos.size() + 1, 0.0);
    pos_icpt_.assign(pos.size() + 1, 0.0);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      pos_theta_[i] = pos[i].theta;
      pos_slope_[i + 1] = pos_slope_[i] + pos[i].slope;
      pos_icpt_[i + 1] = pos_icpt_[i] + pos[i].icpt;
    }
    neg_theta_.resize(neg.size());
    neg_slope_.assign(neg.size() + 1, 0.0);
    neg_icpt_.assign(neg.size() + 1, 0.0);
    for (std::size_t i = neg.size(); i-- > 0;) {
      neg_theta_[i] = neg[i].theta;
      neg_slope_[i] = neg_slope_[i + 1] + neg[i].slope;
      neg_icpt_[i] = neg_icpt_[i + 1] + neg[i].icpt;
    }
  }

  double operator()(double x) const {
    // positive slopes: active iff theta < x (a prefix of the sorted list)
    const std::size_t np = static_cast<std::size_t>(
        std::lower_bound(pos_theta_.begin(), pos_theta_.end(), x) - pos_theta_.begin());
    // negative slopes: active iff theta > x (a suffix)
    const std::size_t nn = static_cast<std::size_t>(
        std::upper_bound(neg_theta_.begin(), neg_theta_.end(), x) - neg_theta_.begin());
    const double slope = pos_slope_[np] + neg_slope_[nn];
    const double icpt = pos_icpt_[np] + neg_icpt_[nn];
    return base_ + slope * x + icpt;
  }

 private:
  double base_ = 0.0;
  Vec pos_theta_, pos_slope_, pos_icpt_;
  Vec neg_theta_, neg_slope_, neg_icpt_;
};

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const ReluNetwork& net) {
  nlohmann::json j;
  j["in_dim"] = net.in_dim();
  j["out_dim"] = net.out_dim();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json lj;
    lj["rows"] = l.rows();
    lj["cols"] = l.cols();
    lj["weights"] = l.dense_weights();
    lj["biases"] = l.biases();
    lj["activation"] = l.activation() == Activation::ReLU ? "relu" : "identity";
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

inline ReluNetwork network_from_json(const nlohmann::json& j) {
  std::vector<AffineLayer> layers;
  for (const auto& lj : j.at("layers")) {
    const std::string act = lj.at("activation").get<std::string>();
    require(act == "relu" || act == "identity", "network_from_json: unknown activation " + act);
    layers.push_back(AffineLayer::dense(lj.at("rows").get<std::size_t>(), lj.at("cols").get<std::size_t>(),
                                        lj.at("weights").get<Vec>(), lj.at("biases").get<Vec>(),
                                        act == "relu" ? Activation::ReLU : Activation::Identity));
  }
  ReluNetwork net(j.at("in_dim").get<std::size_t>(), std::move(layers));
  require(net.out_dim() == j.at("out_dim").get<std::size_t>(), "network_from_json: out_dim mismatch");
  return net;
}

inline std::string serialize(const ReluNetwork& net) { return to_json(net).dump(); }
inline ReluNetwork deserialize(const std::string& s) {
  return network_from_json(nlohmann::json::parse(s));
}

}  // namespace ptnet

#endif
