#ifndef PTNET_COMP_CALCULUS_HPP
#define PTNET_COMP_CALCULUS_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "lip_interp.hpp"

namespace ptnet {

// ---------------------------------------------------------------------------
// Factors and compositional representations

/// Scalar component of a generic factor; fn receives the dependency
/// variables only, in the order listed in deps.
struct Component {
  std::vector<std::size_t> deps;
  std::function<double(const double*)> fn;
  double lip = std::numeric_limits<double>::quiet_NaN();
  double sup = std::numeric_limits<double>::quiet_NaN();
};

class Factor {
 public:
  enum class Kind { Generic, Linear, Multilinear, Identity, Net, Parallel };
  using VecFn = std::function<void(const double*, double*)>;

  /// Generic Lipschitz factor; domain is the box its inputs range over,
  /// used for sampling when the factor is implanted.
  static Factor generic(std::size_t in_dim, std::vector<Component> comps, Box domain) {
    require(!comps.empty(), "Factor::generic: no components");
    require(domain.dim() == in_dim, "Factor::generic: domain dimension != in_dim");
    for (const auto& c : comps)
      for (std::size_t d : c.deps) require(d < in_dim, "Factor::generic: dependency index out of range");
    Factor f(Kind::Generic, in_dim, comps.size());
    f.comps_ = std::make_shared<const std::vector<Component>>(std::move(comps));
    f.domain_ = std::move(domain);
    return f;
  }

  static Factor linear(std::size_t rows, std::size_t cols, Vec w, Vec b) {
    require(w.size() == rows * cols && b.size() == rows, "Factor::linear: shape mismatch");
    Factor f(Kind::Linear, cols, rows);
    f.net_ = std::make_shared<const ReluNetwork>(affine_net(rows, cols, w, b));
    return f;
  }

  /// Exactly evaluated multilinear map with a declared Lipschitz bound on
  /// its domain of use.
  static Factor multilinear(std::size_t in_dim, std::size_t out_dim, VecFn fn, double lip) {
    Factor f(Kind::Multilinear, in_dim, out_dim);
    f.fn_ = std::make_shared<const VecFn>(std::move(fn));
    f.lip_ = lip;
    return f;
  }

  static Factor identity(std::size_t n) { return Factor(Kind::Identity, n, n); }

  static Factor net(ReluNetwork n) {
    Factor f(Kind::Net, n.in_dim(), n.out_dim());
    f.net_ = std::make_shared<const ReluNetwork>(std::move(n));
    return f;
  }

  /// Parts side by side. shared_input: every part reads the whole input;
  /// otherwise part k reads its own consecutive block. sum_outputs adds
  /// the (equally sized) part outputs instead of stacking them.
  static Factor parallel(std::vector<Factor> parts, bool shared_input, bool sum_outputs) {
    require(!parts.empty(), "Factor::parallel: no parts");
    std::size_t in = 0, out = 0;
    for (const auto& p : parts) {
      if (shared_input) {
        require(p.in_dim() == parts[0].in_dim(), "Factor::parallel: in_dim mismatch");
        in = p.in_dim();
      } else {
        in += p.in_dim();
      }
      if (sum_outputs) {
        require(p.out_dim() == parts[0].out_dim(), "Factor::parallel: out_dim mismatch");
        out = p.out_dim();
      } else {
        out += p.out_dim();
      }
    }
    Factor f(Kind::Parallel, in, out);
    f.parts_ = std::make_shared<const std::vector<Factor>>(std::move(parts));
    f.shared_input_ = shared_input;
    f.sum_outputs_ = sum_outputs;
    return f;
  }

  Kind kind() const { return kind_; }
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  const std::vector<Component>& components() const { return *comps_; }
  const Box& domain() const { return domain_; }
  const ReluNetwork& network() const { return *net_; }
  const std::vector<Factor>& parts() const { return *parts_; }
  bool shared_input() const { return shared_input_; }
  bool sum_outputs() const { return sum_outputs_; }

  void eval(const double* x, double* y) const {
    switch (kind_) {
      case Kind::Generic: {
        Vec loc;
        for (std::size_t i = 0; i < comps_->size(); ++i) {
          const Component& c = (*comps_)[i];
          loc.resize(c.deps.size());
          for (std::size_t k = 0; k < c.deps.size(); ++k) loc[k] = x[c.deps[k]];
          y[i] = c.fn(loc.data());
        }
        return;
      }
      case Kind::Linear:
      case Kind::Net:
        net_->eval(x, y);
        return;
      case Kind::Multilinear:
        (*fn_)(x, y);
        return;
      case Kind::Identity:
        std::copy(x, x + in_, y);
        return;
      case Kind::Parallel: {
        std::size_t ioff = 0, ooff = 0;
        Vec tmp;
        if (sum_outputs_) std::fill(y, y + out_, 0.0);
        for (const auto& p : *parts_) {
          const double* xi = shared_input_ ? x : x + ioff;
          if (sum_outputs_) {
            tmp.resize(p.out_dim());
            p.eval(xi, tmp.data());
            for (std::size_t k = 0; k < out_; ++k) y[k] += tmp[k];
          } else {
            p.eval(xi, y + ooff);
            ooff += p.out_dim();
          }
          ioff += p.in_dim();
        }
        return;
      }
    }
  }

  Vec eval(const Vec& x) const {
    require(x.size() == in_, "Factor::eval: dimension mismatch");
    Vec y(out_);
    eval(x.data(), y.data());
    return y;
  }

  /// Contribution to the compositional complexity.
  std::size_t complexity() const {
    switch (kind_) {
      case Kind::Generic: {
        std::size_t n = 0;
        for (const auto& c : *comps_) n += c.deps.size();
        return n;
      }
      case Kind::Linear:
      case Kind::Multilinear:
        return 1;
      case Kind::Identity:
        return 0;
      case Kind::Net:
        return net_->size();
      case Kind::Parallel: {
        std::size_t n = 0;
        for (const auto& p : *parts_) n += p.complexity();
        return n;
      }
    }
    return 0;
  }

  /// Dimension-sparsity weight: 0 identity, 1 (multi)linear, else the
  /// largest per-component dependency count.
  std::size_t s_inf() const {
    switch (kind_) {
      case Kind::Generic: {
        std::size_t s = 0;
        for (const auto& c : *comps_) s = std::max(s, c.deps.size());
        return s;
      }
      case Kind::Linear:
      case Kind::Multilinear:
        return 1;
      case Kind::Identity:
        return 0;
      case Kind::Net: {
        std::size_t s = 0;
        for (std::size_t c : dependency_counts(*net_)) s = std::max(s, c);
        return s;
      }
      case Kind::Parallel: {
        std::size_t s = 0;
        for (const auto& p : *parts_) s = std::max(s, p.s_inf());
        return s;
      }
    }
    return 0;
  }

  /// Max-norm Lipschitz upper bound; throws when a generic component or a
  /// multilinear factor lacks declared data.
  double lip_upper() const {
    switch (kind_) {
      case Kind::Generic: {
        double l = 0.0;
        for (const auto& c : *comps_) {
          require(std::isfinite(c.lip), "comp_norm: generic component without Lipschitz data");
          l = std::max(l, c.lip);
        }
        return l;
      }
      case Kind::Linear:
      case Kind::Net:
        return lip_upper_bound(*net_);
      case Kind::Multilinear:
        require(std::isfinite(lip_), "comp_norm: multilinear factor without Lipschitz data");
        return lip_;
      case Kind::Identity:
        return 1.0;
      case Kind::Parallel: {
        double l = 0.0;
        for (const auto& p : *parts_) l = sum_outputs_ ? l + p.lip_upper() : std::max(l, p.lip_upper());
        return l;
      }
    }
    return 0.0;
  }

  nlohmann::json describe() const {
    static const char* names[] = {"generic", "linear", "multilinear", "identity", "net", "parallel"};
    nlohmann::json j{{"kind", names[static_cast<int>(kind_)]}, {"in_dim", in_}, {"out_dim", out_}};
    switch (kind_) {
      case Kind::Generic: {
        j["components"] = nlohmann::json::array();
        for (const auto& c : *comps_) j["components"].push_back({{"deps", c.deps}, {"lip", c.lip}, {"sup", c.sup}});
        j["domain"] = {{"lo", domain_.lo}, {"hi", domain_.hi}};
        break;
      }
      case Kind::Linear:
      case Kind::Net:
        j["network"] = to_json(*net_);
        break;
      case Kind::Multilinear:
        j["lip"] = lip_;
        break;
      case Kind::Identity:
        break;
      case Kind::Parallel:
        j["shared_input"] = shared_input_;
        j["sum_outputs"] = sum_outputs_;
        j["parts"] = nlohmann::json::array();
        for (const auto& p : *parts_) j["parts"].push_back(p.describe());
        break;
    }
    return j;
  }

 private:
  Factor(Kind k, std::size_t in, std::size_t out) : kind_(k), in_(in), out_(out) {}

  Kind kind_;
  std::size_t in_ = 0, out_ = 0;
  std::shared_ptr<const std::vector<Component>> comps_;
  Box domain_;
  std::shared_ptr<const ReluNetwork> net_;
  std::shared_ptr<const VecFn> fn_;
  double lip_ = std::numeric_limits<double>::quiet_NaN();
  std::shared_ptr<const std::vector<Factor>> parts_;
  bool shared_input_ = false, sum_outputs_ = false;
};

/// G = g^n o ... o g^1 (factors stored in application order).
class CompRep {
 public:
  CompRep() = default;
  explicit CompRep(std::vector<Factor> factors) : f_(std::move(factors)) {
    require(!f_.empty(), "CompRep: no factors");
    for (std::size_t j = 1; j < f_.size(); ++j)
      require(f_[j].in_dim() == f_[j - 1].out_dim(), "CompRep: factors dimensionally incompatible");
  }

  std::size_t depth() const { return f_.size(); }
  std::size_t in_dim() const { return f_.front().in_dim(); }
  std::size_t out_dim() const { return f_.back().out_dim(); }
  const std::vector<Factor>& factors() const { return f_; }
  const Factor& factor(std::size_t j) const { return f_[j]; }

  /// Applies factors [from, to) to x.
  Vec eval_range(std::size_t from, std::size_t to, Vec x) const {
    Vec y;
    for (std::size_t j = from; j < to; ++j) {
      y.assign(f_[j].out_dim(), 0.0);
      f_[j].eval(x.data(), y.data());
      x.swap(y);
    }
    return x;
  }
  Vec eval(const Vec& x) const {
    require(x.size() == in_dim(), "CompRep::eval: dimension mismatch");
    return eval_range(0, f_.size(), x);
  }

  nlohmann::json describe() const {
    nlohmann::json j{{"in_dim", in_dim()}, {"out_dim", out_dim()}, {"factors", nlohmann::json::array()}};
    for (const auto& f : f_) j["factors"].push_back(f.describe());
    return j;
  }

 private:
  std::vector<Factor> f_;
};

/// max over non-final factors of their sparsity weight; a single-factor
/// representation reports the weight of that factor.
inline std::size_t s_infinity(const CompRep& rep) {
  if (rep.depth() == 1) return rep.factor(0).s_inf();
  std::size_t s = 0;
  for (std::size_t j = 0; j + 1 < rep.depth(); ++j) s = std::max(s, rep.factor(j).s_inf());
  return s;
}

inline std::size_t complexity(const CompRep& rep) {
  std::size_t n = 0;
  for (const auto& f : rep.factors()) n += f.complexity();
  return n;
}

/// outer o inner.
inline CompRep compose_reps(const CompRep& outer, const CompRep& inner) {
  require(inner.out_dim() == outer.in_dim(), "compose_reps: dimension mismatch");
  std::vector<Factor> f = inner.factors();
  f.insert(f.end(), outer.factors().begin(), outer.factors().end());
  return CompRep(std::move(f));
}

namespace detail {

inline CompRep stack_reps(const std::vector<CompRep>& reps, bool sum_outputs) {
  require(!reps.empty(), "sum_reps/parallel_reps: empty list");
  std::size_t n = 0;
  for (const auto& r : reps) {
    require(r.in_dim() == reps[0].in_dim(), "sum_reps/parallel_reps: in_dim mismatch");
    if (sum_outputs) require(r.out_dim() == reps[0].out_dim(), "sum_reps: out_dim mismatch");
    n = std::max(n, r.depth());
  }
  std::vector<Factor> out;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Factor> parts;
    for (const auto& r : reps) {
      // shorter representations idle on identity factors after finishing
      parts.push_back(j < r.depth() ? r.factor(j) : Factor::identity(r.out_dim()));
    }
    out.push_back(Factor::parallel(std::move(parts), j == 0, sum_outputs && j + 1 == n));
  }
  return CompRep(std::move(out));
}

}  // namespace detail

/// Representation of G + G' by parallelization; complexity is additive.
inline CompRep sum_reps(const CompRep& a, const CompRep& b) { return detail::stack_reps({a, b}, true); }

/// Representation of x -> (G(x), G'(x)).
inline CompRep parallel_reps(const CompRep& a, const CompRep& b) { return detail::stack_reps({a, b}, false); }

// ---------------------------------------------------------------------------
// Regularizers and composition-norm intervals

enum class Regularizer { LipFull, LipFactors };

struct Interval {
  double lower = 0.0, upper = 0.0;
};

struct CompNormReport {
  double lower = 0.0, upper = 0.0;
  Vec factor_upper, factor_lower;  // per factor
  Vec tail_upper, tail_lower;      // tail k = g^n o ... o g^{k+1} (0-based start k)
  Interval interval() const { return {lower, upper}; }
};

namespace detail {

/// Upper bound for Lip(g^{to-1} o ... o g^from). Runs of block-aligned
/// parallel factors (as produced by sum_reps/parallel_reps) are tracked per
/// lane so that stacking does not mix the chains of different parts.
inline double chain_upper(const CompRep& rep, std::size_t from, std::size_t to) {
  double scalar = 1.0;
  Vec lanes;  // empty: no open parallel run
  auto collapse = [&](bool summed) {
    if (lanes.empty()) return;
    double v = 0.0;
    for (double l : lanes) v = summed ? v + l : std::max(v, l);
    scalar *= v;
    lanes.clear();
  };
  for (std::size_t j = from; j < to; ++j) {
    const Factor& f = rep.factor(j);
    const bool par = f.kind() == Factor::Kind::Parallel;
    bool aligned = par && !lanes.empty() && !f.shared_input() && f.parts().size() == lanes.size();
    if (aligned) {
      const Factor& prev = rep.factor(j - 1);
      for (std::size_t p = 0; p < lanes.size(); ++p)
        aligned = aligned && prev.parts()[p].out_dim() == f.parts()[p].in_dim();
    }
    if (!par) {
      collapse(false);
      scalar *= f.lip_upper();
      continue;
    }
    if (!aligned) {
      collapse(false);
      lanes.assign(f.parts().size(), scalar);
      scalar = 1.0;
    }
    for (std::size_t p = 0; p < lanes.size(); ++p) lanes[p] *= f.parts()[p].lip_upper();
    if (f.sum_outputs()) collapse(true);
  }
  collapse(false);
  return scalar;
}

}  // namespace detail

/// Upper bounds: factor Lipschitz data and products of them for the
/// partial compositions. Lower bounds: sampled max-norm difference
/// quotients at points pushed forward from box.
inline CompNormReport comp_norm_report(const CompRep& rep, Regularizer reg, const Box& box,
                                       std::size_t n_samples, std::uint64_t seed) {
  require(box.dim() == rep.in_dim(), "comp_norm: box dimension != in_dim");
  require(!box.degenerate(), "comp_norm: degenerate box");
  const std::size_t n = rep.depth();
  CompNormReport r;
  r.factor_upper.resize(n);
  r.factor_lower.assign(n, 0.0);
  r.tail_upper.resize(n);
  r.tail_lower.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) r.factor_upper[j] = rep.factor(j).lip_upper();
  for (std::size_t k = 0; k < n; ++k) r.tail_upper[k] = detail::chain_upper(rep, k, n);

  Rng rng(seed);
  const std::size_t d = box.dim();
  std::vector<Vec> zx(n + 1), zy(n + 1);
  for (std::size_t s = 0; s < n_samples; ++s) {
    Vec x = rng.point(box), y(d);
    if (s % 2 == 0) {
      y = rng.point(box);
    } else {
      const double h = box.max_width() * std::exp2(-1.0 - 12.0 * rng.uniform());
      for (std::size_t i = 0; i < d; ++i) y[i] = std::clamp(x[i] + h * rng.uniform(-1.0, 1.0), box.lo[i], box.hi[i]);
    }
    zx[0] = x;
    zy[0] = y;
    for (std::size_t j = 0; j < n; ++j) {
      zx[j + 1] = rep.eval_range(j, j + 1, zx[j]);
      zy[j + 1] = rep.eval_range(j, j + 1, zy[j]);
    }
    const Vec& gx = zx[n];
    const Vec& gy = zy[n];
    for (std::size_t k = 0; k < n; ++k) {
      const double den = dist_inf(zx[k], zy[k]);
      if (!(den > 0.0)) continue;
      r.factor_lower[k] = std::max(r.factor_lower[k], dist_inf(zx[k + 1], zy[k + 1]) / den);
      r.tail_lower[k] = std::max(r.tail_lower[k], dist_inf(gx, gy) / den);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    r.upper = std::max(r.upper, r.factor_upper[k]);
    r.lower = std::max(r.lower, r.factor_lower[k]);
    if (reg == Regularizer::LipFull) {
      r.upper = std::max(r.upper, r.tail_upper[k]);
      r.lower = std::max(r.lower, r.tail_lower[k]);
    }
  }
  return r;
}

inline Interval comp_norm_interval(const CompRep& rep, Regularizer reg, const Box& box, std::size_t n_samples,
                                   std::uint64_t seed = 1) {
  return comp_norm_report(rep, reg, box, n_samples, seed).interval();
}

/// Upper bound of the regularizer without sampling.
inline double regularizer_upper(const CompRep& rep, Regularizer reg) {
  double u = 0.0;
  for (std::size_t k = 0; k < rep.depth(); ++k) {
    u = std::max(u, rep.factor(k).lip_upper());
    if (reg == Regularizer::LipFull) u = std::max(u, detail::chain_upper(rep, k, rep.depth()));
  }
  return u;
}

// ---------------------------------------------------------------------------
// Growth functions

class GrowthFunction {
 public:
  enum class Kind { Alg, Exp };
  static GrowthFunction alg(double c_a, double alpha) { return GrowthFunction(Kind::Alg, c_a, alpha); }
  static GrowthFunction exp(double c_e, double alpha) { return GrowthFunction(Kind::Exp, c_e, alpha); }

  Kind kind() const { return kind_; }
  double c() const { return c_; }
  double alpha() const { return alpha_; }

  double operator()(double r) const { return kind_ == Kind::Alg ? c_ * std::pow(r, alpha_) : c_ * std::exp(alpha_ * r); }

  double inverse(double s) const {
    require(s > 0.0, "gamma_inverse: argument must be positive");
    if (kind_ == Kind::Alg) return std::pow(s / c_, 1.0 / alpha_);
    require(s > c_, "gamma_inverse: exponential growth needs s > C_e");
    return std::log(s / c_) / alpha_;
  }

  nlohmann::json to_json() const {
    return {{"kind", kind_ == Kind::Alg ? "alg" : "exp"}, {"C", c_}, {"alpha", alpha_}};
  }
  static GrowthFunction from_json(const nlohmann::json& j) {
    const std::string k = j.at("kind").get<std::string>();
    require(k == "alg" || k == "exp", "GrowthFunction: kind must be alg or exp");
    return GrowthFunction(k == "alg" ? Kind::Alg : Kind::Exp, j.at("C").get<double>(), j.at("alpha").get<double>());
  }

 private:
  GrowthFunction(Kind k, double c, double a) : kind_(k), c_(c), alpha_(a) {
    require(c > 0.0 && a > 0.0, "GrowthFunction: C and alpha must be positive");
  }
  Kind kind_;
  double c_, alpha_;
};

inline double gamma_inverse(const GrowthFunction& gf, double s) { return gf.inverse(s); }

/// Approximate inverse of phi(s) = b1 s^zeta |log2(b2 s)|^beta:
/// r -> b1^{-1/zeta} zeta^{beta/zeta} r^{1/zeta} |log2(b2^zeta r / b1)|^{-beta/zeta}.
inline std::function<double(double)> near_inverse(double b1, double b2, double zeta, double beta) {
  require(b1 > 0.0 && b2 > 0.0 && zeta > 0.0, "near_inverse: b1, b2, zeta must be positive");
  require(beta >= 0.0, "near_inverse: beta must be nonnegative");
  return [=](double r) {
    require(r > 0.0, "near_inverse: argument must be positive");
    const double lg = std::abs(std::log2(std::pow(b2, zeta) * r / b1));
    const double base = std::pow(b1, -1.0 / zeta) * std::pow(zeta, beta / zeta) * std::pow(r, 1.0 / zeta);
    return beta == 0.0 ? base : base * std::pow(lg, -beta / zeta);
  };
}

inline std::size_t n_epsilon(const GrowthFunction& gf, double seminorm, double eps) {
  require(eps > 0.0, "n_epsilon: eps must be positive");
  return guarded_ceil(gf.inverse(seminorm / eps));
}

/// max_N gamma(N) (error_N + gamma(N)^{-1} norm_N) over the given samples.
struct ApproximantSample {
  double n;
  double error;
  double norm_upper;
};

inline double aclass_seminorm_upper(const std::vector<ApproximantSample>& samples, const GrowthFunction& gf) {
  require(!samples.empty(), "aclass_seminorm_upper: empty sample list");
  double best = 0.0;
  for (const auto& s : samples) best = std::max(best, gf(s.n) * s.error + s.norm_upper);
  return best;
}

// ---------------------------------------------------------------------------
// Implantation

namespace detail {

inline bool is_exact(const Factor& f) {
  switch (f.kind()) {
    case Factor::Kind::Generic:
      return false;
    case Factor::Kind::Parallel:
      for (const auto& p : f.parts())
        if (!is_exact(p)) return false;
      return true;
    default:
      return true;
  }
}

inline bool is_relu_representable(const Factor& f) {
  switch (f.kind()) {
    case Factor::Kind::Linear:
    case Factor::Kind::Identity:
    case Factor::Kind::Net:
      return true;
    case Factor::Kind::Parallel:
      for (const auto& p : f.parts())
        if (!is_relu_representable(p)) return false;
      return true;
    default:
      return false;
  }
}

struct ImplantStats {
  double delta_eff = 0.0;
  std::size_t interpolants = 0;
  std::vector<LipStableReport> reports;
};

/// Replaces each generic component by a Lipschitz-stable network sampled on
/// its domain box (restricted to its dependencies) inflated by `inflate`.
inline Factor implant_factor(const Factor& f, double delta, double inflate, ImplantStats& st) {
  switch (f.kind()) {
    case Factor::Kind::Generic: {
      require(delta > 0.0 && delta < 1.0, "implant: delta must lie in (0,1) for generic factors");
      std::vector<ReluNetwork> comps;
      for (const auto& c : f.components()) {
        require(std::isfinite(c.lip) && std::isfinite(c.sup), "implant: generic component without bounds");
        if (c.deps.empty()) {
          const double v = c.fn(nullptr);
          comps.push_back(affine_net(1, f.in_dim(), Vec(f.in_dim(), 0.0), {v}));
          continue;
        }
        Vec lo, hi;
        for (std::size_t d : c.deps) {
          lo.push_back(f.domain().lo[d] - inflate);
          hi.push_back(f.domain().hi[d] + inflate);
        }
        const Box b(lo, hi);
        SampledFunction sf = sample_for(c.fn, b, c.lip, c.sup, delta);
        sf.fn = nullptr;
        LipStableNet n = lip_stable_net(sf, delta);
        st.reports.push_back(n.report);
        ++st.interpolants;
        comps.push_back(compose(n.net, selection_net(f.in_dim(), c.deps)));
      }
      st.delta_eff = std::max(st.delta_eff, delta);
      return Factor::net(parallelize(comps));
    }
    case Factor::Kind::Linear:
      return Factor::net(f.network());
    case Factor::Kind::Parallel: {
      std::vector<Factor> parts;
      for (const auto& p : f.parts()) parts.push_back(implant_factor(p, delta, inflate, st));
      return Factor::parallel(std::move(parts), f.shared_input(), f.sum_outputs());
    }
    default:
      return f;
  }
}

inline ReluNetwork factor_network(const Factor& f) {
  switch (f.kind()) {
    case Factor::Kind::Linear:
    case Factor::Kind::Net:
      return f.network();
    case Factor::Kind::Identity:
      return identity_net(f.in_dim());
    case Factor::Kind::Parallel: {
      std::vector<ReluNetwork> parts;
      for (const auto& p : f.parts()) parts.push_back(factor_network(p));
      ReluNetwork st = f.shared_input() ? parallelize(parts) : parallelize_blocks(parts);
      if (!f.sum_outputs()) return st;
      const std::size_t o = f.out_dim(), k = parts.size();
      Vec w(o * o * k, 0.0);
      for (std::size_t r = 0; r < o; ++r)
        for (std::size_t p = 0; p < k; ++p) w[r * o * k + p * o + r] = 1.0;
      return compose(affine_net(o, o * k, w, Vec(o, 0.0)), st);
    }
    default:
      throw InvalidInput("network: factor is not ReLU-representable (multilinear or generic)");
  }
}

}  // namespace detail

/// Fused ReLU network of a representation whose factors are all networks,
/// linear maps or identities.
inline ReluNetwork to_network(const CompRep& rep) {
  ReluNetwork acc = detail::factor_network(rep.factor(0));
  for (std::size_t j = 1; j < rep.depth(); ++j) acc = compose(detail::factor_network(rep.factor(j)), acc);
  return acc;
}

struct ImplantResult {
  CompRep rep;              // generic factors replaced by Net factors
  double error_bound = 0.0; // sum_j delta_j * prod_{i>j} L_i over implanted factors
  std::size_t size = 0;     // total weight count of implanted and exact factors
  double budget = 0.0;      // c1 * N * max(1,R)^s * max_j delta_j^{-s} |log2 delta_j|
  std::vector<LipStableReport> reports;

  bool relu_only() const {
    for (const auto& f : rep.factors())
      if (!detail::is_relu_representable(f)) return false;
    return true;
  }
  ReluNetwork network() const { return to_network(rep); }
};

/// deltas[j] is the accuracy for factor j (ignored for exact factors).
/// Factor domains are widened by the accumulated upstream error bound so
/// perturbed inputs stay inside the sampled boxes; declared Lipschitz data
/// must hold on the widened domains.
inline ImplantResult implant(const CompRep& rep, const Vec& deltas, double c1 = -1.0) {
  require(deltas.size() == rep.depth(), "implant: one delta per factor required");
  const std::size_t n = rep.depth();
  Vec lip(n);
  for (std::size_t j = 0; j < n; ++j) lip[j] = rep.factor(j).lip_upper();
  ImplantResult res;
  std::vector<Factor> out;
  double err = 0.0;  // error bound of the implanted prefix
  double max_dlog = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Factor& f = rep.factor(j);
    if (detail::is_exact(f)) {
      out.push_back(f.kind() == Factor::Kind::Linear ? Factor::net(f.network()) : f);
      err *= lip[j];
      continue;
    }
    detail::ImplantStats st;
    out.push_back(detail::implant_factor(f, deltas[j], err, st));
    err = err * lip[j] + st.delta_eff;
    res.reports.insert(res.reports.end(), st.reports.begin(), st.reports.end());
    max_dlog = std::max(max_dlog, std::pow(st.delta_eff, -double(s_infinity(rep))) * std::abs(std::log2(st.delta_eff)));
  }
  res.rep = CompRep(std::move(out));
  res.error_bound = err;
  for (const auto& f : res.rep.factors())
    res.size += f.kind() == Factor::Kind::Net || f.kind() == Factor::Kind::Parallel ? f.complexity() : 0;
  const std::size_t s = std::max<std::size_t>(1, s_infinity(rep));
  const double cc1 = c1 > 0.0 ? c1 : default_calibration(s).c1;
  res.budget = cc1 * double(complexity(rep)) * std::pow(std::max(1.0, regularizer_upper(rep, Regularizer::LipFull)), double(s)) *
               max_dlog;
  return res;
}

struct FamilyMember {
  CompRep rep;
  double approx_error;  // sup |v - G_N| declared by the family
};

struct AccuracyImplant {
  ImplantResult implanted;
  std::size_t n_eps = 0;
  double delta = 0.0;
  double total_bound = 0.0;  // approx_error + implant error bound
  double predicted = 0.0;    // (||v||/eps)^s n^{s+1} |log2 n|
};

/// Picks N_eps for target eps/2, implants with a uniform delta and returns
/// a network with total certified bound <= eps.
inline AccuracyImplant implant_for_accuracy(const std::function<FamilyMember(std::size_t)>& family,
                                            const GrowthFunction& gf, double norm, double seminorm, double eps) {
  require(eps > 0.0, "implant_for_accuracy: eps must be positive");
  AccuracyImplant out;
  out.n_eps = std::max<std::size_t>(1, n_epsilon(gf, 2.0 * seminorm, eps));
  const FamilyMember m = family(out.n_eps);
  const double ginv = std::max(1.0, gf.inverse(2.0 * seminorm / eps));
  double delta = eps / (2.0 * std::max(1.0, norm) * ginv);
  // the tail products of the declared bounds may exceed ||v||; shrink delta
  // so the implantation part stays within eps/2
  const std::size_t n = m.rep.depth();
  double tails = 0.0, prod = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    if (!detail::is_exact(m.rep.factor(k))) tails += prod;
    prod *= m.rep.factor(k).lip_upper();
  }
  if (tails > 0.0) delta = std::min(delta, 0.5 * eps / tails);
  delta = std::min(delta, 0.5);
  out.delta = delta;
  out.implanted = implant(m.rep, Vec(n, delta));
  out.total_bound = m.approx_error + out.implanted.error_bound;
  const double s = double(std::max<std::size_t>(1, s_infinity(m.rep)));
  out.predicted = std::pow(std::max(1.0, norm) / eps, s) * std::pow(ginv, s + 1.0) * std::max(1.0, std::abs(std::log2(ginv)));
  return out;
}

}  // namespace ptnet

#endif
