#ifndef PTNET_TRANSPORT_HPP
#define PTNET_TRANSPORT_HPP

#include <memory>
#include <string>

#include "comp_calculus.hpp"
#include "oracle.hpp"

namespace ptnet {

// ---------------------------------------------------------------------------
// Convection fields

/// One term a_j^o : (t, x) -> R^m of an affine parametric field.
struct FieldComponent {
  using EvalFn = std::function<void(double, const double*, double*)>;
  using AverageFn = std::function<void(double, double, const double*, double*)>;

  EvalFn eval;
  AverageFn average;  // |J|^-1 int_J a(s, x) ds over J = [t0, t1]; optional
  double sup = std::numeric_limits<double>::quiet_NaN();    // sup |a(t, x)|_inf
  double lip_x = std::numeric_limits<double>::quiet_NaN();  // max-norm Lipschitz in x, uniform in t
  double lip_t = 0.0;
  bool time_independent = false;
  nlohmann::json descriptor;

  /// Time average over [t0, t1]; adaptive Simpson when no closed form is given.
  void mean(std::size_t m, double t0, double t1, const double* x, double* out) const {
    if (time_independent) {
      eval(t0, x, out);
      return;
    }
    if (average) {
      average(t0, t1, x, out);
      return;
    }
    Vec tmp(m);
    for (std::size_t k = 0; k < m; ++k) {
      auto g = [&](double s) {
        eval(s, x, tmp.data());
        return tmp[k];
      };
      out[k] = adaptive_simpson(g, t0, t1, 1e-13 * (t1 - t0)) / (t1 - t0);
    }
  }
};

namespace catalog {

/// a(t, x) = c.
inline FieldComponent constant(const Vec& c) {
  FieldComponent f;
  f.eval = [c](double, const double*, double* o) { std::copy(c.begin(), c.end(), o); };
  f.sup = norm_inf(c);
  f.lip_x = 0.0;
  f.time_independent = true;
  f.descriptor = {{"kind", "constant"}, {"value", c}};
  return f;
}

/// a_k(t, x) = amp cos(lambda mean(x) + phase + k/2 + nu t).
inline FieldComponent cosine(std::size_t m, double amp, double lambda, double phase = 0.0, double nu = 0.0) {
  FieldComponent f;
  auto arg = [=](const double* x, std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += x[i];
    return lambda * s / static_cast<double>(m) + phase + 0.5 * static_cast<double>(k);
  };
  f.eval = [=](double t, const double* x, double* o) {
    for (std::size_t k = 0; k < m; ++k) o[k] = amp * std::cos(arg(x, k) + nu * t);
  };
  if (nu != 0.0) {
    f.average = [=](double t0, double t1, const double* x, double* o) {
      for (std::size_t k = 0; k < m; ++k) {
        const double a = arg(x, k);
        o[k] = amp * (std::sin(a + nu * t1) - std::sin(a + nu * t0)) / (nu * (t1 - t0));
      }
    };
  }
  f.sup = std::abs(amp);
  f.lip_x = std::abs(amp * lambda);
  f.lip_t = std::abs(amp * nu);
  f.time_independent = nu == 0.0;
  f.descriptor = {{"kind", "cosine"}, {"amp", amp}, {"lambda", lambda}, {"phase", phase}, {"nu", nu}};
  return f;
}

/// a_k(t, x) = amp max(0, 1 - |x - center|_inf / width).
inline FieldComponent bump(std::size_t m, double amp, const Vec& center, double width) {
  require(center.size() == m && width > 0.0, "catalog::bump: bad center or width");
  FieldComponent f;
  f.eval = [=](double, const double* x, double* o) {
    double r = 0.0;
    for (std::size_t i = 0; i < m; ++i) r = std::max(r, std::abs(x[i] - center[i]));
    const double v = amp * std::max(0.0, 1.0 - r / width);
    std::fill(o, o + m, v);
  };
  f.sup = std::abs(amp);
  f.lip_x = std::abs(amp) / width;
  f.time_independent = true;
  f.descriptor = {{"kind", "bump"}, {"amp", amp}, {"center", center}, {"width", width}};
  return f;
}

/// a_k(t, x) = p(mean(x)), p piecewise linear through (knots, values),
/// constant beyond the end knots.
inline FieldComponent piecewise_linear(std::size_t m, const Vec& knots, const Vec& values) {
  require(knots.size() >= 2 && knots.size() == values.size(), "catalog::piecewise_linear: bad knots");
  for (std::size_t i = 1; i < knots.size(); ++i) require(knots[i] > knots[i - 1], "catalog::piecewise_linear: knots must increase");
  FieldComponent f;
  f.eval = [=](double, const double* x, double* o) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += x[i];
    s /= static_cast<double>(m);
    double v;
    if (s <= knots.front()) {
      v = values.front();
    } else if (s >= knots.back()) {
      v = values.back();
    } else {
      const std::size_t r = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), s) - knots.begin());
      const double th = (s - knots[r - 1]) / (knots[r] - knots[r - 1]);
      v = (1.0 - th) * values[r - 1] + th * values[r];
    }
    std::fill(o, o + m, v);
  };
  double lip = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i)
    lip = std::max(lip, std::abs(values[i] - values[i - 1]) / (knots[i] - knots[i - 1]));
  f.sup = norm_inf(values);
  f.lip_x = lip;
  f.time_independent = true;
  f.descriptor = {{"kind", "piecewise-linear"}, {"knots", knots}, {"values", values}};
  return f;
}

inline FieldComponent from_json(std::size_t m, const nlohmann::json& j) {
  const std::string k = j.at("kind").get<std::string>();
  if (k == "constant") {
    Vec c = j.at("value").is_array() ? j.at("value").get<Vec>() : Vec(m, j.at("value").get<double>());
    require(c.size() == m, "catalog: constant value must have m entries");
    return constant(c);
  }
  if (k == "cosine")
    return cosine(m, j.value("amp", 1.0), j.value("lambda", 1.0), j.value("phase", 0.0), j.value("nu", 0.0));
  if (k == "bump") return bump(m, j.value("amp", 1.0), j.value("center", Vec(m, 0.0)), j.value("width", 1.0));
  if (k == "piecewise-linear") return piecewise_linear(m, j.at("knots").get<Vec>(), j.at("values").get<Vec>());
  throw InvalidInput("catalog: unknown component kind '" + k + "'");
}

}  // namespace catalog

struct ConvectionOptions {
  bool normalize = true;  // raise A to 1 instead of rejecting A < 1
  std::size_t samples = 512;
  std::uint64_t seed = 1;
};

/// a(t, x; y) = sum_j y_j omega_j a_j^o(t, x), y in [-1, 1]^{d_y}.
class AffineConvection {
 public:
  /// Validates the declared component bounds on samples from tx_box
  /// (first coordinate t).
  AffineConvection(std::size_t m, Vec omega, std::vector<FieldComponent> comps, const Box& tx_box,
                   const ConvectionOptions& opt = {})
      : m_(m), omega_(std::move(omega)), comps_(std::make_shared<const std::vector<FieldComponent>>(std::move(comps))) {
    require(m_ >= 1, "AffineConvection: m must be >= 1");
    require(!omega_.empty() && omega_.size() == comps_->size(), "AffineConvection: one weight per component");
    require(tx_box.dim() == m_ + 1, "AffineConvection: validation box must cover (t, x)");
    for (double w : omega_) require(w >= 0.0, "AffineConvection: weights must be nonnegative");
    for (const auto& c : *comps_)
      require(std::isfinite(c.sup) && std::isfinite(c.lip_x), "AffineConvection: component without sup/Lipschitz data");
    validate(tx_box, opt);
    finish(opt.normalize);
  }

  std::size_t m() const { return m_; }
  std::size_t d_y() const { return omega_.size(); }
  const Vec& omega() const { return omega_; }
  const std::vector<FieldComponent>& components() const { return *comps_; }
  double omega1() const { return omega1_; }
  double A_circ() const { return a_circ_; }
  double Lambda() const { return lambda_; }
  double A() const { return a_; }
  double A_raw() const { return a_raw_; }  // sum_j omega_j sup_j before normalization
  double L() const { return a_ + lambda_ * omega1_; }
  bool autonomous() const {
    for (const auto& c : *comps_)
      if (!c.time_independent) return false;
    return true;
  }

  void eval(double t, const double* x, const double* y, double* out) const {
    thread_local Vec tmp;
    tmp.resize(m_);
    std::fill(out, out + m_, 0.0);
    for (std::size_t j = 0; j < omega_.size(); ++j) {
      const double c = y[j] * omega_[j];
      if (c == 0.0) continue;
      (*comps_)[j].eval(t, x, tmp.data());
      for (std::size_t k = 0; k < m_; ++k) out[k] += c * tmp[k];
    }
  }

  FieldFn field() const {
    auto self = std::make_shared<const AffineConvection>(*this);
    return [self](double t, const double* x, const double* y, double* o) { self->eval(t, x, y, o); };
  }

  /// s -> -a(t_ref - s, x; y); same bounds, same affine structure.
  AffineConvection reversed(double t_ref) const {
    std::vector<FieldComponent> rc;
    for (const auto& c : *comps_) {
      FieldComponent r = c;
      const std::size_t m = m_;
      r.eval = [c, t_ref, m](double s, const double* x, double* o) {
        c.eval(t_ref - s, x, o);
        for (std::size_t k = 0; k < m; ++k) o[k] = -o[k];
      };
      if (c.average) {
        r.average = [c, t_ref, m](double s0, double s1, const double* x, double* o) {
          c.average(t_ref - s1, t_ref - s0, x, o);
          for (std::size_t k = 0; k < m; ++k) o[k] = -o[k];
        };
      }
      r.descriptor = {{"reversed", c.descriptor}, {"t_ref", t_ref}};
      rc.push_back(std::move(r));
    }
    AffineConvection out(*this);
    out.comps_ = std::make_shared<const std::vector<FieldComponent>>(std::move(rc));
    return out;
  }

  nlohmann::json describe() const {
    nlohmann::json j{{"m", m_},          {"d_y", d_y()},     {"omega", omega_}, {"A_circ", a_circ_},
                     {"Lambda", lambda_}, {"omega1", omega1_}, {"A", a_},         {"A_raw", a_raw_},
                     {"L", L()},          {"components", nlohmann::json::array()}};
    for (const auto& c : *comps_) j["components"].push_back(c.descriptor);
    return j;
  }

 private:
  void validate(const Box& tx_box, const ConvectionOptions& opt) {
    Rng rng(opt.seed);
    Vec v(m_), w(m_);
    for (std::size_t j = 0; j < comps_->size(); ++j) {
      const FieldComponent& c = (*comps_)[j];
      for (std::size_t s = 0; s < opt.samples; ++s) {
        const Vec p = rng.point(tx_box), p2 = rng.point(tx_box);
        c.eval(p[0], p.data() + 1, v.data());
        if (norm_inf(v) > c.sup * (1.0 + 1e-12) + 1e-300)
          throw InvalidInput("AffineConvection: component " + std::to_string(j) + " exceeds its declared sup bound");
        c.eval(p[0], p2.data() + 1, w.data());
        double dx = 0.0;
        for (std::size_t i = 0; i < m_; ++i) dx = std::max(dx, std::abs(p[i + 1] - p2[i + 1]));
        if (dx > 0.0 && dist_inf(v, w) > c.lip_x * dx * (1.0 + 1e-9) + 1e-14)
          throw InvalidInput("AffineConvection: component " + std::to_string(j) +
                             " exceeds its declared Lipschitz bound in x");
      }
    }
  }

  void finish(bool normalize) {
    omega1_ = a_raw_ = a_circ_ = lambda_ = 0.0;
    for (std::size_t j = 0; j < omega_.size(); ++j) {
      const FieldComponent& c = (*comps_)[j];
      omega1_ += omega_[j];
      a_raw_ += omega_[j] * c.sup;
      a_circ_ = std::max(a_circ_, c.sup);
      lambda_ = std::max(lambda_, c.lip_x);
    }
    a_ = a_raw_;
    if (a_ < 1.0) {
      if (!normalize)
        throw InvalidInput("AffineConvection: A = " + std::to_string(a_) +
                           " < 1; rescale time (a -> c a, T -> T / c) or enable normalization");
      a_ = 1.0;
    }
    require(omega1_ > 0.0, "AffineConvection: |omega|_1 must be positive");
  }

  std::size_t m_;
  Vec omega_;
  std::shared_ptr<const std::vector<FieldComponent>> comps_;
  double omega1_ = 0.0, a_raw_ = 0.0, a_circ_ = 0.0, lambda_ = 0.0, a_ = 0.0;
};

/// Field without affine structure. builder(t, N) returns a representation of
/// (x, y) -> a(t, x; y) with declared approximation error, Lipschitz data
/// for every generic factor, and factor domains covering the evaluation box.
struct GeneralConvection {
  std::size_t m = 1, d_y = 1;
  FieldFn a;
  double A = 1.0;     // sup |a|
  double norm = 1.0;  // declared ||a|| (>= Lipschitz constant in (x, y))
  double L_t = 0.0;   // Lipschitz constant in t
  GrowthFunction gf = GrowthFunction::alg(1.0, 1.0);
  double seminorm = 1.0;
  bool time_independent = false;
  std::function<FamilyMember(double, std::size_t)> builder;
};

// ---------------------------------------------------------------------------
// Macro grid and schedule

struct MacroGrid {
  double T_hat = 0.0;
  double I = 0.0;  // 1 / (2 ||a||)
  std::size_t K = 0;
  double slab() const { return T_hat / static_cast<double>(K); }
  double t(std::size_t k) const { return k == K ? T_hat : static_cast<double>(k) * slab(); }
};

/// |I| = 1/(2||a||), K = ceil(T / |I|). Slabs have length T/K <= |I|.
inline MacroGrid macro_grid(double T_hat, double a_norm) {
  require(T_hat > 0.0, "macro_grid: T_hat must be positive");
  require(a_norm >= 1.0, "macro_grid: ||a|| must be >= 1");
  MacroGrid g;
  g.T_hat = T_hat;
  g.I = 0.5 / a_norm;
  g.K = std::max<std::size_t>(1, guarded_ceil(2.0 * a_norm * T_hat));
  return g;
}

/// Per-slab tolerance with all K tolerances equal.
inline double eta_of(double eps, std::size_t K) {
  require(eps > 0.0, "schedule: eps must be positive");
  return (std::exp(0.5) - 1.0) * eps * std::exp(-0.5 * static_cast<double>(K));
}
/// Picard sweeps so that 2^{-mu-1} <= eta.
inline std::size_t mu_of(double eta) {
  require(eta > 0.0, "schedule: eta must be positive");
  return std::max<std::size_t>(1, guarded_ceil(std::log2(1.0 / (2.0 * eta))));
}
inline double tau_of(double eta) { return std::exp(-0.5) * eta; }
inline std::size_t q_of(double tau, double A, double I) {
  require(tau > 0.0, "schedule: tau must be positive");
  return std::max<std::size_t>(1, guarded_ceil(2.0 * A * I / tau));
}
inline double delta_of(double tau, double I, double omega1) { return tau / (2.0 * I * omega1); }

struct BuildLimits {
  double max_weights = 1e13;          // counted, not materialized
  std::size_t max_q = 200000;         // quadrature nodes per slab
  double max_interp_nodes = 4e6;      // grid nodes per interpolant
};

struct Schedule {
  double eps = 0.0, eps_internal = 0.0;
  std::size_t K = 0;
  double I = 0.0, slab = 0.0;
  double eta = 0.0, tau = 0.0, delta = 0.0;
  std::size_t mu = 0, q = 0;
  std::size_t interp_q = 0;     // grid intervals per axis of each interpolant
  double inflation = 0.0;       // evaluation box = D inflated by this
  double predicted_weights = 0.0;

  nlohmann::json to_json() const {
    return {{"eps", eps},     {"eps_internal", eps_internal}, {"K", K},        {"I", I},
            {"slab", slab},   {"eta", eta},                   {"tau", tau},    {"delta", delta},
            {"mu", mu},       {"q", q},                       {"interp_q", interp_q},
            {"inflation", inflation},                         {"predicted_weights", predicted_weights}};
  }
};

namespace detail {

inline double interp_size_estimate(std::size_t m, std::size_t grid_q, double delta) {
  const double nodes = std::pow(double(grid_q + 1), double(m));
  if (m == 1) return 10.0 * nodes;
  return nodes * 40.0 * double(m) * std::max(1.0, std::log2(1.0 / delta));
}

}  // namespace detail

/// All builds target eps/2 internally since the assembly certifies twice
/// the per-slab tolerance.
inline Schedule schedule(double eps, const MacroGrid& grid, const AffineConvection& a, const Box& D,
                         const BuildLimits& lim = {}) {
  require(eps > 0.0, "schedule: eps must be positive");
  require(D.dim() == a.m(), "schedule: domain dimension != m");
  Schedule s;
  s.eps = eps;
  s.eps_internal = 0.5 * eps;
  s.K = grid.K;
  s.I = grid.I;
  s.slab = grid.slab();
  s.eta = eta_of(s.eps_internal, s.K);
  s.mu = mu_of(s.eta);
  s.tau = tau_of(s.eta);
  s.q = q_of(s.tau, a.A(), s.slab);
  s.delta = std::min(0.5, delta_of(s.tau, s.slab, a.omega1()));
  s.inflation = (a.A() + a.omega1() * s.delta) * grid.T_hat * (1.0 + 1e-9) + 1e-12;
  const Box box = D.inflated(s.inflation);
  const Calibration cal = default_calibration(a.m());
  s.interp_q = required_q(a.Lambda(), box, s.delta, cal);
  const double nodes = std::pow(double(s.interp_q + 1), double(a.m()));
  s.predicted_weights = double(s.K) * double(s.mu) * double(s.q) * double(a.d_y()) * double(a.m()) *
                        detail::interp_size_estimate(a.m(), s.interp_q, s.delta);
  if (s.q > lim.max_q)
    throw ResourceCeiling("schedule: q = " + std::to_string(s.q) + " exceeds the ceiling", s.predicted_weights);
  if (nodes > lim.max_interp_nodes)
    throw ResourceCeiling("schedule: interpolation grid with " + std::to_string(nodes) + " nodes exceeds the ceiling",
                          s.predicted_weights);
  if (s.predicted_weights > lim.max_weights)
    throw ResourceCeiling("schedule: predicted size " + std::to_string(s.predicted_weights) + " exceeds the ceiling",
                          s.predicted_weights);
  return s;
}

// ---------------------------------------------------------------------------
// Numeric Picard iterates (reference, not certified)

/// Picard iterates on a uniform grid of I = [t0, t1] with n cells.
class PicardTrajectory {
 public:
  PicardTrajectory(double t0, double t1, std::vector<Vec> nodes) : t0_(t0), t1_(t1), z_(std::move(nodes)) {}
  const std::vector<Vec>& nodes() const { return z_; }
  /// Piecewise-linear interpolation between grid nodes.
  Vec operator()(double t) const {
    const std::size_t n = z_.size() - 1;
    const double s = std::clamp((t - t0_) / (t1_ - t0_) * double(n), 0.0, double(n));
    const std::size_t i = std::min<std::size_t>(n - 1, static_cast<std::size_t>(s));
    const double th = s - double(i);
    Vec out(z_[0].size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1.0 - th) * z_[i][c] + th * z_[i + 1][c];
    return out;
  }

 private:
  double t0_, t1_;
  std::vector<Vec> z_;
};

/// k iterates of zbar -> x + int_{t0}^t a(s, zbar(s); y) ds from zbar = x,
/// by composite midpoint quadrature. lip is the Lipschitz bound of a used
/// for the contraction precondition |I| L <= 1/2.
inline PicardTrajectory picard_numeric(const FieldFn& a, std::size_t m, double t0, double t1, const Vec& x,
                                       const Vec& y, std::size_t k, std::size_t n_cells, double lip) {
  require(t1 > t0, "picard_numeric: empty interval");
  require((t1 - t0) * lip <= 0.5 * (1.0 + 1e-12), "picard_numeric: contraction needs |I| L <= 1/2");
  require(n_cells >= 1 && x.size() == m, "picard_numeric: bad grid or dimension");
  const double h = (t1 - t0) / double(n_cells);
  std::vector<Vec> z(n_cells + 1, x), nz(n_cells + 1, x);
  Vec mid(m), v(m);
  for (std::size_t it = 0; it < k; ++it) {
    Vec acc = x;
    nz[0] = x;
    for (std::size_t c = 0; c < n_cells; ++c) {
      for (std::size_t i = 0; i < m; ++i) mid[i] = 0.5 * (z[c][i] + z[c + 1][i]);
      a(t0 + (double(c) + 0.5) * h, mid.data(), y.data(), v.data());
      for (std::size_t i = 0; i < m; ++i) acc[i] += h * v[i];
      nz[c + 1] = acc;
    }
    z.swap(nz);
  }
  return PicardTrajectory(t0, t1, std::move(z));
}

// ---------------------------------------------------------------------------
// Slab networks

/// Weight counts of an assembled network by part.
struct SizeBreakdown {
  double bank = 0.0;         // interpolants / implanted field networks
  double gates = 0.0;        // rho gate networks
  double multilinear = 0.0;  // exact product layer terms
  double prefix = 0.0;       // node-value recombination between sweeps
  double passthrough = 0.0;  // carrying (t, x, y) across layers
  double other = 0.0;        // data networks of solution assemblies
  double total() const { return bank + gates + multilinear + prefix + passthrough + other; }
  SizeBreakdown& operator+=(const SizeBreakdown& o) {
    bank += o.bank;
    gates += o.gates;
    multilinear += o.multilinear;
    prefix += o.prefix;
    passthrough += o.passthrough;
    other += o.other;
    return *this;
  }
  nlohmann::json to_json() const {
    return {{"bank", bank},       {"gates", gates},           {"multilinear", multilinear},
            {"prefix", prefix},   {"passthrough", passthrough}, {"other", other}, {"total", total()}};
  }
};

/// mu-fold self-composition of the one-step map
///   zbar -> w + sum_i rho_i(t) V_i(zbar(xi_i), y)
/// on [t0, t1] seeded with zbar = w; V_i is the bank output for sub-interval i.
class Slab {
 public:
  using VelocityFn = std::function<void(std::size_t, const double*, const double*, double*)>;

  Slab(std::size_t m, std::size_t d_y, double t0, double t1, std::size_t q, std::size_t mu, VelocityFn v)
      : m_(m), d_y_(d_y), t0_(t0), t1_(t1), q_(q), mu_(mu), v_(std::move(v)), rho_(rho_gate(t0, t1, q)) {
    require(mu_ >= 1, "Slab: at least one sweep");
  }

  std::size_t q() const { return q_; }
  std::size_t mu() const { return mu_; }
  double t_begin() const { return t0_; }
  double t_end() const { return t1_; }
  const ReluNetwork& gate() const { return rho_; }

  void eval(double t, const double* w, const double* y, double* out) const {
    thread_local Vec zb, V, r;
    zb.resize(q_ * m_);
    V.resize(q_ * m_);
    r.resize(q_);
    const double tc = std::clamp(t, t0_, t1_);
    rho_.eval(&tc, r.data());
    // rho_i(t) = 0 past the bin of t, and zbar(xi_l) only reads V_i for
    // i <= l, so later bins do not affect the output
    std::size_t active = q_;
    while (active > 0 && r[active - 1] == 0.0) --active;
    for (std::size_t i = 0; i < active; ++i) std::copy(w, w + m_, zb.begin() + static_cast<std::ptrdiff_t>(i * m_));
    const double h = (t1_ - t0_) / double(q_);
    for (std::size_t it = 0; it < mu_; ++it) {
      for (std::size_t i = 0; i < active; ++i) v_(i, zb.data() + i * m_, y, V.data() + i * m_);
      if (it + 1 == mu_) break;
      // zbar(xi_l) = w + sum_{i<l} |J| V_i + |J|/2 V_l
      for (std::size_t k = 0; k < m_; ++k) {
        double acc = w[k];
        for (std::size_t l = 0; l < active; ++l) {
          zb[l * m_ + k] = acc + 0.5 * h * V[l * m_ + k];
          acc += h * V[l * m_ + k];
        }
      }
    }
    for (std::size_t k = 0; k < m_; ++k) {
      double acc = w[k];
      for (std::size_t i = 0; i < active; ++i) acc += r[i] * V[i * m_ + k];
      out[k] = acc;
    }
  }

  Vec eval(double t, const Vec& w, const Vec& y) const {
    require(w.size() == m_ && y.size() == d_y_, "Slab::eval: dimension mismatch");
    Vec out(m_);
    eval(t, w.data(), y.data(), out.data());
    return out;
  }

 private:
  std::size_t m_, d_y_;
  double t0_, t1_;
  std::size_t q_, mu_;
  VelocityFn v_;
  ReluNetwork rho_;
};

namespace detail {

using NetPtr = std::shared_ptr<const LipStableNet>;

/// Interpolants of the m coordinates of g on box at accuracy delta.
inline std::vector<NetPtr> interpolate_coords(const std::function<void(const double*, double*)>& g, std::size_t m,
                                              const Box& box, double lip, double sup, double delta) {
  const Calibration cal = default_calibration(m);
  const GridSpec grid(m, required_q(lip, box, delta, cal), box);
  std::vector<SampledFunction> sf(m);
  for (auto& s : sf) {
    s.grid = grid;
    s.lip_bound = lip;
    s.sup_bound = sup;
    s.values.resize(grid.node_count());
  }
  Vec out(m);
  for (std::size_t f = 0; f < grid.node_count(); ++f) {
    const Vec x = grid.node(grid.multi_index(f));
    g(x.data(), out.data());
    for (std::size_t k = 0; k < m; ++k) sf[k].values[f] = out[k];
  }
  std::vector<NetPtr> nets;
  for (const auto& s : sf) nets.push_back(std::make_shared<const LipStableNet>(lip_stable_net(s, delta, cal)));
  return nets;
}

struct AffineBank {
  std::size_t m = 0, d_y = 0, q = 0;
  std::vector<NetPtr> nets;  // index (i * d_y + j) * m + k
  double size = 0.0;         // weight count with one copy per (i, j, k)
  std::size_t depth = 0;
};

inline AffineBank build_affine_bank(const AffineConvection& a, double t0, double t1, std::size_t q, double delta,
                                    const Box& box) {
  AffineBank b;
  b.m = a.m();
  b.d_y = a.d_y();
  b.q = q;
  b.nets.resize(q * b.d_y * b.m);
  const double h = (t1 - t0) / double(q);
  for (std::size_t j = 0; j < b.d_y; ++j) {
    const FieldComponent& c = a.components()[j];
    std::vector<NetPtr> shared;
    for (std::size_t i = 0; i < q; ++i) {
      if (!c.time_independent || shared.empty()) {
        const double s0 = t0 + double(i) * h, s1 = i + 1 == q ? t1 : s0 + h;
        const std::size_t m = b.m;
        shared = interpolate_coords([&c, s0, s1, m](const double* x, double* o) { c.mean(m, s0, s1, x, o); }, m, box,
                                    c.lip_x, c.sup, delta);
      }
      for (std::size_t k = 0; k < b.m; ++k) {
        b.nets[(i * b.d_y + j) * b.m + k] = shared[k];
        b.size += double(shared[k]->report.size);
        b.depth = std::max(b.depth, shared[k]->report.depth);
      }
    }
  }
  return b;
}

}  // namespace detail

struct SlabOptions {
  bool implant = true;  // false: exact slab averages (compositional-only)
};

/// One Picard application on I = [t0, t1] with tolerance tau: q = q(tau),
/// delta = delta(tau). D is the x-domain; interpolants cover D inflated by
/// `inflation`.
inline Slab build_slab_net(const AffineConvection& a, double t0, double t1, double tau, const Box& D, double inflation,
                           std::size_t mu = 1, const SlabOptions& opt = {}, SizeBreakdown* size = nullptr) {
  require(t1 > t0 && tau > 0.0, "build_slab_net: need t1 > t0 and tau > 0");
  const double len = t1 - t0;
  require(len * a.L() <= 0.5 * (1.0 + 1e-12), "build_slab_net: slab too long for contraction (|I| L > 1/2)");
  const std::size_t q = q_of(tau, a.A(), len);
  const double delta = std::min(0.5, delta_of(tau, len, a.omega1()));
  const std::size_t m = a.m(), dy = a.d_y();
  const Vec omega = a.omega();
  Slab::VelocityFn v;
  std::size_t bank_depth = 1;
  if (opt.implant) {
    auto bank = std::make_shared<const detail::AffineBank>(
        detail::build_affine_bank(a, t0, t1, q, delta, D.inflated(inflation)));
    bank_depth = bank->depth;
    if (size) size->bank += double(mu) * bank->size;
    v = [bank, omega, m, dy](std::size_t i, const double* z, const double* y, double* out) {
      std::fill(out, out + m, 0.0);
      for (std::size_t j = 0; j < dy; ++j) {
        const double c = y[j] * omega[j];
        if (c == 0.0) continue;
        for (std::size_t k = 0; k < m; ++k) out[k] += c * bank->nets[(i * dy + j) * m + k]->eval(z);
      }
    };
  } else {
    const double h = len / double(q);
    auto comps = std::make_shared<const std::vector<FieldComponent>>(a.components());
    v = [comps, omega, m, dy, t0, t1, h, q](std::size_t i, const double* z, const double* y, double* out) {
      thread_local Vec tmp;
      tmp.resize(m);
      std::fill(out, out + m, 0.0);
      const double s0 = t0 + double(i) * h, s1 = i + 1 == q ? t1 : s0 + h;
      for (std::size_t j = 0; j < dy; ++j) {
        const double c = y[j] * omega[j];
        if (c == 0.0) continue;
        (*comps)[j].mean(m, s0, s1, z, tmp.data());
        for (std::size_t k = 0; k < m; ++k) out[k] += c * tmp[k];
      }
    };
  }
  Slab slab(m, dy, t0, t1, q, mu, std::move(v));
  if (size) {
    size->gates += double(slab.gate().size());
    size->multilinear += double(mu) * double(q * dy * m);
    size->prefix += double(mu - 1) * double(q * (q + 1) / 2 * m);
    size->passthrough += double(mu) * double(bank_depth + 1) * 2.0 * double(1 + m + dy);
  }
  return slab;
}

/// General-field slab, case of time samples: V_i = implanted representation
/// of a(xi_i, . ; .) with accuracy tau / (2 |I|), q from the time-Lipschitz
/// quadrature bound.
inline Slab build_slab_net(const GeneralConvection& g, double t0, double t1, double tau, std::size_t mu = 1,
                           const SlabOptions& opt = {}, SizeBreakdown* size = nullptr) {
  require(t1 > t0 && tau > 0.0, "build_slab_net: need t1 > t0 and tau > 0");
  require(static_cast<bool>(g.builder), "build_slab_net: general field without builder");
  const double len = t1 - t0;
  require(len * g.norm <= 0.5 * (1.0 + 1e-12), "build_slab_net: slab too long for contraction (|I| ||a|| > 1/2)");
  const std::size_t q =
      std::max<std::size_t>(1, guarded_ceil((g.norm * g.A + g.L_t) * len * len / tau));
  const double eps_a = tau / (2.0 * len);
  const double h = len / double(q);
  const std::size_t m = g.m;
  std::vector<std::shared_ptr<const CompRep>> reps;
  double bank = 0.0;
  std::size_t depth = 1;
  for (std::size_t i = 0; i < q; ++i) {
    if (g.time_independent && !reps.empty()) {
      reps.push_back(reps.back());
      bank += size ? double(complexity(*reps.back())) : 0.0;
      continue;
    }
    const double xi = t0 + (double(i) + 0.5) * h;
    auto family = [&](std::size_t n) { return g.builder(xi, n); };
    if (opt.implant) {
      const AccuracyImplant ai = implant_for_accuracy(family, g.gf, g.norm, g.seminorm, eps_a);
      reps.push_back(std::make_shared<const CompRep>(ai.implanted.rep));
    } else {
      const FamilyMember fm = family(std::max<std::size_t>(1, n_epsilon(g.gf, 2.0 * g.seminorm, eps_a)));
      reps.push_back(std::make_shared<const CompRep>(fm.rep));
    }
    bank += double(complexity(*reps.back()));
    depth = std::max(depth, reps.back()->depth());
  }
  const std::size_t dy = g.d_y;
  Slab::VelocityFn v = [reps, m, dy](std::size_t i, const double* z, const double* y, double* out) {
    Vec in(m + dy);
    std::copy(z, z + m, in.begin());
    std::copy(y, y + dy, in.begin() + static_cast<std::ptrdiff_t>(m));
    const Vec r = reps[i]->eval(in);
    std::copy(r.begin(), r.end(), out);
  };
  Slab slab(m, dy, t0, t1, q, mu, std::move(v));
  if (size) {
    size->bank += double(mu) * bank;
    size->gates += double(slab.gate().size());
    size->multilinear += double(mu) * double(q * m);
    size->prefix += double(mu - 1) * double(q * (q + 1) / 2 * m);
    size->passthrough += double(mu) * double(depth + 1) * 2.0 * double(1 + m + dy);
  }
  return slab;
}

// ---------------------------------------------------------------------------
// Characteristic networks

enum class Direction { Forward, Backward };

inline const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

struct BuildOptions {
  BuildLimits limits;
  bool implant = true;
};

/// Forward: N(t, x, y) ~ z(t; 0, x, y). Backward: N(s, x, y) ~ z(T - s; T, x, y),
/// built from the reversed field. Evaluation walks the slabs, freezing each
/// junction value as the seed of the next slab.
class CharNetwork {
 public:
  CharNetwork() = default;

  std::size_t m() const { return m_; }
  std::size_t d_y() const { return d_y_; }
  Direction direction() const { return dir_; }
  double T_hat() const { return grid_.T_hat; }
  const MacroGrid& grid() const { return grid_; }
  const Schedule& schedule() const { return sched_; }
  const Box& domain() const { return D_; }
  const SizeBreakdown& size_breakdown() const { return size_; }
  double size() const { return size_.total(); }
  std::size_t depth() const { return depth_; }
  bool implanted() const { return implanted_; }
  /// The field the network follows (the original one, also for backward builds).
  const FieldFn& field() const { return field_; }
  double A() const { return A_; }
  double A_circ() const { return A_circ_; }
  double Lambda() const { return Lambda_; }
  double omega1() const { return omega1_; }
  double L() const { return L_; }
  bool general() const { return general_; }

  void eval(double t, const double* x, const double* y, double* out) const {
    const double tc = std::clamp(t, 0.0, grid_.T_hat);
    std::size_t k = std::min<std::size_t>(grid_.K - 1, static_cast<std::size_t>(tc / grid_.slab()));
    thread_local Vec w, nw;
    w.assign(x, x + m_);
    nw.resize(m_);
    for (std::size_t j = 0; j < k; ++j) {
      slabs_[j].eval(grid_.t(j + 1), w.data(), y, nw.data());
      w.swap(nw);
    }
    slabs_[k].eval(tc, w.data(), y, out);
  }
  Vec eval(double t, const Vec& x, const Vec& y) const {
    require(x.size() == m_ && y.size() == d_y_, "CharNetwork::eval: dimension mismatch");
    Vec out(m_);
    eval(t, x.data(), y.data(), out.data());
    return out;
  }

  /// Error budget at junction t_k (k = 1..K): eta + sum_{j<k} eta e^{(k-j)/2}.
  double junction_budget(std::size_t k) const {
    double b = sched_.eta;
    for (std::size_t j = 1; j < k; ++j) b += sched_.eta * std::exp(0.5 * double(k - j));
    return b;
  }

  /// Value of slab k-1 at its right end and of slab k at its left end.
  std::pair<Vec, Vec> junction_values(std::size_t k, const Vec& x, const Vec& y) const {
    require(k >= 1 && k < grid_.K, "junction_values: k must lie in 1..K-1");
    Vec w = x, nw(m_);
    for (std::size_t j = 0; j + 1 < k; ++j) {
      slabs_[j].eval(grid_.t(j + 1), w.data(), y.data(), nw.data());
      w.swap(nw);
    }
    Vec left(m_), right(m_);
    slabs_[k - 1].eval(grid_.t(k), w.data(), y.data(), left.data());
    slabs_[k].eval(grid_.t(k), left.data(), y.data(), right.data());
    return {left, right};
  }

  nlohmann::json report() const {
    return {{"direction", to_string(dir_)}, {"schedule", sched_.to_json()}, {"size", size_.to_json()},
            {"depth", depth_},              {"implanted", implanted_},     {"general", general_},
            {"A", A_},                      {"L", L_}};
  }

 private:
  friend CharNetwork build_char_net(const AffineConvection&, const Box&, double, double, Direction,
                                    const BuildOptions&);
  friend CharNetwork build_char_net(const GeneralConvection&, const Box&, double, double, Direction,
                                    const BuildOptions&);

  std::size_t m_ = 0, d_y_ = 0;
  Direction dir_ = Direction::Forward;
  MacroGrid grid_;
  Schedule sched_;
  Box D_;
  std::vector<Slab> slabs_;
  SizeBreakdown size_;
  std::size_t depth_ = 0;
  bool implanted_ = true, general_ = false;
  FieldFn field_;
  double A_ = 0.0, A_circ_ = 0.0, Lambda_ = 0.0, omega1_ = 0.0, L_ = 0.0;
};

inline CharNetwork build_char_net(const AffineConvection& a, const Box& D, double T_hat, double eps, Direction dir,
                                  const BuildOptions& opt = {}) {
  require(D.dim() == a.m(), "build_char_net: domain dimension != m");
  CharNetwork n;
  n.m_ = a.m();
  n.d_y_ = a.d_y();
  n.dir_ = dir;
  n.D_ = D;
  n.field_ = a.field();
  n.implanted_ = opt.implant;
  n.A_ = a.A();
  n.A_circ_ = a.A_circ();
  n.Lambda_ = a.Lambda();
  n.omega1_ = a.omega1();
  n.L_ = a.L();
  n.grid_ = macro_grid(T_hat, a.L());
  n.sched_ = schedule(eps, n.grid_, a, D, opt.limits);
  const AffineConvection field = dir == Direction::Forward ? a : a.reversed(T_hat);
  SlabOptions so{opt.implant};
  std::size_t bank_depth = 0;
  for (std::size_t k = 0; k < n.grid_.K; ++k) {
    SizeBreakdown sb;
    n.slabs_.push_back(build_slab_net(field, n.grid_.t(k), n.grid_.t(k + 1), n.sched_.tau, D, n.sched_.inflation,
                                      n.sched_.mu, so, &sb));
    n.size_ += sb;
    bank_depth = std::max<std::size_t>(bank_depth, 2);
  }
  // each sweep: interpolant depth plus the product layer
  const Calibration cal = default_calibration(a.m());
  const std::size_t interp_depth =
      a.m() == 1 ? 2 : static_cast<std::size_t>(std::ceil(cal.c2 * std::log2(1.0 / n.sched_.delta))) + 2;
  n.depth_ = n.grid_.K * n.sched_.mu * (interp_depth + 1);
  // junction values are carried to the next slab as its seed
  n.size_.passthrough += double(n.grid_.K - 1) * 2.0 * double(a.m() + a.d_y() + 1);
  return n;
}

/// General fields: ||a|| is the declared bound of the builder contract;
/// K, eta, mu, tau follow the affine schedule with A and ||a||.
inline CharNetwork build_char_net(const GeneralConvection& g, const Box& D, double T_hat, double eps, Direction dir,
                                  const BuildOptions& opt = {}) {
  require(D.dim() == g.m, "build_char_net: domain dimension != m");
  require(g.A >= 1.0 && g.A <= g.norm, "build_char_net: need 1 <= A <= ||a||; rescale the field");
  CharNetwork n;
  n.m_ = g.m;
  n.d_y_ = g.d_y;
  n.dir_ = dir;
  n.D_ = D;
  n.field_ = g.a;
  n.implanted_ = opt.implant;
  n.general_ = true;
  n.A_ = g.A;
  n.A_circ_ = g.A;
  n.L_ = g.norm;
  n.grid_ = macro_grid(T_hat, g.norm);
  Schedule& s = n.sched_;
  s.eps = eps;
  s.eps_internal = 0.5 * eps;
  s.K = n.grid_.K;
  s.I = n.grid_.I;
  s.slab = n.grid_.slab();
  s.eta = eta_of(s.eps_internal, s.K);
  s.mu = mu_of(s.eta);
  s.tau = tau_of(s.eta);
  s.q = std::max<std::size_t>(1, guarded_ceil((g.norm * g.A + g.L_t) * s.slab * s.slab / s.tau));
  s.delta = s.tau / (2.0 * s.slab);
  s.inflation = g.A * T_hat;
  if (s.q > opt.limits.max_q) throw ResourceCeiling("build_char_net: q exceeds the ceiling", double(s.q));
  GeneralConvection field = g;
  if (dir == Direction::Backward) {
    const FieldFn a0 = g.a;
    const std::size_t m = g.m;
    field.a = [a0, T_hat, m](double s2, const double* x, const double* y, double* o) {
      a0(T_hat - s2, x, y, o);
      for (std::size_t k = 0; k < m; ++k) o[k] = -o[k];
    };
    auto b0 = g.builder;
    field.builder = [b0, T_hat, m](double s2, std::size_t N) {
      FamilyMember fm = b0(T_hat - s2, N);
      Vec w(m * m, 0.0);
      for (std::size_t k = 0; k < m; ++k) w[k * m + k] = -1.0;
      fm.rep = compose_reps(CompRep({Factor::linear(m, m, w, Vec(m, 0.0))}), fm.rep);
      return fm;
    };
  }
  SlabOptions so{opt.implant};
  std::size_t depth = 0;
  for (std::size_t k = 0; k < n.grid_.K; ++k) {
    SizeBreakdown sb;
    n.slabs_.push_back(build_slab_net(field, n.grid_.t(k), n.grid_.t(k + 1), s.tau, s.mu, so, &sb));
    n.size_ += sb;
    depth += s.mu * 4;
  }
  n.depth_ = depth;
  s.predicted_weights = n.size_.total();
  return n;
}

// ---------------------------------------------------------------------------
// Certification against the oracle

struct CharCertificate {
  double eps = 0.0;
  double measured_sup_error = 0.0;
  double oracle_tol = 0.0;
  std::size_t samples = 0;
  Vec worst_point;  // (t, x, y)
  bool pass = false;
  nlohmann::json to_json() const {
    return {{"eps", eps},         {"measured_sup_error", measured_sup_error}, {"oracle_tol", oracle_tol},
            {"samples", samples}, {"worst_point", worst_point},               {"pass", pass}};
  }
};

/// Reference characteristic at (t, x, y) for the network's direction.
inline Vec char_reference(const CharNetwork& net, double t, const Vec& x, const Vec& y, const OdeConfig& cfg) {
  if (net.direction() == Direction::Forward) return rk4_char(net.field(), net.m(), 0.0, t, x, y, cfg).z;
  return rk4_char(net.field(), net.m(), net.T_hat(), net.T_hat() - t, x, y, cfg).z;
}

/// Measured sup error on random (t, x, y) in [0, T] x D x [-1, 1]^{d_y}
/// against RK4 at tolerance eps/100.
inline CharCertificate certify_char(const CharNetwork& net, std::size_t n_samples, std::uint64_t seed) {
  CharCertificate c;
  c.eps = net.schedule().eps;
  c.oracle_tol = c.eps / 100.0;
  c.samples = n_samples;
  OdeConfig cfg;
  cfg.tol = c.oracle_tol;
  require_oracle_tolerance(cfg, c.eps);
  Rng rng(seed);
  const Box ybox = Box::cube(net.d_y(), -1.0, 1.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const double t = rng.uniform(0.0, net.T_hat());
    const Vec x = rng.point(net.domain()), y = rng.point(ybox);
    const double e = dist_inf(net.eval(t, x, y), char_reference(net, t, x, y, cfg));
    if (e > c.measured_sup_error || c.worst_point.empty()) {
      c.measured_sup_error = std::max(c.measured_sup_error, e);
      c.worst_point = {t};
      c.worst_point.insert(c.worst_point.end(), x.begin(), x.end());
      c.worst_point.insert(c.worst_point.end(), y.begin(), y.end());
    }
  }
  c.pass = c.measured_sup_error <= c.eps;
  return c;
}

struct LipschitzReport {
  double xy_lower = 0.0, t_lower = 0.0;
  double xy_threshold = 0.0, t_threshold = 0.0;
  double L_hat = 0.0;
  bool pessimistic = false;  // general fields: threshold from factor-product bounds
  bool pass = false;
  nlohmann::json to_json() const {
    return {{"xy_lower", xy_lower},         {"t_lower", t_lower},   {"xy_threshold", xy_threshold},
            {"t_threshold", t_threshold},   {"L_hat", L_hat},       {"pessimistic", pessimistic},
            {"pass", pass}};
  }
};

namespace detail {

template <class F>
void sampled_bounds(F&& f, std::size_t out_dim, std::size_t m, std::size_t d_y, double T, const Box& D,
                    std::size_t n_samples, std::uint64_t seed, double& xy, double& tq) {
  Rng rng(seed);
  Vec lo = D.lo, hi = D.hi;
  lo.insert(lo.end(), d_y, -1.0);
  hi.insert(hi.end(), d_y, 1.0);
  const Box xybox(lo, hi);
  const std::size_t batches = 8, per = std::max<std::size_t>(2, n_samples / (2 * batches));
  xy = tq = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const double t = rng.uniform(0.0, T);
    xy = std::max(xy, sampled_lipschitz([&](const double* p, double* o) { f(t, p, p + m, o); }, out_dim, xybox, per,
                                        seed + 17 * b + 1));
    const Vec p = rng.point(xybox);
    tq = std::max(tq, sampled_lipschitz([&](const double* s, double* o) { f(s[0], p.data(), p.data() + m, o); },
                                        out_dim, Box::cube(1, 0.0, T), per, seed + 17 * b + 2));
  }
}

}  // namespace detail

/// Sampled Lipschitz lower bounds in (x, y) (max norm, joint) and in t,
/// against e^{L_hat T} with L_hat = A + 1/T + c3 (1 + A^o) Lambda |omega|_1
/// and A + |omega|_1 delta.
inline LipschitzReport lipschitz_certificate(const CharNetwork& net, std::size_t n_samples, std::uint64_t seed) {
  LipschitzReport r;
  const double T = net.T_hat();
  const double c3 = default_calibration(net.m()).c3;
  if (net.general()) {
    r.pessimistic = true;
    r.L_hat = net.A() + 1.0 / T + c3 * (1.0 + net.A()) * net.L();
    r.t_threshold = net.A() * (1.0 + net.schedule().delta);
  } else {
    r.L_hat = net.A() + 1.0 / T + c3 * (1.0 + net.A_circ()) * net.Lambda() * net.omega1();
    r.t_threshold = net.A() + net.omega1() * net.schedule().delta;
  }
  r.xy_threshold = std::exp(r.L_hat * T);
  detail::sampled_bounds([&](double t, const double* x, const double* y, double* o) { net.eval(t, x, y, o); }, net.m(),
                         net.m(), net.d_y(), T, net.domain(), n_samples, seed, r.xy_lower, r.t_lower);
  r.pass = r.xy_lower <= r.xy_threshold && r.t_lower <= r.t_threshold;
  return r;
}

// ---------------------------------------------------------------------------
// Solution networks

/// Scalar datum d(t, x), x in R^m, with declared bounds.
struct DataFunction {
  std::function<double(double, const double*)> eval;
  double sup = 0.0;
  double lip_x = 0.0;
  double lip_t = 0.0;
  bool zero = false;
  nlohmann::json descriptor;

  static DataFunction none() {
    DataFunction d;
    d.eval = [](double, const double*) { return 0.0; };
    d.zero = true;
    d.descriptor = {{"kind", "zero"}};
    return d;
  }
};

namespace catalog {

inline DataFunction data_constant(double c) {
  DataFunction d;
  d.eval = [c](double, const double*) { return c; };
  d.sup = std::abs(c);
  d.zero = c == 0.0;
  d.descriptor = {{"kind", "constant"}, {"value", c}};
  return d;
}

/// amp max(0, 1 - |x - center|_inf / width).
inline DataFunction data_hat(const Vec& center, double width, double amp = 1.0) {
  require(width > 0.0, "catalog::data_hat: width must be positive");
  DataFunction d;
  d.eval = [=](double, const double* x) {
    double r = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) r = std::max(r, std::abs(x[i] - center[i]));
    return amp * std::max(0.0, 1.0 - r / width);
  };
  d.sup = std::abs(amp);
  d.lip_x = std::abs(amp) / width;
  d.descriptor = {{"kind", "hat"}, {"center", center}, {"width", width}, {"amp", amp}};
  return d;
}

/// base + slope_t t + amp max(0, 1 - |x - center|_inf / width), t in [0, T].
inline DataFunction data_ramp_hat(double base, double slope_t, const Vec& center, double width, double amp,
                                  double T) {
  DataFunction d = data_hat(center, width, amp);
  auto h = d.eval;
  d.eval = [=](double t, const double* x) { return base + slope_t * t + h(t, x); };
  d.sup = std::abs(base) + std::abs(slope_t) * T + std::abs(amp);
  d.lip_t = std::abs(slope_t);
  d.descriptor = {{"kind", "ramp-hat"}, {"base", base}, {"slope_t", slope_t}, {"center", center},
                  {"width", width},     {"amp", amp}};
  return d;
}

inline DataFunction data_from_json(std::size_t m, const nlohmann::json& j, double T) {
  const std::string k = j.at("kind").get<std::string>();
  if (k == "zero") return DataFunction::none();
  if (k == "constant") return data_constant(j.at("value").get<double>());
  if (k == "hat") return data_hat(j.value("center", Vec(m, 0.0)), j.value("width", 1.0), j.value("amp", 1.0));
  if (k == "ramp-hat")
    return data_ramp_hat(j.value("base", 0.0), j.value("slope_t", 0.0), j.value("center", Vec(m, 0.0)),
                         j.value("width", 1.0), j.value("amp", 1.0), T);
  throw InvalidInput("catalog: unknown data kind '" + k + "'");
}

}  // namespace catalog

struct TransportProblem {
  std::shared_ptr<const AffineConvection> conv;
  DataFunction u0 = DataFunction::none();
  DataFunction f = DataFunction::none();
  double T_hat = 1.0;
  Box D;  // supp u0 inside D; x-samples are drawn from D

  /// ||u0|| and ||f|| as used in M: sup and Lipschitz data, for f the
  /// Lipschitz constant along characteristics (L_t + A L_x) included.
  double norm_u0() const { return u0.zero ? 0.0 : std::max(u0.sup, u0.lip_x); }
  double norm_f() const { return f.zero ? 0.0 : std::max({f.sup, f.lip_x, f.lip_t + conv->A() * f.lip_x}); }
  double M() const { return std::max({1.0, norm_u0(), norm_f()}); }

  OracleProblem oracle() const {
    OracleProblem p;
    p.a = conv->field();
    p.m = conv->m();
    auto u = u0.eval;
    p.u0 = [u](const double* x, const double*) { return u(0.0, x); };
    if (!f.zero) {
      auto g = f.eval;
      p.f = [g](double t, const double* x, const double*) { return g(t, x); };
    }
    p.support = Box(Vec(D.lo.size(), -std::numeric_limits<double>::infinity()),
                    Vec(D.lo.size(), std::numeric_limits<double>::infinity()));
    return p;
  }
};

enum class SourceSign { Plus, Minus };

struct SolutionOptions {
  SourceSign sign = SourceSign::Plus;
  double alpha = 0.0;  // growth exponent of the data class; 0 means m + 1
  BuildOptions build;
};

struct SolutionSchedule {
  double eps = 0.0, eps_tilde = 0.0, M = 0.0, alpha = 0.0, beta = 0.0;
  std::size_t q = 0;
  double eta = 0.0;
  double certified = 0.0;  // bound from the declared data and the pieces' accuracies
  nlohmann::json to_json() const {
    return {{"eps", eps}, {"eps_tilde", eps_tilde}, {"M", M},   {"alpha", alpha},
            {"beta", beta}, {"q", q},               {"eta", eta}, {"certified", certified}};
  }
};

inline double beta_of(std::size_t m, double alpha) { return std::max(1.0, double(m + 1) / alpha); }

/// u(t, x, y) ~ N_u0(Z(t, x, y)) + sum_i rho_i(t) N_f(xi_i, Z(t - xi_i, x, y)),
/// Z the backward characteristic network of an autonomous field.
class SolutionNetwork {
 public:
  const CharNetwork& characteristics() const { return back_; }
  const SolutionSchedule& schedule() const { return sched_; }
  const SizeBreakdown& size_breakdown() const { return size_; }
  double size() const { return size_.total(); }
  std::size_t depth() const { return depth_; }
  SourceSign sign() const { return sign_; }
  double T_hat() const { return back_.T_hat(); }
  std::size_t m() const { return back_.m(); }
  std::size_t d_y() const { return back_.d_y(); }

  /// (initial-data part, source sum) at (t, x, y).
  std::pair<double, double> eval_parts(double t, const double* x, const double* y) const {
    const std::size_t m = back_.m();
    thread_local Vec z, r;
    z.resize(m);
    r.resize(sched_.q);
    const double T = back_.T_hat();
    const double tc = std::clamp(t, 0.0, T);
    double u0part = 0.0, src = 0.0;
    if (u0_) {
      back_.eval(tc, x, y, z.data());
      u0part = u0_->eval(z.data());
    }
    if (!f_.empty()) {
      rho_.eval(&tc, r.data());
      const double h = T / double(sched_.q);
      for (std::size_t i = 0; i < sched_.q; ++i) {
        if (r[i] == 0.0) continue;
        back_.eval(tc - (double(i) + 0.5) * h, x, y, z.data());
        src += r[i] * f_[i]->eval(z.data());
      }
    }
    return {u0part, src};
  }

  double eval(double t, const double* x, const double* y) const {
    const auto [a, b] = eval_parts(t, x, y);
    return sign_ == SourceSign::Plus ? a + b : a - b;
  }
  double eval(double t, const Vec& x, const Vec& y) const {
    require(x.size() == m() && y.size() == d_y(), "SolutionNetwork::eval: dimension mismatch");
    return eval(t, x.data(), y.data());
  }

  nlohmann::json report() const {
    return {{"schedule", sched_.to_json()},
            {"characteristics", back_.report()},
            {"size", size_.to_json()},
            {"depth", depth_},
            {"sign", sign_ == SourceSign::Plus ? "plus" : "minus"}};
  }

 private:
  friend SolutionNetwork build_solution_net(const TransportProblem&, double, const SolutionOptions&);
  CharNetwork back_;
  std::shared_ptr<const LipStableNet> u0_;
  std::vector<std::shared_ptr<const LipStableNet>> f_;
  ReluNetwork rho_;
  SolutionSchedule sched_;
  SizeBreakdown size_;
  std::size_t depth_ = 0;
  SourceSign sign_ = SourceSign::Plus;
};

/// eps~ = eps / (7 max(1, T) M), q = ceil(T / (2 eps~)),
/// eta = M^{-1/alpha} eps~^{1 + 1/alpha}; characteristics at accuracy eps~.
inline SolutionNetwork build_solution_net(const TransportProblem& p, double eps, const SolutionOptions& opt = {}) {
  require(p.conv != nullptr, "build_solution_net: problem without convection field");
  require(p.conv->autonomous(), "build_solution_net: only autonomous fields are supported");
  require(eps > 0.0, "build_solution_net: eps must be positive");
  require(p.D.dim() == p.conv->m(), "build_solution_net: domain dimension != m");
  const AffineConvection& a = *p.conv;
  const std::size_t m = a.m();
  SolutionNetwork n;
  n.sign_ = opt.sign;
  SolutionSchedule& s = n.sched_;
  s.eps = eps;
  s.M = p.M();
  s.alpha = opt.alpha > 0.0 ? opt.alpha : double(m + 1);
  s.beta = beta_of(m, s.alpha);
  s.eps_tilde = eps / (7.0 * std::max(1.0, p.T_hat) * s.M);
  s.q = std::max<std::size_t>(1, guarded_ceil(p.T_hat / (2.0 * s.eps_tilde)));
  s.eta = std::min(0.5, std::pow(s.M, -1.0 / s.alpha) * std::pow(s.eps_tilde, 1.0 + 1.0 / s.alpha));
  if (s.q > opt.build.limits.max_q)
    throw ResourceCeiling("build_solution_net: q exceeds the ceiling", double(s.q));

  n.back_ = build_char_net(a, p.D, p.T_hat, s.eps_tilde, Direction::Backward, opt.build);
  // every source term carries its own copy of the characteristic network
  const double copies = p.f.zero ? 1.0 : double(s.q + 1);
  if (copies * n.back_.size() > opt.build.limits.max_weights)
    throw ResourceCeiling("build_solution_net: predicted size exceeds the ceiling", copies * n.back_.size());
  const double infl = n.back_.schedule().inflation + s.eps_tilde;
  const Box box = p.D.inflated(infl);
  const Calibration cal = default_calibration(m);
  std::size_t data_depth = 0;
  if (!p.u0.zero) {
    auto g = p.u0.eval;
    SampledFunction sf = SampledFunction::sample([g](const double* x) { return g(0.0, x); },
                                                 GridSpec(m, required_q(p.u0.lip_x, box, s.eta, cal), box),
                                                 p.u0.lip_x, p.u0.sup);
    sf.fn = nullptr;
    n.u0_ = std::make_shared<const LipStableNet>(lip_stable_net(sf, s.eta, cal));
    n.size_.other += double(n.u0_->report.size);
    data_depth = n.u0_->report.depth;
  }
  n.size_ += n.back_.size_breakdown();
  if (!p.f.zero) {
    const double h = p.T_hat / double(s.q);
    for (std::size_t i = 0; i < s.q; ++i) {
      const double xi = (double(i) + 0.5) * h;
      auto g = p.f.eval;
      SampledFunction sf = SampledFunction::sample([g, xi](const double* x) { return g(xi, x); },
                                                   GridSpec(m, required_q(p.f.lip_x, box, s.eta, cal), box),
                                                   p.f.lip_x, p.f.sup);
      sf.fn = nullptr;
      n.f_.push_back(std::make_shared<const LipStableNet>(lip_stable_net(sf, s.eta, cal)));
      n.size_.other += double(n.f_.back()->report.size);
      data_depth = std::max(data_depth, n.f_.back()->report.depth);
      // each source term reads its own copy of the characteristic network
      n.size_ += n.back_.size_breakdown();
    }
    n.rho_ = rho_gate(0.0, p.T_hat, s.q);
    n.size_.gates += double(n.rho_.size());
    n.size_.multilinear += double(s.q);
  }
  n.depth_ = n.back_.depth() + data_depth + 1;
  // |u - N| <= L0 e~ + eta + T (Lx e~ + eta) + (Lt + A Lx) T^2 / (2q)
  const double T = p.T_hat;
  s.certified = (p.u0.zero ? 0.0 : p.u0.lip_x * s.eps_tilde + s.eta);
  if (!p.f.zero)
    s.certified += T * (p.f.lip_x * s.eps_tilde + s.eta) + (p.f.lip_t + a.A() * p.f.lip_x) * T * T / (2.0 * double(s.q));
  return n;
}

struct SolutionCertificate {
  double eps = 0.0;
  double measured_sup_error = 0.0;
  double oracle_tol = 0.0;
  std::size_t samples = 0;
  bool pass = false;
  nlohmann::json to_json() const {
    return {{"eps", eps}, {"measured_sup_error", measured_sup_error}, {"oracle_tol", oracle_tol},
            {"samples", samples}, {"pass", pass}};
  }
};

/// Sup error against a reference u(t, x, y) on random samples.
template <class Ref>
SolutionCertificate certify_solution(const SolutionNetwork& n, const Box& D, Ref&& reference, std::size_t n_samples,
                                     std::uint64_t seed, double oracle_tol) {
  SolutionCertificate c;
  c.eps = n.schedule().eps;
  c.samples = n_samples;
  c.oracle_tol = oracle_tol;
  require(oracle_tol <= c.eps / 10.0, "certify_solution: oracle tolerance must be at least 10x tighter than eps");
  Rng rng(seed);
  const Box ybox = Box::cube(n.d_y(), -1.0, 1.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const double t = rng.uniform(0.0, n.T_hat());
    const Vec x = rng.point(D), y = rng.point(ybox);
    c.measured_sup_error = std::max(c.measured_sup_error, std::abs(n.eval(t, x, y) - reference(t, x, y)));
  }
  c.pass = c.measured_sup_error <= c.eps;
  return c;
}

/// Reference from the solution oracle (RK4 backward trace + adaptive Simpson).
inline SolutionCertificate certify_solution(const SolutionNetwork& n, const TransportProblem& p, std::size_t n_samples,
                                            std::uint64_t seed) {
  const OracleProblem op = p.oracle();
  OdeConfig cfg;
  cfg.tol = n.schedule().eps / 100.0;
  require_oracle_tolerance(cfg, n.schedule().eps);
  return certify_solution(
      n, p.D, [&](double t, const Vec& x, const Vec& y) { return solution_oracle(op, t, x, y, cfg).value; }, n_samples,
      seed, cfg.tol);
}

/// Sampled Lipschitz bounds of a solution network; thresholds compose the
/// characteristic thresholds with the data interpolants' c3 bounds.
inline LipschitzReport lipschitz_certificate(const SolutionNetwork& n, const TransportProblem& p,
                                             std::size_t n_samples, std::uint64_t seed) {
  const LipschitzReport cr = lipschitz_certificate(n.characteristics(), 16, seed);
  LipschitzReport r;
  r.L_hat = cr.L_hat;
  const double c3 = default_calibration(p.conv->m()).c3;
  const double lu = p.u0.zero ? 0.0 : c3 * (1.0 + p.u0.sup) * p.u0.lip_x;
  const double lf = p.f.zero ? 0.0 : c3 * (1.0 + p.f.sup) * p.f.lip_x;
  const double T = n.T_hat();
  r.xy_threshold = (lu + T * lf) * cr.xy_threshold;
  r.t_threshold = (lu + T * lf) * cr.t_threshold + (p.f.zero ? 0.0 : p.f.sup + n.schedule().eta);
  detail::sampled_bounds([&](double t, const double* x, const double* y, double* o) { *o = n.eval(t, x, y); }, 1,
                         n.m(), n.d_y(), T, p.D, n_samples, seed, r.xy_lower, r.t_lower);
  r.pass = r.xy_lower <= r.xy_threshold && r.t_lower <= r.t_threshold;
  return r;
}

// ---------------------------------------------------------------------------
// Predicted complexity (proportionality constant c, default 1)

/// d_y m^2 A T (e^{LT}/eps)^{m+1} |log2(e^{LT}/eps)|^2.
inline double predicted_char_affine(std::size_t m, std::size_t d_y, double A, double T, double L, double eps,
                                    double c = 1.0) {
  const double r = std::exp(L * T) / eps;
  const double lg = std::log2(r);
  return c * double(d_y) * double(m * m) * A * T * std::pow(r, double(m + 1)) * lg * lg;
}

/// A T 2^s ||a||^{2s} times the algebraic or exponential branch.
inline double predicted_char_general(std::size_t s, double A, double T, double a_norm, const GrowthFunction& gf,
                                     double eps, double c = 1.0) {
  const double r = std::exp(a_norm * T) / eps;
  const double lg = std::abs(std::log2(r));
  const double sd = double(s);
  const double pre = A * T * std::exp2(sd) * std::pow(a_norm, 2.0 * sd);
  if (gf.kind() == GrowthFunction::Kind::Alg)
    return c * pre * std::pow(gf.c(), -1.0 / gf.alpha()) * std::pow(r, (1.0 + sd) * (1.0 + gf.alpha()) / gf.alpha()) *
           lg * lg;
  return c * pre * std::pow(gf.alpha(), -(1.0 + sd)) * std::pow(r, 1.0 + sd) * std::pow(lg, 3.0 + sd);
}

/// B d_y (e^{TL}/eps)^{m+1+beta} |log2(e^{LT}/eps)|^2, beta = max{1, (m+1)/alpha}.
inline double predicted_solution(std::size_t m, std::size_t d_y, double T, double L, double alpha, double eps,
                                 double B = 1.0) {
  const double r = std::exp(L * T) / eps;
  const double lg = std::log2(r);
  return B * double(d_y) * std::pow(r, double(m + 1) + beta_of(m, alpha)) * lg * lg;
}

enum class PredictKind { Char, Solution };

inline double predicted_complexity(const AffineConvection& a, double T, double eps, PredictKind kind,
                                   double alpha = 0.0, double c = 1.0) {
  if (kind == PredictKind::Char) return predicted_char_affine(a.m(), a.d_y(), a.A(), T, a.L(), eps, c);
  return predicted_solution(a.m(), a.d_y(), T, a.L(), alpha > 0.0 ? alpha : double(a.m() + 1), eps, c);
}

// ---------------------------------------------------------------------------
// Compositional representation of an affine field

/// (x, y) -> a(t, x; y) as g2 o g1 with
///   g1: (x, y) -> (y, a_1(t, x), ..., a_{d_y}(t, x)),  a_j = omega_j a_j^o,
///   g2: (y, a_1, ..., a_{d_y}) -> sum_j y_j a_j   (multilinear).
/// box is the x-domain of the generic factor.
inline CompRep affine_field_rep(const AffineConvection& a, double t, const Box& box) {
  require(box.dim() == a.m(), "affine_field_rep: box dimension != m");
  const std::size_t m = a.m(), dy = a.d_y();
  std::vector<Component> comps;
  for (std::size_t j = 0; j < dy; ++j)
    comps.push_back({{m + j}, [](const double* v) { return v[0]; }, 1.0, 1.0});
  for (std::size_t j = 0; j < dy; ++j) {
    const FieldComponent& c = a.components()[j];
    const double w = a.omega()[j];
    for (std::size_t k = 0; k < m; ++k) {
      std::vector<std::size_t> deps(m);
      std::iota(deps.begin(), deps.end(), 0);
      comps.push_back({deps,
                       [c, w, t, m, k](const double* x) {
                         thread_local Vec o;
                         o.resize(m);
                         c.eval(t, x, o.data());
                         return w * o[k];
                       },
                       w * c.lip_x, w * c.sup});
    }
  }
  Vec lo = box.lo, hi = box.hi;
  lo.insert(lo.end(), dy, -1.0);
  hi.insert(hi.end(), dy, 1.0);
  Factor g1 = Factor::generic(m + dy, std::move(comps), Box(lo, hi));
  Factor g2 = Factor::multilinear(
      dy + dy * m, m,
      [dy, m](const double* v, double* o) {
        for (std::size_t k = 0; k < m; ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < dy; ++j) s += v[j] * v[dy + j * m + k];
          o[k] = s;
        }
      },
      a.L());
  return CompRep({g1, g2});
}

}  // namespace ptnet

#endif
