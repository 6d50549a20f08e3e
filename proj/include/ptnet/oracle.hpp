#ifndef PTNET_ORACLE_HPP
#define PTNET_ORACLE_HPP

#include <functional>

#include "common.hpp"

namespace ptnet {

/// a(t, x, y) -> out (length m).
using FieldFn = std::function<void(double, const double*, const double*, double*)>;

struct OdeConfig {
  std::size_t steps = 16;  // initial step count
  double tol = 1e-10;      // target for the step-doubling error estimate
  bool richardson = true;  // double steps until the estimate meets tol
  std::size_t max_steps = std::size_t{1} << 18;
};

struct OdeResult {
  Vec z;
  double err_est = 0.0;
  std::size_t steps = 0;
};

/// Rejects oracle settings that are not 10x tighter than the certificate.
inline void require_oracle_tolerance(const OdeConfig& cfg, double certificate) {
  require(cfg.steps >= 4, "oracle: step count must be >= 4");
  require(cfg.tol <= certificate / 10.0, "oracle: tolerance must be at least 10x tighter than the certificate");
}

namespace detail {

inline void check_finite(const Vec& v) {
  for (double c : v)
    if (!std::isfinite(c)) throw InvalidInput("oracle: nonfinite field value");
}

/// Classical RK4 with n equal steps; optionally records states and slopes.
inline Vec rk4_fixed(const FieldFn& a, std::size_t m, double t0, double t1, Vec z, const Vec& y, std::size_t n,
                     std::vector<Vec>* states = nullptr, std::vector<Vec>* slopes = nullptr) {
  const double h = (t1 - t0) / static_cast<double>(n);
  Vec k1(m), k2(m), k3(m), k4(m), tmp(m);
  if (states) {
    states->assign(1, z);
    slopes->clear();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    a(t, z.data(), y.data(), k1.data());
    check_finite(k1);
    if (slopes) slopes->push_back(k1);
    for (std::size_t c = 0; c < m; ++c) tmp[c] = z[c] + 0.5 * h * k1[c];
    a(t + 0.5 * h, tmp.data(), y.data(), k2.data());
    for (std::size_t c = 0; c < m; ++c) tmp[c] = z[c] + 0.5 * h * k2[c];
    a(t + 0.5 * h, tmp.data(), y.data(), k3.data());
    for (std::size_t c = 0; c < m; ++c) tmp[c] = z[c] + h * k3[c];
    a(t + h, tmp.data(), y.data(), k4.data());
    check_finite(k4);
    for (std::size_t c = 0; c < m; ++c) z[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    if (states) states->push_back(z);
  }
  if (slopes) {
    Vec kend(m);
    a(t1, z.data(), y.data(), kend.data());
    slopes->push_back(kend);
  }
  return z;
}

}  // namespace detail

/// Endpoint z(t1) of z' = a(t, z; y), z(t0) = x; t1 < t0 integrates backward.
/// The error estimate is |z_2n - z_n|_inf / 15.
inline OdeResult rk4_char(const FieldFn& a, std::size_t m, double t0, double t1, const Vec& x, const Vec& y,
                          const OdeConfig& cfg = {}) {
  require(x.size() == m, "rk4_char: x dimension != m");
  require(cfg.steps >= 4, "rk4_char: step count must be >= 4");
  OdeResult r;
  if (t0 == t1) {
    r.z = x;
    return r;
  }
  std::size_t n = cfg.steps;
  Vec zn = detail::rk4_fixed(a, m, t0, t1, x, y, n);
  while (true) {
    Vec z2 = detail::rk4_fixed(a, m, t0, t1, x, y, 2 * n);
    r.err_est = dist_inf(z2, zn) / 15.0;
    r.z = std::move(z2);
    r.steps = 2 * n;
    if (!cfg.richardson || r.err_est <= cfg.tol || 2 * n >= cfg.max_steps) break;
    zn = r.z;
    n *= 2;
  }
  return r;
}

/// RK4 trajectory with cubic Hermite dense output.
class Trajectory {
 public:
  Trajectory(double t0, double t1, std::vector<Vec> states, std::vector<Vec> slopes, double err_est)
      : t0_(t0), t1_(t1), z_(std::move(states)), f_(std::move(slopes)), err_(err_est) {}

  double t_begin() const { return t0_; }
  double t_end() const { return t1_; }
  double err_est() const { return err_; }
  std::size_t steps() const { return z_.size() - 1; }

  Vec operator()(double t) const {
    const std::size_t n = steps();
    const double h = (t1_ - t0_) / static_cast<double>(n);
    double s = (t - t0_) / h;
    s = std::clamp(s, 0.0, static_cast<double>(n));
    std::size_t i = std::min<std::size_t>(n - 1, static_cast<std::size_t>(s));
    const double th = s - static_cast<double>(i);
    const double h00 = (1 + 2 * th) * (1 - th) * (1 - th), h10 = th * (1 - th) * (1 - th);
    const double h01 = th * th * (3 - 2 * th), h11 = th * th * (th - 1);
    Vec out(z_[0].size());
    for (std::size_t c = 0; c < out.size(); ++c)
      out[c] = h00 * z_[i][c] + h10 * h * f_[i][c] + h01 * z_[i + 1][c] + h11 * h * f_[i + 1][c];
    return out;
  }

 private:
  double t0_, t1_;
  std::vector<Vec> z_, f_;
  double err_;
};

inline Trajectory rk4_dense(const FieldFn& a, std::size_t m, double t0, double t1, const Vec& x, const Vec& y,
                            const OdeConfig& cfg = {}) {
  require(t0 != t1, "rk4_dense: empty interval");
  const OdeResult r = rk4_char(a, m, t0, t1, x, y, cfg);
  std::vector<Vec> states, slopes;
  detail::rk4_fixed(a, m, t0, t1, x, y, r.steps, &states, &slopes);
  return Trajectory(t0, t1, std::move(states), std::move(slopes), r.err_est);
}

/// Adaptive Simpson quadrature of g over [a, b] to absolute tolerance tol.
template <class G>
double adaptive_simpson(G&& g, double a, double b, double tol, int max_depth = 40) {
  struct Rec {
    static double run(G& g, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
      const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = g(lm), frm = g(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double diff = left + right - whole;
      if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
      return run(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + run(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
  };
  if (a == b) return 0.0;
  const double fa = g(a), fb = g(b), fm = g(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Rec::run(g, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Transport problem data seen by the oracle. u0 is extended by zero
/// outside `support`.
struct OracleProblem {
  FieldFn a;
  std::size_t m = 1;
  std::function<double(const double*, const double*)> u0;        // (x, y)
  std::function<double(double, const double*, const double*)> f;  // (t, x, y); empty means 0
  Box support;
};

struct OracleValue {
  double value = 0.0;
  bool out_of_support = false;
  double err_est = 0.0;
};

/// u(t, x, y) = u0(z(0; t, x), y) + int_0^t f(s, z(s; t, x), y) ds with z the
/// characteristic through (t, x), traced backward.
inline OracleValue solution_oracle(const OracleProblem& p, double t, const Vec& x, const Vec& y,
                                   const OdeConfig& cfg = {}) {
  OracleValue out;
  if (t == 0.0) {
    out.out_of_support = !p.support.contains(x.data());
    out.value = out.out_of_support ? 0.0 : p.u0(x.data(), y.data());
    return out;
  }
  const Trajectory tr = rk4_dense(p.a, p.m, t, 0.0, x, y, cfg);
  const Vec foot = tr(0.0);
  out.err_est = tr.err_est();
  out.out_of_support = !p.support.contains(foot.data());
  out.value = out.out_of_support ? 0.0 : p.u0(foot.data(), y.data());
  if (p.f) {
    auto g = [&](double s) {
      const Vec z = tr(s);
      return p.f(s, z.data(), y.data());
    };
    out.value += adaptive_simpson(g, 0.0, t, cfg.tol);
  }
  return out;
}

/// Closed forms for fields that do not depend on (t, x): z = x + (t - t0) c(y)
/// and, for f = 0, u(t, x, y) = u0(x - t c(y), y).
class ExactConst {
 public:
  using ValueFn = std::function<Vec(const Vec&)>;
  explicit ExactConst(ValueFn c) : c_(std::move(c)) {}

  Vec z(double t, const Vec& x, const Vec& y, double t0 = 0.0) const {
    const Vec c = c_(y);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + (t - t0) * c[i];
    return out;
  }
  double u(const std::function<double(const double*, const double*)>& u0, double t, const Vec& x, const Vec& y) const {
    const Vec foot = z(0.0, x, y, t);
    return u0(foot.data(), y.data());
  }

 private:
  ValueFn c_;
};

/// Builds the closed form after checking on samples that the field does not
/// vary with (t, x).
inline ExactConst exact_const(const FieldFn& a, std::size_t m, std::size_t d_y, const Box& tx_box,
                              std::size_t samples = 64, std::uint64_t seed = 1) {
  require(tx_box.dim() == m + 1, "exact_const: box must cover (t, x)");
  Rng rng(seed);
  const Box ybox = Box::cube(d_y, -1.0, 1.0);
  Vec ref(m), v(m);
  for (std::size_t k = 0; k < samples; ++k) {
    const Vec y = rng.point(ybox);
    Vec p0 = rng.point(tx_box), p1 = rng.point(tx_box);
    a(p0[0], p0.data() + 1, y.data(), ref.data());
    a(p1[0], p1.data() + 1, y.data(), v.data());
    if (dist_inf(ref, v) > 1e-14 * (1.0 + norm_inf(ref))) throw InvalidInput("exact_const: field is not constant in (t, x)");
  }
  return ExactConst([a, m, t = tx_box.lo[0], x0 = Vec(tx_box.lo.begin() + 1, tx_box.lo.end())](const Vec& y) {
    Vec c(m);
    a(t, x0.data(), y.data(), c.data());
    return c;
  });
}

}  // namespace ptnet

#endif
