#ifndef PTNET_COMMON_HPP
#define PTNET_COMMON_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptnet {

using Vec = std::vector<double>;

/// Raised when an input violates an operation's precondition.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a build would exceed the configured resource ceiling.
struct ResourceCeiling : std::runtime_error {
  double predicted_cost;
  ResourceCeiling(const std::string& what, double cost)
      : std::runtime_error(what), predicted_cost(cost) {}
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double norm_inf(const double* v, std::size_t n) {
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::abs(v[i]));
  return r;
}

inline double norm_inf(const Vec& v) { return norm_inf(v.data(), v.size()); }

inline double dist_inf(const Vec& a, const Vec& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

/// Axis-aligned box [lo_0,hi_0] x ... x [lo_{n-1},hi_{n-1}].
struct Box {
  Vec lo, hi;

  Box() = default;
  Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
    require(lo.size() == hi.size(), "Box: lo/hi dimension mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
      require(lo[i] <= hi[i], "Box: lo > hi");
  }
  static Box cube(std::size_t dim, double a, double b) { return Box(Vec(dim, a), Vec(dim, b)); }

  std::size_t dim() const { return lo.size(); }
  double width(std::size_t i) const { return hi[i] - lo[i]; }
  double max_width() const {
    double w = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) w = std::max(w, width(i));
    return w;
  }
  bool degenerate() const {
    if (dim() == 0) return true;
    for (std::size_t i = 0; i < dim(); ++i)
      if (!(width(i) > 0.0)) return true;
    return false;
  }
  Box inflated(double r) const {
    Box b = *this;
    for (std::size_t i = 0; i < dim(); ++i) {
      b.lo[i] -= r;
      b.hi[i] += r;
    }
    return b;
  }
  bool contains(const double* x, double tol = 0.0) const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
  }
};

/// Seeded generator with a portable uniform mapping so sampled
/// experiments are byte-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  std::uint64_t next() { return eng_(); }
  Vec point(const Box& box) {
    Vec x(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) x[i] = uniform(box.lo[i], box.hi[i]);
    return x;
  }

 private:
  std::mt19937_64 eng_;
};

/// ceil with a relative guard so exact integers produced by rounding
/// (e.g. ln(e^2) = 2.0000000000000004) are not pushed up by one.
inline std::size_t guarded_ceil(double v) {
  const double g = v - 1e-12 * std::max(1.0, std::abs(v));
  const double c = std::ceil(g);
  return c < 0.0 ? 0 : static_cast<std::size_t>(c);
}

}  // namespace ptnet

#endif
