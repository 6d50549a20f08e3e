// Builds characteristic networks for a four-parameter cosine field and
// compares them with an RK4 trace at a few points.

#include <cstdio>

#include "ptnet/transport.hpp"

using namespace ptnet;

int main() {
  std::vector<FieldComponent> comps;
  for (int j = 0; j < 4; ++j) comps.push_back(catalog::cosine(1, 1.0, 0.1, 0.7 * j, j % 2 == 0 ? 0.0 : 1.5));
  const AffineConvection a(1, Vec(4, 0.25), std::move(comps), Box({0.0, -3.0}, {1.0, 3.0}));
  const Box D = Box::cube(1, -1.0, 1.0);
  std::printf("%s\nA = %g, L = %g\n", a.describe().dump().c_str(), a.A(), a.L());

  for (double eps : {0.1, 0.05}) {
    const CharNetwork n = build_char_net(a, D, 1.0, eps, Direction::Forward);
    std::printf("\neps = %g: size %.4g, depth %zu, %zu slabs\n", eps, n.size(), n.depth(), n.grid().K);
    const Vec y{0.9, -0.4, 0.2, 1.0};
    for (double x0 : {-0.8, 0.0, 0.6}) {
      const Vec x{x0};
      const double t = 1.0;
      const Vec z = rk4_char(a.field(), 1, 0.0, t, x, y, OdeConfig{}).z;
      std::printf("  x = %5.2f: net %.6f, rk4 %.6f, diff %.2e\n", x0, n.eval(t, x, y)[0], z[0],
                  std::abs(n.eval(t, x, y)[0] - z[0]));
    }
    const CharCertificate c = certify_char(n, 500, 1);
    std::printf("  sampled sup error %.3e over %zu points: %s\n", c.measured_sup_error, c.samples,
                c.pass ? "within eps" : "EXCEEDS eps");
  }
}
