// Solution network for u_t + a . grad u = f with a hat initial profile,
// checked against the characteristic-integral oracle.

#include <cstdio>

#include "ptnet/transport.hpp"

using namespace ptnet;

int main() {
  TransportProblem p;
  p.conv = std::make_shared<AffineConvection>(
      1, Vec{0.5, 0.5}, std::vector<FieldComponent>{catalog::cosine(1, 1.0, 0.5), catalog::bump(1, 1.0, {0.2}, 2.0)},
      Box({0.0, -3.0}, {0.5, 3.0}));
  p.u0 = catalog::data_hat({0.0}, 0.8);
  p.f = catalog::data_hat({0.0}, 1.5, 0.9);
  p.T_hat = 0.5;
  p.D = Box::cube(1, -1.0, 1.0);

  const double eps = 0.1;
  const SolutionNetwork n = build_solution_net(p, eps);
  std::printf("eps = %g: size %.4g, depth %zu\n", eps, n.size(), n.depth());
  const OracleProblem op = p.oracle();
  OdeConfig cfg;
  cfg.tol = 1e-6;
  const Vec y{0.3, -0.7};
  for (double t : {0.0, 0.25, 0.5})
    for (double x0 : {-0.5, 0.0, 0.5}) {
      const Vec x{x0};
      const double u = n.eval(t, x, y), ref = solution_oracle(op, t, x, y, cfg).value;
      std::printf("  t = %.2f x = %5.2f: net %.5f oracle %.5f diff %.1e\n", t, x0, u, ref, std::abs(u - ref));
    }
  const SolutionCertificate c = certify_solution(n, p, 200, 1);
  std::printf("sampled sup error %.3e over %zu points: %s\n", c.measured_sup_error, c.samples,
              c.pass ? "within eps" : "EXCEEDS eps");
}
