// Solves the equation for a small right-hand side on an 8x8 slice of the
// n = 2 torus, then prints the constant b and a few path samples.

#include <cmath>
#include <cstdio>
#include <numbers>

#include "qma/qma.hpp"

int main() {
  using namespace qma;
  const TorusGrid g = TorusGrid::with_active(2, {{0, 8}, {1, 8}});
  const ScalarField f = ScalarField::sample(g, [](auto t) {
    return 0.2 * std::cos(2 * std::numbers::pi * t[0]) + 0.1 * std::sin(2 * std::numbers::pi * (t[0] + t[1]));
  });
  const std::array<double, 2> lambda{1.0, 1.5};
  const OperatorContext ctx = OperatorContext::diagonal(g, lambda, f);

  const ContinuityResult r = continuity_solve(ctx, {}, [](const StepReport& s) {
    std::printf("t=%.4f newton=%d b=%+.6f margin=%.4f\n", s.t, s.newton_iterations, s.b, s.cone_margin);
  });
  const auto [lo, hi] = b_bracket(ctx);
  std::printf("b = %.12f in [%.6f, %.6f], residual %.2e, inf u = %.6f\n", r.state.b, lo, hi, r.state.residual_sup,
              inf(r.state.u));
  return 0;
}
