#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qma/solver.hpp"
#include "trig_poly.hpp"

using namespace qma;
using qma::testing::random_trig;

namespace {

constexpr double pi = std::numbers::pi;

TorusGrid grid16() { return TorusGrid::with_active(2, {{0, 16}, {1, 16}}); }

// Right-hand side manufactured from u*: f* = log Pf(Om~(u*)) - log Pf(Om), b* = 0.
OperatorContext manufactured(const Form2Field& omega_h, const ScalarField& u_star) {
  const OperatorContext base(omega_h, ScalarField(u_star.grid));
  const ScalarField f = log_pfaffian_field(omega_tilde(base, u_star)) - base.log_pf_omega();
  return base.with_rhs(f);
}

}  // namespace

TEST(SolverOptions, Validation) {
  SolverOptions o;
  EXPECT_NO_THROW(o.validate());
  o.newton_tolerance = 2.0;
  EXPECT_THROW(o.validate(), MalformedInput);
  o = {};
  o.damping_shrink = 1.0;
  EXPECT_THROW(o.validate(), MalformedInput);
  o = {};
  o.min_dt = 0.2;
  EXPECT_THROW(o.validate(), MalformedInput);
}

TEST(NewtonSolve, ExactInitialStateTakesNoSteps) {
  const TorusGrid g = grid16();
  const auto u_star = ScalarField::sample(g, [](auto t) { return 0.05 * std::sin(2 * pi * t[0]) * std::cos(2 * pi * t[1]); });
  const OperatorContext ctx = manufactured(Form2Field::constant(g, QForm2::standard(2)), u_star);
  const SolverState s = newton_solve(ctx, u_star, 0.0, {});
  EXPECT_EQ(s.newton_iterations, 0);
  EXPECT_LT(sup_norm(s.u - normalize_sup(u_star)), 1e-15);
  EXPECT_EQ(s.b, 0.0);
  EXPECT_EQ(s.trace.size(), 1u);
}

TEST(NewtonSolve, ManufacturedSolutionQuadraticDecay) {
  const TorusGrid g = grid16();
  const auto u_star = ScalarField::sample(g, [](auto t) { return 0.05 * std::sin(2 * pi * t[0]) * std::cos(2 * pi * t[1]); });
  const OperatorContext ctx = manufactured(Form2Field::constant(g, QForm2::standard(2)), u_star);
  const SolverState s = newton_solve(ctx, ScalarField(g), 0.0, {});
  EXPECT_LE(s.newton_iterations, 8);
  EXPECT_LT(s.residual_sup, 1e-11);
  EXPECT_LT(sup_norm(s.u - normalize_sup(u_star)), 1e-7);
  EXPECT_LT(std::abs(s.b), 1e-7);
  EXPECT_EQ(sup(s.u), 0.0);
  // Monotone decrease of accepted residuals, and a quadratic tail.
  for (std::size_t i = 1; i < s.trace.size(); ++i) EXPECT_LT(s.trace[i].residual_sup, s.trace[i - 1].residual_sup);
  std::vector<double> logs;
  for (const auto& row : s.trace)
    if (row.residual_sup > 1e-13) logs.push_back(std::log10(row.residual_sup));
  ASSERT_GE(logs.size(), 3u);
  const std::size_t k = logs.size() - 1;
  EXPECT_LT((logs[k] - logs[k - 1]) - (logs[k - 1] - logs[k - 2]), 0.0);
}

TEST(NewtonSolve, ManufacturedSolutionNonFlatOmegaH) {
  Rng rng(5);
  const TorusGrid g = TorusGrid::with_active(3, {{0, 8}, {1, 8}, {6, 8}});
  const ScalarField u_star = random_trig(rng, g, 4, 0.004, 1).sample(g);
  const OperatorContext ctx = manufactured(Form2Field::constant(g, random_positive(rng, 3, 0.5)), u_star);
  const SolverState s = newton_solve(ctx, ScalarField(g), 0.0, {});
  EXPECT_LT(sup_norm(s.u - normalize_sup(u_star)), 1e-8);
  EXPECT_LT(std::abs(s.b), 1e-9);
}

TEST(NewtonSolve, StiffRightHandSideForcesDamping) {
  // Large f from a flat start: the full Newton step leaves the cone.
  const TorusGrid g = TorusGrid::with_active(2, {{0, 16}, {1, 16}});
  const auto f = ScalarField::sample(g, [](auto t) { return 1.5 * std::sin(2 * pi * t[0]) + 1.0 * std::cos(2 * pi * t[1]); });
  const OperatorContext ctx(Form2Field::constant(g, QForm2::standard(2)), f);
  SolverOptions opts;
  opts.max_newton_iterations = 60;
  const SolverState s = newton_solve(ctx, ScalarField(g), 0.0, opts);
  bool damped = false;
  for (const auto& row : s.trace) {
    EXPECT_GT(row.cone_margin, kConeTolerance);
    if (row.iteration > 0 && row.damping < 1.0) damped = true;
  }
  EXPECT_TRUE(damped);
  EXPECT_LT(s.residual_sup, opts.newton_tolerance);
}

TEST(NewtonSolve, DivergenceCarriesTrace) {
  const TorusGrid g = grid16();
  const auto f = ScalarField::sample(g, [](auto t) { return 0.3 * std::sin(2 * pi * t[0]); });
  const OperatorContext ctx(Form2Field::constant(g, QForm2::standard(2)), f);
  SolverOptions opts;
  opts.max_newton_iterations = 1;
  try {
    (void)newton_solve(ctx, ScalarField(g), 0.0, opts);
    FAIL() << "expected divergence";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverError::Kind::Divergence);
    EXPECT_EQ(e.trace().size(), 2u);
  }
}

TEST(ContinuitySolve, TargetEqualToStartReturnsZero) {
  const TorusGrid g = grid16();
  const std::array<double, 2> lam{1.0, 1.5};
  const OperatorContext ctx = OperatorContext::diagonal(g, lam, ScalarField(g, std::log(1.5)));
  const ContinuityResult r = continuity_solve(ctx, {});
  EXPECT_EQ(r.total_newton_iterations, 0);
  EXPECT_EQ(sup_norm(r.state.u), 0.0);
  EXPECT_EQ(r.state.b, 0.0);
  EXPECT_EQ(r.state.t, 1.0);
}

TEST(ContinuitySolve, FlatOmegaHRandomRhsLandsInBracket) {
  Rng rng(7);
  const TorusGrid g = grid16();
  ScalarField f = random_trig(rng, g, 6, 1.0, 2).sample(g);
  f *= 0.2 / sup_norm(f);
  const OperatorContext ctx(Form2Field::constant(g, QForm2::standard(2)), f);
  const ContinuityResult r = continuity_solve(ctx, {});
  EXPECT_EQ(r.state.t, 1.0);
  EXPECT_LT(sup_norm(log_residual(ctx, r.state.u, r.state.b)), 1e-10);
  const auto [lo, hi] = b_bracket(ctx);
  EXPECT_GE(r.state.b, lo);
  EXPECT_LE(r.state.b, hi);
  EXPECT_EQ(sup(r.state.u), 0.0);
  for (const auto& step : r.steps) {
    EXPECT_GT(step.cone_margin, 0.0);
    for (double c : step.cherrier) EXPECT_TRUE(std::isfinite(c));
  }
  for (std::size_t i = 1; i < r.steps.size(); ++i) EXPECT_GT(r.steps[i].t, r.steps[i - 1].t);
}

TEST(ContinuitySolve, DeterministicTraces) {
  Rng rng(8);
  const TorusGrid g = grid16();
  ScalarField f = random_trig(rng, g, 6, 0.1, 2).sample(g);
  const std::array<double, 2> lam{1.0, 1.5};
  const OperatorContext ctx = OperatorContext::diagonal(g, lam, f);
  const ContinuityResult a = continuity_solve(ctx, {});
  const ContinuityResult b = continuity_solve(ctx, {});
  ASSERT_EQ(a.state.trace.size(), b.state.trace.size());
  for (std::size_t i = 0; i < a.state.trace.size(); ++i) {
    EXPECT_EQ(a.state.trace[i].residual_sup, b.state.trace[i].residual_sup);
    EXPECT_EQ(a.state.trace[i].b, b.state.trace[i].b);
  }
  EXPECT_EQ(a.state.u.values, b.state.u.values);
}

TEST(ContinuitySolve, UnreachableTargetFailsWithPartialTrace) {
  const TorusGrid g = grid16();
  const auto f = ScalarField::sample(g, [](auto t) { return 30.0 * std::sin(2 * pi * t[0]); });
  const OperatorContext ctx(Form2Field::constant(g, QForm2::standard(2)), f);
  SolverOptions opts;
  opts.max_newton_iterations = 4;
  opts.min_dt = 0.02;
  try {
    (void)continuity_solve(ctx, opts);
    FAIL() << "expected continuation failure";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverError::Kind::ContinuationFailure);
    EXPECT_FALSE(e.trace().empty());
  }
}
