#pragma once

// Damped Newton-Krylov for log Pf(Om~(u)) - log Pf(Om) = f + b, and the
// continuity path f_t = t f + (1 - t) f_0 with f_0 = log Pf(Om_h) - log Pf(Om).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qma/errors.hpp"
#include "qma/krylov.hpp"
#include "qma/ma_operator.hpp"

namespace qma {

struct SolverOptions {
  double newton_tolerance = 1e-11;  // sup-norm of the residual
  int max_newton_iterations = 30;
  double krylov_tolerance = 1e-12;
  int max_krylov_iterations = 300;
  int krylov_restart = 60;
  double damping_shrink = 0.5;
  double min_damping = 1.0 / 1024;
  double initial_dt = 0.1;
  double min_dt = 1e-4;
  double max_dt = 0.5;
  int easy_step_iterations = 3;  // dt doubles after a step this cheap
  std::uint64_t seed = 0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw MalformedInput(std::string("SolverOptions: ") + name + " must be positive");
    };
    positive(newton_tolerance, "newton_tolerance");
    positive(krylov_tolerance, "krylov_tolerance");
    positive(damping_shrink, "damping_shrink");
    positive(min_damping, "min_damping");
    positive(initial_dt, "initial_dt");
    positive(min_dt, "min_dt");
    positive(max_dt, "max_dt");
    if (newton_tolerance >= 1.0 || krylov_tolerance >= 1.0) throw MalformedInput("SolverOptions: tolerances must be < 1");
    if (damping_shrink >= 1.0) throw MalformedInput("SolverOptions: damping_shrink must be < 1");
    if (max_newton_iterations < 1 || max_krylov_iterations < 1 || krylov_restart < 1 || easy_step_iterations < 0)
      throw MalformedInput("SolverOptions: iteration limits must be positive");
    if (min_dt > initial_dt || initial_dt > max_dt) throw MalformedInput("SolverOptions: need min_dt <= initial_dt <= max_dt");
  }

  KrylovOptions krylov() const { return {krylov_tolerance, max_krylov_iterations, krylov_restart}; }
};

struct SolverState {
  double t = 1.0;
  ScalarField u;
  double b = 0.0;
  double cone_margin = 0.0;
  double residual_sup = 0.0;
  int newton_iterations = 0;
  std::vector<TraceRow> trace;
};

/// Per accepted continuity step.
struct StepReport {
  double t = 0.0;
  int newton_iterations = 0;
  double b = 0.0;
  double residual_sup = 0.0;
  double cone_margin = 0.0;
  std::array<double, 3> cherrier{};  // p = 2, 8, 32
};

inline constexpr std::array<double, 3> kCherrierExponents{2.0, 8.0, 32.0};

struct ContinuityResult {
  SolverState state;
  std::vector<StepReport> steps;
  int total_newton_iterations = 0;
  int rejected_steps = 0;
};

inline ScalarField normalize_sup(ScalarField u) { return u - sup(u); }

/// Newton from (u0, b0) on the context's right-hand side. `t` only labels the trace.
inline SolverState newton_solve(const OperatorContext& ctx, ScalarField u0, double b0, const SolverOptions& opts,
                                double t = 1.0) {
  opts.validate();
  SolverState s;
  s.t = t;
  s.u = normalize_sup(std::move(u0));
  s.b = b0;
  Evaluation ev = evaluate(ctx, s.u, s.b);
  if (!ev.inside)
    throw SolverError(SolverError::Kind::StepFailure,
                      "newton_solve: initial state is outside the cone (margin " + std::to_string(ev.cone.margin) + ")");
  s.cone_margin = ev.cone.margin;
  s.residual_sup = sup_norm(ev.residual);
  s.trace.push_back({t, 0, s.residual_sup, s.cone_margin, s.b, 0.0, 0});

  const FieldMap precond = [](const ScalarField& r) { return inverse_half_laplacian(r); };
  while (s.residual_sup >= opts.newton_tolerance) {
    if (s.newton_iterations >= opts.max_newton_iterations)
      throw SolverError(SolverError::Kind::Divergence,
                        "newton_solve: no convergence in " + std::to_string(opts.max_newton_iterations) +
                            " iterations (residual " + std::to_string(s.residual_sup) + ")",
                        s.trace);
    const Linearization lin(ctx, ev.omega_tilde);
    const FieldMap op = [&lin](const ScalarField& v) { return lin.apply(v); };
    // Bordered system: L v - db = -r with mean(v) = 0. The mean-free part
    // fixes v, the mean fixes db.
    const double r_mean = mean(ev.residual);
    KrylovResult kr;
    try {
      kr = krylov_solve(op, -1.0 * (ev.residual - r_mean), precond, opts.krylov());
    } catch (SolverError& e) {
      e.set_trace(s.trace);
      throw;
    }
    const ScalarField& v = kr.x;
    const double db = mean(lin.apply(v)) + r_mean;

    double lambda = 1.0;
    while (true) {
      ScalarField u_try = s.u + lambda * v;
      const double b_try = s.b + lambda * db;
      Evaluation trial = evaluate(ctx, u_try, b_try);
      if (trial.inside) {
        const double res = sup_norm(trial.residual);
        if (res < s.residual_sup) {
          ++s.newton_iterations;
          s.u = normalize_sup(std::move(u_try));
          s.b = b_try;
          s.cone_margin = trial.cone.margin;
          s.residual_sup = res;
          ev = std::move(trial);
          s.trace.push_back({t, s.newton_iterations, res, s.cone_margin, s.b, lambda, kr.iterations});
          break;
        }
      }
      lambda *= opts.damping_shrink;
      if (lambda < opts.min_damping)
        throw SolverError(SolverError::Kind::StepFailure,
                          "newton_solve: damping could not keep the iterate in the cone with a decreasing residual",
                          s.trace);
    }
  }
  return s;
}

/// f_t = t f + (1 - t) f_0.
inline ScalarField path_rhs(const OperatorContext& ctx, double t) {
  const ScalarField f0 = ctx.log_pf_omega_h() - ctx.log_pf_omega();
  return t * ctx.f() + (1.0 - t) * f0;
}

using StepObserver = std::function<void(const StepReport&)>;

inline ContinuityResult continuity_solve(const OperatorContext& ctx, const SolverOptions& opts,
                                         const StepObserver& observer = {}) {
  opts.validate();
  ContinuityResult out;
  std::vector<TraceRow> trace;
  auto record = [&](const SolverState& s, double t) {
    StepReport rep{t, s.newton_iterations, s.b, s.residual_sup, s.cone_margin, {}};
    for (std::size_t i = 0; i < kCherrierExponents.size(); ++i) rep.cherrier[i] = cherrier_ratio(s.u, kCherrierExponents[i]);
    out.steps.push_back(rep);
    if (observer) observer(rep);
  };

  // The start state (0, 0) solves t = 0 exactly; it may already solve t = 1.
  SolverState cur;
  cur.t = 0.0;
  cur.u = ScalarField(ctx.grid());
  {
    const Evaluation ev = evaluate(ctx, cur.u, 0.0);
    cur.cone_margin = ev.cone.margin;
    cur.residual_sup = ev.inside ? sup_norm(ev.residual) : std::numeric_limits<double>::infinity();
    trace.push_back({1.0, 0, cur.residual_sup, cur.cone_margin, 0.0, 0.0, 0});
    if (cur.residual_sup < opts.newton_tolerance) {
      cur.t = 1.0;
      cur.trace = trace;
      out.state = cur;
      record(cur, 1.0);
      return out;
    }
  }

  double dt = opts.initial_dt;
  while (cur.t < 1.0) {
    const double t_next = std::min(1.0, cur.t + dt);
    const OperatorContext step_ctx = ctx.with_rhs(path_rhs(ctx, t_next));
    try {
      SolverState next = newton_solve(step_ctx, cur.u, cur.b, opts, t_next);
      out.total_newton_iterations += next.newton_iterations;
      trace.insert(trace.end(), next.trace.begin(), next.trace.end());
      if (next.newton_iterations <= opts.easy_step_iterations) dt = std::min(2.0 * dt, opts.max_dt);
      cur = std::move(next);
      record(cur, t_next);
    } catch (const SolverError& e) {
      out.total_newton_iterations += std::max(0, static_cast<int>(e.trace().size()) - 1);
      trace.insert(trace.end(), e.trace().begin(), e.trace().end());
      ++out.rejected_steps;
      dt *= 0.5;
      if (dt < opts.min_dt)
        throw SolverError(SolverError::Kind::ContinuationFailure,
                          "continuity_solve: t-step fell below " + std::to_string(opts.min_dt) + " at t = " +
                              std::to_string(cur.t) + " (" + e.what() + ")",
                          trace);
    }
  }
  cur.trace = std::move(trace);
  out.state = std::move(cur);
  return out;
}

}  // namespace qma
