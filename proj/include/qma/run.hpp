#pragma once

// The four batch modes behind the CLI. Every run writes summary.json; solver
// modes also write trace.csv and steps.csv, flushed as the run progresses so a
// failure leaves the partial record behind.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "qma/balanced.hpp"
#include "qma/config.hpp"
#include "qma/field_io.hpp"
#include "qma/identities.hpp"
#include "qma/solver.hpp"

namespace qma {

enum ExitCode : int { kExitOk = 0, kExitVerification = 1, kExitConfig = 2, kExitSolver = 3, kExitIo = 4 };

struct RunOutcome {
  int exit_code = kExitOk;
  nlohmann::json summary;
};

inline nlohmann::json conventions_json() {
  return {
      {"coordinates", "t in [0,1)^{4n}; z^j = t_j + i t_{2n+j}; row-major, t_0 slowest"},
      {"omega", "Om = sum_i dz^{2i} ^ dz^{2i+1}"},
      {"j_action", "J dz^{2i} = -conj(dz^{2i+1}), J dz^{2i+1} = conj(dz^{2i})"},
      {"pfaffian", "alpha^n = n! Pf(alpha) dz^0 ^ ... ^ dz^{2n-1}"},
      {"star", "antilinear; (n-1)! *Om_h = Om_0^{n-1}"},
      {"laplacian", "Delta = (1/2) sum_d d^2/dt_d^2; S_1(dd_J u) = Delta u / 2"},
      {"equation", "log Pf(Om_h + (S_1(dd_J u) Om - dd_J u)/(n-1)) - log Pf(Om) = f + b"},
      {"normalization", "sup u = 0"},
      {"cherrier", "int |d e^{-pu/2}|^2 / (p int e^{-pu}), |dw|^2 = |dw|_g^2 / 2"},
  };
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Appends rows as they arrive so that a crash leaves a readable prefix.
class CsvLog {
 public:
  CsvLog(const std::filesystem::path& path, const std::string& header) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path.string());
    out_ << header << '\n';
    out_.flush();
  }
  void row(const std::vector<double>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << num(cols[i]);
    out_ << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline constexpr const char* kTraceHeader = "t,iter,residual_sup,cone_margin,b,damping,krylov_iters";
inline constexpr const char* kStepsHeader = "t,newton_iters,b,residual_sup,cone_margin,cherrier_p2,cherrier_p8,cherrier_p32";

inline void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  CsvLog log(path, kTraceHeader);
  for (const auto& r : trace)
    log.row({r.t, double(r.iteration), r.residual_sup, r.cone_margin, r.b, r.damping, double(r.krylov_iterations)});
}

inline nlohmann::json cherrier_json(const std::array<double, 3>& c) {
  return {{"p2", c[0]}, {"p8", c[1]}, {"p32", c[2]}};
}

inline std::array<double, 3> cherrier_samples(const ScalarField& u) {
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < kCherrierExponents.size(); ++i) out[i] = cherrier_ratio(u, kCherrierExponents[i]);
  return out;
}

/// Om_h from whichever side the config specifies, with the direction recorded.
inline Form2Field resolve_omega_h(const RunConfig& c, const TorusGrid& g, nlohmann::json& summary) {
  if (c.omega_h) {
    summary["direction"] = "omega_h given";
    return build_form(*c.omega_h, g);
  }
  summary["direction"] = "omega_0 -> omega_h, (n-1)! *Om_h = Om_0^{n-1}; balanced condition on Om_0 is assumed";
  return omega_h_from_balanced(build_form(*c.omega_0, g));
}

/// Om_0 with Om_0^{n-1} = (n-1)! *Om_h.
inline Form2Field resolve_omega_0(const RunConfig& c, const TorusGrid& g, nlohmann::json& summary) {
  if (c.omega_0) {
    summary["direction"] = "omega_0 given; balanced condition assumed";
    return build_form(*c.omega_0, g);
  }
  summary["direction"] = "omega_h -> omega_0 as the positive (n-1)-th root";
  const Form2Field h = build_form(*c.omega_h, g);
  require_cone(h, "omega_h", 0.0);
  Form2Field out(g, QForm2(g.n()));
  parallel_for(g.points(), [&](std::size_t p) { out[p] = positive_root(QForm2n2(h[p])); });
  return out;
}

inline ContinuityResult solve_with_steps(const OperatorContext& ctx, const RunConfig& c, nlohmann::json& summary) {
  CsvLog steps(c.out / "steps.csv", kStepsHeader);
  nlohmann::json& path = summary["path"] = nlohmann::json::array();
  return continuity_solve(ctx, c.solver, [&](const StepReport& s) {
    steps.row({s.t, double(s.newton_iterations), s.b, s.residual_sup, s.cone_margin, s.cherrier[0], s.cherrier[1], s.cherrier[2]});
    path.push_back({{"t", s.t}, {"newton_iterations", s.newton_iterations}, {"b", s.b}, {"residual_sup", s.residual_sup},
                    {"cone_margin", s.cone_margin}, {"cherrier", cherrier_json(s.cherrier)}});
  });
}

inline nlohmann::json solver_json(const SolverOptions& o) {
  return {{"newton_tolerance", o.newton_tolerance}, {"max_newton_iterations", o.max_newton_iterations},
          {"krylov_tolerance", o.krylov_tolerance}, {"max_krylov_iterations", o.max_krylov_iterations},
          {"krylov_restart", o.krylov_restart},     {"damping_shrink", o.damping_shrink},
          {"min_damping", o.min_damping},           {"initial_dt", o.initial_dt},
          {"min_dt", o.min_dt},                     {"max_dt", o.max_dt},
          {"easy_step_iterations", o.easy_step_iterations}};
}

inline int run_solve(const RunConfig& c, nlohmann::json& s) {
  const TorusGrid g(c.n, c.sizes);
  const OperatorContext ctx(resolve_omega_h(c, g, s), build_field(c.f, g, c.seed));
  const auto [lo, hi] = b_bracket(ctx);
  s["b_bracket"] = {lo, hi};
  const ContinuityResult r = solve_with_steps(ctx, c, s);
  write_trace(c.out / "trace.csv", r.state.trace);
  write_dump(c.out / "u.qma", to_dump(r.state.u));
  const double res = sup_norm(log_residual(ctx, r.state.u, r.state.b));
  const bool in_bracket = r.state.b >= lo && r.state.b <= hi;
  s["result"] = {{"b", r.state.b},
                 {"residual_sup", res},
                 {"b_in_bracket", in_bracket},
                 {"cone_margin", r.state.cone_margin},
                 {"u_sup_norm", sup_norm(r.state.u)},
                 {"newton_iterations", r.total_newton_iterations},
                 {"continuation_steps", r.steps.size()},
                 {"rejected_steps", r.rejected_steps},
                 {"cherrier", cherrier_json(cherrier_samples(r.state.u))}};
  const bool ok = res < c.solver.newton_tolerance && in_bracket && r.state.cone_margin > 0.0;
  s["passed"] = ok;
  return ok ? kExitOk : kExitVerification;
}

inline int run_mms(const RunConfig& c, nlohmann::json& s) {
  const TorusGrid g(c.n, c.sizes);
  const OperatorContext base(resolve_omega_h(c, g, s), ScalarField(g));
  const ScalarField u_star = build_field(c.u_star, g, c.seed);
  const Form2Field om_star = omega_tilde(base, u_star);
  require_cone(om_star, "u_star is not admissible: Om~(u_star)");
  const OperatorContext ctx = base.with_rhs(log_pfaffian_field(om_star) - base.log_pf_omega());
  const SolverState st = newton_solve(ctx, ScalarField(g), 0.0, c.solver);
  write_trace(c.out / "trace.csv", st.trace);
  write_dump(c.out / "u.qma", to_dump(st.u));
  const ScalarField err = st.u - normalize_sup(u_star);
  double l2 = 0.0;
  for (double e : err.values) l2 += e * e;
  l2 = std::sqrt(l2 / static_cast<double>(err.size()));
  s["result"] = {{"newton_iterations", st.newton_iterations}, {"residual_sup", st.residual_sup}, {"u_error_sup", sup_norm(err)},
                 {"u_error_l2", l2},                          {"b", st.b},                     {"b_error", std::abs(st.b)},
                 {"cone_margin", st.cone_margin},             {"tolerance", c.mms_tolerance}};
  const bool ok = sup_norm(err) < c.mms_tolerance && std::abs(st.b) < c.mms_tolerance;
  s["passed"] = ok;
  return ok ? kExitOk : kExitVerification;
}

inline int run_identities(const RunConfig& c, nlohmann::json& s) {
  const IdentityReport r = identity_suite(c.seed, c.cases, c.canary);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& x : r.results)
    list.push_back({{"name", x.name}, {"n", x.n}, {"cases", x.cases}, {"max_error", x.max_error},
                    {"threshold", x.threshold}, {"passed", x.passed}});
  s["cases"] = c.cases;
  s["canary"] = c.canary;
  s["identities"] = list;
  s["passed"] = r.all_passed();
  return r.all_passed() ? kExitOk : kExitVerification;
}

inline int run_reduce(const RunConfig& c, nlohmann::json& s) {
  const TorusGrid g(c.n, c.sizes);
  const Form2Field om0 = resolve_omega_0(c, g, s);
  const ScalarField fprime = build_field(c.f, g, c.seed);
  const FormTypeDictionary dict = form_type_dictionary(fprime);
  const OperatorContext ctx(omega_h_from_balanced(om0), dict.f);
  const ContinuityResult r = solve_with_steps(ctx, c, s);
  write_trace(c.out / "trace.csv", r.state.trace);
  write_dump(c.out / "u.qma", to_dump(r.state.u));
  const Recovery rec = recover_omega_u(om0, r.state.u);
  write_dump(c.out / "omega_u.qma", to_dump(rec.omega_u));
  const double bp = dict.b_prime(r.state.b);
  const ScalarField check = form_type_residual(rec.omega_u, fprime, bp);
  write_dump(c.out / "form_residual.qma", to_dump(check));
  const double rewedge = rewedge_defect(rec.omega_u, om0, r.state.u);
  s["result"] = {{"b", r.state.b},
                 {"b_prime", bp},
                 {"solve_residual_sup", r.state.residual_sup},
                 {"newton_iterations", r.total_newton_iterations},
                 {"form_type_residual_sup", sup_norm(check)},
                 {"rewedge_defect", rewedge},
                 {"star_identity_defect", rec.star_identity_defect},
                 {"omega_u_margin", cone_report(rec.omega_u).margin},
                 {"tolerances", {{"form_type_residual", c.reduce_tolerance}, {"rewedge", c.rewedge_tolerance}}}};
  const bool ok = sup_norm(check) < c.reduce_tolerance && rewedge < c.rewedge_tolerance;
  s["passed"] = ok;
  return ok ? kExitOk : kExitVerification;
}

}  // namespace detail

/// Runs one mode and writes its artifacts to c.out. Never throws for run-time
/// failures; the exit code and summary carry them.
inline RunOutcome run(const RunConfig& c) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  RunOutcome out;
  nlohmann::json& s = out.summary;
  s["schema_version"] = kSchemaVersion;
  s["mode"] = to_string(c.mode);
  s["seed"] = c.seed;
  s["conventions"] = conventions_json();
  s["config"] = c.source;
  if (c.mode != Mode::Identities) {
    s["grid"] = {{"n", c.n}, {"sizes", c.sizes}};
    s["solver"] = detail::solver_json(c.solver);
  }
  s["status"] = "ok";

  auto fail = [&](int code, const std::string& status, const std::string& what) {
    out.exit_code = code;
    s["status"] = status;
    s["error"] = what;
    s["passed"] = false;
  };

  bool io_ready = false;
  try {
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec) throw IoError("cannot create output directory " + c.out.string() + ": " + ec.message());
    io_ready = true;
    if (c.canary && c.mode != Mode::Identities) throw ConfigError("--canary applies to identities mode only");
    switch (c.mode) {
      case Mode::Solve: out.exit_code = detail::run_solve(c, s); break;
      case Mode::Mms: out.exit_code = detail::run_mms(c, s); break;
      case Mode::Identities: out.exit_code = detail::run_identities(c, s); break;
      case Mode::Reduce: out.exit_code = detail::run_reduce(c, s); break;
    }
    if (out.exit_code == kExitVerification) s["status"] = "verification_failed";
  } catch (const SolverError& e) {
    fail(kExitSolver, "solver_failure", e.what());
    s["failure_kind"] = to_string(e.kind());
    try {
      detail::write_trace(c.out / "trace.csv", e.trace());
    } catch (const IoError&) {
    }
  } catch (const IoError& e) {
    fail(kExitIo, "io_error", e.what());
  } catch (const ConfigError& e) {
    fail(kExitConfig, "config_error", e.what());
  } catch (const Error& e) {
    // Structural problems with the configured inputs: non-positive forms,
    // mismatched dumps, inadmissible u_star.
    fail(kExitConfig, "config_error", e.what());
  }

  s["timing"] = {{"wall_seconds", std::chrono::duration<double>(clock::now() - start).count()},
                 {"threads", worker_count()}};
  if (io_ready) {
    try {
      detail::write_text(c.out / "summary.json", s.dump(2) + "\n");
    } catch (const IoError& e) {
      if (out.exit_code == kExitOk || out.exit_code == kExitVerification) fail(kExitIo, "io_error", e.what());
    }
  }
  return out;
}

}  // namespace qma
