#pragma once

// JSON run configuration. Unknown keys are rejected so typos surface as
// config errors instead of silently falling back to defaults.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qma/errors.hpp"
#include "qma/field_io.hpp"
#include "qma/random_forms.hpp"
#include "qma/solver.hpp"

namespace qma {

inline constexpr int kSchemaVersion = 1;

/// Config problems; the CLI maps these to exit status 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

enum class Mode { Solve, Mms, Identities, Reduce };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Solve: return "solve";
    case Mode::Mms: return "mms";
    case Mode::Identities: return "identities";
    case Mode::Reduce: return "reduce";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "solve") return Mode::Solve;
  if (s == "mms") return Mode::Mms;
  if (s == "identities") return Mode::Identities;
  if (s == "reduce") return Mode::Reduce;
  throw ConfigError("unknown mode '" + s + "'");
}

/// coefficient * cos(2 pi k.t + phase).
struct TrigTerm {
  double coefficient = 0.0;
  std::vector<int> wavevector;
  double phase = 0.0;
};

/// Scalar field source: a term list, a seeded random band-limited field, or a dump.
struct FieldSpec {
  std::vector<TrigTerm> terms;
  std::optional<std::filesystem::path> dump;
  int random_terms = 0;
  int random_max_k = 2;
  std::optional<double> scale_to_sup;
  bool present = false;
};

/// Constant eigenvalue list or a form-field dump.
struct FormSpec {
  std::vector<double> eigenvalues;
  std::optional<std::filesystem::path> dump;
};

struct RunConfig {
  Mode mode = Mode::Solve;
  int n = 2;
  std::vector<int> sizes;
  std::optional<FormSpec> omega_h;
  std::optional<FormSpec> omega_0;
  FieldSpec f;
  FieldSpec u_star;
  SolverOptions solver;
  int cases = 1000;
  std::uint64_t seed = 0;
  std::filesystem::path out = "qma_out";
  double mms_tolerance = 1e-7;
  double reduce_tolerance = 1e-7;
  double rewedge_tolerance = 1e-9;
  bool canary = false;
  nlohmann::json source;  // the document as read, echoed into the summary
};

namespace detail {

using nlohmann::json;

inline void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::vector<int> parse_sizes(const json& g, int n) {
  only_keys(g, {"sizes", "active"}, "grid");
  if (g.contains("sizes") == g.contains("active")) throw ConfigError("grid needs exactly one of 'sizes' or 'active'");
  std::vector<int> sizes;
  if (g.contains("sizes")) {
    sizes = get<std::vector<int>>(g, "sizes", "grid");
    if (static_cast<int>(sizes.size()) != 4 * n) throw ConfigError("grid.sizes must have 4n entries");
  } else {
    sizes.assign(static_cast<std::size_t>(4 * n), 1);
    const json& act = g.at("active");
    if (!act.is_object()) throw ConfigError("grid.active must map dims to sizes");
    for (const auto& [k, v] : act.items()) {
      int d = -1;
      try {
        d = std::stoi(k);
      } catch (const std::exception&) {
        throw ConfigError("grid.active key '" + k + "' is not a dim index");
      }
      if (d < 0 || d >= 4 * n) throw ConfigError("grid.active dim " + k + " out of range");
      if (!v.is_number_integer()) throw ConfigError("grid.active size must be an integer");
      sizes[static_cast<std::size_t>(d)] = v.get<int>();
    }
  }
  for (int s : sizes)
    if (s < 1 || (s > 1 && s % 2 != 0)) throw ConfigError("grid sizes must be 1 or even, got " + std::to_string(s));
  return sizes;
}

inline FieldSpec parse_field(const json& j, const std::string& where, const std::filesystem::path& base, int n) {
  only_keys(j, {"terms", "dump", "random", "scale_to_sup"}, where);
  FieldSpec out;
  out.present = true;
  const int sources = int(j.contains("terms")) + int(j.contains("dump")) + int(j.contains("random"));
  if (sources != 1) throw ConfigError(where + " needs exactly one of 'terms', 'dump', 'random'");
  if (j.contains("terms")) {
    if (!j.at("terms").is_array()) throw ConfigError(where + ".terms must be an array");
    for (const auto& t : j.at("terms")) {
      only_keys(t, {"coefficient", "wavevector", "phase", "kind"}, where + ".terms[]");
      TrigTerm term{get<double>(t, "coefficient", where), get<std::vector<int>>(t, "wavevector", where), 0.0};
      if (static_cast<int>(term.wavevector.size()) > 4 * n) throw ConfigError(where + ": wavevector longer than 4n");
      term.wavevector.resize(static_cast<std::size_t>(4 * n), 0);
      if (t.contains("phase")) term.phase = get<double>(t, "phase", where);
      if (t.contains("kind")) {
        const auto kind = get<std::string>(t, "kind", where);
        if (kind == "sin") term.phase -= std::numbers::pi / 2;
        else if (kind != "cos") throw ConfigError(where + ": kind must be 'cos' or 'sin'");
      }
      out.terms.push_back(std::move(term));
    }
  }
  if (j.contains("dump")) out.dump = resolve(base, get<std::string>(j, "dump", where));
  if (j.contains("random")) {
    const json& r = j.at("random");
    only_keys(r, {"terms", "max_k"}, where + ".random");
    out.random_terms = get<int>(r, "terms", where + ".random");
    if (r.contains("max_k")) out.random_max_k = get<int>(r, "max_k", where + ".random");
    if (out.random_terms < 1 || out.random_max_k < 1) throw ConfigError(where + ".random: terms and max_k must be >= 1");
  }
  if (j.contains("scale_to_sup")) {
    out.scale_to_sup = get<double>(j, "scale_to_sup", where);
    if (!(*out.scale_to_sup >= 0.0)) throw ConfigError(where + ".scale_to_sup must be >= 0");
  }
  return out;
}

inline FormSpec parse_form(const json& j, const std::string& where, const std::filesystem::path& base, int n) {
  only_keys(j, {"eigenvalues", "dump"}, where);
  if (j.contains("eigenvalues") == j.contains("dump")) throw ConfigError(where + " needs exactly one of 'eigenvalues', 'dump'");
  FormSpec out;
  if (j.contains("eigenvalues")) {
    out.eigenvalues = get<std::vector<double>>(j, "eigenvalues", where);
    if (static_cast<int>(out.eigenvalues.size()) != n) throw ConfigError(where + ".eigenvalues must have n entries");
    for (double l : out.eigenvalues)
      if (!(l > 0.0)) throw ConfigError(where + ".eigenvalues must be positive");
  } else {
    out.dump = resolve(base, get<std::string>(j, "dump", where));
  }
  return out;
}

inline void parse_solver(const json& j, SolverOptions& o) {
  only_keys(j, {"newton_tolerance", "max_newton_iterations", "krylov_tolerance", "max_krylov_iterations", "krylov_restart",
                "damping_shrink", "min_damping", "initial_dt", "min_dt", "max_dt", "easy_step_iterations"},
            "solver");
  auto opt = [&](const char* k, auto& field) {
    if (j.contains(k)) field = get<std::decay_t<decltype(field)>>(j, k, "solver");
  };
  opt("newton_tolerance", o.newton_tolerance);
  opt("max_newton_iterations", o.max_newton_iterations);
  opt("krylov_tolerance", o.krylov_tolerance);
  opt("max_krylov_iterations", o.max_krylov_iterations);
  opt("krylov_restart", o.krylov_restart);
  opt("damping_shrink", o.damping_shrink);
  opt("min_damping", o.min_damping);
  opt("initial_dt", o.initial_dt);
  opt("min_dt", o.min_dt);
  opt("max_dt", o.max_dt);
  opt("easy_step_iterations", o.easy_step_iterations);
}

}  // namespace detail

/// Parses and validates a config document. `base` resolves relative dump paths.
inline RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  using detail::get;
  detail::only_keys(j, {"schema_version", "mode", "n", "grid", "omega_h", "omega_0", "f", "u_star", "solver", "cases", "seed",
                        "out", "mms_tolerance", "reduce_tolerance", "rewedge_tolerance"},
                    "config");
  RunConfig c;
  c.source = j;
  if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
  if (get<int>(j, "schema_version", "config") != kSchemaVersion)
    throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  c.mode = parse_mode(get<std::string>(j, "mode", "config"));
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "config");
  if (j.contains("out")) c.out = get<std::string>(j, "out", "config");
  if (j.contains("cases")) c.cases = get<int>(j, "cases", "config");
  if (c.cases < 1) throw ConfigError("cases must be >= 1");
  if (c.mode == Mode::Identities) return c;

  c.n = get<int>(j, "n", "config");
  if (c.n < 2) throw ConfigError("n must be >= 2 for " + std::string(to_string(c.mode)));
  if (!j.contains("grid")) throw ConfigError("missing grid");
  c.sizes = detail::parse_sizes(j.at("grid"), c.n);
  if (j.contains("omega_h") == j.contains("omega_0")) throw ConfigError("exactly one of omega_h, omega_0 is required");
  if (j.contains("omega_h")) c.omega_h = detail::parse_form(j.at("omega_h"), "omega_h", base, c.n);
  if (j.contains("omega_0")) c.omega_0 = detail::parse_form(j.at("omega_0"), "omega_0", base, c.n);
  if (j.contains("f")) c.f = detail::parse_field(j.at("f"), "f", base, c.n);
  if (c.mode == Mode::Mms) {
    if (!j.contains("u_star")) throw ConfigError("mms mode needs u_star");
    c.u_star = detail::parse_field(j.at("u_star"), "u_star", base, c.n);
    if (c.f.present) throw ConfigError("mms mode derives f from u_star; remove f");
  } else if (j.contains("u_star")) {
    throw ConfigError("u_star is only used in mms mode");
  }
  if (j.contains("solver")) detail::parse_solver(j.at("solver"), c.solver);
  for (const char* k : {"mms_tolerance", "reduce_tolerance", "rewedge_tolerance"})
    if (j.contains(k) && !(get<double>(j, k, "config") > 0.0)) throw ConfigError(std::string(k) + " must be positive");
  if (j.contains("mms_tolerance")) c.mms_tolerance = j.at("mms_tolerance").get<double>();
  if (j.contains("reduce_tolerance")) c.reduce_tolerance = j.at("reduce_tolerance").get<double>();
  if (j.contains("rewedge_tolerance")) c.rewedge_tolerance = j.at("rewedge_tolerance").get<double>();
  try {
    c.solver.validate();
  } catch (const MalformedInput& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// Materializes a field spec on the grid. Random fields draw from `seed`.
inline ScalarField build_field(const FieldSpec& spec, const TorusGrid& g, std::uint64_t seed) {
  ScalarField out(g);
  if (!spec.present) return out;
  if (spec.dump) {
    out = scalar_from_dump(read_dump(*spec.dump), g);
  } else {
    std::vector<TrigTerm> terms = spec.terms;
    if (spec.random_terms > 0) {
      Rng rng(seed);
      for (int i = 0; i < spec.random_terms; ++i) {
        TrigTerm t{uniform(rng, -1.0, 1.0), std::vector<int>(static_cast<std::size_t>(g.real_dim()), 0),
                   uniform(rng, 0.0, 2.0 * std::numbers::pi)};
        for (int d : g.active()) {
          const int kmax = std::min(spec.random_max_k, g.size(d) / 2 - 1);
          t.wavevector[static_cast<std::size_t>(d)] = std::uniform_int_distribution<int>(-kmax, kmax)(rng);
        }
        terms.push_back(std::move(t));
      }
    }
    for (const auto& t : terms)
      for (int d = 0; d < g.real_dim(); ++d)
        if (t.wavevector[static_cast<std::size_t>(d)] != 0 && !g.is_active(d))
          throw ConfigError("wavevector varies along inactive dim " + std::to_string(d));
    out = ScalarField::sample(g, [&](std::span<const double> x) {
      double v = 0.0;
      for (const auto& t : terms) {
        double a = t.phase;
        for (std::size_t d = 0; d < x.size(); ++d) a += 2.0 * std::numbers::pi * t.wavevector[d] * x[d];
        v += t.coefficient * std::cos(a);
      }
      return v;
    });
  }
  if (spec.scale_to_sup) {
    const double s = sup_norm(out);
    if (s > 0.0) out *= *spec.scale_to_sup / s;
  }
  return out;
}

inline Form2Field build_form(const FormSpec& spec, const TorusGrid& g) {
  if (spec.dump) return form_from_dump(read_dump(*spec.dump), g);
  return Form2Field::constant(g, QForm2::diagonal(spec.eigenvalues));
}

}  // namespace qma
