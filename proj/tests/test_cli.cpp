#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "qma/run.hpp"

using namespace qma;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qma_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json solve_doc() {
  return json::parse(R"({
    "schema_version": 1, "mode": "solve", "n": 2,
    "grid": {"active": {"0": 8, "1": 8}},
    "omega_h": {"eigenvalues": [1.0, 1.5]},
    "f": {"random": {"terms": 4, "max_k": 1}, "scale_to_sup": 0.2},
    "seed": 5
  })");
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

int run_binary(const std::string& args) {
  const int status = std::system((std::string(QMA_BINARY) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST(Config, RejectsStructuralProblems) {
  json j = solve_doc();
  EXPECT_NO_THROW(parse_config(j));
  auto expect_bad = [](json doc) { EXPECT_THROW(parse_config(doc), ConfigError) << doc.dump(); };
  json k = j;
  k["omega_0"] = {{"eigenvalues", {1.0, 1.0}}};
  expect_bad(k);  // both omega_h and omega_0
  k = j;
  k.erase("omega_h");
  expect_bad(k);  // neither
  k = j;
  k["grid"] = {{"active", {{"0", 6}, {"1", 5}}}};
  expect_bad(k);  // odd size
  k = j;
  k["n"] = 1;
  expect_bad(k);
  k = j;
  k["schema_version"] = 2;
  expect_bad(k);
  k = j;
  k["tolerence"] = 1e-3;
  expect_bad(k);  // unknown key
  k = j;
  k["omega_h"] = {{"eigenvalues", {1.0, -1.0}}};
  expect_bad(k);
  k = j;
  k["solver"] = {{"min_dt", 0.9}};
  expect_bad(k);
  k = j;
  k["u_star"] = {{"terms", json::array()}};
  expect_bad(k);  // only for mms
}

TEST(Config, TrigTermsAndSinKind) {
  json j = solve_doc();
  j["f"] = json::parse(R"({"terms": [{"coefficient": 2.0, "wavevector": [1], "kind": "sin"},
                                      {"coefficient": 0.5, "wavevector": [0, 2], "phase": 0.25}]})");
  const RunConfig c = parse_config(j);
  const TorusGrid g(c.n, c.sizes);
  const ScalarField f = build_field(c.f, g, c.seed);
  for (std::size_t p = 0; p < g.points(); p += 5) {
    const double t0 = g.coordinate(p, 0), t1 = g.coordinate(p, 1);
    const double want = 2.0 * std::sin(2 * std::numbers::pi * t0) + 0.5 * std::cos(4 * std::numbers::pi * t1 + 0.25);
    EXPECT_NEAR(f[p], want, 1e-14);
  }
  j["f"] = json::parse(R"({"terms": [{"coefficient": 1.0, "wavevector": [0, 0, 1]}]})");
  EXPECT_THROW(build_field(parse_config(j).f, g, 0), ConfigError);  // inactive dim
}

TEST(Config, RandomFieldIsSeededAndScaled) {
  const RunConfig c = parse_config(solve_doc());
  const TorusGrid g(c.n, c.sizes);
  const ScalarField a = build_field(c.f, g, 5);
  EXPECT_NEAR(sup_norm(a), 0.2, 1e-15);
  EXPECT_EQ(a.values, build_field(c.f, g, 5).values);
  EXPECT_NE(a.values, build_field(c.f, g, 6).values);
}

TEST(Run, SolveWritesArtifactsAndIsDeterministic) {
  RunConfig c = parse_config(solve_doc());
  c.out = scratch("solve_a");
  const RunOutcome a = run(c);
  ASSERT_EQ(a.exit_code, kExitOk) << a.summary.dump(2);
  for (const char* f : {"summary.json", "trace.csv", "steps.csv", "u.qma"}) EXPECT_TRUE(fs::exists(c.out / f)) << f;
  const json s = read_json(c.out / "summary.json");
  EXPECT_EQ(s["schema_version"], kSchemaVersion);
  EXPECT_TRUE(s["conventions"].contains("pfaffian"));
  EXPECT_TRUE(s["result"]["b_in_bracket"].get<bool>());
  EXPECT_LT(s["result"]["residual_sup"].get<double>(), 1e-11);
  for (const char* p : {"p2", "p8", "p32"}) EXPECT_TRUE(s["result"]["cherrier"].contains(p));
  std::ifstream trace(c.out / "trace.csv");
  std::string header;
  std::getline(trace, header);
  EXPECT_EQ(header, "t,iter,residual_sup,cone_margin,b,damping,krylov_iters");
  const ScalarField u = scalar_from_dump(read_dump(c.out / "u.qma"), TorusGrid(c.n, c.sizes));
  EXPECT_EQ(sup(u), 0.0);

  c.out = scratch("solve_b");
  const RunOutcome b = run(c);
  json sa = a.summary, sb = b.summary;
  sa.erase("timing");
  sb.erase("timing");
  EXPECT_EQ(sa, sb);
}

TEST(Run, TrivialSolveGivesZero) {
  json j = solve_doc();
  j["f"] = {{"terms", {{{"coefficient", std::log(1.5)}, {"wavevector", {0}}}}}};
  RunConfig c = parse_config(j);
  c.out = scratch("trivial");
  const RunOutcome r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.summary["result"]["b"].get<double>(), 0.0);
  EXPECT_EQ(r.summary["result"]["u_sup_norm"].get<double>(), 0.0);
}

TEST(Run, MmsRecoversUStar) {
  json j = json::parse(R"({
    "schema_version": 1, "mode": "mms", "n": 2,
    "grid": {"active": {"0": 16, "1": 16}},
    "omega_h": {"eigenvalues": [1.0, 1.0]},
    "u_star": {"terms": [{"coefficient": 0.025, "wavevector": [1, 1], "kind": "sin"},
                         {"coefficient": 0.025, "wavevector": [1, -1], "kind": "sin"}]}
  })");
  RunConfig c = parse_config(j);
  c.out = scratch("mms");
  const RunOutcome r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump(2);
  EXPECT_LT(r.summary["result"]["u_error_sup"].get<double>(), 1e-7);
}

TEST(Run, InadmissibleUStarIsAConfigError) {
  json j = json::parse(R"({
    "schema_version": 1, "mode": "mms", "n": 2,
    "grid": {"active": {"0": 16}},
    "omega_h": {"eigenvalues": [1.0, 1.0]},
    "u_star": {"terms": [{"coefficient": 1.0, "wavevector": [1]}]}
  })");
  RunConfig c = parse_config(j);
  c.out = scratch("mms_bad");
  EXPECT_EQ(run(c).exit_code, kExitConfig);
  EXPECT_EQ(read_json(c.out / "summary.json")["status"], "config_error");
}

TEST(Run, ReduceWritesOmegaU) {
  json j = json::parse(R"({
    "schema_version": 1, "mode": "reduce", "n": 2,
    "grid": {"active": {"0": 8, "1": 8}},
    "omega_h": {"eigenvalues": [1.0, 1.5]},
    "f": {"random": {"terms": 3, "max_k": 1}, "scale_to_sup": 0.1}
  })");
  RunConfig c = parse_config(j);
  c.out = scratch("reduce");
  const RunOutcome r = run(c);
  ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump(2);
  const Form2Field om = form_from_dump(read_dump(c.out / "omega_u.qma"), TorusGrid(c.n, c.sizes));
  EXPECT_GT(cone_report(om).margin, 0.0);
  EXPECT_LT(r.summary["result"]["rewedge_defect"].get<double>(), 1e-9);
  EXPECT_NE(r.summary["direction"].get<std::string>().find("omega_h -> omega_0"), std::string::npos);
}

TEST(Run, SolverFailureFlushesPartialArtifacts) {
  json j = solve_doc();
  j["f"] = json::parse(R"({"terms": [{"coefficient": 30.0, "wavevector": [1]}]})");
  j["solver"] = {{"max_newton_iterations", 4}, {"min_dt", 0.02}};
  RunConfig c = parse_config(j);
  c.out = scratch("fail");
  const RunOutcome r = run(c);
  EXPECT_EQ(r.exit_code, kExitSolver);
  EXPECT_EQ(r.summary["failure_kind"], "continuation_failure");
  EXPECT_TRUE(fs::exists(c.out / "trace.csv"));
  EXPECT_TRUE(fs::exists(c.out / "steps.csv"));
  EXPECT_EQ(read_json(c.out / "summary.json")["status"], "solver_failure");
}

TEST(Run, CanaryOutsideIdentitiesIsAConfigError) {
  RunConfig c = parse_config(solve_doc());
  c.out = scratch("canary_solve");
  c.canary = true;
  EXPECT_EQ(run(c).exit_code, kExitConfig);
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("binary");
  const fs::path ok = write_config(dir, solve_doc());
  EXPECT_EQ(run_binary("solve --config " + ok.string() + " --out " + (dir / "o1").string()), 0);
  EXPECT_EQ(run_binary("mms --config " + ok.string() + " --out " + (dir / "o2").string()), 2);  // mode mismatch
  EXPECT_EQ(run_binary("solve --config " + (dir / "missing.json").string()), 4);
  EXPECT_EQ(run_binary("solve"), 2);
  EXPECT_EQ(run_binary("frobnicate --config x"), 2);

  json id = {{"schema_version", 1}, {"mode", "identities"}, {"cases", 3}, {"seed", 7}};
  const fs::path idp = dir / "id.json";
  std::ofstream(idp) << id.dump();
  EXPECT_EQ(run_binary("identities --config " + idp.string() + " --out " + (dir / "id").string()), 0);
  EXPECT_NE(run_binary("identities --canary --config " + idp.string() + " --out " + (dir / "idc").string()), 0);
  const json s = read_json(dir / "idc" / "summary.json");
  EXPECT_TRUE(s["canary"].get<bool>());
  EXPECT_EQ(run_binary("identities --seed 9 --config " + idp.string() + " --out " + (dir / "id9").string()), 0);
  EXPECT_EQ(read_json(dir / "id9" / "summary.json")["seed"], 9);
}
