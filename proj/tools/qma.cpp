// qma <solve|mms|identities|reduce> --config PATH [--out DIR] [--seed N] [--canary]

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qma/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quaternionic Monge-Ampere solver on flat hyperKahler tori"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool canary = false;
  for (const char* mode : {"solve", "mms", "identities", "reduce"}) {
    CLI::App* sub = app.add_subcommand(mode);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_flag("--canary", canary, "inject the ddju sign bug (identities mode)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qma::kExitConfig;
  }
  const std::string mode = app.get_subcommands().front()->get_name();

  qma::RunConfig cfg;
  try {
    cfg = qma::load_config(config_path);
    if (mode != qma::to_string(cfg.mode))
      throw qma::ConfigError("config mode '" + std::string(qma::to_string(cfg.mode)) + "' does not match subcommand '" + mode + "'");
  } catch (const qma::IoError& e) {
    std::cerr << "qma: " << e.what() << '\n';
    return qma::kExitIo;
  } catch (const qma::Error& e) {
    std::cerr << "qma: " << e.what() << '\n';
    return qma::kExitConfig;
  }
  if (out_dir) cfg.out = *out_dir;
  if (seed) cfg.seed = *seed;
  cfg.canary = canary;

  const qma::RunOutcome r = qma::run(cfg);
  const auto& s = r.summary;
  std::cout << "mode=" << mode << " status=" << s.value("status", "?") << " out=" << cfg.out.string() << '\n';
  if (s.contains("error")) std::cerr << "qma: " << s["error"].get<std::string>() << '\n';
  if (s.contains("result")) std::cout << s["result"].dump() << '\n';
  if (s.contains("identities"))
    for (const auto& x : s["identities"])
      std::cout << (x["passed"].get<bool>() ? "PASS " : "FAIL ") << x["name"].get<std::string>() << " n=" << x["n"]
                << " max_error=" << x["max_error"] << " threshold=" << x["threshold"] << '\n';
  return r.exit_code;
}
