// oocqr: out-of-core QR reconstruction pipeline driver.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "oocqr/config.hpp"
#include "oocqr/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Out-of-core tiled QR fan-beam CT reconstruction"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode;
  std::string interpretation;
  bool force = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--mode", mode, "engine mode")->check(CLI::IsMember({"sequential", "overlapped"}));
  app.add_option("--interpretation", interpretation, "angle schedule reading")
      ->check(CLI::IsMember({"uniform-shift", "uniform_shift", "literal"}));
  app.add_flag("--force", force, "recompute factors that already exist");
  app.add_option("--set", overrides, "extra key=value setting (repeatable)");

  auto* build = app.add_subcommand("build-matrix", "assemble the system matrix into tiles");
  auto* fact = app.add_subcommand("factorize", "QR-factorize the system matrix once");
  auto* project = app.add_subcommand("project", "simulate sinograms of the reference slices");
  auto* solve = app.add_subcommand("solve", "reconstruct every slice from the stored factors");
  auto* metrics = app.add_subcommand("metrics", "score reconstructions against the reference");
  auto* bench = app.add_subcommand("bench", "per-slice solve timing across slice counts");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? oocqr::kExitOk : oocqr::kExitConfig;
  }

  try {
    oocqr::PipelineConfig cfg;
    if (!config_path.empty()) cfg = oocqr::load_config(config_path);
    for (const std::string& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw oocqr::ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!mode.empty()) cfg.set("mode", mode);
    if (!interpretation.empty()) cfg.set("interpretation", interpretation);

    if (build->parsed()) oocqr::cmd_build_matrix(cfg, std::cout);
    else if (fact->parsed()) oocqr::cmd_factorize(cfg, force, std::cout);
    else if (project->parsed()) oocqr::cmd_project(cfg, std::cout);
    else if (solve->parsed()) oocqr::cmd_solve(cfg, std::cout);
    else if (metrics->parsed()) oocqr::cmd_metrics(cfg, std::cout);
    else if (bench->parsed()) oocqr::cmd_bench(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "oocqr: " << e.what() << '\n';
    return oocqr::exit_code_for_current_exception();
  }
  return oocqr::kExitOk;
}
