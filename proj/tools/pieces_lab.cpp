#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pieces/lab/experiments.hpp"

#ifndef PIECES_GIT_DESCRIBE
#define PIECES_GIT_DESCRIBE "unknown"
#endif

namespace lab = pieces::lab;

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on the pieces model of interacting fermions"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::int64_t seed = -1, replicas = -1;
  bool check = false;
  for (const auto& s : lab::subcommands()) {
    auto* sub = app.add_subcommand(s.name, "run the " + s.name + " experiment");
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--seed", seed, "base seed (overrides run.seed)");
    sub->add_option("--replicas", replicas, "replica count (overrides run.replicas)");
    sub->add_option("--out", out_dir, "directory for <subcommand>.csv and <subcommand>.json");
    sub->add_flag("--check", check, "exit 4 when an acceptance check fails");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  lab::Config cfg;
  try {
    cfg = lab::Config::from_file(config_path);
    if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
    if (replicas >= 0) cfg.set("run.replicas", std::to_string(replicas));
  } catch (const lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  lab::Report rep;
  try {
    rep = lab::run_subcommand(name, cfg);
  } catch (const lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pieces::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    for (const auto& line : e.trace) std::cerr << "  " << line << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto json = lab::summary_json(rep, cfg, PIECES_GIT_DESCRIBE, wall);

  std::string csv;
  for (const auto& t : rep.tables) csv += "# " + t.name + "\n" + t.csv();
  if (out_dir.empty()) {
    std::cout << csv << "\n" << json.dump(2) << "\n";
  } else {
    std::filesystem::create_directories(out_dir);
    std::ofstream(std::filesystem::path(out_dir) / (name + ".csv")) << csv;
    std::ofstream(std::filesystem::path(out_dir) / (name + ".json")) << json.dump(2) << "\n";
  }
  for (const auto& c : rep.checks)
    std::cerr << (c.passed ? "PASS" : "FAIL") << "  [" << c.criterion << "] " << c.name << ": " << c.detail << "\n";
  if (check && !rep.all_passed()) return 4;
  return 0;
}
