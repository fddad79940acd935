// Runs every acceptance experiment at its default parameters and prints one
// PASS/FAIL line per criterion. Exit status is 0 when every failing
// criterion is listed in --expect-fail.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "pieces/lab/experiments.hpp"

#ifndef PIECES_GIT_DESCRIBE
#define PIECES_GIT_DESCRIBE "unknown"
#endif

namespace lab = pieces::lab;

namespace {

struct Criterion {
  int id;
  const char* title;
  lab::Part part;
  double limit_s;
};

std::set<int> parse_ids(const std::string& s) {
  std::set<int> ids;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) ids.insert(std::stoi(item));
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expect_fail, only;
  std::string out_dir;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--expect-fail" && i + 1 < argc) expect_fail = parse_ids(argv[++i]);
    else if (a == "--only" && i + 1 < argc) only = parse_ids(argv[++i]);
    else if (a == "--out" && i + 1 < argc) out_dir = argv[++i];
    else {
      std::cerr << "usage: acceptance [--expect-fail 6,10] [--only 1,2] [--out DIR]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria = {
      {1, "IDS formula", lab::ids_check, 30},
      {2, "Fermi quantities", lab::fermi_quantities, 30},
      {3, "free energy per particle", lab::free_energy, 60},
      {4, "two-body expansion", lab::two_body_ladder, 120},
      {5, "gamma route agreement", lab::gamma_routes, 120},
      {6, "small-coupling law", lab::gamma_small_coupling, 30},
      {7, "block structure", lab::block_structure, 60},
      {8, "exact-diagonalization oracle", lab::exact_oracle, 180},
      {9, "RDM identities", lab::rdm_identities, 60},
      {10, "Psi^opt particle count", lab::psi_opt_count, 60},
      {11, "second-order energy ratio", lab::psi_opt_energy, 600},
      {12, "sub-additivity", lab::subadditivity, 120},
      {13, "cross-piece bounds", lab::cross_piece_bounds, 180},
      {14, "piece statistics", lab::piece_statistics, 120},
  };

  const lab::Config cfg;  // defaults are the acceptance parameters
  int unexpected = 0, failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    lab::Report rep;
    rep.name = "criterion_" + std::to_string(c.id);
    std::string error;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.part(cfg, rep);
    } catch (const pieces::NumericError& e) {
      error = e.what();
      for (const auto& line : e.trace) error += "\n      " + line;
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = error.empty() && wall <= c.limit_s;
    for (const auto& ch : rep.checks) {
      if (ch.criterion == c.id) ok = ok && ch.passed;
      std::printf("    %s %s: %s\n", ch.criterion == c.id ? (ch.passed ? "ok  " : "FAIL") : "info",
                  ch.name.c_str(), ch.detail.c_str());
    }
    if (!error.empty()) std::printf("    error: %s\n", error.c_str());
    const bool expected = expect_fail.count(c.id) > 0;
    std::printf("CRITERION %2d %s  %-30s runtime %.1f s (limit %.0f s)%s\n", c.id, ok ? "PASS" : "FAIL", c.title,
                wall, c.limit_s, !ok && expected ? "  [expected failure]" : "");
    std::fflush(stdout);
    if (!ok) ++failed;
    if (!ok && !expected) ++unexpected;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      std::ofstream(std::filesystem::path(out_dir) / (rep.name + ".json"))
          << lab::summary_json(rep, cfg, PIECES_GIT_DESCRIBE, wall).dump(2) << "\n";
    }
  }
  std::printf("SUMMARY %d failed, %d unexpected\n", failed, unexpected);
  return unexpected == 0 ? 0 : 1;
}
