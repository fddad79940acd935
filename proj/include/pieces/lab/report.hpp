#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace pieces::lab {

inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> r) { rows.push_back(std::move(r)); }

  std::string csv() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
      s += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return s;
  }
};

struct Check {
  int criterion = 0;  // acceptance criterion number, 0 for auxiliary checks
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::string name;
  std::vector<Table> tables;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<Check> checks;
  std::vector<std::uint64_t> seeds;

  Table& table(const std::string& tname, std::vector<std::string> header) {
    tables.push_back({tname, std::move(header), {}});
    return tables.back();
  }
  void check(int criterion, std::string cname, bool ok, std::string detail) {
    checks.push_back({criterion, std::move(cname), ok, std::move(detail)});
  }
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

inline std::vector<std::uint64_t> seed_list(const Config& c) {
  std::vector<std::uint64_t> s;
  const auto base = static_cast<std::uint64_t>(c.integer("run.seed"));
  for (std::int64_t i = 0; i < c.integer("run.replicas"); ++i) s.push_back(base + static_cast<std::uint64_t>(i));
  return s;
}

inline unsigned thread_count(const Config& c) {
  const auto t = c.integer("run.threads");
  if (t > 0) return static_cast<unsigned>(t);
  return std::max(1u, std::thread::hardware_concurrency());
}

// f(i) for i < n on up to `threads` workers; results stay in index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> err(n);
  auto work = [&](std::size_t start) {
    for (std::size_t i = start; i < n; i += threads) {
      try {
        out[i] = f(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1 || n <= 1) {
    work(0);
    threads = 1;
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i)
    if (err[i]) std::rethrow_exception(err[i]);
  return out;
}

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::ordered_json summary_json(const Report& r, const Config& c, const std::string& version,
                                           double wall_seconds) {
  nlohmann::ordered_json j;
  j["subcommand"] = r.name;
  j["version"] = version;
  j["config_hash"] = fnv1a_hex(c.canonical());
  j["config"] = c.values();
  j["seeds"] = r.seeds;
  j["wall_time_s"] = wall_seconds;
  j["results"] = r.summary;
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& ch : r.checks)
    checks.push_back({{"criterion", ch.criterion}, {"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
  return j;
}

}  // namespace pieces::lab
