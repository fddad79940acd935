#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "../potential.hpp"

namespace pieces::lab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { integer, real, text, reals, choice };

struct KeySpec {
  Kind kind;
  std::string fallback;
  double lo = -1e300, hi = 1e300;  // inclusive range for numbers and list entries
  std::vector<std::string> choices;
};

// Every key any subcommand reads, with its default and admissible range.
inline const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> s = {
      {"run.seed", {Kind::integer, "1", 0, 9.2e18}},
      {"run.replicas", {Kind::integer, "20", 1, 1e6}},
      {"run.threads", {Kind::integer, "0", 0, 1024}},

      {"system.L", {Kind::real, "100000", 1e-9, 1e9}},
      {"system.mu", {Kind::real, "1", 1e-9, 1e9}},
      {"system.rho", {Kind::real, "0.1", 1e-9, 1e3}},
      {"system.rhos", {Kind::reals, "0.1,0.05,0.02", 1e-9, 1e3}},
      {"system.rho_checks", {Kind::reals, "0.001,0.01,0.1,1", 1e-12, 1e6}},
      {"system.count_rhos", {Kind::reals, "0.05,0.1", 1e-9, 1e3}},
      {"system.band_rho", {Kind::real, "0.05", 1e-9, 1e3}},

      {"potential.family", {Kind::choice, "box", 0, 0, {"box", "exponential", "polynomial", "zero"}}},
      {"potential.height", {Kind::real, "1", 0, 1e9}},
      {"potential.radius", {Kind::real, "1", 1e-9, 1e9}},
      {"potential.rate", {Kind::real, "1", 1e-9, 1e9}},
      {"potential.exponent", {Kind::real, "5", 4.0 + 1e-9, 1e3}},
      {"potential.scale", {Kind::real, "1", 1e-9, 1e9}},
      {"potential.second_family", {Kind::choice, "exponential", 0, 0, {"box", "exponential", "polynomial", "zero", "none"}}},

      {"gamma.source", {Kind::choice, "kernel", 0, 0, {"fit", "kernel", "given"}}},
      {"gamma.value", {Kind::real, "0", 0, 1e12}},
      {"gamma.ladder", {Kind::reals, "20,40,80,160", 1e-6, 1e6}},
      {"gamma.basis_per_unit", {Kind::real, "1.5", 0.1, 100}},
      {"gamma.kernel_nodes", {Kind::integer, "1200", 200, 20000}},
      {"gamma.small_coupling", {Kind::real, "0.001", 1e-12, 1}},
      {"gamma.route_tolerance", {Kind::real, "0.05", 0, 1}},

      {"numerics.pair_M", {Kind::integer, "20", 4, 400}},
      {"numerics.M", {Kind::integer, "8", 3, 64}},
      {"numerics.B", {Kind::real, "3", 2.0 + 1e-9, 1e3}},
      {"numerics.C", {Kind::real, "1", 0, 1e3}},
      {"numerics.fermi", {Kind::choice, "empirical", 0, 0, {"empirical", "theoretical"}}},
      {"numerics.quad_nodes", {Kind::integer, "16", 4, 256}},

      {"stats.energy_points", {Kind::integer, "50", 2, 100000}},
      {"stats.ell_min", {Kind::real, "0.5", 1e-6, 1e6}},
      {"stats.ell_max", {Kind::real, "6", 1e-6, 1e6}},
      {"stats.ks_samples", {Kind::integer, "10000", 10, 1e8}},
      {"stats.ks_pieces", {Kind::integer, "5", 2, 1e6}},
      {"stats.max_seeds", {Kind::integer, "1000", 1, 1e7}},

      {"exact.instances", {Kind::integer, "10", 1, 1e5}},
      {"exact.pieces", {Kind::integer, "2", 1, 8}},
      {"exact.n", {Kind::integer, "2", 1, 4}},
      {"exact.min_length", {Kind::real, "1", 1e-6, 1e6}},
      {"exact.max_length", {Kind::real, "4", 1e-6, 1e6}},
      {"exact.max_gap", {Kind::real, "0.5", 0, 1e6}},
      {"exact.M", {Kind::integer, "8", 4, 32}},
      {"exact.block_pairs", {Kind::integer, "50", 1, 1e5}},
      {"exact.block_M", {Kind::integer, "4", 3, 16}},
      {"exact.subadd_instances", {Kind::integer, "10", 1, 1e5}},
      {"exact.subadd_M", {Kind::integer, "6", 4, 16}},

      {"rdm.pairs", {Kind::integer, "100", 1, 1e6}},
      {"rdm.M", {Kind::integer, "8", 3, 64}},
      {"rdm.instances", {Kind::integer, "10", 1, 1e5}},

      {"bounds.lengths", {Kind::reals, "5,10,20", 1e-6, 1e6}},
      {"bounds.far_gaps", {Kind::reals, "5,10,20", 1e-6, 1e6}},
      {"bounds.close_gaps", {Kind::reals, "0.5,2,8", 1e-6, 1e6}},
      {"bounds.calib_lengths", {Kind::reals, "4,7,14,28", 1e-6, 1e6}},
      {"bounds.calib_gaps", {Kind::reals, "0.25,1,4,12", 1e-6, 1e6}},
      {"bounds.safety", {Kind::real, "2", 1, 1e6}},
      {"bounds.neighbor_ladder", {Kind::reals, "5,10,20,40", 1e-6, 1e6}},
      {"bounds.neighbor_gap", {Kind::real, "0.5", 0, 1e6}},
      {"bounds.contact_gaps", {Kind::reals, "0,0.5,0.9", 0, 1e6}},
  };
  return s;
}

inline std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const double x = std::stod(item, &pos);
    if (item.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument(item);
    v.push_back(x);
  }
  if (v.empty()) throw std::invalid_argument(text);
  return v;
}

class Config {
 public:
  Config() { fill_defaults(); }

  static Config from_text(const std::string& text) {
    Config c;
    boost::property_tree::ptree t;
    std::istringstream in(text);
    try {
      boost::property_tree::read_ini(in, t);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    std::vector<std::string> unknown;
    for (const auto& [section, body] : t) {
      if (body.empty() && !body.data().empty()) {
        unknown.push_back(section + " (outside any section)");
        continue;
      }
      for (const auto& [key, val] : body) {
        const std::string full = section + "." + key;
        if (!schema().count(full)) {
          unknown.push_back(full);
          continue;
        }
        c.values_[full] = trim(val.data());
      }
    }
    if (!unknown.empty()) {
      std::string msg = "unknown config keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw ConfigError(msg);
    }
    c.validate();
    return c;
  }

  static Config from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
  }

  void set(const std::string& key, const std::string& value) {
    if (!schema().count(key)) throw ConfigError("unknown config key " + key);
    values_[key] = value;
    validate();
  }

  std::int64_t integer(const std::string& k) const { return std::stoll(raw(k)); }
  double real(const std::string& k) const { return std::stod(raw(k)); }
  const std::string& text(const std::string& k) const { return raw(k); }
  std::vector<double> reals(const std::string& k) const { return parse_reals(raw(k)); }

  const std::map<std::string, std::string>& values() const { return values_; }

  // Canonical key = value text, sorted by key; used for hashing and echo.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
    return s;
  }

  Potential potential(const std::string& family_key = "potential.family") const {
    return make_potential(text(family_key));
  }

  Potential make_potential(const std::string& fam) const {
    const double h = real("potential.height");
    if (fam == "box") return Potential::box(h, real("potential.radius"));
    if (fam == "exponential") return Potential::exponential(h, real("potential.rate"));
    if (fam == "polynomial") return Potential::polynomial(h, real("potential.exponent"), real("potential.scale"));
    if (fam == "zero") return Potential::zero();
    throw ConfigError("unknown potential family " + fam);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  void fill_defaults() {
    for (const auto& [k, spec] : schema()) values_[k] = spec.fallback;
  }

  const std::string& raw(const std::string& k) const {
    auto it = values_.find(k);
    if (it == values_.end()) throw ConfigError("config key not in schema: " + k);
    return it->second;
  }

  void validate() const {
    std::vector<std::string> bad;
    for (const auto& [k, spec] : schema()) {
      const std::string& v = values_.at(k);
      try {
        auto in_range = [&](double x) { return x >= spec.lo && x <= spec.hi && std::isfinite(x); };
        std::size_t pos = 0;
        switch (spec.kind) {
          case Kind::integer: {
            const long long x = std::stoll(v, &pos);
            if (pos != v.size() || !in_range(static_cast<double>(x))) bad.push_back(k + " = " + v);
            break;
          }
          case Kind::real: {
            const double x = std::stod(v, &pos);
            if (pos != v.size() || !in_range(x)) bad.push_back(k + " = " + v);
            break;
          }
          case Kind::reals:
            for (double x : parse_reals(v))
              if (!in_range(x)) bad.push_back(k + " = " + v);
            break;
          case Kind::choice: {
            bool ok = false;
            for (const auto& c : spec.choices) ok = ok || c == v;
            if (!ok) bad.push_back(k + " = " + v);
            break;
          }
          case Kind::text: break;
        }
      } catch (const std::exception&) {
        bad.push_back(k + " = " + v);
      }
    }
    if (!bad.empty()) {
      std::string msg = "invalid config values:";
      for (const auto& b : bad) msg += " [" + b + "]";
      throw ConfigError(msg);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace pieces::lab
