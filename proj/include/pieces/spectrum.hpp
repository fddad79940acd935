#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "disorder.hpp"
#include "quadrature.hpp"

namespace pieces {

struct Level {
  std::size_t piece;
  int k;
  double energy;
};

using SpectrumTable = std::vector<Level>;

inline double level_energy(double length, int k) {
  const double q = M_PI * k / length;
  return q * q;
}

// Largest k with (pi k / length)^2 <= E.
inline int levels_in_piece(double length, double E) {
  if (!(E > 0.0)) return 0;
  int k = static_cast<int>(std::floor(length * std::sqrt(E) / M_PI));
  while (k > 0 && level_energy(length, k) > E) --k;
  while (level_energy(length, k + 1) <= E) ++k;
  return k;
}

inline bool level_less(const Level& a, const Level& b) {
  return std::tie(a.energy, a.piece, a.k) < std::tie(b.energy, b.piece, b.k);
}

inline SpectrumTable enumerate_levels_below(const PieceConfiguration& cfg, double E) {
  SpectrumTable t;
  if (!(E > 0.0)) return t;
  for (std::size_t j = 0; j < cfg.size(); ++j) {
    const int kmax = levels_in_piece(cfg.length(j), E);
    for (int k = 1; k <= kmax; ++k) t.push_back({j, k, level_energy(cfg.length(j), k)});
  }
  std::sort(t.begin(), t.end(), level_less);
  return t;
}

inline double counting_function(const PieceConfiguration& cfg, double E) {
  std::size_t c = 0;
  for (const auto& p : cfg.pieces) c += levels_in_piece(p.length, E);
  return static_cast<double>(c) / cfg.L;
}

inline double ids_of_length(double ell, double mu) {
  // mu e^{-mu l} / (1 - e^{-mu l})
  return -mu * std::exp(-mu * ell) / std::expm1(-mu * ell);
}

inline double ids_theoretical(double E, double mu) {
  if (!(E > 0.0)) return 0.0;
  return ids_of_length(M_PI / std::sqrt(E), mu);
}

inline double fermi_length(double rho, double mu) {
  if (!(rho > 0.0) || !(mu > 0.0)) throw std::domain_error("fermi_length: need rho, mu > 0");
  return std::abs(std::log(rho / (mu + rho))) / mu;
}

inline double fermi_energy(double rho, double mu) {
  const double l = fermi_length(rho, mu);
  return M_PI * M_PI / (l * l);
}

// (1/rho) int_0^{E_rho} E dN(E), written in the length variable l = pi/sqrt(E).
inline double free_energy_per_particle_theoretical(double rho, double mu) {
  const double l0 = fermi_length(rho, mu);
  auto f = [mu](double l) {
    const double e = std::exp(-mu * l);
    const double d = -std::expm1(-mu * l);
    return M_PI * M_PI / (l * l) * mu * mu * e / (d * d);
  };
  // tail beyond lmax is below f(l0) e^{-mu (lmax - l0)} / mu
  const double scale = f(l0) / mu;
  const double lmax = l0 + std::max(1.0, std::log(scale / 1e-14 + 1.0)) / mu;
  return integrate_adaptive(f, l0, lmax, 1e-12) / rho;
}

// Energy of the n-th level counted from the bottom, and the n lowest levels.
inline SpectrumTable lowest_levels(const PieceConfiguration& cfg, std::size_t n) {
  if (n == 0) return {};
  const double rho = static_cast<double>(n) / cfg.L;
  double E = 1.2 * fermi_energy(rho, cfg.intensity > 0 ? cfg.intensity : 1.0);
  for (int it = 0; it < 200; ++it) {
    std::size_t c = 0;
    for (const auto& p : cfg.pieces) c += levels_in_piece(p.length, E);
    if (c >= n) {
      auto t = enumerate_levels_below(cfg, E);
      t.resize(n);
      return t;
    }
    E *= 2.0;
  }
  throw std::runtime_error("lowest_levels: cutoff doubling did not reach n levels");
}

inline double free_energy_per_particle_empirical(const PieceConfiguration& cfg, std::size_t n) {
  if (n == 0) throw std::domain_error("free_energy_per_particle_empirical: n >= 1");
  const auto t = lowest_levels(cfg, n);
  double s = 0.0;
  for (const auto& l : t) s += l.energy;
  return s / static_cast<double>(n);
}

inline double nth_level_energy(const PieceConfiguration& cfg, std::size_t n) {
  if (n == 0) throw std::domain_error("nth_level_energy: n >= 1");
  return lowest_levels(cfg, n).back().energy;
}

// Relative mismatch of (pi k / l)^2 against mu^2 (pi k / (mu l))^2.
inline double rescale_check_one_particle(double length, int k, double mu) {
  const double a = level_energy(length, k);
  const double b = mu * mu * level_energy(mu * length, k);
  return std::abs(a - b) / a;
}

}  // namespace pieces
