#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace pieces {

struct Piece {
  double left, right, length;
};

struct PieceConfiguration {
  double L = 0.0;
  double intensity = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> cut_points;
  std::vector<Piece> pieces;

  std::size_t size() const { return pieces.size(); }
  double length(std::size_t j) const { return pieces[j].length; }
  std::vector<double> lengths() const {
    std::vector<double> v(pieces.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = pieces[j].length;
    return v;
  }
};

inline void rebuild_pieces(PieceConfiguration& cfg) {
  cfg.pieces.clear();
  double prev = 0.0;
  for (double c : cfg.cut_points) {
    cfg.pieces.push_back({prev, c, c - prev});
    prev = c;
  }
  cfg.pieces.push_back({prev, cfg.L, cfg.L - prev});
}

// Configuration from explicit lengths laid end to end starting at 0.
inline PieceConfiguration from_lengths(const std::vector<double>& lengths) {
  if (lengths.empty()) throw std::domain_error("from_lengths: need at least one piece");
  PieceConfiguration cfg;
  double x = 0.0;
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    if (!(lengths[j] > 0.0)) throw std::domain_error("from_lengths: lengths must be positive");
    x += lengths[j];
    if (j + 1 < lengths.size()) cfg.cut_points.push_back(x);
  }
  cfg.L = x;
  rebuild_pieces(cfg);
  // keep the requested lengths exactly rather than differences of sums
  for (std::size_t j = 0; j < lengths.size(); ++j) cfg.pieces[j].length = lengths[j];
  return cfg;
}

inline PieceConfiguration sample_pieces(std::uint64_t seed, double L, double mu) {
  if (!(L > 0.0) || !(mu > 0.0)) throw std::domain_error("sample_pieces: need L > 0 and mu > 0");
  PieceConfiguration cfg;
  cfg.L = L;
  cfg.intensity = mu;
  cfg.seed = seed;
  CounterRng rng(seed);
  cfg.cut_points.reserve(static_cast<std::size_t>(mu * L * 1.1) + 16);
  double x = rng.exponential(mu);
  while (x < L) {
    cfg.cut_points.push_back(x);
    x += rng.exponential(mu);
  }
  rebuild_pieces(cfg);
  return cfg;
}

// Exactly m pieces with lengths L * eta_i / sum(eta).
inline PieceConfiguration sample_pieces_conditioned(std::uint64_t seed, double L, std::size_t m) {
  if (m == 0) throw std::domain_error("sample_pieces_conditioned: m must be >= 1");
  if (!(L > 0.0)) throw std::domain_error("sample_pieces_conditioned: need L > 0");
  CounterRng rng(seed);
  std::vector<double> eta(m);
  double s = 0.0;
  for (auto& e : eta) s += (e = rng.exponential());
  PieceConfiguration cfg;
  cfg.L = L;
  cfg.seed = seed;
  cfg.intensity = static_cast<double>(m) / L;
  double x = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    x += L * eta[j] / s;
    cfg.cut_points.push_back(x);
  }
  rebuild_pieces(cfg);
  return cfg;
}

inline std::size_t count_pieces_in_range(const PieceConfiguration& cfg, double a, double b) {
  std::size_t c = 0;
  for (const auto& p : cfg.pieces)
    if (p.length >= a && p.length <= a + b) ++c;
  return c;
}

// Ordered pairs (left, right) with left length in [a, a+b], right length in
// [c, c+d] and gap (total length strictly between them) in [g, g+f].
// Only separated pairs count: touching pieces would add an atom at gap 0
// that the continuous-gap law does not carry.
inline std::size_t count_pair_clusters(const PieceConfiguration& cfg, double a, double b, double c,
                                       double d, double g, double f) {
  std::size_t count = 0;
  const auto& P = cfg.pieces;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i].length < a || P[i].length > a + b) continue;
    if (i + 1 >= P.size()) break;
    double gap = P[i + 1].length;
    for (std::size_t j = i + 2; j < P.size(); ++j) {
      if (gap > g + f) break;
      if (gap >= g && P[j].length >= c && P[j].length <= c + d) ++count;
      gap += P[j].length;
    }
  }
  return count;
}

// Pairs at distance <= d with left piece longer than ell and right piece
// longer than ell_p.
inline std::size_t count_neighbor_pairs(const PieceConfiguration& cfg, double ell, double ell_p,
                                        double d) {
  std::size_t count = 0;
  const auto& P = cfg.pieces;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i].length < ell) continue;
    double gap = 0.0;
    for (std::size_t j = i + 1; j < P.size() && gap <= d; ++j) {
      if (P[j].length >= ell_p) ++count;
      gap += P[j].length;
    }
  }
  return count;
}

// Triplets left < middle < right, consecutive distances <= d, each piece
// longer than its threshold.
inline std::size_t count_triplets(const PieceConfiguration& cfg, double ell, double ell_p,
                                  double ell_pp, double d) {
  std::size_t count = 0;
  const auto& P = cfg.pieces;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i].length < ell) continue;
    double g1 = 0.0;
    for (std::size_t j = i + 1; j < P.size() && g1 <= d; ++j) {
      if (P[j].length >= ell_p) {
        double g2 = 0.0;
        for (std::size_t k = j + 1; k < P.size() && g2 <= d; ++k) {
          if (P[k].length >= ell_pp) ++count;
          g2 += P[k].length;
        }
      }
      g1 += P[j].length;
    }
  }
  return count;
}

inline double max_piece_length(const PieceConfiguration& cfg) {
  if (cfg.pieces.empty()) throw std::domain_error("max_piece_length: empty configuration");
  double m = 0.0;
  for (const auto& p : cfg.pieces) m = std::max(m, p.length);
  return m;
}

// Leading-order expectations at intensity 1 (lengths in units of 1/mu).
inline double expected_pieces_in_range(double L, double a, double b) {
  return L * std::exp(-a) * -std::expm1(-b);
}

// Separated pairs: the gap is a sum of whole pieces, whose renewal density is 1.
inline double expected_pair_clusters(double L, double a, double b, double c, double d, double f) {
  return L * std::exp(-a - c) * std::expm1(-b) * std::expm1(-d) * f;
}

// Adjacent pairs contribute e^{-l-l'} L, separated ones d e^{-l-l'} L.
inline double expected_neighbor_pairs(double L, double ell, double ell_p, double d) {
  return (1.0 + d) * std::exp(-ell - ell_p) * L;
}

inline double expected_triplets(double L, double ell, double ell_p, double ell_pp, double d) {
  return (1.0 + d) * (1.0 + d) * std::exp(-ell - ell_p - ell_pp) * L;
}

inline double neighbor_pair_bound(double L, double ell, double ell_p, double d) {
  return (2.0 + d) * std::exp(-ell - ell_p) * L;
}

inline double triplet_bound(double L, double ell, double ell_p, double ell_pp, double d) {
  return (2.0 + d * d) * std::exp(-ell - ell_p - ell_pp) * L;
}

inline double max_piece_bound(double L) { return std::log(L) * std::log(std::log(L)); }

}  // namespace pieces
