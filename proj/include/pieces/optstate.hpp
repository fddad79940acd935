#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disorder.hpp"
#include "errors.hpp"
#include "manybody.hpp"
#include "pair_integrals.hpp"
#include "potential.hpp"
#include "quadrature.hpp"
#include "spectrum.hpp"
#include "twobody.hpp"

namespace pieces {

enum class Assignment { empty, single, pair, free_fill };

inline const char* to_string(Assignment a) {
  switch (a) {
    case Assignment::empty: return "empty";
    case Assignment::single: return "single";
    case Assignment::pair: return "pair";
    case Assignment::free_fill: return "free";
  }
  return "?";
}

struct Thresholds {
  double ell_rho = 0.0;
  double single_lo = 0.0;  // l_rho - rho x*
  double pair_lo = 0.0;    // 2 l_rho + A*
  double pair_hi = 0.0;    // 3 l_rho
  double fill_lo = 0.0;    // l_rho (3 + rho), preferred completion band
  double fill_hi = 0.0;    // 4 l_rho
};

struct StatePlan {
  std::vector<Assignment> tag;
  Occupation occupation;
  std::size_t n = 0;          // target particle number
  std::size_t n_main = 0;     // particles before completion
  std::size_t completed = 0;  // particles added by completion
  std::size_t trimmed = 0;    // singles removed when the main part overfills
  Thresholds thresholds;

  std::size_t total() const { return static_cast<std::size_t>(occupation.n()); }
};

// The non-interacting ground state: the n lowest levels.
inline StatePlan fill_free_ground_state(const PieceConfiguration& cfg, std::size_t n) {
  if (n < 1) throw std::domain_error("fill_free_ground_state: n >= 1");
  StatePlan p;
  p.n = n;
  p.occupation.Q.assign(cfg.size(), 0);
  p.tag.assign(cfg.size(), Assignment::empty);
  for (const auto& l : lowest_levels(cfg, n)) ++p.occupation.Q[l.piece];
  for (std::size_t j = 0; j < cfg.size(); ++j)
    if (p.occupation.Q[j] > 0) p.tag[j] = Assignment::free_fill;
  p.n_main = n;
  return p;
}

// Band edges in the units of the configuration: lengths scale as 1/mu and
// the dimensionless density is rho/mu.
inline Thresholds psi_opt_thresholds(double rho, double gamma, double mu = 1.0, double ell_rho = 0.0) {
  const auto ax = astar_xstar(mu * gamma);
  Thresholds t;
  t.ell_rho = ell_rho > 0.0 ? ell_rho : fermi_length(rho, mu);
  const double r = rho / mu;
  t.single_lo = t.ell_rho - r * ax.x_star / mu;
  t.pair_lo = 2.0 * t.ell_rho + ax.A_star / mu;
  t.pair_hi = 3.0 * t.ell_rho;
  t.fill_lo = t.ell_rho * (3.0 + r);
  t.fill_hi = 4.0 * t.ell_rho;
  return t;
}

inline Assignment band_of(double length, const Thresholds& t) {
  if (length < t.single_lo || length >= t.pair_hi) return Assignment::empty;
  if (length < t.pair_lo) return Assignment::single;
  return Assignment::pair;
}

enum class FermiSource {
  theoretical,  // l_rho from the closed-form IDS
  empirical     // pi / sqrt(E_n) of the sample, so that gamma = 0 reproduces Psi^0
};

// Psi_m: one particle on [l - rho x*, 2l + A*), an interacting pair on
// [2l + A*, 3l); then the deficit is taken from the lowest free levels in
// pieces of length in [l (3 + rho), 4l), falling back to any piece >= 3l
// and then to the longest empty pieces.
inline StatePlan build_psi_opt(const PieceConfiguration& cfg, double rho, double gamma, double mu = 1.0,
                               std::size_t n = 0, FermiSource src = FermiSource::empirical) {
  if (!(rho > 0.0)) throw std::domain_error("build_psi_opt: rho > 0");
  if (n == 0) n = static_cast<std::size_t>(std::llround(rho * cfg.L));
  if (n == 0) throw std::domain_error("build_psi_opt: rho L rounds to zero particles");
  StatePlan p;
  p.n = n;
  const double ell = src == FermiSource::empirical ? M_PI / std::sqrt(nth_level_energy(cfg, n)) : 0.0;
  p.thresholds = psi_opt_thresholds(rho, gamma, mu, ell);
  const Thresholds& t = p.thresholds;
  p.tag.assign(cfg.size(), Assignment::empty);
  p.occupation.Q.assign(cfg.size(), 0);
  for (std::size_t j = 0; j < cfg.size(); ++j) {
    p.tag[j] = band_of(cfg.length(j), t);
    p.occupation.Q[j] = p.tag[j] == Assignment::single ? 1 : p.tag[j] == Assignment::pair ? 2 : 0;
  }
  p.n_main = p.total();
  if (p.n_main > n) {
    // finite-size fluctuations can overfill; drop singles from the shortest
    // (highest-energy) single pieces
    std::vector<std::size_t> singles;
    for (std::size_t j = 0; j < cfg.size(); ++j)
      if (p.tag[j] == Assignment::single) singles.push_back(j);
    std::stable_sort(singles.begin(), singles.end(),
                     [&](std::size_t a, std::size_t b) { return cfg.length(a) < cfg.length(b); });
    const std::size_t surplus = p.n_main - n;
    if (surplus > singles.size()) throw NumericError("build_psi_opt: surplus exceeds single pieces");
    for (std::size_t i = 0; i < surplus; ++i) {
      p.tag[singles[i]] = Assignment::empty;
      p.occupation.Q[singles[i]] = 0;
    }
    p.trimmed = surplus;
    return p;
  }
  const std::size_t deficit = n - p.n_main;
  if (deficit == 0) return p;
  std::vector<Level> band, rest;
  for (const auto& l : lowest_levels(cfg, n)) {
    const double len = cfg.length(l.piece);
    if (len < t.pair_hi) continue;
    (len >= t.fill_lo && len < t.fill_hi ? band : rest).push_back(l);
  }
  // levels arrive sorted by energy, so each piece fills from the bottom
  band.insert(band.end(), rest.begin(), rest.end());
  if (band.size() < deficit) {
    // edge ties can leave the count short; continue with the next levels
    // of long pieces in energy order
    std::vector<int> top(cfg.size(), 0);
    for (const auto& l : band) top[l.piece] = std::max(top[l.piece], l.k);
    std::vector<Level> more;
    for (std::size_t j = 0; j < cfg.size(); ++j)
      if (cfg.length(j) >= t.pair_hi)
        for (int k = top[j] + 1; k <= top[j] + static_cast<int>(deficit); ++k)
          more.push_back({j, k, level_energy(cfg.length(j), k)});
    std::sort(more.begin(), more.end(), level_less);
    for (const auto& l : more) {
      if (band.size() >= deficit) break;
      band.push_back(l);
    }
  }
  if (band.size() < deficit) {
    // no piece of length >= 3l at all: the longest empty pieces below the
    // single band take one particle each
    std::vector<Level> spare;
    for (std::size_t j = 0; j < cfg.size(); ++j)
      if (p.tag[j] == Assignment::empty && cfg.length(j) < t.single_lo)
        spare.push_back({j, 1, level_energy(cfg.length(j), 1)});
    std::sort(spare.begin(), spare.end(), level_less);
    for (const auto& l : spare) {
      if (band.size() >= deficit) break;
      band.push_back(l);
    }
  }
  if (band.size() < deficit)
    throw NumericError("build_psi_opt: only " + std::to_string(band.size()) +
                       " long-piece levels for a deficit of " + std::to_string(deficit));
  // each piece lies in one group, so a prefix fills it from k = 1 upward
  for (std::size_t i = 0; i < deficit; ++i) {
    ++p.occupation.Q[band[i].piece];
    p.tag[band[i].piece] = Assignment::free_fill;
  }
  p.completed = deficit;
  return p;
}

// Infinite-volume mean of n_main / n for Poisson pieces with the theoretical
// Fermi length: the expected number of pieces with length in [a, b) is
// L (e^{-mu a} - e^{-mu b}).
inline double expected_main_fraction(double rho, double gamma, double mu = 1.0) {
  const Thresholds t = psi_opt_thresholds(rho, gamma, mu);
  auto above = [mu](double l) { return std::exp(-mu * std::max(l, 0.0)); };
  const double singles = above(t.single_lo) - above(t.pair_lo);
  const double pairs = above(t.pair_lo) - above(t.pair_hi);
  return mu * (singles + 2.0 * pairs) / rho;
}

// Particle density on a piece as a cosine series in the local coordinate.
struct PieceDensity {
  Piece piece;
  std::vector<double> r;  // rho(x) = sum_p r_p cos(p pi (x - left) / length)

  double operator()(double x) const {
    if (x < piece.left || x > piece.right) return 0.0;
    const double th = M_PI * (x - piece.left) / piece.length;
    const double c1 = std::cos(th), s1 = std::sin(th);
    double ck = 1.0, sk = 0.0, s = 0.0;
    for (double rp : r) {
      s += rp * ck;
      const double cn = ck * c1 - sk * s1;
      sk = sk * c1 + ck * s1;
      ck = cn;
    }
    return s;
  }
  int order() const { return static_cast<int>(r.size()) - 1; }
};

// Density of the k lowest free levels on a piece.
inline PieceDensity free_fill_density(const Piece& P, int k) {
  PieceDensity d{P, std::vector<double>(2 * k + 1, 0.0)};
  for (int j = 1; j <= k; ++j) {
    d.r[0] += 1.0 / P.length;
    d.r[2 * j] -= 1.0 / P.length;
  }
  return d;
}

// int int U(x - y) rho_a(x) rho_b(y): u-quadrature with the y-integral on
// composite Gauss-Legendre panels.
inline double density_interaction_quad(const Potential& U, const PieceDensity& a, const PieceDensity& b) {
  if (U.is_zero()) return 0.0;
  const Piece &A = a.piece, &B = b.piece;
  const double fa = M_PI * a.order() / A.length, fb = M_PI * b.order() / B.length;
  const Rule ru = u_rule(U, A.left - B.right, A.right - B.left, fa + fb,
                         {A.left - B.left, A.right - B.right});
  const double width = 3.0 / std::max(fa + fb, 1e-3);
  double s = 0.0;
  for (std::size_t n = 0; n < ru.x.size(); ++n) {
    const double u = ru.x[n], wu = ru.w[n] * U(u);
    if (wu == 0.0) continue;
    const double lo = std::max(B.left, A.left - u), hi = std::min(B.right, A.right - u);
    if (!(hi > lo)) continue;
    const Rule ry = composite_rule(lo, hi, {}, 16, width);
    double inner = 0.0;
    for (std::size_t m = 0; m < ry.x.size(); ++m) inner += ry.w[m] * a(ry.x[m] + u) * b(ry.x[m]);
    s += wu * inner;
  }
  return s;
}

// Same integral through the closed-form cosine table; the two routes share
// nothing but U.
inline double density_interaction_table(const Potential& U, const PieceDensity& a, const PieceDensity& b) {
  const auto W = rect_cos_table(U, a.piece.left, a.piece.length, b.piece.left, b.piece.length, a.order(), b.order());
  double s = 0.0;
  for (int p = 0; p <= a.order(); ++p)
    for (int q = 0; q <= b.order(); ++q) s += a.r[p] * b.r[q] * W(p, q);
  return s;
}

// Picks the cheaper route: the table costs (P+1)(Q+1) per u-node, the
// quadrature about (P+Q) per y-node.
inline double density_interaction(const Potential& U, const PieceDensity& a, const PieceDensity& b) {
  if (U.is_zero()) return 0.0;
  const double fa = M_PI * a.order() / a.piece.length, fb = M_PI * b.order() / b.piece.length;
  const double h = std::min({a.piece.length, b.piece.length, U.effective_range(1e-18)});
  const double ny = 16.0 * std::ceil(h * std::max(fa + fb, 1e-3) / 3.0);
  const double table = (a.order() + 1.0) * (b.order() + 1.0);
  const double quad = ny * (a.order() + b.order() + 2.0);
  return table < quad ? density_interaction_table(U, a, b) : density_interaction_quad(U, a, b);
}

struct PlanEnergy {
  double total = 0.0;
  double singles = 0.0, pairs = 0.0, fills = 0.0, cross = 0.0;
  std::size_t cross_terms = 0;
};

struct PlanEnergyOptions {
  int pair_M = 20;     // sine modes per pair solve
  double range_tol = 1e-18;
};

// Energy of the product state described by the plan: per-piece energies plus,
// optionally, the density-density interaction between distinct pieces.
inline PlanEnergy energy_of_plan(const PieceConfiguration& cfg, const StatePlan& plan, const Potential& U,
                                 bool include_cross, const PlanEnergyOptions& opt = {}) {
  PlanEnergy e;
  std::vector<std::size_t> occ;
  std::vector<PieceDensity> dens;
  for (std::size_t j = 0; j < cfg.size(); ++j) {
    const int q = plan.occupation.Q[j];
    if (q == 0) continue;
    const Piece& P = cfg.pieces[j];
    const double l = P.length;
    PieceDensity d;
    if (plan.tag[j] == Assignment::pair) {
      if (q != 2) throw std::domain_error("energy_of_plan: pair piece must hold two particles");
      const auto s = solve_two_body(U, l, opt.pair_M);
      e.pairs += s.E0;
      d = {P, s.density_cos_coeffs()};
    } else if (q == 1) {
      e.singles += level_energy(l, 1);
      d = free_fill_density(P, 1);
    } else {
      // Slater determinant of the q lowest levels, with its in-piece interaction
      double en = 0.0;
      for (int k = 1; k <= q; ++k) en += level_energy(l, k);
      if (!U.is_zero()) {
        InPieceKernel K(U, l, 2 * q);
        for (int a = 1; a <= q; ++a)
          for (int b = a + 1; b <= q; ++b) en += K.V(a, b, a, b) - K.V(a, b, b, a);
      }
      e.fills += en;
      d = free_fill_density(P, q);
    }
    occ.push_back(j);
    dens.push_back(std::move(d));
  }
  if (include_cross && !U.is_zero()) {
    const double R = U.effective_range(opt.range_tol);
    for (std::size_t i = 0; i < occ.size(); ++i)
      for (std::size_t k = i + 1; k < occ.size(); ++k) {
        const double gap = dens[k].piece.left - dens[i].piece.right;
        if (gap >= R) break;
        e.cross += density_interaction(U, dens[i], dens[k]);
        ++e.cross_terms;
      }
  }
  e.total = e.singles + e.pairs + e.fills + e.cross;
  return e;
}

// Per-particle second-order term pi^2 gamma* rho mu^-2 l_rho^-3 with
// gamma* = 1 - exp(-mu gamma / 8 pi^2).
inline double second_order_prediction(double rho, double mu, double gamma) {
  if (!(rho > 0.0) || !(mu > 0.0) || gamma < 0.0) throw std::domain_error("second_order_prediction: bad arguments");
  const double l = fermi_length(rho, mu);
  return M_PI * M_PI * gamma_star(gamma, mu) * rho / (mu * mu * l * l * l);
}

struct AsymptoticsReport {
  bool no_interaction = false;
  std::size_t n = 0;
  double energy_per_particle = 0.0;
  double free_per_particle = 0.0;
  double excess = 0.0;
  double prediction = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double residual_share = 0.0;
  PlanEnergy energy;
};

inline AsymptoticsReport asymptotics_check(const PieceConfiguration& cfg, double rho, const Potential& U,
                                           double gamma, double mu = 1.0, double B = 3.0,
                                           const PlanEnergyOptions& opt = {},
                                           FermiSource src = FermiSource::empirical) {
  AsymptoticsReport r;
  const auto plan = build_psi_opt(cfg, rho, gamma, mu, 0, src);
  r.n = plan.n;
  r.free_per_particle = free_energy_per_particle_empirical(cfg, plan.n);
  r.energy = energy_of_plan(cfg, plan, U, true, opt);
  r.energy_per_particle = r.energy.total / static_cast<double>(plan.n);
  r.excess = r.energy_per_particle - r.free_per_particle;
  r.prediction = second_order_prediction(rho, mu, gamma);
  if (U.is_zero() || gamma == 0.0) {
    r.no_interaction = true;
    return r;
  }
  r.ratio = r.excess / r.prediction;
  const auto split = split_principal(U, B, fermi_length(rho, mu));
  if (!split.residual.is_zero()) {
    const auto ep = energy_of_plan(cfg, plan, split.principal, true, opt);
    const double full = r.energy.total - r.free_per_particle * plan.n;
    r.residual_share = (r.energy.total - ep.total) / full;
  }
  return r;
}

// Configuration built from an explicit list of pieces.
inline PieceConfiguration configuration_of(std::vector<Piece> pieces) {
  std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.left < b.left; });
  PieceConfiguration c;
  c.pieces = std::move(pieces);
  c.L = c.pieces.empty() ? 0.0 : c.pieces.back().right;
  return c;
}

struct SubadditivityReport {
  double e_union = 0.0, e1 = 0.0, e2 = 0.0;
  double slack = 0.0;          // density-density integral of the two ground states
  double product_energy = 0.0; // <Psi1 ^ Psi2, H Psi1 ^ Psi2> in the union
  double margin = 0.0;         // e1 + e2 + slack - e_union
  bool holds = false;
};

inline SubadditivityReport subadditivity_check(const std::vector<Piece>& lambda1, int n1,
                                               const std::vector<Piece>& lambda2, int n2,
                                               const Potential& U, int M, double tol = 1e-8) {
  if (n1 + n2 > 4) throw std::domain_error("subadditivity_check: n1 + n2 <= 4");
  SubadditivityReport rep;
  const auto c1 = configuration_of(lambda1), c2 = configuration_of(lambda2);
  std::vector<Piece> all = c1.pieces;
  all.insert(all.end(), c2.pieces.begin(), c2.pieces.end());
  const auto g1 = exact_ground_state_small(c1, n1, U, M);
  const auto g2 = exact_ground_state_small(c2, n2, U, M);
  const auto gu = exact_ground_state_small(configuration_of(all), n1 + n2, U, M);
  rep.e1 = g1.energy;
  rep.e2 = g2.energy;
  rep.e_union = gu.energy;

  // both ground states re-expressed on one system holding all their pieces
  const OrbitalSystem& s1 = *g1.state.system;
  const OrbitalSystem& s2 = *g2.state.system;
  std::vector<Piece> joint;
  for (int p = 0; p < s1.piece_count(); ++p) joint.push_back(s1.piece(p));
  for (int p = 0; p < s2.piece_count(); ++p) joint.push_back(s2.piece(p));
  std::vector<int> Ms;
  for (int p = 0; p < s1.piece_count(); ++p) Ms.push_back(s1.truncation(p));
  for (int p = 0; p < s2.piece_count(); ++p) Ms.push_back(s2.truncation(p));
  auto sys = std::make_shared<OrbitalSystem>(joint, U, Ms);
  const int off = s1.size();

  ManyBodyState prod;
  prod.system = sys;
  prod.occupation.Q = g1.state.occupation.Q;
  prod.occupation.Q.insert(prod.occupation.Q.end(), g2.state.occupation.Q.begin(), g2.state.occupation.Q.end());
  std::vector<double> cs;
  for (int a = 0; a < g1.state.basis.size(); ++a)
    for (int b = 0; b < g2.state.basis.size(); ++b) {
      Det d = g1.state.basis.dets[a];
      for (int o : g2.state.basis.dets[b]) d.push_back(o + off);
      prod.basis.add(d);
      cs.push_back(g1.state.coeffs(a) * g2.state.coeffs(b));
    }
  prod.coeffs = Eigen::Map<Eigen::VectorXd>(cs.data(), static_cast<Eigen::Index>(cs.size()));
  rep.product_energy = prod.energy(hamiltonian(*sys, prod.basis));

  // density-density integral from the two one-particle density matrices
  auto gamma_of = [](const ManyBodyState& s) {
    const int m = s.system->size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    for (int r = 0; r < s.basis.size(); ++r)
      for (int i : s.basis.dets[r]) {
        Det R = s.basis.dets[r];
        const int s1 = annihilate(R, i);
        for (int j = 0; j < m; ++j) {
          Det T = R;
          const int s2 = create(T, j);
          if (!s2) continue;
          const int c = s.basis.find(T);
          if (c >= 0) G(j, i) += s1 * s2 * s.coeffs(c) * s.coeffs(r);
        }
      }
    return G;
  };
  const Eigen::MatrixXd G1 = gamma_of(g1.state), G2 = gamma_of(g2.state);
  double slack = 0.0;
  for (int i = 0; i < s1.size(); ++i)
    for (int j = 0; j < s1.size(); ++j) {
      if (G1(i, j) == 0.0) continue;
      for (int k = 0; k < s2.size(); ++k)
        for (int l = 0; l < s2.size(); ++l)
          if (G2(k, l) != 0.0) slack += G1(i, j) * G2(k, l) * sys->V(i, k + off, j, l + off);
    }
  rep.slack = slack;
  rep.margin = rep.e1 + rep.e2 + rep.slack - rep.e_union;
  rep.holds = rep.margin >= -tol;
  return rep;
}

enum class BoundKind { far11, close11, far12, close12, both22, compact_first_order };

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::far11: return "11far";
    case BoundKind::close11: return "11close";
    case BoundKind::far12: return "12far";
    case BoundKind::close12: return "12close";
    case BoundKind::both22: return "22";
    case BoundKind::compact_first_order: return "compactFirstOrder";
  }
  return "?";
}

struct BoundReport {
  double lhs = 0.0;
  double shape = 0.0;  // right-hand side without its constant
  double constant = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// Largest of the left-hand integrals over low levels for D1 = [-l1, 0],
// D2 = [a, a + l2]: one-particle states use levels 1..2, pair densities use
// the two lowest two-body states.
inline double cross_piece_lhs(const Potential& U, double l1, double l2, double a, BoundKind k, int pair_M = 24) {
  const Piece P1{-l1, 0.0, l1}, P2{a, a + l2, l2};
  auto single = [](const Piece& P, int i) {
    PieceDensity d{P, std::vector<double>(2 * i + 1, 0.0)};
    d.r[0] = 1.0 / P.length;
    d.r[2 * i] = -1.0 / P.length;
    return d;
  };
  auto pair_densities = [&](const Piece& P) {
    PairHamiltonian H(U, P.length, pair_M);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.dense());
    std::vector<PieceDensity> out;
    for (int c = 0; c < 2; ++c) {
      TwoBodySolution s;
      s.ell = P.length;
      s.M = pair_M;
      s.pairs = H.pairs();
      s.coeffs = es.eigenvectors().col(c);
      out.push_back({P, s.density_cos_coeffs()});
    }
    return out;
  };
  // one cosine table per piece pair serves every density combination
  auto max_over = [&](const std::vector<PieceDensity>& d1, const std::vector<PieceDensity>& d2) {
    int P = 0, Q = 0;
    for (const auto& d : d1) P = std::max(P, d.order());
    for (const auto& d : d2) Q = std::max(Q, d.order());
    const auto W = rect_cos_table(U, P1.left, P1.length, P2.left, P2.length, P, Q);
    double best = 0.0;
    for (const auto& x : d1)
      for (const auto& y : d2) {
        double v = 0.0;
        for (int p = 0; p <= x.order(); ++p)
          for (int q = 0; q <= y.order(); ++q) v += x.r[p] * y.r[q] * W(p, q);
        best = std::max(best, v);
      }
    return best;
  };
  const std::vector<PieceDensity> s1{single(P1, 1), single(P1, 2)}, s2{single(P2, 1), single(P2, 2)};
  switch (k) {
    case BoundKind::far11:
    case BoundKind::close11: return max_over(s1, s2);
    case BoundKind::far12:
    case BoundKind::close12: return max_over(s1, pair_densities(P2));
    case BoundKind::both22: return max_over(pair_densities(P1), pair_densities(P2));
    case BoundKind::compact_first_order: break;
  }
  throw std::domain_error("cross_piece_lhs: use neighbor_energy_deviation");
}

// Right-hand side shapes; the far bounds carry explicit constants 2 and 4,
// the others are order bounds with epsilon = 0 whose constant is fitted.
inline double cross_piece_shape(const Potential& U, double l1, double l2, double a, BoundKind k) {
  const double Z = tail_Z(U, a);
  switch (k) {
    case BoundKind::far11: return std::pow(a, -3.0) * Z / std::max(l1, l2);
    case BoundKind::close11: {
      const double mx = std::max(l1, l2), mn = std::min(l1, l2);
      return Z / (mx * mx * mn * mn);
    }
    case BoundKind::far12: return std::pow(a, -3.0) * Z / l1;
    case BoundKind::close12: return Z / (l1 * l1 * l1 * std::sqrt(l2));
    case BoundKind::both22: return std::min(1.0, Z / (a * a)) / std::sqrt(l1 * l2);
    case BoundKind::compact_first_order: return 1.0;
  }
  return 0.0;
}

inline double explicit_constant(BoundKind k) {
  if (k == BoundKind::far11) return 2.0;
  if (k == BoundKind::far12) return 4.0;
  return 0.0;
}

inline BoundReport cross_piece_bound_check(const Potential& U, double l1, double l2, double a, BoundKind k,
                                           double constant = 0.0) {
  if (!(l1 > 0.0) || !(l2 > 0.0) || a < 0.0) throw std::domain_error("cross_piece_bound_check: bad geometry");
  BoundReport r;
  r.lhs = cross_piece_lhs(U, l1, l2, a, k);
  r.shape = cross_piece_shape(U, l1, l2, a, k);
  r.constant = constant > 0.0 ? constant : explicit_constant(k);
  r.rhs = r.constant * r.shape;
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-12) + 1e-300;
  return r;
}

// Constant of the first-order estimate for compactly supported U:
// (1/2) sup_{0 <= a <= diam supp U} int int_{R+^2} U(x + y + a)(1 + x^2)(1 + y^2).
inline double uijij_constant(const Potential& U, int grid = 32) {
  const double R = U.support();
  if (!std::isfinite(R)) throw std::domain_error("uijij_constant: compact support required");
  // with s = x + y the inner integral over x in [0, s] is a polynomial in s
  auto F = [&](double a) {
    const Rule r = u_rule(U, 0.0, R, 0.0);
    double s = 0.0;
    for (std::size_t n = 0; n < r.x.size(); ++n) {
      const double t = r.x[n] - a;  // s = u - a
      if (t <= 0.0) continue;
      // int_0^t (1 + x^2)(1 + (t - x)^2) dx
      const double p = t + t * t * t / 1.5 + std::pow(t, 5) / 30.0;
      s += r.w[n] * U(r.x[n]) * p;
    }
    return 0.5 * s;
  };
  double best = 0.0;
  for (int i = 0; i <= grid; ++i) best = std::max(best, F(R * i / grid));
  return best;
}

// <U phi_(i,j), phi_(i,j)> for phi^i on [-l1, 0] and phi^j on [a, a + l2].
inline double uijij_lhs(const Potential& U, double l1, double l2, double a, int i, int j) {
  PieceDensity d1{{-l1, 0.0, l1}, std::vector<double>(2 * i + 1, 0.0)};
  PieceDensity d2{{a, a + l2, l2}, std::vector<double>(2 * j + 1, 0.0)};
  d1.r[0] = 1.0 / l1;
  d1.r[2 * i] = -1.0 / l1;
  d2.r[0] = 1.0 / l2;
  d2.r[2 * j] = -1.0 / l2;
  return density_interaction(U, d1, d2);
}

inline double uijij_shape(double l1, double l2, int i, int j) {
  const double m = std::min(static_cast<double>(i), l1) * std::min(static_cast<double>(j), l2);
  return m * m / (l1 * l1 * l1 * l2 * l2 * l2);
}

// Ground energy of one particle on [0, l1] and one on [l1 + r, l1 + r + l2],
// minus the free value pi^2/l1^2 + pi^2/l2^2.
inline double neighbor_energy_deviation(const Potential& U, double l1, double l2, double r, int M = 8) {
  std::vector<Piece> P{{0.0, l1, l1}, {l1 + r, l1 + r + l2, l2}};
  auto sys = std::make_shared<OrbitalSystem>(P, U, M);
  const auto b = occupation_block(sys, Occupation{{1, 1}});
  return b.energy - level_energy(l1, 1) - level_energy(l2, 1);
}

}  // namespace pieces
