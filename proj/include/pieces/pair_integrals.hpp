#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "potential.hpp"
#include "quadrature.hpp"

namespace pieces {

// u-nodes for integrals of U against trig functions of frequency up to
// max_freq on [lo, hi]: breaks at the kinks of U (both signs) and extra.
inline Rule u_rule(const Potential& U, double lo, double hi, double max_freq,
                   std::vector<double> extra = {}, int order = 16) {
  const double R = U.effective_range(1e-18);
  lo = std::max(lo, -R);
  hi = std::min(hi, R);
  if (!(hi > lo)) return {};
  std::vector<double> br = std::move(extra);
  for (double k : U.kinks()) {
    br.push_back(k);
    br.push_back(-k);
  }
  // panels short enough for both the oscillation and the decay of U
  double width = max_freq > 0.0 ? 3.0 / max_freq : 1e300;
  if (U.family() != Family::box) width = std::min(width, 1.0 / std::max(U.param(), 1e-3));
  if (U.family() == Family::polynomial) width = std::min(width, U.param());
  return composite_rule(lo, hi, br, order, width);
}

// Transforms of U on [0, ell] that determine every in-piece matrix element:
// S_k = int U sin(k pi u/ell), C_k = int U cos(..), D_k = int u U cos(..).
struct SineTables {
  double ell = 1.0;
  std::vector<double> S, C, D;
};

inline SineTables sine_tables(const Potential& U, double ell, int K) {
  SineTables t;
  t.ell = ell;
  t.S.assign(K + 1, 0.0);
  t.C.assign(K + 1, 0.0);
  t.D.assign(K + 1, 0.0);
  if (U.is_zero()) return t;
  const double w0 = M_PI / ell;
  const Rule r = u_rule(U, 0.0, ell, K * w0);
  for (std::size_t n = 0; n < r.x.size(); ++n) {
    const double u = r.x[n], wu = r.w[n] * U(u);
    if (wu == 0.0) continue;
    // Chebyshev-style recurrence for sin/cos(k w0 u)
    const double c1 = std::cos(w0 * u), s1 = std::sin(w0 * u);
    double ck = 1.0, sk = 0.0;
    for (int k = 0; k <= K; ++k) {
      t.S[k] += wu * sk;
      t.C[k] += wu * ck;
      t.D[k] += wu * u * ck;
      const double cn = ck * c1 - sk * s1;
      sk = sk * c1 + ck * s1;
      ck = cn;
    }
  }
  return t;
}

// J(p, q) = int int_{[0,ell]^2} U(x-y) cos(p pi x/ell) cos(q pi y/ell) dx dy
class InPieceKernel {
 public:
  InPieceKernel() = default;
  InPieceKernel(const Potential& U, double ell, int K) : t_(sine_tables(U, ell, K)), K_(K) {}

  int order() const { return K_; }
  double ell() const { return t_.ell; }

  double J(int p, int q) const {
    p = std::abs(p);
    q = std::abs(q);
    if ((p + q) % 2 != 0) return 0.0;
    const double ell = t_.ell, w0 = M_PI / ell;
    if (p == q) {
      if (p == 0) return 2.0 * (ell * t_.C[0] - t_.D[0]);
      return -t_.S[p] / (p * w0) + ell * t_.C[p] - t_.D[p];
    }
    const double a = p * w0, b = q * w0;
    return -(t_.S[p] + t_.S[q]) / (a + b) + (t_.S[q] - t_.S[p]) / (a - b);
  }

  // <psi_a psi_b | U | psi_c psi_d>, particle 1 in (a, c), particle 2 in (b, d)
  double V(int a, int b, int c, int d) const {
    const double ell = t_.ell;
    return (J(a - c, b - d) - J(a - c, b + d) - J(a + c, b - d) + J(a + c, b + d)) / (ell * ell);
  }

 private:
  SineTables t_;
  int K_ = 0;
};

// W(p, q) = int_X int_Y U(x-y) cos(p pi (x-x0)/lx) cos(q pi (y-y0)/ly) dx dy
// for X = [x0, x0+lx], Y = [y0, y0+ly], 0 <= p <= P, 0 <= q <= Q.
// The y-integral is done in closed form at fixed u = x - y.
inline Eigen::MatrixXd rect_cos_table(const Potential& U, double x0, double lx, double y0,
                                      double ly, int P, int Q) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(P + 1, Q + 1);
  if (U.is_zero()) return W;
  const double x1 = x0 + lx, y1 = y0 + ly;
  const double ax = M_PI / lx, by = M_PI / ly;
  const double fmax = P * ax + Q * by;
  const Rule r = u_rule(U, x0 - y1, x1 - y0, fmax, {x0 - y0, x1 - y1});
  std::vector<double> al(P + 1), be(Q + 1);
  for (int p = 0; p <= P; ++p) al[p] = p * ax;
  for (int q = 0; q <= Q; ++q) be[q] = q * by;
  for (std::size_t n = 0; n < r.x.size(); ++n) {
    const double u = r.x[n];
    const double wu = r.w[n] * U(u);
    if (wu == 0.0) continue;
    const double lo = std::max(y0, x0 - u), hi = std::min(y1, x1 - u);
    if (!(hi > lo)) continue;
    const double m = 0.5 * (lo + hi), h = hi - lo;
    for (int p = 0; p <= P; ++p) {
      const double ph = al[p] * (u - x0);
      for (int q = 0; q <= Q; ++q) {
        const double s = cos_interval(al[p] + be[q], ph - be[q] * y0, m, h) +
                         cos_interval(al[p] - be[q], ph + be[q] * y0, m, h);
        W(p, q) += 0.5 * wu * s;
      }
    }
  }
  return W;
}

// Independent tensor-product quadrature of <phi_(i,j), U phi_(k,l)> on
// [0, ell]^2 in the coordinates (u = x - y, y); phi_(i,j) is the normalized
// antisymmetric sine pair.
inline double pair_element_tensor(const Potential& U, double ell, int i, int j, int k, int l,
                                  int nodes = 0) {
  if (U.is_zero()) return 0.0;
  const int mx = std::max(std::max(i, j), std::max(k, l));
  const int n = nodes > 0 ? nodes : std::max(64, 8 * mx);
  auto psi = [ell](int a, double x) { return std::sqrt(2.0 / ell) * std::sin(a * M_PI * x / ell); };
  auto phi = [&](int a, int b, double x, double y) {
    return (psi(a, x) * psi(b, y) - psi(b, x) * psi(a, y)) / std::sqrt(2.0);
  };
  const int per = 16;
  const int panels = std::max(1, n / per);
  const double R = std::min(ell, U.effective_range(1e-18));
  std::vector<double> br;
  for (double kk : U.kinks()) br.push_back(kk), br.push_back(-kk);
  const Rule ru = composite_rule(-R, R, br, per, 2.0 * R / panels);
  const Rule& g = gauss_legendre(per);
  double s = 0.0;
  for (std::size_t a = 0; a < ru.x.size(); ++a) {
    const double u = ru.x[a], wu = ru.w[a] * U(u);
    if (wu == 0.0) continue;
    const double lo = std::max(0.0, -u), hi = std::min(ell, ell - u);
    if (!(hi > lo)) continue;
    const double hp = (hi - lo) / panels;
    double inner = 0.0;
    for (int p = 0; p < panels; ++p)
      for (std::size_t b = 0; b < g.x.size(); ++b) {
        const double y = lo + hp * (p + 0.5 * (g.x[b] + 1.0));
        const double x = y + u;
        inner += 0.5 * hp * g.w[b] * phi(i, j, x, y) * phi(k, l, x, y);
      }
    s += wu * inner;
  }
  return s;
}

}  // namespace pieces
