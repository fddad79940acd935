#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "manybody.hpp"
#include "twobody.hpp"

namespace pieces {

// Pair modes (a, b), a < b, over m one-particle modes, lexicographic.
struct PairModes {
  int m = 0;
  int size() const { return m * (m - 1) / 2; }
  int index(int a, int b) const { return a * m - a * (a + 1) / 2 + (b - a - 1); }
  std::vector<std::pair<int, int>> list() const {
    std::vector<std::pair<int, int>> v;
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) v.emplace_back(a, b);
    return v;
  }
};

struct DensityMatrix {
  int order = 1;      // 1: one-particle modes, 2: antisymmetric pair modes
  int modes = 0;      // one-particle mode count
  Eigen::MatrixXd G;  // symmetric

  double trace() const { return G.trace(); }
  double asymmetry() const { return (G - G.transpose()).cwiseAbs().maxCoeff(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }
};

// gamma_ij = <Psi, a_j^+ a_i Psi> in the orbitals of the state's system.
inline DensityMatrix rdm1(const ManyBodyState& s) {
  const int m = s.system->size();
  DensityMatrix d{1, m, Eigen::MatrixXd::Zero(m, m)};
  for (int r = 0; r < s.basis.size(); ++r) {
    const double cr = s.coeffs(r);
    if (cr == 0.0) continue;
    for (int i : s.basis.dets[r]) {
      Det R = s.basis.dets[r];
      const int s1 = annihilate(R, i);
      for (int j = 0; j < m; ++j) {
        Det T = R;
        const int s2 = create(T, j);
        if (!s2) continue;
        const int c = s.basis.find(T);
        if (c < 0) continue;
        d.G(j, i) += s1 * s2 * s.coeffs(c) * cr;
      }
    }
  }
  return d;
}

// G[(ab), (cd)] = <Psi, a_a^+ a_b^+ a_d a_c Psi>; trace n(n-1)/2.
inline DensityMatrix rdm2(const ManyBodyState& s) {
  const int m = s.system->size();
  const PairModes pm{m};
  DensityMatrix d{2, m, Eigen::MatrixXd::Zero(pm.size(), pm.size())};
  for (int r = 0; r < s.basis.size(); ++r) {
    const double cr = s.coeffs(r);
    if (cr == 0.0) continue;
    const Det& D = s.basis.dets[r];
    for (std::size_t x = 0; x < D.size(); ++x)
      for (std::size_t y = x + 1; y < D.size(); ++y) {
        const int c = D[x], dd = D[y];
        Det R = D;
        int sg = annihilate(R, c);
        sg *= annihilate(R, dd);
        for (int a = 0; a < m; ++a)
          for (int b = a + 1; b < m; ++b) {
            Det T = R;
            int s2 = create(T, b);
            if (!s2) continue;
            s2 *= create(T, a);
            if (!s2) continue;
            const int row = s.basis.find(T);
            if (row < 0) continue;
            d.G(pm.index(a, b), pm.index(c, dd)) += sg * s2 * s.coeffs(row) * cr;
          }
      }
  }
  return d;
}

inline DensityMatrix rdm1(const TwoBodySolution& s) { return {1, s.M, s.rdm1()}; }

inline DensityMatrix rdm2(const TwoBodySolution& s) {
  const PairModes pm{s.M};
  Eigen::VectorXd v = Eigen::VectorXd::Zero(pm.size());
  for (std::size_t r = 0; r < s.pairs.size(); ++r) v(pm.index(s.pairs[r].i - 1, s.pairs[r].j - 1)) = s.coeffs(r);
  return {2, s.M, v * v.transpose()};
}

// (1/2)(Id - Ex) applied to the symmetrized A (x) B, on pair modes:
// entry [(ab),(cd)] = (A_ac B_bd + B_ac A_bd - A_ad B_bc - B_ad A_bc) / 2.
inline Eigen::MatrixXd antisymmetric_product(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int m = static_cast<int>(A.rows());
  const PairModes pm{m};
  const auto L = pm.list();
  Eigen::MatrixXd P(pm.size(), pm.size());
  for (int r = 0; r < pm.size(); ++r)
    for (int c = 0; c < pm.size(); ++c) {
      const auto [a, b] = L[r];
      const auto [x, y] = L[c];
      P(r, c) = 0.5 * (A(a, x) * B(b, y) + B(a, x) * A(b, y) - A(a, y) * B(b, x) - B(a, y) * A(b, x));
    }
  return P;
}

struct FactorizedRdm {
  DensityMatrix one, two;
};

// Reduced density matrices of the wedge of non-interacting sub-states:
// gamma = sum gamma_j and
// gamma2 = sum_j [gamma2_j - (1/2)(Id-Ex) gamma_j (x) gamma_j] + (1/2)(Id-Ex) gamma (x) gamma.
inline FactorizedRdm factorized_rdm(const std::vector<ManyBodyState>& parts) {
  if (parts.empty()) throw std::domain_error("factorized_rdm: no sub-states");
  const auto sys = parts[0].system;
  std::vector<int> used(sys->piece_count(), 0);
  for (const auto& p : parts) {
    if (p.system != sys) throw std::domain_error("factorized_rdm: sub-states on different systems");
    for (int j = 0; j < sys->piece_count(); ++j)
      if (p.occupation.Q[j] > 0 && used[j]++) throw std::domain_error("factorized_rdm: sub-states overlap");
  }
  const int m = sys->size();
  FactorizedRdm f;
  f.one = {1, m, Eigen::MatrixXd::Zero(m, m)};
  const PairModes pm{m};
  f.two = {2, m, Eigen::MatrixXd::Zero(pm.size(), pm.size())};
  for (const auto& p : parts) {
    const auto g1 = rdm1(p);
    f.one.G += g1.G;
    if (p.n() >= 2) f.two.G += rdm2(p).G;
    f.two.G -= antisymmetric_product(g1.G, g1.G);
  }
  f.two.G += antisymmetric_product(f.one.G, f.one.G);
  return f;
}

// A local state as a ManyBodyState on its own system.
inline ManyBodyState embed(std::shared_ptr<const OrbitalSystem> sys, const LocalState& s) {
  return wedge(std::move(sys), {s});
}

// Diagonal 0/1 projector onto modes whose piece is shorter than ell;
// order 2 keeps pair modes with both members selected.
inline Eigen::MatrixXd piece_projector(const OrbitalSystem& sys, double ell, int order) {
  if (order != 1 && order != 2) throw std::domain_error("piece_projector: order 1 or 2");
  const int m = sys.size();
  std::vector<double> keep(m);
  for (int i = 0; i < m; ++i) keep[i] = sys.piece(sys.orbital(i).piece).length < ell ? 1.0 : 0.0;
  if (order == 1) {
    Eigen::VectorXd d(m);
    for (int i = 0; i < m; ++i) d(i) = keep[i];
    return d.asDiagonal();
  }
  const PairModes pm{m};
  Eigen::VectorXd d(pm.size());
  for (const auto& [a, b] : pm.list()) d(pm.index(a, b)) = keep[a] * keep[b];
  return d.asDiagonal();
}

inline double trace_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues().sum();
}

inline double trace_norm_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd* P = nullptr) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw std::domain_error("trace_norm_distance: shape mismatch");
  if (P) return trace_norm((A - B) * *P);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * ((A - B) + (A - B).transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

}  // namespace pieces
