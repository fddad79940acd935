#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "disorder.hpp"
#include "errors.hpp"
#include "lobpcg.hpp"
#include "pair_integrals.hpp"
#include "potential.hpp"
#include "quadrature.hpp"
#include "spectrum.hpp"
#include "twobody.hpp"

namespace pieces {

struct Occupation {
  std::vector<int> Q;

  int n() const { return std::accumulate(Q.begin(), Q.end(), 0); }
  std::size_t size() const { return Q.size(); }
  bool operator==(const Occupation& o) const { return Q == o.Q; }
  bool operator<(const Occupation& o) const { return Q < o.Q; }
};

inline int dist1(const Occupation& a, const Occupation& b) {
  if (a.size() != b.size()) throw std::domain_error("dist1: length mismatch");
  int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.Q[i] - b.Q[i]);
  return s;
}

inline int dist0(const Occupation& a, const Occupation& b) {
  if (a.size() != b.size()) throw std::domain_error("dist0: length mismatch");
  int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.Q[i] != b.Q[i];
  return s;
}

inline Occupation restrict_occupation(const Occupation& q, const std::function<bool(std::size_t)>& keep) {
  Occupation r;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (keep(i)) r.Q.push_back(q.Q[i]);
  return r;
}

// sqrt(prod Q_j! / n!)
inline double wedge_constant(const Occupation& q) {
  double lg = -std::lgamma(q.n() + 1.0);
  for (int x : q.Q) lg += std::lgamma(x + 1.0);
  return std::exp(0.5 * lg);
}

// pi^2 nu^3 / (3 l_k^2 k^2) for k pieces whose longest has length l_k.
inline double kinetic_lower_bound(const std::vector<double>& lengths, double nu) {
  if (lengths.empty()) throw std::domain_error("kinetic_lower_bound: no pieces");
  const double lk = *std::max_element(lengths.begin(), lengths.end());
  const double k = static_cast<double>(lengths.size());
  return M_PI * M_PI * nu * nu * nu / (3.0 * lk * lk * k * k);
}

inline double filling_polynomial(int x) { return (2.0 * x + 1.0) * (x + 1.0) * x / 6.0; }

// Free filling energy sum_j pi^2 P(Q_j) / l_j^2 over the listed pieces.
inline double free_filling_energy(const std::vector<double>& lengths, const Occupation& q) {
  double e = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q.Q[j] > 0) e += M_PI * M_PI * filling_polynomial(q.Q[j]) / (lengths[j] * lengths[j]);
  return e;
}

struct Orbital {
  int piece;  // position in the system's piece list
  int k;      // sine index, 1-based
};

// Dirichlet sine orbitals on a set of pieces with the two-body matrix
// elements of U, in-piece and across pieces.
class OrbitalSystem {
 public:
  OrbitalSystem(std::vector<Piece> pieces, const Potential& U, std::vector<int> M,
                bool cross = true)
      : pieces_(std::move(pieces)), U_(U), M_(std::move(M)), cross_(cross) {
    if (M_.size() != pieces_.size()) throw std::domain_error("OrbitalSystem: one M per piece");
    for (std::size_t p = 0; p < pieces_.size(); ++p) {
      if (M_[p] < 1) throw std::domain_error("OrbitalSystem: M >= 1");
      offset_.push_back(static_cast<int>(orb_.size()));
      for (int k = 1; k <= M_[p]; ++k) orb_.push_back({static_cast<int>(p), k});
    }
    for (std::size_t a = 0; a < pieces_.size(); ++a)
      for (std::size_t b = a + 1; b < pieces_.size(); ++b)
        if (pieces_[a].right > pieces_[b].left + 1e-12 && pieces_[b].right > pieces_[a].left + 1e-12)
          throw std::domain_error("OrbitalSystem: overlapping pieces");
    kern_.resize(pieces_.size());
    range_ = U_.is_zero() ? 0.0 : U_.effective_range(1e-18);
  }

  OrbitalSystem(std::vector<Piece> pieces, const Potential& U, int M, bool cross = true)
      : OrbitalSystem(pieces, U, std::vector<int>(pieces.size(), M), cross) {}

  int size() const { return static_cast<int>(orb_.size()); }
  int piece_count() const { return static_cast<int>(pieces_.size()); }
  const Orbital& orbital(int i) const { return orb_[i]; }
  const Piece& piece(int p) const { return pieces_[p]; }
  int truncation(int p) const { return M_[p]; }
  int index(int p, int k) const { return offset_[p] + k - 1; }
  const Potential& potential() const { return U_; }

  double energy(int i) const { return level_energy(pieces_[orb_[i].piece].length, orb_[i].k); }

  double eval(int i, double x) const {
    const Piece& P = pieces_[orb_[i].piece];
    if (x < P.left || x > P.right) return 0.0;
    return std::sqrt(2.0 / P.length) * std::sin(orb_[i].k * M_PI * (x - P.left) / P.length);
  }

  bool interacting(int p, int q) const {
    if (U_.is_zero()) return false;
    if (p == q) return true;
    if (!cross_) return false;
    const double gap = std::max(pieces_[q].left - pieces_[p].right, pieces_[p].left - pieces_[q].right);
    return gap < range_;
  }

  // int int psi_a(x) psi_b(y) U(x - y) psi_c(x) psi_d(y)
  double V(int a, int b, int c, int d) const {
    const Orbital &A = orb_[a], &B = orb_[b], &C = orb_[c], &D = orb_[d];
    if (A.piece != C.piece || B.piece != D.piece) return 0.0;
    const int p = A.piece, q = B.piece;
    if (!interacting(p, q)) return 0.0;
    if (p == q) return kernel(p).V(A.k, B.k, C.k, D.k);
    const Eigen::MatrixXd& W = cross_table(p, q);
    const int s = std::abs(A.k - C.k), t = A.k + C.k;
    const int u = std::abs(B.k - D.k), v = B.k + D.k;
    return (W(s, u) - W(s, v) - W(t, u) + W(t, v)) / (pieces_[p].length * pieces_[q].length);
  }

  double antisym(int a, int b, int c, int d) const { return V(a, b, c, d) - V(a, b, d, c); }

  // W(p, q) = int_P int_Q U(x - y) cos(p pi x'/l_P) cos(q pi y'/l_Q)
  const Eigen::MatrixXd& cross_table(int p, int q) const {
    auto key = std::make_pair(p, q);
    auto it = cross_tab_.find(key);
    if (it != cross_tab_.end()) return it->second;
    const Piece &P = pieces_[p], &Qp = pieces_[q];
    auto W = rect_cos_table(U_, P.left, P.length, Qp.left, Qp.length, 2 * M_[p], 2 * M_[q]);
    return cross_tab_.emplace(key, std::move(W)).first->second;
  }

  const InPieceKernel& kernel(int p) const {
    if (!kern_[p]) kern_[p] = std::make_unique<InPieceKernel>(U_, pieces_[p].length, 2 * M_[p]);
    return *kern_[p];
  }

 private:
  std::vector<Piece> pieces_;
  Potential U_;
  std::vector<int> M_;
  bool cross_;
  double range_ = 0.0;
  std::vector<Orbital> orb_;
  std::vector<int> offset_;
  mutable std::vector<std::unique_ptr<InPieceKernel>> kern_;
  mutable std::map<std::pair<int, int>, Eigen::MatrixXd> cross_tab_;
};

// Determinants are sorted lists of orbital indices.
using Det = std::vector<int>;

// a_o |D>; returns the sign, 0 if o is empty.
inline int annihilate(Det& d, int o) {
  auto it = std::lower_bound(d.begin(), d.end(), o);
  if (it == d.end() || *it != o) return 0;
  const int pos = static_cast<int>(it - d.begin());
  d.erase(it);
  return pos % 2 ? -1 : 1;
}

// a_o^dagger |D>; returns the sign, 0 if o is occupied.
inline int create(Det& d, int o) {
  auto it = std::lower_bound(d.begin(), d.end(), o);
  if (it != d.end() && *it == o) return 0;
  const int pos = static_cast<int>(it - d.begin());
  d.insert(it, o);
  return pos % 2 ? -1 : 1;
}

struct DetHash {
  std::size_t operator()(const Det& d) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (int x : d) h = mix64(h ^ static_cast<std::uint64_t>(x));
    return static_cast<std::size_t>(h);
  }
};

struct DetBasis {
  std::vector<Det> dets;
  std::unordered_map<Det, int, DetHash> index;

  int size() const { return static_cast<int>(dets.size()); }
  void add(const Det& d) {
    index.emplace(d, size());
    dets.push_back(d);
  }
  int find(const Det& d) const {
    auto it = index.find(d);
    return it == index.end() ? -1 : it->second;
  }
};

inline void for_each_subset(int m, int k, const std::function<void(const std::vector<int>&)>& f) {
  if (k > m || k < 0) return;
  std::vector<int> s(k);
  std::iota(s.begin(), s.end(), 0);
  while (true) {
    f(s);
    int i = k - 1;
    while (i >= 0 && s[i] == m - k + i) --i;
    if (i < 0) return;
    ++s[i];
    for (int j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
  }
}

// Product basis of the block with Q_p orbitals in piece p.
inline DetBasis block_basis(const OrbitalSystem& sys, const Occupation& q) {
  if (static_cast<int>(q.size()) != sys.piece_count())
    throw std::domain_error("block_basis: occupation length differs from piece count");
  std::vector<std::vector<Det>> local(q.size());
  for (int p = 0; p < sys.piece_count(); ++p) {
    for_each_subset(sys.truncation(p), q.Q[p], [&](const std::vector<int>& s) {
      Det d;
      for (int x : s) d.push_back(sys.index(p, x + 1));
      local[p].push_back(d);
    });
    if (local[p].empty()) return {};
  }
  DetBasis b;
  std::vector<std::size_t> pos(q.size(), 0);
  while (true) {
    Det d;
    for (std::size_t p = 0; p < q.size(); ++p)
      d.insert(d.end(), local[p][pos[p]].begin(), local[p][pos[p]].end());
    b.add(d);
    std::size_t p = q.size();
    while (p > 0) {
      --p;
      if (++pos[p] < local[p].size()) break;
      pos[p] = 0;
      if (p == 0) return b;
    }
    if (q.size() == 0) return b;
  }
}

inline double block_dimension(const OrbitalSystem& sys, const Occupation& q) {
  double d = 1.0;
  for (int p = 0; p < sys.piece_count(); ++p)
    d *= std::exp(std::lgamma(sys.truncation(p) + 1.0) - std::lgamma(q.Q[p] + 1.0) -
                  std::lgamma(sys.truncation(p) - q.Q[p] + 1.0));
  return std::round(d);
}

// All n-subsets of the orbitals, no block structure imposed.
inline DetBasis full_basis(const OrbitalSystem& sys, int n) {
  DetBasis b;
  for_each_subset(sys.size(), n, [&](const std::vector<int>& s) { b.add(s); });
  return b;
}

// H = sum_i e_i a_i^+ a_i + sum_{a<b, c<d} <ab||cd> a_a^+ a_b^+ a_d a_c
// on the span of the basis; couplings leaving the span are dropped.
inline Eigen::SparseMatrix<double> hamiltonian(const OrbitalSystem& sys, const DetBasis& b) {
  std::vector<Eigen::Triplet<double>> trip;
  const int norb = sys.size();
  for (int col = 0; col < b.size(); ++col) {
    const Det& D = b.dets[col];
    double diag = 0.0;
    for (int o : D) diag += sys.energy(o);
    if (diag != 0.0) trip.emplace_back(col, col, diag);
    const int n = static_cast<int>(D.size());
    for (int ic = 0; ic < n; ++ic)
      for (int id = ic + 1; id < n; ++id) {
        const int c = D[ic], d = D[id];
        Det R = D;
        int sg = annihilate(R, c);
        sg *= annihilate(R, d);
        const int pc = sys.orbital(c).piece, pd = sys.orbital(d).piece;
        for (int a = 0; a < norb; ++a) {
          const int pa = sys.orbital(a).piece;
          if (pa != pc && pa != pd) continue;
          for (int bb = a + 1; bb < norb; ++bb) {
            const int pb = sys.orbital(bb).piece;
            // piece content must match pairwise for a nonzero element
            if (!((pa == pc && pb == pd) || (pa == pd && pb == pc))) continue;
            const double v = sys.antisym(a, bb, c, d);
            if (v == 0.0) continue;
            Det T = R;
            int s = sg * create(T, bb);
            if (!s) continue;
            s *= create(T, a);
            if (!s) continue;
            const int row = b.find(T);
            if (row < 0) continue;
            trip.emplace_back(row, col, s * v);
          }
        }
      }
  }
  Eigen::SparseMatrix<double> H(b.size(), b.size());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

struct ManyBodyState {
  Occupation occupation;
  std::shared_ptr<const OrbitalSystem> system;
  DetBasis basis;
  Eigen::VectorXd coeffs;

  int n() const { return basis.size() ? static_cast<int>(basis.dets[0].size()) : 0; }

  // Psi(x) = sum_D c_D det[psi_{D_i}(x_j)] / sqrt(n!)
  double operator()(const std::vector<double>& x) const {
    const int n = static_cast<int>(x.size());
    double s = 0.0;
    Eigen::MatrixXd A(n, n);
    for (int r = 0; r < basis.size(); ++r) {
      if (coeffs(r) == 0.0) continue;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = system->eval(basis.dets[r][i], x[j]);
      s += coeffs(r) * A.determinant();
    }
    return s / std::sqrt(std::tgamma(n + 1.0));
  }

  double energy(const Eigen::SparseMatrix<double>& H) const { return coeffs.dot(H * coeffs); }
};

// A q-particle antisymmetric state on one piece of a system, as coefficients
// over the q-subsets of that piece's orbitals.
struct LocalState {
  int piece = 0;
  int q = 0;
  std::vector<Det> dets;  // local sine indices (1-based), sorted
  std::vector<double> coeffs;

  // f(x_1..x_q) = sum c_S det[psi_{S_i}(x_j)] / sqrt(q!)
  double operator()(const OrbitalSystem& sys, const std::vector<double>& x) const {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd A(n, n);
    double s = 0.0;
    for (std::size_t r = 0; r < dets.size(); ++r) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = sys.eval(sys.index(piece, dets[r][i]), x[j]);
      s += coeffs[r] * (n ? A.determinant() : 1.0);
    }
    return s / std::sqrt(std::tgamma(n + 1.0));
  }
};

// Normalized wedge product of local states on distinct pieces, expanded in
// global determinants ordered by piece.
inline ManyBodyState wedge(std::shared_ptr<const OrbitalSystem> sys, const std::vector<LocalState>& states) {
  std::vector<int> seen(sys->piece_count(), 0);
  ManyBodyState out;
  out.system = sys;
  out.occupation.Q.assign(sys->piece_count(), 0);
  std::vector<const LocalState*> order;
  for (const auto& s : states) {
    if (seen[s.piece]++) throw std::domain_error("wedge: states share a piece");
    out.occupation.Q[s.piece] = s.q;
  }
  for (int p = 0; p < sys->piece_count(); ++p)
    for (const auto& s : states)
      if (s.piece == p) order.push_back(&s);
  std::vector<std::pair<Det, double>> terms{{Det{}, 1.0}};
  for (const LocalState* s : order) {
    std::vector<std::pair<Det, double>> next;
    for (const auto& [d, c] : terms)
      for (std::size_t r = 0; r < s->dets.size(); ++r) {
        Det e = d;
        for (int k : s->dets[r]) e.push_back(sys->index(s->piece, k));
        next.emplace_back(e, c * s->coeffs[r]);
      }
    terms = std::move(next);
  }
  out.coeffs.resize(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    out.basis.add(terms[i].first);
    out.coeffs(static_cast<Eigen::Index>(i)) = terms[i].second;
  }
  return out;
}

// Direct evaluation of the wedge from its definition: c(Q) times the signed
// sum over assignments of coordinates to pieces, coordinates kept in
// increasing order within each group.
inline double wedge_direct(const OrbitalSystem& sys, const std::vector<LocalState>& states,
                           const std::vector<double>& x) {
  Occupation q;
  q.Q.assign(sys.piece_count(), 0);
  std::vector<const LocalState*> order;
  for (int p = 0; p < sys.piece_count(); ++p)
    for (const auto& s : states)
      if (s.piece == p) order.push_back(&s), q.Q[p] = s.q;
  const int n = static_cast<int>(x.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double total = 0.0;
  // enumerate permutations whose blocks are increasing (shuffles)
  do {
    bool ok = true;
    int pos = 0;
    for (const LocalState* s : order) {
      for (int i = 1; i < s->q; ++i)
        if (perm[pos + i] < perm[pos + i - 1]) ok = false;
      pos += s->q;
    }
    if (!ok) continue;
    int inv = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) inv += perm[i] > perm[j];
    double prod = 1.0;
    pos = 0;
    for (const LocalState* s : order) {
      std::vector<double> y(s->q);
      for (int i = 0; i < s->q; ++i) y[i] = x[perm[pos + i]];
      prod *= (*s)(sys, y);
      pos += s->q;
    }
    total += (inv % 2 ? -1.0 : 1.0) * prod;
  } while (std::next_permutation(perm.begin(), perm.end()));
  // shuffles put different coordinate sets in each piece, so the terms are
  // orthogonal and c(Q) normalizes the sum
  return wedge_constant(q) * total;
}

// Tensor Gauss-Legendre nodes on the union of the system's pieces.
inline Rule pieces_rule(const OrbitalSystem& sys, int nodes_per_piece) {
  Rule r;
  for (int p = 0; p < sys.piece_count(); ++p) {
    const Piece& P = sys.piece(p);
    const int panels = std::max(1, nodes_per_piece / 16);
    const Rule c = composite_rule(P.left, P.right, {}, std::min(16, nodes_per_piece), P.length / panels);
    r.x.insert(r.x.end(), c.x.begin(), c.x.end());
    r.w.insert(r.w.end(), c.w.begin(), c.w.end());
  }
  return r;
}

// Determinant with fixed-size kernels for the small orders used here.
inline double small_determinant(const Eigen::MatrixXd& A) {
  switch (A.rows()) {
    case 1: return A(0, 0);
    case 2: return Eigen::Matrix2d(A).determinant();
    case 3: return Eigen::Matrix3d(A).determinant();
    case 4: return Eigen::Matrix4d(A).determinant();
    default: return A.determinant();
  }
}

// <a, W b> with W = sum_{i<j} U(x_i - x_j), by quadrature in position space.
inline double block_overlap(const ManyBodyState& a, const ManyBodyState& b, int nodes_per_piece = 16) {
  if (a.system != b.system) throw std::domain_error("block_overlap: states on different systems");
  const int n = a.n();
  if (n != b.n()) throw std::domain_error("block_overlap: particle numbers differ");
  if (n < 2) return 0.0;
  const OrbitalSystem& sys = *a.system;
  const Potential& U = sys.potential();
  if (U.is_zero()) return 0.0;
  const Rule r = pieces_rule(sys, nodes_per_piece);
  const int m = static_cast<int>(r.x.size());
  // orbital values at the nodes, shared by every determinant
  Eigen::MatrixXd phi(m, sys.size());
  for (int i = 0; i < m; ++i)
    for (int o = 0; o < sys.size(); ++o) phi(i, o) = sys.eval(o, r.x[i]);
  const double norm = 1.0 / std::sqrt(std::tgamma(n + 1.0));
  Eigen::MatrixXd A(n, n);
  std::vector<int> idx(n, 0);
  auto value = [&](const ManyBodyState& s) {
    double v = 0.0;
    for (int d = 0; d < s.basis.size(); ++d) {
      if (s.coeffs(d) == 0.0) continue;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = phi(idx[j], s.basis.dets[d][i]);
      v += s.coeffs(d) * small_determinant(A);
    }
    return v * norm;
  };
  double s = 0.0;
  while (true) {
    const double fa = value(a);
    if (fa != 0.0) {
      const double fb = &a == &b ? fa : value(b);
      if (fb != 0.0) {
        double w = 1.0, wsum = 0.0;
        for (int i = 0; i < n; ++i) w *= r.w[idx[i]];
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j) wsum += U(r.x[idx[i]] - r.x[idx[j]]);
        s += w * fa * fb * wsum;
      }
    }
    int i = n - 1;
    while (i >= 0 && ++idx[i] == m) idx[i--] = 0;
    if (i < 0) break;
  }
  return s;
}

struct BlockSpectrum {
  Eigen::VectorXd values;   // ascending, at most the requested count
  Eigen::MatrixXd vectors;  // columns in the block basis
  DetBasis basis;
  std::string method;
};

struct DiagOptions {
  int dense_limit = 2500;
  double max_dimension = 2e5;
  double tol = 1e-10;
  int max_iter = 5000;
};

inline BlockSpectrum lowest_states(const OrbitalSystem& sys, DetBasis basis, int count = 2,
                                   const DiagOptions& opt = {}) {
  BlockSpectrum out;
  if (basis.size() > opt.max_dimension)
    throw NumericError("lowest_states: dimension " + std::to_string(basis.size()) + " exceeds cap");
  if (basis.size() == 0) return out;
  const auto H = hamiltonian(sys, basis);
  out.basis = std::move(basis);
  const int dim = out.basis.size();
  if (dim <= opt.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(H)};
    const int c = std::min(count, dim);
    out.values = es.eigenvalues().head(c);
    out.vectors = es.eigenvectors().leftCols(c);
    out.method = "dense";
    return out;
  }
  Eigen::VectorXd d = H.diagonal();
  Eigen::Index i0;
  d.minCoeff(&i0);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
  x0(i0) = 1.0;
  const double shift = std::abs(d(i0));
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = H * x; };
  auto prec = [&](const Eigen::VectorXd& r, double lam, Eigen::VectorXd& w) {
    w = r.array() / (d.array() - lam).max(0.25 * shift);
  };
  auto ep = lobpcg_lowest(apply, prec, x0, opt.tol, opt.max_iter);
  if (!ep.converged) throw NumericError("lowest_states: eigensolver did not converge");
  out.values = Eigen::VectorXd::Constant(1, ep.value);
  out.vectors = ep.vector;
  out.method = "lobpcg";
  return out;
}

struct PieceSolution {
  Eigen::VectorXd energies;
  std::vector<LocalState> states;
};

// Lowest levels of q interacting particles on one piece of length ell.
inline PieceSolution solve_piece_qbody(const Potential& U, double ell, int q, int M, int count = 2) {
  if (q < 1 || q > 4) throw std::domain_error("solve_piece_qbody: q in 1..4");
  if (M < q + 2) throw std::domain_error("solve_piece_qbody: M >= q + 2");
  PieceSolution out;
  if (q == 1) {
    out.energies.resize(count);
    for (int k = 1; k <= count; ++k) {
      out.energies(k - 1) = level_energy(ell, k);
      out.states.push_back({0, 1, {Det{k}}, {1.0}});
    }
    return out;
  }
  OrbitalSystem sys({Piece{0.0, ell, ell}}, U, M);
  Occupation oc{{q}};
  auto sp = lowest_states(sys, block_basis(sys, oc), count);
  out.energies = sp.values;
  for (int c = 0; c < sp.vectors.cols(); ++c) {
    LocalState s;
    s.piece = 0;
    s.q = q;
    for (int r = 0; r < sp.basis.size(); ++r) {
      Det d;
      for (int o : sp.basis.dets[r]) d.push_back(sys.orbital(o).k);
      s.dets.push_back(d);
      s.coeffs.push_back(sp.vectors(r, c));
    }
    out.states.push_back(std::move(s));
  }
  return out;
}

enum class BlockMode { decoupled, exact };

struct BlockResult {
  double energy = 0.0;
  double gap = 0.0;
  int dimension = 0;
  ManyBodyState state;
};

inline BlockResult occupation_block(std::shared_ptr<const OrbitalSystem> sys, const Occupation& q,
                                    const DiagOptions& opt = {}) {
  if (block_dimension(*sys, q) > opt.max_dimension)
    throw NumericError("occupation_block: block dimension exceeds cap");
  auto sp = lowest_states(*sys, block_basis(*sys, q), 2, opt);
  BlockResult r;
  if (sp.basis.size() == 0) throw std::domain_error("occupation_block: truncation below occupation");
  r.energy = sp.values(0);
  r.gap = sp.values.size() > 1 ? sp.values(1) - sp.values(0) : std::numeric_limits<double>::quiet_NaN();
  r.dimension = sp.basis.size();
  r.state.occupation = q;
  r.state.system = sys;
  r.state.coeffs = sp.vectors.col(0);
  r.state.basis = std::move(sp.basis);
  return r;
}

inline double occupation_block_energy(const PieceConfiguration& cfg, const Occupation& q,
                                      const Potential& U, BlockMode mode, int M) {
  if (q.size() != cfg.size()) throw std::domain_error("occupation_block_energy: length mismatch");
  if (mode == BlockMode::decoupled) {
    double e = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (q.Q[j] == 0) continue;
      if (q.Q[j] == 1) {
        e += level_energy(cfg.length(j), 1);
        continue;
      }
      e += solve_piece_qbody(U, cfg.length(j), q.Q[j], std::max(M, q.Q[j] + 2), 1).energies(0);
    }
    return e;
  }
  // only occupied pieces enter the Hamiltonian
  std::vector<Piece> P;
  Occupation sub;
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q.Q[j] > 0) P.push_back(cfg.pieces[j]), sub.Q.push_back(q.Q[j]);
  if (P.empty()) return 0.0;
  auto sys = std::make_shared<OrbitalSystem>(P, U, M);
  return occupation_block(sys, sub).energy;
}

struct GroundStateSmall {
  double energy = 0.0;
  Occupation occupation;  // over the configuration's pieces
  ManyBodyState state;
  double gap = 0.0;
  std::vector<std::size_t> kept;  // configuration indices of the modelled pieces
  int blocks_solved = 0, blocks_pruned = 0;
};

// Minimum over occupations of the exact block ground energies, with
// branch-and-bound on the free-filling lower bound.
inline GroundStateSmall exact_ground_state_small(const PieceConfiguration& cfg, int n, const Potential& U,
                                                 int M, std::size_t max_pieces = 8) {
  if (n < 1 || n > 4) throw std::domain_error("exact_ground_state_small: n in 1..4");
  if (M < n + 2) throw std::domain_error("exact_ground_state_small: M >= n + 2");
  std::vector<std::size_t> order(cfg.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cfg.length(a) > cfg.length(b); });
  std::vector<std::size_t> kept(order.begin(), order.begin() + std::min(max_pieces, order.size()));
  std::sort(kept.begin(), kept.end());
  std::vector<Piece> P;
  std::vector<double> len;
  for (std::size_t j : kept) P.push_back(cfg.pieces[j]), len.push_back(cfg.length(j));
  auto sys = std::make_shared<OrbitalSystem>(P, U, M);

  std::vector<Occupation> occs;
  Occupation cur;
  cur.Q.assign(P.size(), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i + 1 == P.size()) {
      cur.Q[i] = left;
      occs.push_back(cur);
      return;
    }
    for (int x = left; x >= 0; --x) {
      cur.Q[i] = x;
      rec(i + 1, left - x);
    }
  };
  rec(0, n);
  std::sort(occs.begin(), occs.end(), [&](const Occupation& a, const Occupation& b) {
    const double ea = free_filling_energy(len, a), eb = free_filling_energy(len, b);
    if (ea != eb) return ea < eb;
    return a < b;
  });

  GroundStateSmall g;
  g.energy = std::numeric_limits<double>::infinity();
  g.kept = kept;
  std::vector<std::string> too_big;
  for (const auto& q : occs) {
    if (free_filling_energy(len, q) > g.energy + 1e-12) {
      ++g.blocks_pruned;
      continue;
    }
    if (block_dimension(*sys, q) > 2e5) {
      std::ostringstream os;
      for (int x : q.Q) os << x << ' ';
      too_big.push_back(os.str());
      continue;
    }
    auto r = occupation_block(sys, q);
    ++g.blocks_solved;
    if (r.energy < g.energy - 1e-10 || (std::abs(r.energy - g.energy) <= 1e-10 && q < g.state.occupation)) {
      g.energy = r.energy;
      g.gap = r.gap;
      g.state = std::move(r.state);
    }
  }
  if (!too_big.empty()) throw NumericError("exact_ground_state_small: blocks above dimension cap", too_big);
  // pieces left out must be provably empty: one particle there costs at least
  // its ground level plus the free filling of the others in the kept pieces
  if (order.size() > kept.size()) {
    const double l = cfg.length(order[kept.size()]);
    std::vector<double> levels;
    for (double x : len)
      for (int k = 1; k <= n; ++k) levels.push_back(level_energy(x, k));
    for (std::size_t i = kept.size(); i < order.size() && i < kept.size() + n; ++i)
      levels.push_back(level_energy(cfg.length(order[i]), 1));
    std::sort(levels.begin(), levels.end());
    double rest = 0.0;
    for (int i = 0; i + 1 < n; ++i) rest += levels[i];
    if (level_energy(l, 1) + rest < g.energy)
      throw NumericError("exact_ground_state_small: more than " + std::to_string(max_pieces) +
                         " pieces can be occupied");
  }
  g.occupation.Q.assign(cfg.size(), 0);
  for (std::size_t i = 0; i < kept.size(); ++i) g.occupation.Q[kept[i]] = g.state.occupation.Q[i];
  return g;
}

// Lowest eigenvalue over the full n-particle space of the system, without
// imposing the occupation blocks.
inline double global_ground_energy(const OrbitalSystem& sys, int n, const DiagOptions& opt = {}) {
  auto sp = lowest_states(sys, full_basis(sys, n), 1, opt);
  return sp.values(0);
}

}  // namespace pieces
