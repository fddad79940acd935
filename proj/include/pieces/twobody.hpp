#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fft_conv.hpp"
#include "lobpcg.hpp"
#include "pair_integrals.hpp"
#include "potential.hpp"

namespace pieces {

struct PairIndex {
  int i, j;
};

// All (i, j) with 1 <= i < j <= M, lexicographic.
inline std::vector<PairIndex> pair_basis(int M) {
  std::vector<PairIndex> b;
  for (int i = 1; i <= M; ++i)
    for (int j = i + 1; j <= M; ++j) b.push_back({i, j});
  return b;
}

inline double free_pair_energy(int i, int j, double ell) {
  return M_PI * M_PI * (i * i + j * j) / (ell * ell);
}

struct FreePairState {
  int i, j;
  double ell, energy;
  double operator()(double x, double y) const {
    const double c = std::sqrt(2.0 / ell), k = M_PI / ell;
    const double a = c * std::sin(i * k * x) * c * std::sin(j * k * y);
    const double b = c * std::sin(j * k * x) * c * std::sin(i * k * y);
    return (a - b) / std::sqrt(2.0);
  }
};

inline FreePairState free_pair_state(int i, int j, double ell) {
  if (i < 1 || i >= j) throw std::domain_error("free_pair_state: need 1 <= i < j");
  return {i, j, ell, free_pair_energy(i, j, ell)};
}

// H = -Laplacian + U(x - y) on antisymmetric functions of [0, ell]^2,
// truncated to sine pairs with indices <= M.
class PairHamiltonian {
 public:
  PairHamiltonian(const Potential& U, double ell, int M)
      : ell_(ell), M_(M), pairs_(pair_basis(M)), kern_(U, ell, 2 * M) {
    if (M < 2) throw std::domain_error("PairHamiltonian: M >= 2");
    const int K = 2 * M;
    Jt_.resize(K + 1, K + 1);
    for (int p = 0; p <= K; ++p)
      for (int q = 0; q <= K; ++q) Jt_(p, q) = kern_.J(p, q);
    zero_ = U.is_zero();
  }

  double ell() const { return ell_; }
  int M() const { return M_; }
  int dim() const { return static_cast<int>(pairs_.size()); }
  const std::vector<PairIndex>& pairs() const { return pairs_; }
  const InPieceKernel& kernel() const { return kern_; }

  int index(int i, int j) const {
    // position of (i, j) in the lexicographic list
    return (i - 1) * M_ - (i - 1) * i / 2 + (j - i - 1);
  }

  double V(int a, int b, int c, int d) const {
    auto J = [&](int p, int q) { return Jt_(std::abs(p), std::abs(q)); };
    return (J(a - c, b - d) - J(a - c, b + d) - J(a + c, b - d) + J(a + c, b + d)) /
           (ell_ * ell_);
  }

  // <phi_(i,j), U phi_(k,l)>
  double interaction(const PairIndex& r, const PairIndex& s) const {
    return V(r.i, r.j, s.i, s.j) - V(r.i, r.j, s.j, s.i);
  }

  double kinetic(const PairIndex& r) const { return free_pair_energy(r.i, r.j, ell_); }

  Eigen::MatrixXd dense() const {
    const int n = dim();
    Eigen::MatrixXd H(n, n);
    for (int r = 0; r < n; ++r) {
      for (int s = r; s < n; ++s) {
        const double v = interaction(pairs_[r], pairs_[s]);
        H(r, s) = v;
        H(s, r) = v;
      }
      H(r, r) += kinetic(pairs_[r]);
    }
    return H;
  }

  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d(dim());
    for (int r = 0; r < dim(); ++r) d(r) = kinetic(pairs_[r]) + interaction(pairs_[r], pairs_[r]);
    return d;
  }

  // y = H x without forming H: the interaction is a 2-D convolution of the
  // odd extension of the coefficient matrix with the kernel J.
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.resize(dim());
    for (int r = 0; r < dim(); ++r) y(r) = kinetic(pairs_[r]) * x(r);
    if (zero_) return;
    if (!conv_) build_convolver();
    const int N = conv_->size();
    double* g = conv_->grid();
    std::fill(g, g + static_cast<std::size_t>(N) * N, 0.0);
    const double s2 = 1.0 / std::sqrt(2.0);
    auto put = [&](int c, int d, double v) {
      g[static_cast<std::size_t>((c + N) % N) * N + (d + N) % N] += v;
    };
    for (int r = 0; r < dim(); ++r) {
      const int i = pairs_[r].i, j = pairs_[r].j;
      const double c = x(r) * s2;
      if (c == 0.0) continue;
      // C_ij = c, C_ji = -c, extended oddly in each index
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          put(si * i, sj * j, si * sj * c);
          put(si * j, sj * i, -si * sj * c);
        }
    }
    conv_->run();
    const double f = std::sqrt(2.0) / (ell_ * ell_);
    for (int r = 0; r < dim(); ++r) {
      const int i = pairs_[r].i, j = pairs_[r].j;
      y(r) += f * g[static_cast<std::size_t>(i) * N + j];
    }
  }

 private:
  void build_convolver() const {
    const int K = 2 * M_;
    const int N = fft_friendly(4 * M_ + 1);
    std::vector<double> ker(static_cast<std::size_t>(N) * N, 0.0);
    for (int p = -K; p <= K; ++p)
      for (int q = -K; q <= K; ++q)
        ker[static_cast<std::size_t>((p + N) % N) * N + (q + N) % N] =
            Jt_(std::abs(p), std::abs(q));
    conv_ = std::make_shared<Convolver2D>(N, ker);
  }

  double ell_;
  int M_;
  std::vector<PairIndex> pairs_;
  InPieceKernel kern_;
  Eigen::MatrixXd Jt_;
  bool zero_ = false;
  mutable std::shared_ptr<Convolver2D> conv_;
};

inline double pair_matrix_element(const Potential& U, double ell, PairIndex a, PairIndex b) {
  const int M = std::max(std::max(a.i, a.j), std::max(b.i, b.j));
  InPieceKernel k(U, ell, 2 * M);
  auto V = [&](int p, int q, int r, int s) { return k.V(p, q, r, s); };
  return V(a.i, a.j, b.i, b.j) - V(a.i, a.j, b.j, b.i);
}

struct TwoBodySolution {
  double ell = 0.0;
  int M = 0;
  double E0 = 0.0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;
  int iterations = 0;
  std::string method;
  std::vector<PairIndex> pairs;
  Eigen::VectorXd coeffs;

  // antisymmetric coefficient matrix on psi_a (x) psi_b, a, b = 1..M
  Eigen::MatrixXd coefficient_matrix() const {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(M, M);
    const double s2 = 1.0 / std::sqrt(2.0);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      C(pairs[r].i - 1, pairs[r].j - 1) = coeffs(r) * s2;
      C(pairs[r].j - 1, pairs[r].i - 1) = -coeffs(r) * s2;
    }
    return C;
  }

  // one-particle density matrix in the sine basis; trace 2
  Eigen::MatrixXd rdm1() const {
    const Eigen::MatrixXd C = coefficient_matrix();
    return 2.0 * C * C.transpose();
  }

  double operator()(double x, double y) const {
    const double c = std::sqrt(2.0 / ell), k = M_PI / ell;
    Eigen::VectorXd sx(M), sy(M);
    for (int a = 0; a < M; ++a) {
      sx(a) = c * std::sin((a + 1) * k * x);
      sy(a) = c * std::sin((a + 1) * k * y);
    }
    return sx.dot(coefficient_matrix() * sy);
  }

  // rho(y) = gamma(y, y) = sum_p r_p cos(p pi y / ell), p = 0..2M
  std::vector<double> density_cos_coeffs() const {
    const Eigen::MatrixXd G = rdm1();
    std::vector<double> r(2 * M + 1, 0.0);
    for (int a = 1; a <= M; ++a)
      for (int b = 1; b <= M; ++b) {
        const double g = G(a - 1, b - 1) / ell;
        r[std::abs(a - b)] += g;
        r[a + b] -= g;
      }
    return r;
  }
};

struct TwoBodyOptions {
  int dense_limit = 1600;  // pair dimension up to which H is formed
  double tol = 1e-11;      // relative residual for the iterative path
  int max_iter = 4000;
  bool want_gap = false;
};

inline TwoBodySolution solve_two_body(const Potential& U, double ell, int M,
                                      const TwoBodyOptions& opt = {}) {
  if (M < 4) throw std::domain_error("solve_two_body: M >= 4");
  if (!(ell > 0.0)) throw std::domain_error("solve_two_body: ell > 0");
  PairHamiltonian H(U, ell, M);
  TwoBodySolution s;
  s.ell = ell;
  s.M = M;
  s.pairs = H.pairs();
  if (H.dim() <= opt.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.dense());
    s.E0 = es.eigenvalues()(0);
    s.gap = es.eigenvalues()(1) - es.eigenvalues()(0);
    s.coeffs = es.eigenvectors().col(0);
    s.method = "dense";
  } else {
    const Eigen::VectorXd d = H.diagonal();
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(H.dim());
    x0(0) = 1.0;
    auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { H.apply(x, y); };
    const double shift = std::abs(d(0));
    auto prec = [&](const Eigen::VectorXd& r, double lam, Eigen::VectorXd& w) {
      w.resize(r.size());
      for (Eigen::Index i = 0; i < r.size(); ++i)
        w(i) = r(i) / std::max(d(i) - lam, 0.25 * shift);
    };
    auto ep = lobpcg_lowest(apply, prec, x0, opt.tol, opt.max_iter);
    if (!ep.converged)
      throw NumericError("solve_two_body: iterative eigensolver did not converge (residual " +
                         std::to_string(ep.residual) + ")");
    s.E0 = ep.value;
    s.coeffs = ep.vector;
    s.residual = ep.residual;
    s.iterations = ep.iterations;
    s.method = "lobpcg-fft";
  }
  // fix the sign so the overlap with the free ground pair is non-negative
  if (s.coeffs(0) < 0.0) s.coeffs = -s.coeffs;
  s.coeffs.normalize();
  return s;
}

struct ConvergedTwoBody {
  TwoBodySolution solution;
  std::vector<std::pair<int, double>> trace;  // (M, E0)
};

// Grow M until |E0(M) - E0(M+4)| < tol * E0, doubling M between attempts.
inline ConvergedTwoBody solve_two_body_converged(const Potential& U, double ell, int M0 = 24,
                                                 double tol = 1e-8, int M_cap = 256,
                                                 const TwoBodyOptions& opt = {}) {
  ConvergedTwoBody out;
  int M = M0;
  while (M <= M_cap) {
    auto a = solve_two_body(U, ell, M, opt);
    auto b = solve_two_body(U, ell, M + 4, opt);
    out.trace.emplace_back(M, a.E0);
    out.trace.emplace_back(M + 4, b.E0);
    if (std::abs(a.E0 - b.E0) < tol * std::abs(b.E0)) {
      out.solution = b;
      return out;
    }
    M *= 2;
  }
  std::vector<std::string> t;
  for (auto& [m, e] : out.trace) {
    std::ostringstream os;
    os.precision(15);
    os << "M=" << m << " E0=" << e;
    t.push_back(os.str());
  }
  throw NumericError("solve_two_body_converged: no convergence up to M=" + std::to_string(M_cap), t);
}

// Basis size used for a rung of the ell ladder: keeps the resolution ell/M
// fixed so the truncation error in (E - 5 pi^2/ell^2) ell^3 is uniform.
inline int ladder_basis_size(const Potential& U, double ell, double per_unit = 1.5, int M_min = 24) {
  double scale = 1.0;
  if (U.family() == Family::box) scale = std::max(1.0, 1.0 / U.param());
  return std::max(M_min, static_cast<int>(std::ceil(per_unit * scale * ell)));
}

struct GammaFit {
  std::vector<double> ells, energies, gamma_l;  // gamma_l = (E - 5 pi^2/l^2) l^3
  std::vector<int> Ms;
  double gamma = 0.0, slope = 0.0;
};

// Richardson fit of E l^3 - 5 pi^2 l = gamma + c / l on the top three rungs.
inline GammaFit gamma_via_fit(const Potential& U, std::vector<double> ells,
                              const std::function<int(double)>& basis = {},
                              const TwoBodyOptions& opt = {}) {
  if (ells.size() < 3) throw std::domain_error("gamma_via_fit: need at least 3 lengths");
  std::sort(ells.begin(), ells.end());
  GammaFit f;
  for (double l : ells) {
    const int M = basis ? basis(l) : ladder_basis_size(U, l);
    const auto s = solve_two_body(U, l, M, opt);
    f.ells.push_back(l);
    f.Ms.push_back(M);
    f.energies.push_back(s.E0);
    f.gamma_l.push_back((s.E0 - 5.0 * M_PI * M_PI / (l * l)) * l * l * l);
  }
  const std::size_t n = ells.size();
  // monotone approach expected; a sign flip beyond tolerance means trouble
  const double scale = std::max(1e-12, std::abs(f.gamma_l.back()));
  for (std::size_t i = 2; i < n; ++i) {
    const double d1 = f.gamma_l[i - 1] - f.gamma_l[i - 2], d2 = f.gamma_l[i] - f.gamma_l[i - 1];
    if (d1 * d2 < 0.0 && std::min(std::abs(d1), std::abs(d2)) > 0.02 * scale)
      throw NumericError("gamma_via_fit: non-monotone ladder");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = n - 3; i < n; ++i) {
    const double x = 1.0 / f.ells[i], y = f.gamma_l[i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double det = 3.0 * sxx - sx * sx;
  f.slope = (3.0 * sxy - sx * sy) / det;
  f.gamma = (sy - f.slope * sx) / 3.0;
  return f;
}

struct GammaK {
  double gamma = 0.0;
  double min_eig_K = 0.0, norm_K = 0.0;
  int nodes = 0;
  double R = 0.0;
};

// Smallest R (on a doubling-then-bisection search) with Z(R) < tol, or the
// support radius when finite.
inline double kernel_radius(const Potential& U, double tol = 1e-10) {
  if (U.is_zero()) return 1.0;
  const double s = U.support();
  if (std::isfinite(s)) return s;
  double hi = 1.0;
  while (tail_Z(U, hi) >= tol) hi *= 2.0;
  double lo = hi / 2.0;
  for (int i = 0; i < 50; ++i) {
    const double m = 0.5 * (lo + hi);
    (tail_Z(U, m) >= tol ? lo : hi) = m;
  }
  return hi;
}

// gamma = 10 pi^2 <phi, (I + K)^-1 phi> with phi(u) = u sqrt(U(u)) / 2 and
// K(u, u') = sqrt(U(u)) (|u + u'| - |u - u'|) sqrt(U(u')) / 8 on [-R, R].
// With these normalizations gamma equals 10 pi^2 times the odd-wave
// scattering length of U/2, the exact ell^-3 coefficient of the pair energy.
inline GammaK gamma_via_K(const Potential& U, double R, int N) {
  if (N < 200) throw std::domain_error("gamma_via_K: N >= 200");
  GammaK g;
  g.R = R;
  if (U.is_zero()) return g;
  std::vector<double> br;
  for (double k : U.kinks())
    if (k < R) br.push_back(k), br.push_back(-k);
  const int order = 16;
  const Rule r = composite_rule(-R, R, br, order, 2.0 * R / std::max(1, N / order));
  const int n = static_cast<int>(r.x.size());
  g.nodes = n;
  Eigen::VectorXd b(n), su(n);
  for (int i = 0; i < n; ++i) {
    su(i) = std::sqrt(U(r.x[i]));
    b(i) = std::sqrt(r.w[i]) * 0.5 * r.x[i] * su(i);
  }
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double u = r.x[i], v = r.x[j];
      K(i, j) = std::sqrt(r.w[i] * r.w[j]) * su(i) * su(j) *
                (std::abs(u + v) - std::abs(u - v)) / 8.0;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
  g.min_eig_K = es.eigenvalues().minCoeff();
  g.norm_K = es.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) + K;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw NumericError("gamma_via_K: I + K not positive definite");
  g.gamma = 10.0 * M_PI * M_PI * b.dot(llt.solve(b));
  return g;
}

inline GammaK gamma_via_K(const Potential& U, int N = 1200) {
  return gamma_via_K(U, kernel_radius(U), N);
}

struct AstarXstar {
  double A_star, x_star;
};

inline AstarXstar astar_xstar(double gamma, double /*mu*/ = 1.0) {
  if (gamma < 0.0) throw std::domain_error("astar_xstar: gamma >= 0");
  const double A = gamma / (8.0 * M_PI * M_PI);
  return {A, -std::expm1(-A)};
}

inline double gamma_star(double gamma, double mu = 1.0) {
  return -std::expm1(-mu * gamma / (8.0 * M_PI * M_PI));
}

struct TwoBodyComparison {
  double state_distance = 0.0;  // || zeta^U - zeta^0 ||
  double rdm_distance = 0.0;    // || gamma_zeta - gamma_phi1 - gamma_phi2 ||_1
};

inline TwoBodyComparison compare_two_body_states(const TwoBodySolution& s) {
  TwoBodyComparison c;
  const double ov = std::min(1.0, std::abs(s.coeffs(0)));
  c.state_distance = std::sqrt(std::max(0.0, 2.0 - 2.0 * ov));
  Eigen::MatrixXd D = s.rdm1();
  D(0, 0) -= 1.0;
  D(1, 1) -= 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
  c.rdm_distance = es.eigenvalues().cwiseAbs().sum();
  return c;
}

inline TwoBodyComparison compare_two_body_states(const Potential& U, double ell, int M) {
  return compare_two_body_states(solve_two_body(U, ell, M));
}

// E(ell, U) against mu^2 E(mu ell, U^mu); returns the relative mismatch.
inline double rescale_check_two_body(const Potential& U, double ell, double mu, int M) {
  const double a = solve_two_body(U, ell, M).E0;
  const double b = mu * mu * solve_two_body(scale_mu(U, mu), mu * ell, M).E0;
  return std::abs(a - b) / std::abs(a);
}

}  // namespace pieces
