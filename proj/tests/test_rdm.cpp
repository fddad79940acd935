#include <catch_amalgamated.hpp>

#include <pieces/rdm.hpp>
#include <pieces/rng.hpp>

#include <cmath>

using namespace pieces;
using Catch::Matchers::WithinAbs;

namespace {
std::shared_ptr<OrbitalSystem> three_pieces(const Potential& U, int M) {
  return std::make_shared<OrbitalSystem>(std::vector<Piece>{{0.0, 2.0, 2.0}, {2.4, 3.9, 1.5}, {4.3, 6.8, 2.5}}, U, M);
}

// <a_a^+ a_b^+ a_d a_c> for any mode order, from the a < b storage
double gamma2(const DensityMatrix& d, int a, int b, int c, int e) {
  if (a == b || c == e) return 0.0;
  const PairModes pm{d.modes};
  int s = 1;
  if (a > b) std::swap(a, b), s = -s;
  if (c > e) std::swap(c, e), s = -s;
  return s * d.G(pm.index(a, b), pm.index(c, e));
}

double max_abs(const Eigen::MatrixXd& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }
}  // namespace

TEST_CASE("pair mode indexing") {
  const PairModes pm{5};
  CHECK(pm.size() == 10);
  const auto L = pm.list();
  for (int r = 0; r < pm.size(); ++r) CHECK(pm.index(L[r].first, L[r].second) == r);
}

TEST_CASE("Slater determinants") {
  const auto box = Potential::box(1.0, 1.0);
  auto sys = three_pieces(box, 3);
  const LocalState a{0, 1, {Det{1}}, {1.0}}, b{1, 1, {Det{1}}, {1.0}}, c{2, 1, {Det{2}}, {1.0}};
  const auto w = wedge(sys, {a, b, c});
  const auto g = rdm1(w);
  CHECK_THAT(g.trace(), WithinAbs(3.0, 1e-12));
  CHECK(max_abs(g.G * g.G - g.G) < 1e-12);
  // occupied orbitals carry weight one
  for (auto [p, k] : {std::pair{0, 1}, {1, 1}, {2, 2}}) {
    const int i = sys->index(p, k);
    CHECK_THAT(g.G(i, i), WithinAbs(1.0, 1e-12));
  }
  const auto g2 = rdm2(w);
  CHECK_THAT(g2.trace(), WithinAbs(3.0, 1e-12));
  CHECK(max_abs(g2.G - antisymmetric_product(g.G, g.G)) < 1e-12);
}

TEST_CASE("interacting ground state density matrices") {
  const auto box = Potential::box(1.0, 1.0);
  const auto cfg = from_lengths({2.5, 0.3, 2.0});
  const int n = 3;
  const auto gs = exact_ground_state_small(cfg, n, box, 5);
  const auto g = rdm1(gs.state);
  const auto G2 = rdm2(gs.state);
  CHECK_THAT(g.trace(), WithinAbs(n, 1e-10));
  CHECK_THAT(G2.trace(), WithinAbs(n * (n - 1) / 2.0, 1e-10));
  CHECK(g.asymmetry() < 1e-12);
  CHECK(G2.asymmetry() < 1e-12);
  CHECK(g.min_eigenvalue() > -1e-12);
  CHECK(G2.min_eigenvalue() > -1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.G, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-12);

  // contracting one pair index gives (n - 1) gamma
  const int m = g.modes;
  double worst = 0.0;
  for (int a = 0; a < m; ++a)
    for (int c = 0; c < m; ++c) {
      double s = 0.0;
      for (int b = 0; b < m; ++b) s += gamma2(G2, a, b, c, b);
      worst = std::max(worst, std::abs(s - (n - 1) * g.G(c, a)));
    }
  CHECK(worst < 1e-10);
}

TEST_CASE("two-body solution density matrices") {
  const auto s = solve_two_body(Potential::box(1.0, 1.0), 6.0, 8);
  const auto g = rdm1(s);
  const auto G2 = rdm2(s);
  CHECK_THAT(g.trace(), WithinAbs(2.0, 1e-12));
  CHECK_THAT(G2.trace(), WithinAbs(1.0, 1e-12));
  CHECK(max_abs(G2.G * G2.G - G2.G) < 1e-12);
  double worst = 0.0;
  for (int a = 0; a < s.M; ++a)
    for (int c = 0; c < s.M; ++c) {
      double t = 0.0;
      for (int b = 0; b < s.M; ++b) t += gamma2(G2, a, b, c, b);
      worst = std::max(worst, std::abs(t - g.G(c, a)));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("factorized matrices of a wedge product") {
  const auto box = Potential::box(1.0, 1.0);
  auto sys = three_pieces(box, 4);
  LocalState pair = solve_piece_qbody(box, 2.5, 2, 4, 1).states[0];
  pair.piece = 2;
  LocalState duo = solve_piece_qbody(box, 2.0, 2, 4, 1).states[0];
  duo.piece = 0;
  const LocalState single{1, 1, {Det{1}}, {1.0}};
  const auto w = wedge(sys, {duo, single, pair});
  const auto f = factorized_rdm({embed(sys, duo), embed(sys, single), embed(sys, pair)});
  CHECK(trace_norm(rdm1(w).G - f.one.G) < 1e-10);
  CHECK(trace_norm(rdm2(w).G - f.two.G) < 1e-10);
  CHECK_THAT(f.two.trace(), WithinAbs(10.0, 1e-10));
  CHECK_THROWS_AS(factorized_rdm({embed(sys, duo), embed(sys, duo)}), std::domain_error);
  CHECK_THROWS_AS(factorized_rdm({}), std::domain_error);
}

TEST_CASE("piece projectors") {
  auto sys = three_pieces(Potential::box(1.0, 1.0), 3);
  const int m = sys->size();
  const PairModes pm{m};
  CHECK(max_abs(piece_projector(*sys, 0.0, 1)) == 0.0);
  CHECK(max_abs(piece_projector(*sys, kInf, 1) - Eigen::MatrixXd::Identity(m, m)) == 0.0);
  CHECK(max_abs(piece_projector(*sys, kInf, 2) - Eigen::MatrixXd::Identity(pm.size(), pm.size())) == 0.0);
  for (int order : {1, 2}) {
    const auto P = piece_projector(*sys, 2.2, order);
    CHECK(max_abs(P * P - P) == 0.0);
  }
  // pieces shorter than 2.2 hold 6 of 9 modes
  CHECK(piece_projector(*sys, 2.2, 1).trace() == 6.0);
  CHECK(piece_projector(*sys, 2.2, 2).trace() == 15.0);
  CHECK_THROWS_AS(piece_projector(*sys, 1.0, 3), std::domain_error);
}

TEST_CASE("trace norm distances") {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
  D(0, 0) = 1.0;
  D(1, 1) = -2.0;
  CHECK_THAT(trace_norm(D), WithinAbs(3.0, 1e-14));
  CHECK(trace_norm(Eigen::MatrixXd()) == 0.0);
  CounterRng rng(6);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd A(4, 4), B(4, 4), C(4, 4);
    for (int i = 0; i < 16; ++i) A(i) = rng.normal(), B(i) = rng.normal(), C(i) = rng.normal();
    A = (A + A.transpose()).eval();
    B = (B + B.transpose()).eval();
    C = (C + C.transpose()).eval();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
    CHECK_THAT(trace_norm_distance(A, B), WithinAbs(trace_norm_distance(B, A), 1e-12));
    CHECK_THAT(trace_norm_distance(A, B, &I), WithinAbs(trace_norm_distance(A, B), 1e-10));
    CHECK(trace_norm_distance(A, C) <= trace_norm_distance(A, B) + trace_norm_distance(B, C) + 1e-12);
  }
  CHECK_THROWS_AS(trace_norm_distance(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 3)), std::domain_error);
}
