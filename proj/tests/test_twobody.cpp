#include <catch_amalgamated.hpp>

#include <pieces/pair_integrals.hpp>
#include <pieces/quadrature.hpp>
#include <pieces/rng.hpp>
#include <pieces/stats.hpp>
#include <pieces/twobody.hpp>

#include <cmath>

using namespace pieces;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double pi2 = M_PI * M_PI;

// Gauss-Legendre integral of f over [0, ell]^2; the inner rule breaks at
// x +- k for each kink k of the interaction
template <class F>
double square_integral(F&& f, double ell, int panels = 16, std::vector<double> kinks = {}) {
  const Rule r = composite_rule(0.0, ell, {}, 16, ell / panels);
  double s = 0.0;
  for (std::size_t a = 0; a < r.x.size(); ++a) {
    std::vector<double> br;
    for (double k : kinks)
      for (double y : {r.x[a] - k, r.x[a] + k})
        if (y > 0.0 && y < ell) br.push_back(y);
    const Rule q = composite_rule(0.0, ell, br, 16, ell / panels);
    for (std::size_t b = 0; b < q.x.size(); ++b) s += r.w[a] * q.w[b] * f(r.x[a], q.x[b]);
  }
  return s;
}
}  // namespace

TEST_CASE("free antisymmetric pair states") {
  CHECK_THAT(free_pair_state(1, 2, 1.0).energy, WithinRel(5 * pi2, 1e-15));
  CHECK_THAT(free_pair_state(1, 2, 1.0).energy, WithinAbs(49.348, 1e-3));
  CHECK_THAT(free_pair_state(1, 3, 1.0).energy, WithinRel(10 * pi2, 1e-15));
  CHECK_THROWS_AS(free_pair_state(2, 2, 1.0), std::domain_error);
  CHECK_THROWS_AS(free_pair_state(3, 1, 1.0), std::domain_error);
  CHECK_THROWS_AS(free_pair_state(0, 1, 1.0), std::domain_error);
  for (auto [i, j] : {std::pair{1, 2}, {2, 5}, {3, 4}}) {
    const auto p = free_pair_state(i, j, 2.0);
    CHECK_THAT(square_integral([&](double x, double y) { return p(x, y) * p(x, y); }, 2.0), WithinAbs(1.0, 1e-10));
    CHECK_THAT(p(0.3, 1.1), WithinAbs(-p(1.1, 0.3), 1e-15));
  }
}

TEST_CASE("pair matrix elements") {
  CHECK(pair_matrix_element(Potential::zero(), 5.0, {1, 2}, {1, 2}) == 0.0);
  const auto box = Potential::box(1.0, 1.0);
  const auto ex = Potential::exponential(1.0, 1.0);
  for (const auto& U : {box, ex})
    for (auto [a, b] : {std::pair<PairIndex, PairIndex>{{1, 2}, {1, 3}}, {{2, 3}, {1, 4}}, {{1, 2}, {1, 2}}}) {
      const double ab = pair_matrix_element(U, 4.0, a, b);
      CHECK_THAT(ab, WithinAbs(pair_matrix_element(U, 4.0, b, a), 1e-12));
      // independent oracle: direct quadrature of <phi_a, U phi_b>
      const auto pa = free_pair_state(a.i, a.j, 4.0), pb = free_pair_state(b.i, b.j, 4.0);
      const double direct = square_integral([&](double x, double y) { return pa(x, y) * U(x - y) * pb(x, y); }, 4.0, 64, U.kinks());
      CHECK_THAT(ab, WithinAbs(direct, 1e-6 * std::abs(direct) + 1e-9));
    }
  // diagonal ~ (5 pi^2 / 2) int u^2 U / ell^3 for large ell
  for (double ell : {100.0, 200.0, 400.0}) {
    const double d = pair_matrix_element(box, ell, {1, 2}, {1, 2});
    CHECK_THAT(d * ell * ell * ell, WithinRel(2.5 * pi2 * box.moment(2), 2e-3));
  }
}

TEST_CASE("two-body ground state") {
  CHECK_THROWS_AS(solve_two_body(Potential::box(1, 1), 10.0, 3), std::domain_error);
  const auto free = solve_two_body(Potential::zero(), 7.0, 8);
  CHECK_THAT(free.E0, WithinRel(5 * pi2 / 49.0, 1e-13));
  CHECK_THAT(std::abs(free.coeffs(0)), WithinAbs(1.0, 1e-12));

  const auto box = Potential::box(1.0, 1.0);
  const auto s = solve_two_body(box, 10.0, 16);
  CHECK_THAT(s.coeffs.norm(), WithinAbs(1.0, 1e-12));
  CHECK(s.E0 >= 5 * pi2 / 100.0);
  CHECK(solve_two_body(box, 10.0, 8).E0 >= s.E0);
  CHECK(solve_two_body(box, 10.0, 24).E0 <= s.E0);
  CHECK_THAT(s(2.0, 7.5), WithinAbs(-s(7.5, 2.0), 1e-10));
  CHECK_THAT(s(3.3, 3.3), WithinAbs(0.0, 1e-12));

  // iterative path equals dense path
  TwoBodyOptions it;
  it.dense_limit = 0;
  CHECK_THAT(solve_two_body(box, 30.0, 40, it).E0, WithinRel(solve_two_body(box, 30.0, 40).E0, 1e-9));

  const auto conv = solve_two_body_converged(box, 5.0, 16);
  CHECK(conv.trace.size() >= 2);
  const auto& tr = conv.trace;
  CHECK(std::abs(tr[tr.size() - 1].second - tr[tr.size() - 2].second) < 1e-8 * tr.back().second);
}

TEST_CASE("gamma by the kernel route") {
  CHECK(gamma_via_K(Potential::zero()).gamma == 0.0);
  CHECK_THROWS_AS(gamma_via_K(Potential::box(1, 1), 1.0, 100), std::domain_error);
  const auto box = Potential::box(1.0, 1.0);
  const auto g = gamma_via_K(box, 1.0, 600);
  CHECK(g.gamma > 0.0);
  CHECK(g.min_eig_K >= -1e-10 * g.norm_K);
  CHECK_THAT(gamma_via_K(box, 1.0, 1200).gamma, WithinRel(g.gamma, 1e-4));
  CHECK_THAT(g.gamma, WithinRel(13.7131, 1e-3));

  // small coupling: gamma(aU)/a -> (5 pi^2 / 2) int u^2 U
  for (const auto& U : {box, Potential::exponential(1.0, 1.0)}) {
    const double a = 1e-3;
    const double r = gamma_via_K(U.scaled(1.0, a)).gamma / a;
    CHECK_THAT(r, WithinRel(2.5 * pi2 * U.moment(2), 0.01));
  }

  // alpha -> gamma(alpha U) is non-decreasing and concave
  std::vector<double> al{0.25, 0.5, 1.0, 2.0}, gs;
  for (double a : al) gs.push_back(gamma_via_K(box.scaled(1.0, a)).gamma);
  for (std::size_t i = 1; i < gs.size(); ++i) CHECK(gs[i] - gs[i - 1] >= -1e-9);
  for (std::size_t i = 1; i + 1 < gs.size(); ++i) {
    const double s1 = (gs[i] - gs[i - 1]) / (al[i] - al[i - 1]);
    const double s2 = (gs[i + 1] - gs[i]) / (al[i + 1] - al[i]);
    CHECK(s2 - s1 <= 1e-6);
  }
}

TEST_CASE("gamma by the energy ladder") {
  CHECK_THROWS_AS(gamma_via_fit(Potential::box(1, 1), {10.0, 20.0}), std::domain_error);
  CHECK_THAT(gamma_via_fit(Potential::zero(), {10.0, 20.0, 40.0}).gamma, WithinAbs(0.0, 1e-9));
  for (const auto& U : {Potential::box(1.0, 1.0), Potential::exponential(1.0, 1.0)}) {
    const auto f = gamma_via_fit(U, {20.0, 40.0, 80.0});
    const double k = gamma_via_K(U).gamma;
    CHECK(f.gamma > 0.0);
    CHECK_THAT(f.gamma, WithinRel(k, 0.05));
  }
  // single rung at l = 40 already within 5%
  const auto box = Potential::box(1.0, 1.0);
  const double E = solve_two_body(box, 40.0, ladder_basis_size(box, 40.0)).E0;
  CHECK_THAT((E * 1600.0 - 5 * pi2) * 40.0, WithinRel(gamma_via_K(box).gamma, 0.05));
}

TEST_CASE("thresholds from gamma") {
  const auto z = astar_xstar(0.0);
  CHECK(z.A_star == 0.0);
  CHECK(z.x_star == 0.0);
  CHECK(gamma_star(0.0) == 0.0);
  const auto one = astar_xstar(8 * pi2);
  CHECK_THAT(one.A_star, WithinRel(1.0, 1e-15));
  CHECK_THAT(one.x_star, WithinAbs(0.63212, 1e-5));
  for (double g : {0.1, 5.0, 13.7, 80.0, 300.0}) {
    const auto t = astar_xstar(g);
    CHECK_THAT(t.A_star, WithinAbs(-std::log(1.0 - t.x_star), 1e-14 * std::max(1.0, t.A_star)));
    CHECK_THAT(gamma_star(g, 2.0), WithinRel(1.0 - std::exp(-2.0 * g / (8 * pi2)), 1e-14));
  }
  CHECK_THROWS_AS(astar_xstar(-1.0), std::domain_error);
}

TEST_CASE("interacting pair against the free pair") {
  const auto zero = compare_two_body_states(Potential::zero(), 10.0, 8);
  CHECK_THAT(zero.state_distance, WithinAbs(0.0, 1e-12));
  CHECK_THAT(zero.rdm_distance, WithinAbs(0.0, 1e-12));

  const auto box = Potential::box(1.0, 1.0);
  std::vector<double> x, ys, yr;
  for (double ell : {20.0, 40.0, 80.0}) {
    const auto c = compare_two_body_states(box, ell, ladder_basis_size(box, ell));
    x.push_back(std::log(ell));
    ys.push_back(std::log(c.state_distance));
    yr.push_back(c.rdm_distance * ell);
    CHECK(c.rdm_distance <= 4.0 * c.state_distance);
  }
  // the state distance decays like 1/ell, the one-particle matrices likewise
  CHECK_THAT(linear_fit(x, ys).slope, WithinAbs(-1.0, 0.15));
  CHECK(*std::max_element(yr.begin(), yr.end()) < 1.2 * *std::min_element(yr.begin(), yr.end()));
}

TEST_CASE("one-particle matrices are Lipschitz in the pair state") {
  // || gamma_psi - gamma_phi ||_1 <= 4 || psi - phi || on random pairs
  CounterRng rng(5);
  const int M = 6;
  TwoBodySolution a, b;
  a.M = b.M = M;
  a.pairs = b.pairs = pair_basis(M);
  const int n = static_cast<int>(a.pairs.size());
  for (int trial = 0; trial < 100; ++trial) {
    a.coeffs = Eigen::VectorXd(n);
    b.coeffs = Eigen::VectorXd(n);
    for (int i = 0; i < n; ++i) a.coeffs(i) = rng.normal(), b.coeffs(i) = rng.normal();
    a.coeffs.normalize();
    b.coeffs = (a.coeffs + (trial % 10 + 1) * 0.05 * b.coeffs).normalized();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.rdm1() - b.rdm1(), Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().cwiseAbs().sum() <= 4.0 * (a.coeffs - b.coeffs).norm() + 1e-12);
  }
}
