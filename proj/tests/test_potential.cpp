#include <catch_amalgamated.hpp>

#include <pieces/potential.hpp>

#include <cmath>

using namespace pieces;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
std::vector<Potential> families() {
  return {Potential::box(1.0, 1.0), Potential::box(2.5, 0.3), Potential::exponential(1.0, 1.0),
          Potential::exponential(3.0, 2.0), Potential::polynomial(1.0, 5.0),
          Potential::polynomial(2.0, 6.5, 0.5)};
}
}  // namespace

TEST_CASE("families are even and non-negative") {
  for (const auto& U : families())
    for (int i = 0; i <= 10000; ++i) {
      const double u = -20.0 + 40.0 * i / 10000;
      CHECK(U(u) >= 0.0);
      CHECK(std::abs(U(u) - U(-u)) <= 1e-12);
    }
}

TEST_CASE("moment cache matches quadrature") {
  for (const auto& U : families())
    for (int k = 0; k <= 4; ++k) {
      if (U.family() == Family::polynomial && k + 1 >= U.exponent()) continue;
      CHECK_THAT(U.moment(k), WithinRel(U.moment_by_quadrature(k), 1e-9));
    }
  CHECK_THAT(Potential::box(1.0, 1.0).moment(2), WithinRel(2.0 / 3.0, 1e-14));
  CHECK_THAT(Potential::exponential(1.0, 1.0).moment(2), WithinRel(4.0, 1e-12));
}

TEST_CASE("tail function Z") {
  const auto box = Potential::box(1.0, 1.0);
  CHECK(tail_Z(box, 1.0) == 0.0);
  CHECK(tail_Z(box, 3.0) == 0.0);
  CHECK_THAT(tail_Z(box, 0.0), WithinRel(27.0 / 256.0, 1e-9));
  CHECK_THAT(tail_Z(Potential::exponential(1.0, 1.0), 5.0), WithinRel(125.0 * std::exp(-5.0), 1e-9));
  CHECK_THAT(tail_Z(Potential::exponential(1.0, 1.0), 5.0), WithinAbs(0.8422, 1e-4));
  CHECK(tail_Z(Potential::zero(), 0.0) == 0.0);
  CHECK_THROWS_AS(tail_Z(box, -1.0), std::domain_error);
  CHECK_THROWS_AS(tail_Z(Potential::table({0.0, 1.0}, {1.0, 1.0}), 0.0), std::domain_error);

  for (const auto& U : families()) {
    double prev = kInf;
    for (double x = 0.0; x <= 200.0; x = x * 1.5 + 0.1) {
      const double z = tail_Z(U, x);
      CHECK(z <= prev * (1 + 1e-12));
      prev = z;
    }
  }
}

TEST_CASE("functional f_Z") {
  CHECK(f_Z(Potential::zero(), 10.0) == 0.0);
  const auto box = Potential::box(1.0, 1.0);
  const double z0 = tail_Z(box, 0.0);
  CHECK(f_Z(box, 1e3) < 1e-2 * z0);
  for (const auto& U : families()) {
    double prev = kInf;
    for (double X : {1.0, 10.0, 100.0, 1e3, 1e4}) {
      const double f = f_Z(U, X);
      CHECK(f <= tail_Z(U, 0.0));
      CHECK(f <= prev * (1 + 1e-9));
      prev = f;
    }
  }
}

TEST_CASE("principal and residual parts") {
  const auto box = Potential::box(1.0, 1.0);
  const auto s = split_principal(box, 3.0, 2.0);
  CHECK(s.residual.is_zero());
  CHECK_THROWS_AS(split_principal(box, 2.0, 1.0), std::domain_error);

  const auto e = Potential::exponential(1.0, 1.0);
  const auto t = split_principal(e, 3.0, 2.0);
  CHECK_THAT(t.residual.moment(0), WithinRel(2.0 * std::exp(-6.0), 1e-10));
  CHECK(t.principal.moment(2) <= e.moment(2));
  for (double u : {0.0, 1.0, 5.99, 6.0, 6.01, 9.0, -7.5})
    CHECK_THAT(t.principal(u) + t.residual(u), WithinAbs(e(u), 1e-15));
  CHECK(t.residual(5.0) == 0.0);
  CHECK(t.principal(7.0) == 0.0);
}

TEST_CASE("rescalings") {
  const auto box = Potential::box(1.0, 1.0);
  const auto id = scale_to_unit(box, 1.0);
  CHECK(id.height() == 1.0);
  CHECK(id.param() == 1.0);

  const auto b10 = scale_to_unit(box, 10.0);
  CHECK(b10.family() == Family::box);
  CHECK_THAT(b10.height(), WithinRel(100.0, 1e-15));
  CHECK_THAT(b10.param(), WithinRel(0.1, 1e-15));

  for (const auto& U : families()) {
    for (double ell : {0.5, 3.0, 10.0})
      CHECK_THAT(scale_to_unit(U, ell).moment(2), WithinRel(U.moment(2) / ell, 1e-10));
    // U^mu = mu^-2 U(. / mu)
    const auto Um = scale_mu(U, 2.0);
    for (double u : {0.1, 0.7, 2.3}) CHECK_THAT(Um(u), WithinRel(U(u / 2.0) / 4.0, 1e-14));
  }
}

TEST_CASE("assumption check") {
  CHECK(check_HU(Potential::box(1.0, 1.0)).pass);
  CHECK(check_HU(Potential::exponential(1.0, 1.0)).pass);
  CHECK(check_HU(Potential::polynomial(1.0, 5.0)).pass);
  const auto bad = check_HU(Potential::polynomial(1.0, 3.5));
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(bad.message.empty());
}

TEST_CASE("tabulated potentials") {
  CHECK_THROWS(Potential::table({0.0, 1.0}, {1.0}));
  CHECK_THROWS(Potential::table({0.5, 1.0}, {1.0, 0.0}));
  CHECK_THROWS(Potential::table({0.0, 1.0}, {1.0, -1.0}));
  // a triangle: U(u) = 1 - |u| on [-1, 1]
  const auto tri = Potential::table({0.0, 1.0}, {1.0, 0.0});
  CHECK_THAT(tri(0.25), WithinRel(0.75, 1e-14));
  CHECK_THAT(tri(-0.5), WithinRel(0.5, 1e-14));
  CHECK(tri(2.0) == 0.0);
  CHECK_THAT(tri.moment(0), WithinRel(1.0, 1e-10));
  CHECK_THAT(tri.moment(2), WithinRel(1.0 / 6.0, 1e-10));
  CHECK(check_HU(tri).pass);
}
