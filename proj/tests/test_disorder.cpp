#include <catch_amalgamated.hpp>

#include <pieces/disorder.hpp>
#include <pieces/stats.hpp>

#include <cmath>
#include <numeric>

using namespace pieces;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("sampler rejects degenerate input") {
  CHECK_THROWS_AS(sample_pieces(7, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(sample_pieces(7, 10.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(sample_pieces(7, -1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(sample_pieces_conditioned(7, 10.0, 0), std::domain_error);
}

TEST_CASE("sampled pieces tile the box and are reproducible") {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto a = sample_pieces(seed, 1e4, 1.3);
    const auto b = sample_pieces(seed, 1e4, 1.3);
    CHECK(a.cut_points == b.cut_points);
    double s = 0.0;
    for (const auto& p : a.pieces) {
      CHECK(p.length > 0.0);
      s += p.length;
    }
    CHECK_THAT(s, WithinAbs(1e4, 1e-12 * 1e4));
    CHECK(std::is_sorted(a.cut_points.begin(), a.cut_points.end()));
  }
  CHECK(sample_pieces(1, 1e3, 1.0).cut_points != sample_pieces(2, 1e3, 1.0).cut_points);
}

TEST_CASE("mean piece count is mu L") {
  std::vector<double> counts;
  for (std::uint64_t s = 0; s < 10000; ++s) counts.push_back(double(sample_pieces(s, 100.0, 1.0).size()));
  // m pieces = cuts + 1
  CHECK_THAT(mean(counts) - 1.0, WithinAbs(100.0, 3.0));
  CHECK_THAT(stddev(counts), WithinAbs(10.0, 0.5));
}

TEST_CASE("conditioned sampler") {
  const auto one = sample_pieces_conditioned(3, 42.0, 1);
  REQUIRE(one.size() == 1);
  CHECK(one.length(0) == 42.0);

  std::vector<double> lengths, fifth;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto c = sample_pieces_conditioned(s, 100.0, 10);
    REQUIRE(c.size() == 10);
    lengths.push_back(c.length(s % 10));
    fifth.push_back(sample_pieces_conditioned(s + 20000, 1.0, 5).length(s % 5));
  }
  CHECK_THAT(mean(lengths), WithinAbs(10.0, 0.5));
  const double d = ks_statistic(fifth, [](double x) { return 1.0 - std::pow(1.0 - x, 4); });
  CHECK(ks_pvalue(d, fifth.size()) > 0.01);
}

TEST_CASE("pieces in a length window") {
  const auto cfg = sample_pieces(11, 1e5, 1.0);
  CHECK(count_pieces_in_range(cfg, 1.0, 0.0) == 0);
  CHECK(count_pieces_in_range(cfg, 2e5, 1.0) == 0);
  const double e = std::exp(-1.0) * (1.0 - std::exp(-1.0));
  CHECK_THAT(count_pieces_in_range(cfg, 1.0, 1.0) / 1e5, WithinAbs(e, 0.01));
  CHECK_THAT(expected_pieces_in_range(1.0, 1.0, 1.0), WithinRel(e, 1e-14));

  // empirical length CDF against 1 - e^{-a}
  const auto L = cfg.lengths();
  for (double a = 0.0; a <= 10.0; a += 0.5) {
    const double f = double(std::count_if(L.begin(), L.end(), [a](double x) { return x <= a; })) / L.size();
    CHECK_THAT(f, WithinAbs(1.0 - std::exp(-a), 0.01));
  }
}

TEST_CASE("pair clusters") {
  const auto cfg = sample_pieces(12, 1e5, 1.0);
  CHECK(count_pair_clusters(cfg, 1, 1, 1, 1, 0.5, 0.0) == 0);
  const double e = std::exp(-2.0) * std::pow(1.0 - std::exp(-1.0), 2);
  CHECK_THAT(count_pair_clusters(cfg, 1, 1, 1, 1, 0, 1) / 1e5, WithinAbs(e, 0.005));
  CHECK_THAT(expected_pair_clusters(1.0, 1, 1, 1, 1, 1), WithinRel(e, 1e-14));

  // brute force over all ordered pairs: each counted once
  const auto small = from_lengths({1.5, 0.3, 1.2, 0.4, 0.2, 1.9, 1.1});
  std::size_t brute = 0;
  for (std::size_t i = 0; i < small.size(); ++i)
    for (std::size_t j = i + 2; j < small.size(); ++j) {
      const double gap = small.pieces[j].left - small.pieces[i].right;
      if (small.length(i) >= 1 && small.length(i) <= 2 && small.length(j) >= 1 && small.length(j) <= 2 &&
          gap >= 0 && gap <= 1)
        ++brute;
    }
  CHECK(count_pair_clusters(small, 1, 1, 1, 1, 0, 1) == brute);
  CHECK(brute == 2);
}

TEST_CASE("neighbor pairs and triplets") {
  const auto cfg = sample_pieces(13, 1e5, 1.0);
  CHECK(count_neighbor_pairs(cfg, 1e6, 1.0, 3.0) == 0);
  CHECK(count_triplets(cfg, 1e6, 1.0, 1.0, 3.0) == 0);

  const double n = double(count_neighbor_pairs(cfg, 2, 2, 3));
  CHECK(n <= neighbor_pair_bound(1e5, 2, 2, 3));
  CHECK_THAT(neighbor_pair_bound(1e5, 2, 2, 3), WithinRel(5 * std::exp(-4.0) * 1e5, 1e-14));
  // mean (1 + d) e^{-l-l'} L
  const double mu = expected_neighbor_pairs(1e5, 2, 2, 3);
  CHECK_THAT(mu, WithinRel(4 * std::exp(-4.0) * 1e5, 1e-14));
  CHECK(std::abs(n - mu) < 0.05 * mu);

  const double t = double(count_triplets(cfg, 1, 1, 1, 0.25));
  CHECK(t <= triplet_bound(1e5, 1, 1, 1, 0.25));
  const double mt = expected_triplets(1e5, 1, 1, 1, 0.25);
  CHECK(std::abs(t - mt) < 0.05 * mt);

  // adjacent pieces count at any d >= 0
  const auto small = from_lengths({3.0, 3.0, 0.5, 3.0});
  CHECK(count_neighbor_pairs(small, 2, 2, 0.0) == 1);
  CHECK(count_neighbor_pairs(small, 2, 2, 0.5) == 2);
  CHECK(count_triplets(small, 2, 2, 2, 0.5) == 1);
}

TEST_CASE("largest piece") {
  CHECK(max_piece_length(from_lengths({7.0})) == 7.0);
  const auto cfg = from_lengths({1.0, 4.0, 2.0});
  CHECK(max_piece_length(cfg) == 4.0);
  // adding a cut never increases the maximum
  auto refined = cfg;
  refined.cut_points.insert(refined.cut_points.begin() + 1, 3.0);
  rebuild_pieces(refined);
  CHECK(max_piece_length(refined) <= max_piece_length(cfg));

  CHECK_THAT(max_piece_bound(1e5), WithinAbs(28.13, 0.01));
  int above = 0;
  for (std::uint64_t s = 0; s < 100; ++s)
    if (max_piece_length(sample_pieces(s + 500, 1e5, 1.0)) > max_piece_bound(1e5)) ++above;
  CHECK(above <= 1);
}
