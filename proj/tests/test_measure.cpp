#include "lawsde/measure.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace lawsde;

namespace {

DiscreteSignedMeasure random_measure(std::mt19937_64& rng, int d, int n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> pos, w;
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) pos.push_back(u(rng));
    w.push_back(u(rng));
  }
  return {d, pos, w};
}

}  // namespace

TEST_CASE("weighted_tv examples") {
  const WeightFunction quad = WeightFunction::polynomial(2.0);
  CHECK(weighted_tv(DiscreteSignedMeasure(1, {0.0, 1.0}, {0.0, 0.0}), quad) == 0.0);
  CHECK(weighted_tv(DiscreteSignedMeasure(), quad) == 0.0);
  CHECK(weighted_tv(DiscreteSignedMeasure(1, {1.0, -1.0}, {1.0, -1.0}), quad) == doctest::Approx(4.0).epsilon(1e-15));

  GridSignedMeasure g({-0.5}, {1.0});
  const double pts[] = {0.0, 1.0, 2.0};
  const double masses[] = {0.5, -0.25, 0.75};
  for (int i = 0; i < 3; ++i) g.add(g.locate(std::span(pts + i, 1)), masses[i]);
  const double e = std::numbers::e;
  const double want = 0.5 + 0.25 * e + 0.75 * e * e;
  CHECK(want == doctest::Approx(6.72136).epsilon(1e-6));
  CHECK(weighted_tv(g, WeightFunction::exponential(1.0, 1.0)) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("weighted_tv matches the brute-force oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const DiscreteSignedMeasure mu = random_measure(rng, d, 1 + trial);
    std::vector<double> pos(mu.positions().begin(), mu.positions().end()), w;
    for (std::size_t i = 0; i < mu.size(); ++i) w.push_back(mu.weight(i));
    const double want =
        oracles::brute_weighted_tv(d, pos, w, [](std::span<const double> y) { return oracles::poly_weight(y, 1.5); });
    CHECK(weighted_tv(mu, WeightFunction::polynomial(1.5)) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("non-finite weight evaluation is reported") {
  const WeightFunction bad = WeightFunction::custom([](std::span<const double> y) { return y[0] > 1.0 ? NAN : 1.0; });
  CHECK_THROWS_AS(weighted_tv(DiscreteSignedMeasure(1, {0.0, 2.0}, {1.0, 1.0}), bad), EvaluationError);
}

TEST_CASE("Hahn split") {
  const auto [plus, minus] = hahn_split(DiscreteSignedMeasure(1, {0.0, 1.0}, {1.0, -2.0}));
  REQUIRE(plus.size() == 1);
  REQUIRE(minus.size() == 1);
  CHECK(plus.position(0)[0] == 0.0);
  CHECK(plus.weight(0) == 1.0);
  CHECK(minus.position(0)[0] == 1.0);
  CHECK(minus.weight(0) == 2.0);

  const DiscreteSignedMeasure pos(2, {0.0, 1.0, 2.0, 3.0}, {0.25, 0.75});
  const auto [p2, m2] = hahn_split(pos);
  CHECK(m2.empty());
  CHECK(weighted_tv(p2, WeightFunction::constant(1.0)) == 1.0);

  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cell(-20, 20);
  std::uniform_real_distribution<double> mass(-1.0, 1.0);
  GridSignedMeasure g({0.0, 0.0}, {0.1, 0.2});
  for (int i = 0; i < 300; ++i) g.add({cell(rng), cell(rng), 0}, mass(rng));
  const auto [gp, gm] = hahn_split(g);
  const GridSignedMeasure back = gp - gm;
  for (const auto& [idx, m] : g.cells()) CHECK(back.mass(idx) == m);
  for (const auto& [idx, m] : gp.cells()) {
    CHECK(m >= 0.0);
    CHECK(gm.mass(idx) == 0.0);
  }
  for (const auto& [idx, m] : gm.cells()) CHECK(m >= 0.0);
  const WeightFunction phi = WeightFunction::polynomial(2.0);
  CHECK(weighted_tv(g, phi) == doctest::Approx(weighted_tv(gp, phi) + weighted_tv(gm, phi)).epsilon(1e-13));
}

TEST_CASE("norm axioms") {
  std::mt19937_64 rng(3);
  const WeightFunction phi = WeightFunction::exponential(0.7, 1.3);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 3;
    const auto mu = random_measure(rng, d, 10);
    const auto nu = random_measure(rng, d, 12);
    CHECK(weighted_tv(mu + nu, phi) <= weighted_tv(mu, phi) + weighted_tv(nu, phi) + 1e-12);
    CHECK(weighted_tv(mu.scaled(-2.5), phi) == doctest::Approx(2.5 * weighted_tv(mu, phi)).epsilon(1e-13));
    CHECK(weighted_tv(mu - mu, phi) == 0.0);
    CHECK(weighted_tv(mu, phi) > 0.0);
    const auto [p, m] = hahn_split(mu);
    CHECK(weighted_tv(mu, phi) == doctest::Approx(weighted_tv(p, phi) + weighted_tv(m, phi)).epsilon(1e-13));
  }
}

TEST_CASE("lower semicontinuity probe") {
  const WeightFunction phi = WeightFunction::polynomial(2.0);
  const double limit = weighted_tv(DiscreteSignedMeasure(1, {0.0}, {1.0}), phi);
  double tail_dirac = INFINITY, tail_escape = INFINITY;
  for (int n = 1; n <= 10000; ++n) {
    tail_dirac = std::min(tail_dirac, weighted_tv(DiscreteSignedMeasure(1, {1.0 / n}, {1.0}), phi));
    tail_escape = std::min(
        tail_escape, weighted_tv(DiscreteSignedMeasure(1, {0.0, double(n)}, {1.0 - 1.0 / n, 1.0 / n}), phi));
  }
  CHECK(limit <= tail_dirac + 1e-12);
  CHECK(limit <= tail_escape + 1e-12);
}

TEST_CASE("empirical measures") {
  const std::vector<double> xs{1.0, 2.0, 3.0};
  const auto mu = empirical_from_particles(xs, 1);
  REQUIRE(mu.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(mu.weight(i) == doctest::Approx(1.0 / 3.0));
  CHECK(mu.total_mass() == doctest::Approx(1.0));
  CHECK(mu.mean()[0] == doctest::Approx(2.0));

  const std::vector<double> zero{0.0};
  const auto dirac = empirical_from_particles(zero, 1);
  CHECK(dirac.size() == 1);
  CHECK(dirac.weight(0) == 1.0);

  const std::vector<double> w{0.5, 0.25, 2.0};
  CHECK(empirical_from_particles(xs, 1, std::span<const double>(w)).total_mass() == doctest::Approx(2.75));
  CHECK_THROWS_AS(empirical_from_particles(std::span<const double>(), 1), InvalidArgument);
}

TEST_CASE("binning") {
  const auto one = bin_to_grid(DiscreteSignedMeasure(1, {0.2}, {1.0}), {0.0}, {1.0});
  REQUIRE(one.cells().size() == 1);
  CHECK(one.cells().begin()->first[0] == 0);
  CHECK(one.cells().begin()->second == 1.0);

  const auto two = bin_to_grid(DiscreteSignedMeasure(1, {0.2, 0.8}, {0.5, 0.5}), {0.0}, {1.0});
  REQUIRE(two.cells().size() == 1);
  CHECK(two.cells().begin()->second == 1.0);

  // Half-open cells: a boundary point belongs to the cell on its right.
  const auto edge = bin_to_grid(DiscreteSignedMeasure(1, {1.0, -1.0}, {1.0, 1.0}), {0.0}, {1.0});
  CHECK(edge.mass({1, 0, 0}) == 1.0);
  CHECK(edge.mass({-1, 0, 0}) == 1.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  std::vector<double> pos(3000), w(1000);
  for (auto& v : pos) v = n01(rng);
  for (auto& v : w) v = n01(rng);
  const DiscreteSignedMeasure mu(3, pos, w);
  const auto g = bin_to_grid(mu, {0.0, 0.1, -0.3}, {0.25, 0.5, 0.3});
  CHECK(g.total_mass() == doctest::Approx(mu.total_mass()).epsilon(1e-12));

  CHECK_THROWS_AS(bin_to_grid(DiscreteSignedMeasure(1, {NAN}, {1.0}), {0.0}, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(bin_to_grid(mu, {0.0, 0.0, 0.0}, {0.1, 0.0, 0.1}), InvalidArgument);
}

TEST_CASE("coarser nested bins never increase the binned TV") {
  // With a constant weight and nested grids (widths doubling from a common
  // origin) merging cells can only cancel mass.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const WeightFunction one = WeightFunction::constant(1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(500), b(500);
    for (auto& v : a) v = n01(rng);
    for (auto& v : b) v = 0.3 + 1.2 * n01(rng);
    const auto diff = empirical_from_particles(a, 1) - empirical_from_particles(b, 1);
    double prev = INFINITY;
    for (double w : {0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64}) {
      const double tv = weighted_tv(bin_to_grid(diff, {0.0}, {w}), one);
      CHECK(tv <= prev + 1e-12);
      prev = tv;
    }
  }
}

TEST_CASE("CSV round trip") {
  const DiscreteSignedMeasure mu(2, {0.1, -3.5, 1e-17, 2.0 / 3.0}, {0.25, -1.0 / 7.0});
  std::stringstream ss;
  write_csv(ss, mu);
  const DiscreteSignedMeasure back = read_discrete_csv(ss);
  REQUIRE(back.size() == 2);
  REQUIRE(back.dim() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.weight(i) == mu.weight(i));
    for (int a = 0; a < 2; ++a) CHECK(back.position(i)[a] == mu.position(i)[a]);
  }
}

TEST_CASE("measure flow indexing") {
  MeasureFlow flow(0.5, 1.0, 0.25);
  CHECK(flow.history_steps() == 2);
  CHECK(flow.total_slices() == 7);
  for (std::size_t k = 0; k < flow.total_slices(); ++k)
    flow.push_back(DiscreteSignedMeasure(1, {double(k)}, {1.0}));
  CHECK(flow.time(0) == -0.5);
  CHECK(flow.time(2) == 0.0);
  CHECK(flow.index_at_or_below(0.3) == 3);
  CHECK(flow.index_at_or_below(0.25) == 3);
  CHECK(flow.mean(4)[0] == 4.0);
}
