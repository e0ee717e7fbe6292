#include "lawsde/catalog.hpp"
#include "lawsde/coefficients.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace lawsde;

namespace {

std::span<const double> sp(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Vector vec(double x) { return Vector::Constant(1, x); }

// Scalar b, unit sigma.
PairwiseMeanFieldSpec scalar_spec(std::function<double(double, double)> b, double sigma = 1.0) {
  PairwiseMeanFieldSpec s;
  s.b = [b](double, std::span<const double> x, std::span<const double> y) { return vec(b(x[0], y[0])); };
  s.sigma = [sigma](double, std::span<const double>, std::span<const double>) {
    return Matrix::Constant(1, 1, sigma);
  };
  s.sigma_depends_on_y = false;
  return s;
}

DelayedInteractionDrift identity_beta(std::vector<DelayAtom> kappa, double tau) {
  DelayedInteractionDrift d;
  d.beta_tilde = [](double, double, const PathView&, std::span<const double> y) { return vec(y[0]); };
  d.kappa = std::move(kappa);
  d.tau = tau;
  return d;
}

}  // namespace

TEST_CASE("delayed interaction drift") {
  MeasureFlow flow(0.0, 1.0, 1.0);
  flow.push_back(DiscreteSignedMeasure::uniform(1, {1.0, 2.0, 3.0}, 1.0 / 3.0));
  const LawView law(flow, 0);
  const Vector x = vec(0.7);
  const PathView path(sp(x), 0.0);
  const DispersionSpec id = DispersionSpec::identity(1);

  DelayedInteractionDrift zero;
  zero.beta_tilde = [](double, double, const PathView&, std::span<const double>) { return vec(0.0); };
  CHECK(eval_drift_interaction(zero, id, 0.0, path, law)[0] == 0.0);
  CHECK(eval_drift_interaction(identity_beta({{0.0, 1.0}}, 0.0), id, 0.0, path, law)[0] == doctest::Approx(2.0));

  // Two atoms: s = 0 and s = -tau, against a brute-force double sum.
  MeasureFlow two(0.5, 1.0, 0.5);
  two.push_back(DiscreteSignedMeasure::uniform(1, {-1.0, 0.5, 4.0, 2.0}, 0.25));
  two.push_back(DiscreteSignedMeasure::uniform(1, {3.0, 1.0}, 0.5));
  DelayedInteractionDrift half = identity_beta({{0.0, 0.5}, {-0.5, 0.5}}, 0.5);
  half.beta_tilde = [](double, double s, const PathView& p, std::span<const double> y) {
    return vec(std::sin(y[0] + s) * p.current()[0]);
  };
  const LawView law2(two, 1);
  double brute = 0.0;
  for (std::size_t i = 0; i < 2; ++i) brute += 0.5 * 0.5 * std::sin(two.slice(1).position(i)[0]) * 0.7;
  for (std::size_t i = 0; i < 4; ++i) brute += 0.5 * 0.25 * std::sin(two.slice(0).position(i)[0] - 0.5) * 0.7;
  CHECK(eval_drift_interaction(half, id, 0.0, path, law2)[0] == doctest::Approx(brute).epsilon(1e-14));

  // kappa must be a probability measure on [-tau, 0].
  CHECK_THROWS_AS(identity_beta({{0.0, 0.6}}, 0.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(identity_beta({{-1.0, 1.0}}, 0.5).validate(), InvalidArgument);
  // Evaluating at t = 0 against a delay slice that was never stored.
  CHECK_THROWS(eval_drift_interaction(identity_beta({{-0.5, 1.0}}, 0.5), id, 0.0, path, law));
}

TEST_CASE("delayed drift is linear in the flow") {
  const Vector x = vec(0.3);
  const PathView path(sp(x), 0.0);
  DelayedInteractionDrift d = identity_beta({{0.0, 1.0}}, 0.0);
  d.beta_tilde = [](double, double, const PathView& p, std::span<const double> y) {
    return vec(std::cos(p.current()[0] * y[0]) + y[0] * y[0]);
  };
  const auto eval = [&](const DiscreteSignedMeasure& m) {
    MeasureFlow f(0.0, 1.0, 1.0);
    f.push_back(m);
    return eval_drift_interaction(d, DispersionSpec::identity(1), 0.0, path, LawView(f, 0))[0];
  };
  const DiscreteSignedMeasure mu = DiscreteSignedMeasure::uniform(1, {0.1, 0.9, -2.0}, 1.0 / 3.0);
  const DiscreteSignedMeasure nu = DiscreteSignedMeasure::uniform(1, {5.0, -0.4}, 0.5);
  CHECK(eval(mu.scaled(0.5) + nu.scaled(0.5)) == doctest::Approx(0.5 * eval(mu) + 0.5 * eval(nu)).epsilon(1e-14));
}

TEST_CASE("pairwise mean field") {
  const auto diff = scalar_spec([](double x, double y) { return x - y; });
  const DiscreteSignedMeasure ens = DiscreteSignedMeasure::uniform(1, {1.0, 2.0, 6.0}, 1.0 / 3.0);
  const Vector x = vec(0.5);
  CHECK(eval_pairwise_mean_field(diff, 0.0, sp(x), ens).drift[0] == doctest::Approx(0.5 - 3.0));
  CHECK(eval_pairwise_mean_field(scalar_spec([](double, double) { return 0.0; }, 2.5), 0.0, sp(x), ens)
            .dispersion(0, 0) == 2.5);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  std::vector<double> pts(100);
  for (auto& v : pts) v = n01(rng);
  const auto sinxy = scalar_spec([](double a, double b) { return std::sin(a * b); });
  double oracle = 0.0;
  for (double y : pts) oracle += std::sin(0.5 * y);
  oracle /= 100.0;
  const double got = eval_pairwise_mean_field(sinxy, 0.0, sp(x), empirical_from_particles(pts, 1)).drift[0];
  CHECK(std::abs(got - oracle) <= 1e-14);

  // A one-member ensemble gives the pointwise value.
  const std::vector<double> single{1.7};
  CHECK(eval_pairwise_mean_field(sinxy, 0.0, sp(x), empirical_from_particles(single, 1)).drift[0] ==
        std::sin(0.5 * 1.7));
  CHECK_THROWS_AS(eval_pairwise_mean_field(sinxy, 0.0, sp(x), DiscreteSignedMeasure()), InvalidArgument);
}

TEST_CASE("factored composition with identity dispersion") {
  FactoredDriftSpec f;
  f.dispersion = DispersionSpec::identity(2);
  f.b_tilde = [](double t, const PathView& p, const LawView&) {
    Vector v(2);
    v << p.current()[0] * t, -p.current()[1];
    return v;
  };
  MeasureFlow flow(0.0, 1.0, 0.5);
  flow.push_back(DiscreteSignedMeasure(2, {0.0, 0.0}, {1.0}));
  Vector x(2);
  x << 1.5, -2.0;
  const PathView path(sp(x), 0.5);
  CHECK(f.drift(0.5, path, LawView(flow, 0)) == f.eval_b_tilde(0.5, path, LawView(flow, 0)));
}

TEST_CASE("polynomial growth checker") {
  const SampleDomain grid = SampleDomain::grid(1, -5.0, 5.0, 0.01);
  const MarginReport zero = check_polynomial_growth(make_pairwise("zero"), 2.0, 3.0, 1.5, grid);
  CHECK(zero.pass);
  for (const auto& m : zero.margins) CHECK(m.worst <= -1.5);

  const auto ou = make_pairwise("ou-attraction");
  const MarginReport ok = check_polynomial_growth(ou, 2.0, 3.0, 2.0, grid);
  CHECK(ok.pass);
  double worst = -INFINITY;
  for (const auto& x : grid.x_points) {
    const double v = x[0] * x[0];
    worst = std::max(worst, v * (-2.0 * v + 1.0) - 2.0 * (1.0 + v * v));
  }
  CHECK(ok.margin("generator").worst == doctest::Approx(worst).epsilon(1e-14));

  const auto cubic = make_pairwise("cubic", {1, 1.0, 0.0, 0.0, 1.0});
  for (double C : {0.5, 2.0, 10.0}) {
    const MarginReport bad = check_polynomial_growth(cubic, 2.0, 3.0, C, grid);
    CHECK_FALSE(bad.pass);
    CHECK(bad.margin("generator").worst > 0.0);
    CHECK(std::abs(bad.margin("generator").argmax.x[0]) == 5.0);
  }
  CHECK_THROWS_AS(check_polynomial_growth(ou, 2.0, 3.0, 0.0, grid), InvalidArgument);
}

TEST_CASE("exponential growth checker") {
  const SampleDomain grid = SampleDomain::grid(1, -5.0, 5.0, 0.05);
  CHECK(check_exponential_growth(make_pairwise("zero"), 1.0, 1.0, 3.0, 1.0, grid).pass);

  const auto ou = make_pairwise("ou-attraction");
  const MarginReport r = check_exponential_growth(ou, 1.0, 1.0, 3.0, 4.0, grid);
  double gen = -INFINITY, growth = -INFINITY;
  for (const auto& x : grid.x_points) {
    const double a = std::abs(x[0]);
    gen = std::max(gen, a * a * (-2.0 * a * a + 1.0) + (a + 1.0 - 2.0) * a * a - 4.0 * (1.0 + std::pow(a, 3.0)));
    for (const auto& y : grid.y_points)
      growth = std::max(growth, a - 4.0 * std::exp(std::abs(y[0]) / 2.0 + a / 4.0));
  }
  CHECK(r.margin("generator").worst == doctest::Approx(gen).epsilon(1e-13));
  CHECK(r.margin("growth").worst == doctest::Approx(growth).epsilon(1e-13));
  CHECK(r.pass == (gen <= 0.0 && growth <= 0.0));

  // |b_tilde| = exp(|y|) meets the bound exp(|y| + |x|/2) with equality at x = 0.
  const auto expo = scalar_spec([](double, double y) { return std::exp(std::abs(y)); });
  const MarginReport e = check_exponential_growth(expo, 2.0, 1.0, 3.0, 1.0, grid);
  CHECK(e.margin("growth").pass);
  CHECK(e.margin("growth").worst == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("checkers are monotone in C") {
  const SampleDomain grid = SampleDomain::grid(1, -3.0, 3.0, 0.1);
  const auto ou = make_pairwise("ou-attraction");
  const double c0 = smallest_passing_constant([&](double C) { return check_polynomial_growth(ou, 2.0, 3.0, C, grid).pass; });
  for (double C : {c0, 1.5 * c0, 4.0 * c0, 100.0 * c0}) CHECK(check_polynomial_growth(ou, 2.0, 3.0, C, grid).pass);
  CHECK_FALSE(check_polynomial_growth(ou, 2.0, 3.0, 0.9 * c0, grid).pass);
}

TEST_CASE("H growth checker") {
  const SampleDomain grid = SampleDomain::grid(1, -10.0, 10.0, 0.1);
  const auto V4 = [](std::span<const double> y) { return 1.0 + std::pow(y[0], 4); };
  CHECK(check_H_growth(make_pairwise("zero"), V4, 3.0, grid).pass);
  CHECK(check_H_growth(scalar_spec([](double x, double y) { return std::sin(x + y); }, 0.0), V4, 3.0, grid).pass);

  const auto V6 = [](std::span<const double> y) { return 1.0 + std::pow(y[0], 6); };
  const auto xy = scalar_spec([](double x, double y) { return x * y; }, 0.0);
  const MarginReport r = check_H_growth(xy, V6, 3.0, grid);
  double worst = -INFINITY;
  for (const auto& x : grid.x_points)
    for (const auto& y : grid.y_points)
      worst = std::max(worst, std::pow(std::abs(x[0] * y[0]), 3.0) - V6(sp(x)) * V6(sp(y)));
  CHECK(r.pass);
  CHECK(r.margins.at(0).worst == doctest::Approx(worst).epsilon(1e-13));
}

TEST_CASE("nondegeneracy") {
  const auto constant = [](Matrix m) {
    PairwiseMeanFieldSpec s;
    s.dim = 2;
    s.noise_dim = 2;
    s.b = [](double, std::span<const double>, std::span<const double>) { return Vector::Zero(2).eval(); };
    s.sigma = [m](double, std::span<const double>, std::span<const double>) { return m; };
    return s;
  };
  const auto pts = SampleDomain::grid_points(2, -1.0, 1.0, 0.5);
  const std::vector<double> times{0.0, 0.5};
  CHECK(check_nondegeneracy(constant(Matrix::Identity(2, 2)), 1.0, times, pts).min_eigenvalue ==
        doctest::Approx(1.0));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  const auto degenerate = check_nondegeneracy(constant(d), 1.0, times, pts);
  CHECK(degenerate.min_eigenvalue == doctest::Approx(0.0));
  CHECK_FALSE(degenerate.pass);
  Matrix s(2, 2);
  s << 2.0, 1.0, 1.0, 2.0;
  const auto r = check_nondegeneracy(constant(s), 1.0, times, pts);
  CHECK(r.min_eigenvalue == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.pass);
}

TEST_CASE("sample domain and scan_max") {
  const SampleDomain g = SampleDomain::grid(2, -1.0, 1.0, 1.0, {0.0, 0.5});
  CHECK(g.x_points.size() == 9);
  CHECK(g.size() == 2 * 9 * 9);
  const SamplePoint last = g.at(g.size() - 1);
  CHECK(last.t == 0.5);
  CHECK(last.x[0] == 1.0);
  CHECK(last.y[1] == 1.0);
  // Ties resolve to the lowest index.
  const auto [v, i] = scan_max(1000, [](std::size_t k) { return k % 100 == 37 ? 5.0 : 0.0; });
  CHECK(v == 5.0);
  CHECK(i == 37);
}

TEST_CASE("catalog") {
  auto& cat = CoefficientCatalog::instance();
  for (const char* name :
       {"zero", "constant", "linear-meanfield", "ou-attraction", "cubic", "sign", "sin-product"})
    CHECK(cat.contains(name));
  const auto lm = make_pairwise("linear-meanfield", {2, 0.5, 1.0, 0.0, 1.0});
  Vector x(2), y(2);
  x << 1.0, 2.0;
  y << 3.0, -1.0;
  const Vector b = lm.drift(0.0, sp(x), sp(y));
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == doctest::Approx(-1.5));
  CHECK_THROWS_AS(make_pairwise("no-such-entry"), InvalidArgument);
}
