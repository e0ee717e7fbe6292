#include "lawsde/catalog.hpp"
#include "lawsde/lyapunov.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

using namespace lawsde;

namespace {

std::span<const double> sp(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::vector<Vector> random_points(std::uint64_t seed, int count, double radius) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 3);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) {
    Vector v(dim(rng));
    for (int a = 0; a < v.size(); ++a) v[a] = u(rng);
    out.push_back(v);
  }
  return out;
}

SimConfig config(std::size_t n, double dt, double T) {
  SimConfig c;
  c.particles = n;
  c.dt = dt;
  c.horizon = T;
  c.seed = 2;
  return c;
}

}  // namespace

TEST_CASE("catalog derivatives match finite differences") {
  const std::vector<LyapunovFunction> fns = {
      LyapunovFunction::quadratic(),         LyapunovFunction::polynomial(1.5),
      LyapunovFunction::polynomial(3.0),     LyapunovFunction::polynomial(4.0),
      LyapunovFunction::exponential(0.5, 1.0), LyapunovFunction::exponential(1.0, 2.0),
      LyapunovFunction::exponential(0.3, 1.5)};
  const double h = 1e-5;
  for (const auto& V : fns) {
    CAPTURE(V.name());
    for (const Vector& y : random_points(11, 100, 2.5)) {
      const Vector g = V.gradient(0.0, sp(y));
      const Matrix H = V.hessian(0.0, sp(y));
      for (int a = 0; a < y.size(); ++a) {
        Vector up = y, down = y;
        up[a] += h;
        down[a] -= h;
        const double fd = (V.value(0.0, sp(up)) - V.value(0.0, sp(down))) / (2.0 * h);
        CHECK(rel(g[a], fd) < 1e-6);
        const Vector fd_row = (V.gradient(0.0, sp(up)) - V.gradient(0.0, sp(down))) / (2.0 * h);
        for (int b = 0; b < y.size(); ++b) CHECK(rel(H(a, b), fd_row[b]) < 1e-6);
      }
    }
  }
}

TEST_CASE("catalog closed forms outside the unit ball") {
  Vector y(2);
  y << 1.2, -0.9;
  const double r = y.norm();
  CHECK(LyapunovFunction::quadratic().value(0.0, sp(y)) == doctest::Approx(1.0 + r * r).epsilon(1e-15));
  CHECK(LyapunovFunction::polynomial(3.0).value(0.0, sp(y)) == doctest::Approx(1.0 + r * r * r).epsilon(1e-14));
  CHECK(LyapunovFunction::exponential(0.5, 1.0).value(0.0, sp(y)) == doctest::Approx(std::exp(0.5 * r)).epsilon(1e-14));
  // Continuity across the matching sphere.
  for (const auto& V : {LyapunovFunction::polynomial(3.0), LyapunovFunction::exponential(0.5, 1.0)}) {
    Vector in = Vector::Constant(1, 1.0 - 1e-9), out = Vector::Constant(1, 1.0 + 1e-9);
    CHECK(V.value(0.0, sp(in)) == doctest::Approx(V.value(0.0, sp(out))).epsilon(1e-8));
    CHECK(V.hessian(0.0, sp(in))(0, 0) == doctest::Approx(V.hessian(0.0, sp(out))(0, 0)).epsilon(1e-7));
  }
}

TEST_CASE("catalog entries are convex") {
  const std::vector<LyapunovFunction> fns = {LyapunovFunction::quadratic(), LyapunovFunction::polynomial(1.0),
                                             LyapunovFunction::polynomial(2.0), LyapunovFunction::polynomial(3.0),
                                             LyapunovFunction::polynomial(4.0), LyapunovFunction::exponential(0.5, 1.0),
                                             LyapunovFunction::exponential(1.0, 2.0)};
  for (const auto& V : fns) {
    CAPTURE(V.name());
    for (const Vector& y : random_points(12, 100, 3.0)) {
      const Eigen::SelfAdjointEigenSolver<Matrix> es(V.hessian(0.0, sp(y)));
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
      CHECK(V.value(0.0, sp(y)) >= 0.0);
    }
  }
}

TEST_CASE("generator margin examples") {
  const SampleDomain grid = SampleDomain::grid(1, -5.0, 5.0, 0.1);
  LyapunovCertificate cert;
  cert.C = 1.0;

  const Margin zero = generator_margin(cert, make_pairwise("zero"), grid);
  CHECK(zero.pass);
  CHECK(zero.worst == doctest::Approx(-1.0));

  const Margin ou = generator_margin(cert, make_pairwise("ou-attraction"), grid);
  CHECK(ou.pass);
  CHECK(ou.worst == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(ou.argmax.x[0]) < 1e-12);

  const Margin grow = generator_margin(cert, make_pairwise("ou-attraction", {1, -1.0, 0.0, 0.0, 1.0}), grid);
  CHECK_FALSE(grow.pass);
  CHECK(grow.worst == doctest::Approx(24.0).epsilon(1e-12));
  CHECK(std::abs(grow.argmax.x[0]) == 5.0);

  // Point-evaluated overload agrees with the pairwise one.
  const Margin point = generator_margin(
      cert, [](const SamplePoint& p) { return Vector(-p.x); },
      [](const SamplePoint&) { return Matrix::Identity(1, 1).eval(); }, grid);
  CHECK(point.worst == ou.worst);
  CHECK(generator_margin(cert, make_pairwise("ou-attraction"), grid, true).pass == false);
}

TEST_CASE("scaling V scales the margin") {
  const SampleDomain grid = SampleDomain::grid(2, -2.0, 2.0, 0.25);
  const auto spec = make_pairwise("sin-product", {2, 1.0, 0.8, 0.0, 1.0});
  LyapunovCertificate cert = LyapunovCertificate::power_family(3.0, 1.3);
  const Margin base = generator_margin(cert, spec, grid);
  for (double lambda : {0.5, 2.0, 7.0}) {
    LyapunovCertificate scaled = cert;
    scaled.V = cert.V.scaled(lambda);
    const Margin m = generator_margin(scaled, spec, grid);
    CHECK(m.worst == doctest::Approx(lambda * base.worst).epsilon(1e-12));
    CHECK(m.pass == base.pass);
  }
}

TEST_CASE("monitor on deterministic dynamics") {
  const auto spec = make_pairwise("ou-attraction", {1, 1.0, 0.0, 0.0, 1.0});
  const ParticleEnsemble e = simulate(spec, InitialLaw::point(Vector::Constant(1, 1.5)), config(4, 0.01, 1.0));
  LyapunovCertificate cert;
  cert.C = 0.0;
  const MonitorReport r = monitor_expectation(e, cert);
  REQUIRE(r.series.size() == e.slices());
  for (std::size_t k = 0; k < e.slices(); ++k) {
    CHECK(r.series[k].mean == cert.V.value(0.0, e.position(k, 0)));
    CHECK(r.series[k].se == 0.0);
  }
  CHECK(r.pass());

  const ParticleEnsemble z = simulate(make_pairwise("zero"), InitialLaw::gaussian(Vector::Zero(1), 1.0), config(100, 0.01, 1.0));
  cert.C = 0.5;
  const MonitorReport zr = monitor_expectation(z, cert);
  CHECK(zr.pass());
  CHECK(zr.series.back().mean == zr.initial_mean);
}

TEST_CASE("monitor flags a false constant") {
  const auto grow = make_pairwise("ou-attraction", {1, -1.0, 0.0, 0.0, 1.0});
  const ParticleEnsemble e = simulate(grow, InitialLaw::point(Vector::Ones(1)), config(10, 1e-3, 0.5));
  LyapunovCertificate cert;
  cert.C = 0.0;
  const MonitorReport r = monitor_expectation(e, cert);
  REQUIRE(r.first_flag.has_value());
  CHECK(*r.first_flag <= 0.5);
  cert.C = 2.0;
  CHECK(monitor_expectation(e, cert).pass());
}

TEST_CASE("delayed-drift conditions") {
  const SampleDomain grid = SampleDomain::grid(1, -5.0, 5.0, 0.1);
  const DiscreteSignedMeasure xi(1, {0.0, 1.0}, {0.5, 0.5});

  DelayedInteractionDrift zero;
  zero.beta_tilde = [](double, double, const PathView&, std::span<const double>) { return Vector::Zero(1).eval(); };
  DispersionSpec none = DispersionSpec::constant(Matrix::Zero(1, 1));
  LyapunovCertificate cert;
  cert.C = 2.0;  // V >= 1 = 2 / C
  const ConditionsReport trivial = check_delayed_conditions(zero, none, cert, grid, xi);
  CHECK(trivial.pass);
  CHECK(trivial.initial_finite);
  CHECK(trivial.initial_mean_V == doctest::Approx(1.5));

  const DelayedCoefficients ou = delayed_from_pairwise(make_pairwise("ou-attraction"));
  const auto family = [&](double C) {
    return check_delayed_conditions(ou.drift, ou.dispersion, LyapunovCertificate::power_family(2.0, C), grid, xi);
  };
  const double C = smallest_passing_constant([&](double c) { return family(c).pass; });
  CHECK(std::isfinite(C));
  CHECK(family(C).pass);
  CHECK_FALSE(family(0.5 * C).pass);

  LyapunovCertificate mismatch;
  mismatch.C = 10.0;
  mismatch.eta = [](double, std::span<const double> y) { return 1.0 + std::abs(y[0]); };
  const ConditionsReport bad = check_delayed_conditions(ou.drift, ou.dispersion, mismatch, grid, xi);
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(bad.domination.pass);
  CHECK(bad.domination.worst > 0.0);
  CHECK(std::abs(bad.domination.argmax.y[0]) == 5.0);
}

TEST_CASE("exponential family guards its matching") {
  CHECK_NOTHROW(LyapunovFunction::exponential(1.0, 1.0));
  CHECK_THROWS_AS(LyapunovFunction::polynomial(0.0), InvalidArgument);
  CHECK_THROWS_AS(LyapunovFunction::exponential(1.0, 2.5), InvalidArgument);
}
