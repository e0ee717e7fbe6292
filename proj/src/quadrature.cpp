#include "lawsde/quadrature.hpp"

#include "lawsde/types.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace lawsde::quadrature {
namespace {

// Newton iteration on orthonormal Hermite polynomials (physicists' weight
// exp(-x^2)); initial guesses follow the classical asymptotic formulas.
Rule build_hermite(int n) {
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * x[0];
    else if (i == 3) z = 1.91 * z - 0.91 * x[1];
    else z = 2.0 * z - x[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  // Convert to the standard normal weight.
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = std::sqrt(2.0) * x[n - 1 - i];
    r.weights[i] = w[n - 1 - i] / std::sqrt(std::numbers::pi);
  }
  return r;
}

Rule build_legendre(int n) {
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-16) break;
    }
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

template <class Builder>
const Rule& cached(std::map<int, Rule>& cache, std::mutex& mu, int n, Builder build) {
  require(n >= 1, "quadrature order must be positive");
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

}  // namespace

const Rule& gauss_hermite(int n) {
  static std::map<int, Rule> cache;
  static std::mutex mu;
  return cached(cache, mu, n, build_hermite);
}

const Rule& gauss_legendre(int n) {
  static std::map<int, Rule> cache;
  static std::mutex mu;
  return cached(cache, mu, n, build_legendre);
}

double gaussian_expectation(const std::function<double(double)>& f, double mean, double variance,
                            std::span<const double> breakpoints, int order) {
  require(variance >= 0.0, "variance must be nonnegative");
  if (variance == 0.0) return f(mean);
  const double sd = std::sqrt(variance);
  if (breakpoints.empty()) {
    const Rule& gh = gauss_hermite(order);
    double s = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      if (gh.weights[i] == 0.0) continue;
      s += gh.weights[i] * f(mean + sd * gh.nodes[i]);
    }
    return s;
  }
  const boost::math::normal_distribution<double> normal;
  std::vector<double> cuts{0.0};
  std::vector<double> sorted(breakpoints.begin(), breakpoints.end());
  std::sort(sorted.begin(), sorted.end());
  for (double b : sorted) {
    const double u = boost::math::cdf(normal, (b - mean) / sd);
    if (u > cuts.back() && u < 1.0) cuts.push_back(u);
  }
  cuts.push_back(1.0);
  const Rule& gl = gauss_legendre(order);
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k], hi = cuts[k + 1];
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double u = mid + half * gl.nodes[i];
      if (u <= 0.0 || u >= 1.0) continue;
      s += half * gl.weights[i] * f(mean + sd * boost::math::quantile(normal, u));
    }
  }
  return s;
}

}  // namespace lawsde::quadrature
