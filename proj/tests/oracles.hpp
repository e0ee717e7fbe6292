#pragma once

// Reference computations written independently of the library, used to
// cross-check it in the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace oracles {

inline double norm(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return std::sqrt(s);
}

inline double poly_weight(std::span<const double> y, double alpha) { return 1.0 + std::pow(norm(y), alpha); }

inline double exp_weight(std::span<const double> y, double alpha, double p) {
  return std::exp(alpha * std::pow(norm(y), p));
}

/// O(n^2) weighted TV: atoms at bitwise-equal positions are summed first.
inline double brute_weighted_tv(int d, const std::vector<double>& pos, const std::vector<double>& w,
                                const std::function<double(std::span<const double>)>& phi) {
  const std::size_t n = w.size();
  std::vector<bool> used(n, false);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i]) continue;
    double mass = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      bool same = true;
      for (int a = 0; a < d; ++a) same = same && pos[j * d + a] == pos[i * d + a];
      if (same) {
        used[j] = true;
        mass += w[j];
      }
    }
    total += phi(std::span<const double>(pos.data() + i * d, d)) * std::abs(mass);
  }
  return total;
}

inline double normal_pdf(double x, double mean, double variance) {
  const double z = x - mean;
  return std::exp(-z * z / (2.0 * variance)) / std::sqrt(2.0 * std::numbers::pi * variance);
}

/// Trapezoid rule for the weighted TV distance between N(m1, v) and N(m2, v)
/// on R with weight phi.
inline double gaussian_weighted_tv(double m1, double m2, double variance, const std::function<double(double)>& phi,
                                   double half_width = 12.0, int points = 400001) {
  const double h = 2.0 * half_width / (points - 1);
  double acc = 0.0;
  for (int i = 0; i < points; ++i) {
    const double y = -half_width + i * h;
    const double f = phi(y) * std::abs(normal_pdf(y, m1, variance) - normal_pdf(y, m2, variance));
    acc += (i == 0 || i == points - 1) ? 0.5 * f : f;
  }
  return acc * h;
}

/// Trapezoid rule for E f(mean + sd Z) over +-12 sd.
inline double gaussian_expectation(const std::function<double(double)>& f, double mean, double sd,
                                   int points = 200001) {
  const double half = 12.0;
  const double h = 2.0 * half / (points - 1);
  double acc = 0.0;
  for (int i = 0; i < points; ++i) {
    const double z = -half + i * h;
    const double v = f(mean + sd * z) * normal_pdf(z, 0.0, 1.0);
    acc += (i == 0 || i == points - 1) ? 0.5 * v : v;
  }
  return acc * h;
}

}  // namespace oracles
