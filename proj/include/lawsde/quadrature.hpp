#pragma once

#include <functional>
#include <span>
#include <vector>

namespace lawsde::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Hermite rule for E[f(Z)], Z ~ N(0,1) (weights sum to 1).
/// Rules are computed once per n and cached.
const Rule& gauss_hermite(int n);

/// n-point Gauss-Legendre rule on [-1, 1].
const Rule& gauss_legendre(int n);

/// E[f(mean + sd Z)] with sd = sqrt(variance).
///
/// `breakpoints` are the points where f may jump. Without breakpoints this is
/// plain Gauss-Hermite of the given order. Otherwise the line is split at the
/// breakpoints and each piece is integrated with Gauss-Legendre in the
/// probability variable u = Phi(z), which is exact for piecewise constant f.
double gaussian_expectation(const std::function<double(double)>& f, double mean, double variance,
                            std::span<const double> breakpoints, int order);

}  // namespace lawsde::quadrature
