#pragma once

#include "lawsde/coefficients.hpp"
#include "lawsde/measure.hpp"
#include "lawsde/solver.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace lawsde {

/// M_k = exp(sum_{j<k} b_j . dW_j - 1/2 sum_{j<k} |b_j|^2 dt) on steps 0..K.
struct LikelihoodPath {
  std::vector<double> log_m;
  std::vector<double> m;
  /// Running sum of b_j . dW_j.
  std::vector<double> stochastic_integral;
  /// Running sum of |b_j|^2 dt.
  std::vector<double> quadratic;
};

/// `b_tilde` and `dW` hold K x d1 values, step-major. Throws EvaluationError
/// naming the step if M overflows.
LikelihoodPath stochastic_exponential(std::span<const double> b_tilde, std::span<const double> dW, int d1,
                                      double dt);

struct MartingalePoint {
  double t = 0.0;
  double mean = 0.0;
  double se = 0.0;
};

struct MartingaleReport {
  std::vector<MartingalePoint> series;
  double mean_final = 0.0;
  double se_final = 0.0;
  bool pass = false;  // |mean M_T - 1| <= 3 SE
};

/// Monte Carlo of M_T for the constant integrand c over `paths` Brownian
/// paths drawn from the Girsanov stream of `seed`. The series keeps every
/// `time_stride`-th step.
MartingaleReport martingale_check(const Vector& c, std::size_t paths, double dt, double horizon, std::uint64_t seed,
                                  std::size_t time_stride = 1);

void write_martingale_csv(std::ostream& os, const MartingaleReport& report);

/// b_tilde_j(s, x) along a path at slice k, with the law already fixed.
using PathDrift = std::function<Vector(std::size_t, const PathView&)>;

struct RhsEstimate {
  double t = 0.0;
  double value = 0.0;
  double se = 0.0;
  /// Per ensemble: E[phi(X_t) int |db|^2] and sqrt(E phi^2) sqrt(E int |db|^2).
  double weighted_term[2] = {0.0, 0.0};
  double product_term[2] = {0.0, 0.0};
};

/// Empirical right-hand side of the weighted-TV stability inequality at each
/// time in `times` (all on the ensembles' grid).
std::vector<RhsEstimate> tv_stability_rhs(const ParticleEnsemble& e1, const ParticleEnsemble& e2,
                                          const PathDrift& b1, const PathDrift& b2, const WeightFunction& phi,
                                          const std::vector<double>& times);

double tv_stability_rhs(const ParticleEnsemble& e1, const ParticleEnsemble& e2, const PathDrift& b1,
                        const PathDrift& b2, const WeightFunction& phi, double t);

struct StabilityPoint {
  double t = 0.0;
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  double binning_slack = 0.0;
  double slack = 0.0;
  bool pass = false;
};

struct StabilityConfig {
  SimConfig sim;
  /// Seed of the second ensemble; the first uses sim.seed.
  std::uint64_t seed2 = 1;
  double cell_width = 0.05;
  std::vector<double> times{0.25, 0.5, 1.0};
};

struct StabilityReport {
  std::vector<StabilityPoint> points;
  double cell_width = 0.0;
  std::size_t particles = 0;
  bool pass = false;
};

/// Simulates both coefficient sets from `init` and compares the binned
/// weighted TV of their laws with the right-hand side at every time.
/// Throws InvalidArgument if the two dispersions differ on the probe set.
StabilityReport tv_stability_check(const CoefficientSet& c1, const CoefficientSet& c2, const InitialLaw& init,
                                   const StabilityConfig& cfg, const WeightFunction& phi);

/// Same on ensembles that were already simulated.
StabilityReport tv_stability_check(const CoefficientSet& c1, const ParticleEnsemble& e1, const CoefficientSet& c2,
                                   const ParticleEnsemble& e2, const StabilityConfig& cfg,
                                   const WeightFunction& phi);

/// Exact equality of the two dispersions on a fixed probe set.
bool same_dispersion(const CoefficientSet& c1, const CoefficientSet& c2, double horizon);

/// b_tilde of `coeffs` against the law stored in `law_source`.
PathDrift drift_along(const CoefficientSet& coeffs, const ParticleEnsemble& law_source);

void write_stability_csv(std::ostream& os, const StabilityReport& report);

}  // namespace lawsde
