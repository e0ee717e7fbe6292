#pragma once

#include "lawsde/coefficients.hpp"
#include "lawsde/solver.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace lawsde {

/// dX = E h(X_t) dt + dW on R with X_0 ~ mu0, a Gaussian mixture.
struct ScalarLawProblem {
  std::function<double(double)> h;
  /// Points where h may jump; empty for continuous h.
  std::vector<double> breakpoints;
  /// |h(x)| <= growth_C exp(x^2 / (2 growth_T)); growth_T may be infinite.
  double growth_C = 1.0;
  double growth_T = std::numeric_limits<double>::infinity();
  std::vector<double> weights{1.0};
  std::vector<double> means{0.0};
  std::vector<double> sds{0.0};
  double horizon = 1.0;
  std::string name = "custom";

  /// Throws InvalidArgument on a malformed mixture or horizon >= growth_T.
  void validate() const;
  double initial_mean() const;

  /// Catalog of h: "zero", "constant" (value c), "identity", "sign",
  /// "gaussian-growth" (exp(x^2 / (2 T)) with T = c).
  static ScalarLawProblem with_h(const std::string& name, double c = 1.0);
};

struct PhiOptions {
  int order = 64;
  double tolerance = 1e-8;
  int max_order = 1024;
};

/// phi_h(t, x) = E h(x0 + x + W_t), x0 ~ mu0. Each mixture component
/// contributes E h(N(m_k + x, s_k^2 + t)).
double phi_h(const ScalarLawProblem& problem, double t, double x, const PhiOptions& options = {});

/// Same integral in the shifted form E h(x0 + w), w ~ N(x, t), evaluated
/// component by component with the nested quadrature over x0.
double phi_h_shifted(const ScalarLawProblem& problem, double t, double x, int order = 64);

struct GPath {
  std::vector<double> t;
  std::vector<double> g;
  bool bootstrapped = false;
};

/// RK4 for g' = phi_h(t, g), g(0) = 0 on [0, horizon].
GPath solve_g(const ScalarLawProblem& problem, double dt, const PhiOptions& options = {});

struct OraclePoint {
  double t = 0.0;
  double g = 0.0;
  double expected = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double error = 0.0;
};

struct OracleReport {
  std::vector<OraclePoint> series;
  double sup_error = 0.0;
  double max_se = 0.0;
  double tolerance = 0.0;
  double slack_coefficient = 1.0;
  bool pass = false;
};

/// sup_t |empirical mean - (mean mu0 + g(t))| against 3 max SE + slack_coefficient * dt.
OracleReport oracle_compare(const ScalarLawProblem& problem, const ParticleEnsemble& ensemble,
                            double slack_coefficient = 1.0, const PhiOptions& options = {});
OracleReport oracle_compare(const ScalarLawProblem& problem, const ParticleEnsemble& ensemble, const GPath& g,
                            double slack_coefficient = 1.0);

/// Pairwise spec b(t, x, y) = h(y), sigma = 1, with a separable drift.
PairwiseMeanFieldSpec oracle_coefficients(const ScalarLawProblem& problem);
InitialLaw oracle_initial_law(const ScalarLawProblem& problem);

void write_oracle_csv(std::ostream& os, const OracleReport& report);

}  // namespace lawsde
