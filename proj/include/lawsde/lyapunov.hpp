#pragma once

#include "lawsde/coefficients.hpp"
#include "lawsde/measure.hpp"
#include "lawsde/solver.hpp"
#include "lawsde/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lawsde {

/// V(t, y) >= 0 with gradient and Hessian in y.
///
/// Polynomial and exponential entries follow their closed forms for |y| >= 1
/// and a quadratic in s = |y|^2 inside the unit ball, matched to second order
/// at s = 1.
class LyapunovFunction {
 public:
  enum class Kind { kQuadratic, kPolynomial, kExponential, kCustom };

  using ValueMap = std::function<double(double, std::span<const double>)>;
  using GradientMap = std::function<Vector(double, std::span<const double>)>;
  using HessianMap = std::function<Matrix(double, std::span<const double>)>;

  /// 1 + |y|^2.
  static LyapunovFunction quadratic();
  /// 1 + |y|^alpha for |y| >= 1; alpha > 0.
  static LyapunovFunction polynomial(double alpha);
  /// exp(alpha |y|^p) for |y| >= 1; alpha > 0, p in (0, 2].
  static LyapunovFunction exponential(double alpha, double p);
  static LyapunovFunction custom(ValueMap value, GradientMap gradient, HessianMap hessian,
                                 ValueMap time_derivative = {}, std::string name = "custom");

  double value(double t, std::span<const double> y) const;
  Vector gradient(double t, std::span<const double> y) const;
  Matrix hessian(double t, std::span<const double> y) const;
  /// Zero unless a time derivative was supplied.
  double time_derivative(double t, std::span<const double> y) const;

  LyapunovFunction scaled(double lambda) const;

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double p() const { return p_; }
  const std::string& name() const { return name_; }

 private:
  // Radial profile G(s), s = |y|^2, with its first two derivatives.
  struct Profile {
    double g, g1, g2;
  };
  Profile profile(double s) const;

  Kind kind_ = Kind::kQuadratic;
  double alpha_ = 2.0;
  double p_ = 2.0;
  double scale_ = 1.0;
  Profile at_one_{};
  ValueMap value_;
  GradientMap gradient_;
  HessianMap hessian_;
  ValueMap time_derivative_;
  std::string name_ = "quadratic";
};

struct LyapunovCertificate {
  LyapunovFunction V = LyapunovFunction::quadratic();
  double C = 1.0;
  /// phi_t; defaults to the constant 1.
  std::function<double(double, std::span<const double>)> phi;
  /// eta(t, y); defaults to the constant 1.
  std::function<double(double, std::span<const double>)> eta;
  /// psi(t, path); informational, not checked.
  std::function<double(double, const PathView&)> psi_path;
  /// Modulus g; the identity unless replaced.
  std::function<double(double)> g = [](double u) { return u; };

  double phi_at(double t, std::span<const double> y) const { return phi ? phi(t, y) : 1.0; }
  double eta_at(double t, std::span<const double> y) const { return eta ? eta(t, y) : 1.0; }

  /// phi = 1 + |y|^{alpha/2}, eta = 1 + |y|^{alpha/4}, V polynomial(alpha).
  static LyapunovCertificate power_family(double alpha, double C);
  /// phi = exp(alpha/2 |y|^p), eta = exp(alpha/4 |y|^p), V exponential(alpha, p).
  static LyapunovCertificate exponential_family(double alpha, double p, double C);
};

using PointDrift = std::function<Vector(const SamplePoint&)>;
using PointDispersion = std::function<Matrix(const SamplePoint&)>;

/// Worst of dV/dt + <grad V, b> + tr(sigma^T D2V sigma)/2 - C V over the
/// samples (evaluated at x). Passes iff worst <= 0, or < 0 when `strict`.
Margin generator_margin(const LyapunovCertificate& cert, const PointDrift& b, const PointDispersion& sigma,
                        const SampleDomain& samples, bool strict = false);

/// Same with b(t,x,y) and sigma(t,x,y) from a pairwise spec.
Margin generator_margin(const LyapunovCertificate& cert, const PairwiseMeanFieldSpec& spec,
                        const SampleDomain& samples, bool strict = false);

struct MonitorPoint {
  double t = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool flagged = false;
};

struct MonitorReport {
  double initial_mean = 0.0;
  double C = 0.0;
  double slack_coefficient = 1.0;
  std::vector<MonitorPoint> series;
  /// Time of the first flag, if any.
  std::optional<double> first_flag;
  bool pass() const { return !first_flag.has_value(); }
};

/// Per-step empirical mean of V(X_t) against e^{Ct} E V(xi_0).
/// A step is flagged when mean - 3 SE exceeds bound * (1 + slack_coefficient * dt).
MonitorReport monitor_expectation(const ParticleEnsemble& ensemble, const LyapunovCertificate& cert,
                                  double slack_coefficient = 1.0);

struct ConditionsReport {
  double C = 0.0;
  /// Generator bound L V <= C V with the delayed drift.
  Margin generator;
  /// |beta_tilde(t, s, x, y)| <= C phi_{t+s}(y) eta_{t+s}(x).
  Margin interaction;
  /// eta^4 + phi^2 <= C V.
  Margin domination;
  /// Empirical E V(xi_0) and whether it is finite.
  double initial_mean_V = 0.0;
  bool initial_finite = false;
  bool pass = false;
};

/// Sampled check of the delayed-drift conditions: generator bound, interaction
/// growth, weight domination and a finite initial moment of V.
///
/// Paths are represented by their current point (constant paths); s ranges
/// over the atoms of kappa. Domination is scanned over the x points of `samples`.
ConditionsReport check_delayed_conditions(const DelayedInteractionDrift& interaction, const DispersionSpec& sigma,
                                          const LyapunovCertificate& cert, const SampleDomain& samples,
                                          const DiscreteSignedMeasure& initial_sample);

/// Delayed-interaction view of a pairwise spec with sigma independent of y:
/// beta_tilde(t, 0, x, y) = sigma^+ b(t, x, y) and kappa = delta_0.
DelayedCoefficients delayed_from_pairwise(const PairwiseMeanFieldSpec& spec);

}  // namespace lawsde
