#pragma once

#include "lawsde/measure.hpp"
#include "lawsde/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace lawsde {

/// Read access to one particle's path on [-tau, t].
///
/// Either backed by a stored flow (particle history) or by a single point,
/// in which case the path is constant in time.
class PathView {
 public:
  PathView(const MeasureFlow& flow, std::size_t particle, std::size_t current);
  PathView(std::span<const double> point, double t);

  int dim() const { return dim_; }
  double time() const { return time_; }
  std::size_t current_index() const { return current_; }
  std::span<const double> current() const { return at_index(current_); }
  /// State at slice k <= current.
  std::span<const double> at_index(std::size_t k) const;
  /// State at the slice at or below t (t must not exceed the current time).
  std::span<const double> at_time(double t) const;
  Vector current_vector() const;

 private:
  const MeasureFlow* flow_ = nullptr;
  std::size_t particle_ = 0;
  std::size_t current_ = 0;
  double time_ = 0.0;
  int dim_ = 0;
  Vector point_;
};

/// Laws mu_s for s <= t. Slices after the current one are not reachable.
class LawView {
 public:
  LawView(const MeasureFlow& flow, std::size_t current) : flow_(&flow), current_(current) {}

  std::size_t current_index() const { return current_; }
  double time() const { return flow_->time(current_); }
  const DiscreteSignedMeasure& at_index(std::size_t k) const;
  const DiscreteSignedMeasure& at_time(double t) const { return at_index(index_at_time(t)); }
  const Vector& mean_at_index(std::size_t k) const;
  std::size_t index_at_time(double t) const;
  const MeasureFlow& flow() const { return *flow_; }

 private:
  const MeasureFlow* flow_;
  std::size_t current_;
};

/// sigma(t, x) with x the path up to t.
struct DispersionSpec {
  int dim = 1;
  int noise_dim = 1;
  std::function<Matrix(double, const PathView&)> map;
  bool adapted = true;
  std::string name = "custom";

  Matrix operator()(double t, const PathView& path) const;

  static DispersionSpec constant(Matrix value, std::string name = "constant");
  static DispersionSpec identity(int dim);
};

/// b = sigma * b_tilde with b_tilde(t, x, mu) in R^{d1}.
struct FactoredDriftSpec {
  std::function<Vector(double, const PathView&, const LawView&)> b_tilde;
  DispersionSpec dispersion;
  std::string name = "custom";

  Vector eval_b_tilde(double t, const PathView& path, const LawView& law) const;
  Vector drift(double t, const PathView& path, const LawView& law) const;
};

struct DelayAtom {
  double s = 0.0;  // in [-tau, 0]
  double weight = 1.0;
};

/// b_tilde(t,x,mu) = sum_s kappa({s}) * integral beta_tilde(t,s,x,y) mu_{t+s}(dy).
///
/// `separable` optionally lists terms with beta_tilde = sum_k left_k(t,s,x) * right_k(t,s,y);
/// evaluators then average right_k once per slice instead of per particle.
struct DelayedInteractionDrift {
  struct Term {
    std::function<Matrix(double, double, const PathView&)> left;  // d1 x m
    std::function<Vector(double, double, std::span<const double>)> right;  // m
  };

  int dim = 1;
  int noise_dim = 1;
  std::function<Vector(double, double, const PathView&, std::span<const double>)> beta_tilde;
  std::vector<DelayAtom> kappa{{0.0, 1.0}};
  double tau = 0.0;
  std::vector<Term> separable;
  std::string name = "custom";

  /// Throws InvalidArgument unless kappa is a probability measure on [-tau, 0].
  void validate() const;
};

/// Pairwise mean-field form: drift E~ b(t, x, X~), dispersion E~ sigma(t, x, X~).
struct PairwiseMeanFieldSpec {
  struct DriftTerm {
    std::function<Matrix(double, std::span<const double>)> left;   // d x m
    std::function<Vector(double, std::span<const double>)> right;  // m
  };
  struct DispersionTerm {
    std::function<Matrix(double, std::span<const double>)> left;   // d x d1
    std::function<double(double, std::span<const double>)> right;
  };

  int dim = 1;
  int noise_dim = 1;
  std::function<Vector(double, std::span<const double>, std::span<const double>)> b;
  std::function<Matrix(double, std::span<const double>, std::span<const double>)> sigma;
  /// Optional b_tilde with b = sigma b_tilde; otherwise recovered by pseudo-inverse.
  std::function<Vector(double, std::span<const double>, std::span<const double>)> b_tilde;
  std::vector<DriftTerm> separable_b;
  std::vector<DispersionTerm> separable_sigma;
  bool sigma_depends_on_y = true;
  std::string name = "custom";

  Vector drift(double t, std::span<const double> x, std::span<const double> y) const;
  Matrix dispersion(double t, std::span<const double> x, std::span<const double> y) const;
  Vector drift_tilde(double t, std::span<const double> x, std::span<const double> y) const;
};

struct DelayedCoefficients {
  DelayedInteractionDrift drift;
  DispersionSpec dispersion;
};

using CoefficientSet = std::variant<FactoredDriftSpec, DelayedCoefficients, PairwiseMeanFieldSpec>;

/// Moore-Penrose pseudo-inverse; zero for the zero matrix.
Matrix pseudo_inverse(const Matrix& m);

int state_dim(const CoefficientSet& c);
int noise_dim(const CoefficientSet& c);
double required_delay(const CoefficientSet& c);
std::string coefficient_name(const CoefficientSet& c);

/// Direct evaluation of the delayed interaction drift (brute-force over atoms).
Vector eval_drift_interaction(const DelayedInteractionDrift& spec, const DispersionSpec& sigma,
                              double t, const PathView& path, const LawView& law);

struct MeanFieldValue {
  Vector drift;
  Matrix dispersion;
};

/// Arithmetic means of b(t,x,y_j) and sigma(t,x,y_j) over the ensemble atoms
/// (weighted by atom weights).
MeanFieldValue eval_pairwise_mean_field(const PairwiseMeanFieldSpec& spec, double t,
                                        std::span<const double> x, const DiscreteSignedMeasure& ensemble);

/// Effective drift and dispersion of every particle at one slice.
///
/// Separable terms are averaged once at construction; the per-particle call
/// then costs O(1) instead of O(N).
class StepEvaluator {
 public:
  StepEvaluator(const CoefficientSet& coeffs, const MeasureFlow& flow, std::size_t current);

  MeanFieldValue operator()(std::size_t particle) const;
  /// Same evaluation for an arbitrary path on the flow's time grid, e.g. a
  /// particle of another ensemble.
  MeanFieldValue at(const PathView& path) const;
  /// b_tilde with b = sigma b_tilde; pairwise specs use the pseudo-inverse.
  Vector drift_tilde(const PathView& path) const;
  double time() const { return time_; }

 private:
  const CoefficientSet* coeffs_;
  const MeasureFlow* flow_;
  std::size_t current_;
  double time_;
  // Per-term averages of the right factors.
  std::vector<Vector> b_means_;
  std::vector<double> sigma_means_;
  std::vector<std::vector<Vector>> delay_means_;  // [kappa atom][term]
};

/// Express a pairwise spec whose sigma does not depend on y in factored form:
/// b_tilde(t, x, mu) = sigma(t, x)^+ E~ b(t, x, Y).
FactoredDriftSpec factored_from_pairwise(const PairwiseMeanFieldSpec& spec);

// ------------------------------------------------------------- checkers

struct SamplePoint {
  double t = 0.0;
  Vector x;
  Vector y;
};

/// Tensor product of times x states x interaction points, enumerated in
/// lexicographic (t, x, y) order.
struct SampleDomain {
  std::vector<double> times{0.0};
  std::vector<Vector> x_points;
  std::vector<Vector> y_points;

  std::size_t size() const { return times.size() * x_points.size() * std::max<std::size_t>(y_points.size(), 1); }
  SamplePoint at(std::size_t index) const;

  /// Regular grid over [lo, hi]^dim with the given step, shared by x and y.
  static SampleDomain grid(int dim, double lo, double hi, double step, std::vector<double> times = {0.0});
  static std::vector<Vector> grid_points(int dim, double lo, double hi, double step);
};

struct Margin {
  std::string name;
  double worst = 0.0;
  std::size_t argmax_index = 0;
  SamplePoint argmax;
  bool strict = false;
  bool pass = false;
};

struct MarginReport {
  double constant = 0.0;
  std::size_t samples = 0;
  std::vector<Margin> margins;
  /// Informational margins that do not enter the verdict.
  std::vector<Margin> extra;
  bool pass = false;

  const Margin& margin(const std::string& name) const;
};

/// Worst (largest) value of f over [0, n) with lowest-index tie breaking.
/// Deterministic for any thread count.
std::pair<double, std::size_t> scan_max(std::size_t n, const std::function<double(std::size_t)>& f);

/// Sampled margins for polynomial weights of order alpha:
///   generator  |x|^2 (2 <x, b> + |sigma|^2) + (alpha - 2) |sigma^T x|^2 - C (1 + |x|^4)
///   growth     |b_tilde| - C (1 + |y|^{alpha/2}) (1 + |x|^{alpha/4})
/// Both decide the verdict; "existence_growth" (exponent q) is reported only.
MarginReport check_polynomial_growth(const PairwiseMeanFieldSpec& spec, double alpha, double q, double C,
                                     const SampleDomain& domain);
/// Same for exponential weights of order (alpha, p), p in [1, 2].
MarginReport check_exponential_growth(const PairwiseMeanFieldSpec& spec, double alpha, double p, double q,
                                      double C, const SampleDomain& domain);

struct NondegeneracyReport {
  double min_eigenvalue = 0.0;
  SamplePoint argmin;
  bool pass = false;
};

/// Smallest eigenvalue of sigma sigma^T over sampled (t, x, y) with |x|, |y| <= R.
NondegeneracyReport check_nondegeneracy(const PairwiseMeanFieldSpec& spec, double R,
                                        const std::vector<double>& times,
                                        const std::vector<Vector>& points);

/// Smallest C with check(C).pass, by bisection to relative tolerance `rel_tol`.
double smallest_passing_constant(const std::function<bool(double)>& passes, double rel_tol = 1e-6);

}  // namespace lawsde

namespace lawsde {

/// Worst sampled margin of |b|^q + |sigma|^q - V(x) V(y); passes iff all margins < 0.
MarginReport check_H_growth(const PairwiseMeanFieldSpec& spec,
                            const std::function<double(std::span<const double>)>& V, double q,
                            const SampleDomain& domain);

}  // namespace lawsde
