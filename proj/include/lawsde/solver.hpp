#pragma once

#include "lawsde/coefficients.hpp"
#include "lawsde/measure.hpp"
#include "lawsde/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lawsde {

/// Law of the initial segment on [-tau, 0].
class InitialLaw {
 public:
  enum class Kind { kPoint, kMixture, kTable };

  /// Every particle starts on the constant path at `point`.
  static InitialLaw point(Vector point);
  /// Constant path at a value drawn from N(mean, sd^2 I).
  static InitialLaw gaussian(Vector mean, double sd);
  /// Constant path at a value drawn from the mixture sum_k w_k N(m_k, s_k^2 I).
  static InitialLaw mixture(std::vector<double> weights, std::vector<Vector> means, std::vector<double> sds);
  /// User table: one row per particle, either `dim` entries (constant path)
  /// or (history_steps + 1) * dim entries listing the path on the delay grid.
  static InitialLaw table(int dim, std::vector<std::vector<double>> rows);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  std::string descriptor() const;

  /// Writes slices * dim values: the path of `particle` on the delay grid.
  void sample(std::uint64_t seed, std::size_t particle, std::size_t slices, std::span<double> out) const;

  /// Mixture description; a point law is one component with sd 0.
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<double>& sds() const { return sds_; }
  std::size_t table_rows() const { return rows_.size(); }

 private:
  Kind kind_ = Kind::kPoint;
  int dim_ = 1;
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<double> sds_;
  std::vector<std::vector<double>> rows_;
};

struct SimConfig {
  enum class Estimator { kAtoms, kGrid };

  std::size_t particles = 1000;
  double dt = 1e-3;
  double horizon = 1.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::kAtoms;
  double cell_width = 0.05;

  std::size_t steps() const;
  /// Throws InvalidArgument on violated invariants; returns warnings.
  std::vector<std::string> validate() const;
};

struct NoiseProvenance {
  std::uint64_t seed = 0;
  Stream dynamics = Stream::kDynamics;
  Stream initial = Stream::kInitial;
};

/// Simulated paths on [-tau, T]. The stored flow is the empirical measure
/// of the positions at every slice.
struct ParticleEnsemble {
  SimConfig config;
  int dim = 1;
  int noise_dim = 1;
  MeasureFlow flow;
  NoiseProvenance noise;
  std::string coefficients;
  std::string initial_law;

  std::size_t particles() const { return config.particles; }
  std::size_t slices() const { return flow.size(); }
  /// Slice index of t = 0.
  std::size_t start_index() const { return flow.history_steps(); }
  double time(std::size_t k) const { return flow.time(k); }
  std::span<const double> position(std::size_t k, std::size_t particle) const {
    return flow.slice(k).position(particle);
  }
};

/// Raised when the state leaves the finite range.
class SimulationError : public EvaluationError {
 public:
  SimulationError(std::size_t particle, std::size_t step, const std::string& what);
  std::size_t particle() const { return particle_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t particle_;
  std::size_t step_;
};

/// One synchronous Euler-Maruyama step from slice `current` of `flow`.
/// `noise` holds N x d1 standard normals, particle-major. The result is the
/// next slice's flat positions; it depends only on the inputs.
std::vector<double> step(const CoefficientSet& coeffs, const MeasureFlow& flow, std::size_t current,
                         double dt, std::span<const double> noise);

ParticleEnsemble simulate(const CoefficientSet& coeffs, const InitialLaw& init, const SimConfig& cfg);

struct IntegrabilityReport {
  std::vector<double> drift_integral;       // per particle, sum |b| dt
  std::vector<double> dispersion_integral;  // per particle, sum |sigma|_F^2 dt
  double max_drift = 0.0;
  double max_dispersion = 0.0;
  std::vector<std::size_t> flagged;
  double threshold = 0.0;
};

IntegrabilityReport integrability_report(const ParticleEnsemble& ensemble, const CoefficientSet& coeffs,
                                         double threshold = 1e12);

struct MomentPoint {
  double t = 0.0;
  Vector mean;
  Vector variance;     // per component, divisor N - 1
  Vector variance_se;  // sqrt((m4 - m2^2) / N) per component
};

std::vector<MomentPoint> moment_series(const ParticleEnsemble& ensemble);

/// CSV with columns t, particle, x0.. for every `time_stride`-th slice and
/// every `particle_stride`-th particle.
void write_trajectory_csv(std::ostream& os, const ParticleEnsemble& ensemble, std::size_t particle_stride = 1,
                          std::size_t time_stride = 1);

}  // namespace lawsde
