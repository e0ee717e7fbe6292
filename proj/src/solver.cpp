#include "lawsde/solver.hpp"

#include "lawsde/detail/format.hpp"
#include "lawsde/detail/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace lawsde {

// ---------------------------------------------------------------- initial law

InitialLaw InitialLaw::point(Vector p) {
  require(p.size() >= 1 && p.size() <= kMaxDim && p.allFinite(), "initial point must be finite in R^1..3");
  InitialLaw law;
  law.kind_ = Kind::kPoint;
  law.dim_ = static_cast<int>(p.size());
  law.weights_ = {1.0};
  law.means_ = {p};
  law.sds_ = {0.0};
  return law;
}

InitialLaw InitialLaw::gaussian(Vector mean, double sd) { return mixture({1.0}, {std::move(mean)}, {sd}); }

InitialLaw InitialLaw::mixture(std::vector<double> weights, std::vector<Vector> means, std::vector<double> sds) {
  require(!weights.empty() && weights.size() == means.size() && weights.size() == sds.size(),
          "mixture needs matching weights, means and sds");
  double total = 0.0;
  for (double w : weights) {
    require(w > 0.0, "mixture weights must be positive");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
  for (double s : sds) require(s >= 0.0 && std::isfinite(s), "mixture sds must be nonnegative");
  const auto d = means.front().size();
  require(d >= 1 && d <= kMaxDim, "mixture dimension must be in [1,3]");
  for (const auto& m : means) require(m.size() == d && m.allFinite(), "mixture means must share a finite dimension");
  InitialLaw law;
  law.kind_ = Kind::kMixture;
  law.dim_ = static_cast<int>(d);
  law.weights_ = std::move(weights);
  law.means_ = std::move(means);
  law.sds_ = std::move(sds);
  return law;
}

InitialLaw InitialLaw::table(int dim, std::vector<std::vector<double>> rows) {
  require(dim >= 1 && dim <= kMaxDim, "table dimension must be in [1,3]");
  require(!rows.empty(), "table needs at least one row");
  for (const auto& r : rows) {
    require(!r.empty() && r.size() % static_cast<std::size_t>(dim) == 0, "table row length must be a multiple of dim");
    for (double v : r) require(std::isfinite(v), "table entries must be finite");
  }
  InitialLaw law;
  law.kind_ = Kind::kTable;
  law.dim_ = dim;
  law.rows_ = std::move(rows);
  return law;
}

std::string InitialLaw::descriptor() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::kPoint:
      os << "point(";
      for (int a = 0; a < dim_; ++a) os << (a ? "," : "") << means_[0][a];
      os << ")";
      break;
    case Kind::kMixture:
      os << "mixture[";
      for (std::size_t k = 0; k < weights_.size(); ++k) {
        os << (k ? ";" : "") << weights_[k] << ":N(";
        for (int a = 0; a < dim_; ++a) os << (a ? "," : "") << means_[k][a];
        os << "," << sds_[k] << "^2)";
      }
      os << "]";
      break;
    case Kind::kTable:
      os << "table(" << rows_.size() << " rows)";
      break;
  }
  return os.str();
}

void InitialLaw::sample(std::uint64_t seed, std::size_t particle, std::size_t slices, std::span<double> out) const {
  const auto d = static_cast<std::size_t>(dim_);
  require(out.size() == slices * d, "initial path buffer has the wrong size");
  std::vector<double> value(d);
  switch (kind_) {
    case Kind::kPoint:
      for (std::size_t a = 0; a < d; ++a) value[a] = means_[0][static_cast<Eigen::Index>(a)];
      break;
    case Kind::kMixture: {
      const GaussianStream stream(seed, Stream::kInitial);
      double u = 0.0;
      stream.fill_uniform(particle, 0, std::span(&u, 1));
      std::size_t k = 0;
      double acc = weights_[0];
      while (k + 1 < weights_.size() && u > acc) acc += weights_[++k];
      std::vector<double> z(d);
      stream.fill(particle, 1, z);
      for (std::size_t a = 0; a < d; ++a) value[a] = means_[k][static_cast<Eigen::Index>(a)] + sds_[k] * z[a];
      break;
    }
    case Kind::kTable: {
      require(particle < rows_.size(), "initial table has fewer rows than particles");
      const auto& row = rows_[particle];
      if (row.size() == d) {
        value.assign(row.begin(), row.end());
      } else {
        require(row.size() == slices * d, "table row does not cover the delay grid");
        std::copy(row.begin(), row.end(), out.begin());
        return;
      }
      break;
    }
  }
  for (std::size_t k = 0; k < slices; ++k) std::copy(value.begin(), value.end(), out.begin() + k * d);
}

// ---------------------------------------------------------------- config

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

std::vector<std::string> SimConfig::validate() const {
  require(particles >= 1, "N must be at least 1");
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(horizon > 0.0 && std::isfinite(horizon), "T must be positive");
  require(tau >= 0.0 && std::isfinite(tau), "tau must be nonnegative");
  const double ratio = horizon / dt;
  require(std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio), "T/dt must be an integer");
  if (estimator == Estimator::kGrid) require(cell_width > 0.0, "estimator.cell_width must be positive");
  std::vector<std::string> warnings;
  const double hist = tau / dt;
  if (std::abs(hist - std::round(hist)) > 1e-9 * std::max(1.0, hist)) {
    warnings.push_back("tau is not a multiple of dt; delayed slices use the grid point at or below t+s");
  }
  return warnings;
}

// ---------------------------------------------------------------- stepping

SimulationError::SimulationError(std::size_t particle, std::size_t step, const std::string& what)
    : EvaluationError(what), particle_(particle), step_(step) {}

std::vector<double> step(const CoefficientSet& coeffs, const MeasureFlow& flow, std::size_t current, double dt,
                         std::span<const double> noise) {
  const DiscreteSignedMeasure& slice = flow.slice(current);
  const std::size_t n = slice.size();
  const int d = slice.dim();
  const int d1 = noise_dim(coeffs);
  if (state_dim(coeffs) != d) throw InvalidArgument("coefficient and state dimensions differ");
  if (noise.size() != n * static_cast<std::size_t>(d1)) {
    throw InvalidArgument("noise slab has " + std::to_string(noise.size()) + " entries, expected " +
                          std::to_string(n * static_cast<std::size_t>(d1)));
  }
  const StepEvaluator eval(coeffs, flow, current);
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> next(n * static_cast<std::size_t>(d));
  detail::parallel_for(n, [&](std::size_t i) {
    const MeanFieldValue c = eval(i);
    const auto x = slice.position(i);
    const Eigen::Map<const Eigen::VectorXd> xi(noise.data() + i * d1, d1);
    const Vector incr = c.drift * dt + c.dispersion * xi * sqrt_dt;
    for (int a = 0; a < d; ++a) {
      const double v = x[a] + incr[a];
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite state for particle " << i << " at step " << current << " (t=" << flow.time(current) << ")";
        throw SimulationError(i, current, os.str());
      }
      next[i * d + a] = v;
    }
  });
  return next;
}

ParticleEnsemble simulate(const CoefficientSet& coeffs, const InitialLaw& init, const SimConfig& cfg) {
  cfg.validate();
  const int d = init.dim();
  require(state_dim(coeffs) == d, "initial law and coefficients have different dimensions");
  if (const auto* dl = std::get_if<DelayedCoefficients>(&coeffs)) {
    dl->drift.validate();
    require(std::abs(dl->drift.tau - cfg.tau) <= 1e-12, "delayed drift tau must match the configured tau");
  }
  if (init.kind() == InitialLaw::Kind::kTable)
    require(init.table_rows() == cfg.particles, "initial table must have one row per particle");

  ParticleEnsemble ens;
  ens.config = cfg;
  ens.dim = d;
  ens.noise_dim = noise_dim(coeffs);
  ens.flow = MeasureFlow(cfg.tau, cfg.horizon, cfg.dt);
  ens.noise.seed = cfg.seed;
  ens.coefficients = coefficient_name(coeffs);
  ens.initial_law = init.descriptor();

  const std::size_t n = cfg.particles;
  const std::size_t hist = ens.flow.history_steps() + 1;
  const auto du = static_cast<std::size_t>(d);
  const double w = 1.0 / static_cast<double>(n);
  {
    std::vector<double> paths(n * hist * du);
    detail::parallel_for(n, [&](std::size_t i) {
      init.sample(cfg.seed, i, hist, std::span(paths.data() + i * hist * du, hist * du));
    });
    for (std::size_t k = 0; k < hist; ++k) {
      std::vector<double> slice(n * du);
      for (std::size_t i = 0; i < n; ++i)
        std::copy_n(paths.begin() + static_cast<std::ptrdiff_t>((i * hist + k) * du), du,
                    slice.begin() + static_cast<std::ptrdiff_t>(i * du));
      ens.flow.push_back(DiscreteSignedMeasure::uniform(d, std::move(slice), w));
    }
  }

  const GaussianStream noise(cfg.seed, Stream::kDynamics);
  const auto d1 = static_cast<std::size_t>(ens.noise_dim);
  std::vector<double> slab(n * d1);
  const std::size_t steps = cfg.steps();
  for (std::size_t k = 0; k < steps; ++k) {
    detail::parallel_for(n, [&](std::size_t i) { noise.fill(i, k, std::span(slab.data() + i * d1, d1)); });
    const std::size_t current = ens.flow.size() - 1;
    std::vector<double> next;
    try {
      next = step(coeffs, ens.flow, current, cfg.dt, slab);
    } catch (const SimulationError& e) {
      throw SimulationError(e.particle(), k,
                            "simulation aborted: particle " + std::to_string(e.particle()) +
                                " became non-finite at step " + std::to_string(k + 1));
    }
    ens.flow.push_back(DiscreteSignedMeasure::uniform(d, std::move(next), w));
  }
  return ens;
}

// ---------------------------------------------------------------- reports

IntegrabilityReport integrability_report(const ParticleEnsemble& ensemble, const CoefficientSet& coeffs,
                                         double threshold) {
  const std::size_t n = ensemble.particles();
  IntegrabilityReport r;
  r.threshold = threshold;
  r.drift_integral.assign(n, 0.0);
  r.dispersion_integral.assign(n, 0.0);
  const double dt = ensemble.config.dt;
  for (std::size_t k = ensemble.start_index(); k + 1 < ensemble.slices(); ++k) {
    const StepEvaluator eval(coeffs, ensemble.flow, k);
    detail::parallel_for(n, [&](std::size_t i) {
      const MeanFieldValue c = eval(i);
      r.drift_integral[i] += c.drift.norm() * dt;
      r.dispersion_integral[i] += c.dispersion.squaredNorm() * dt;
    });
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double b = r.drift_integral[i], s = r.dispersion_integral[i];
    r.max_drift = std::max(r.max_drift, std::isfinite(b) ? b : INFINITY);
    r.max_dispersion = std::max(r.max_dispersion, std::isfinite(s) ? s : INFINITY);
    if (!std::isfinite(b) || !std::isfinite(s) || b > threshold || s > threshold) r.flagged.push_back(i);
  }
  return r;
}

std::vector<MomentPoint> moment_series(const ParticleEnsemble& ensemble) {
  std::vector<MomentPoint> out;
  const std::size_t n = ensemble.particles();
  for (std::size_t k = 0; k < ensemble.slices(); ++k) {
    const auto& slice = ensemble.flow.slice(k);
    MomentPoint m;
    m.t = ensemble.time(k);
    m.mean = ensemble.flow.mean(k);
    m.variance = Vector::Zero(ensemble.dim);
    Vector m2 = Vector::Zero(ensemble.dim);
    Vector m4 = Vector::Zero(ensemble.dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = slice.position(i);
      for (int a = 0; a < ensemble.dim; ++a) {
        const double c = x[a] - m.mean[a];
        m2[a] += c * c;
        m4[a] += c * c * c * c;
      }
    }
    const auto nd = static_cast<double>(n);
    m.variance = n > 1 ? Vector(m2 / (nd - 1.0)) : Vector(m2);
    m2 /= nd;
    m4 /= nd;
    m.variance_se = Vector::Zero(ensemble.dim);
    for (int a = 0; a < ensemble.dim; ++a) m.variance_se[a] = std::sqrt(std::max(0.0, m4[a] - m2[a] * m2[a]) / nd);
    out.push_back(std::move(m));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const ParticleEnsemble& ensemble, std::size_t particle_stride,
                          std::size_t time_stride) {
  require(particle_stride >= 1 && time_stride >= 1, "strides must be positive");
  std::string line = "t,particle";
  for (int a = 0; a < ensemble.dim; ++a) line += ",x" + std::to_string(a);
  os << line << '\n';
  for (std::size_t k = 0; k < ensemble.slices(); k += time_stride) {
    const auto& slice = ensemble.flow.slice(k);
    for (std::size_t i = 0; i < ensemble.particles(); i += particle_stride) {
      line.clear();
      detail::append_number(line, ensemble.time(k));
      line += ',';
      line += std::to_string(i);
      for (double v : slice.position(i)) {
        line += ',';
        detail::append_number(line, v);
      }
      line += '\n';
      os << line;
    }
  }
}

}  // namespace lawsde
