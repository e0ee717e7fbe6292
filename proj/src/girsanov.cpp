#include "lawsde/girsanov.hpp"

#include "lawsde/detail/format.hpp"
#include "lawsde/detail/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>

namespace lawsde {

LikelihoodPath stochastic_exponential(std::span<const double> b_tilde, std::span<const double> dW, int d1,
                                      double dt) {
  require(d1 >= 1, "noise dimension must be positive");
  require(b_tilde.size() == dW.size() && b_tilde.size() % static_cast<std::size_t>(d1) == 0,
          "integrand and increments must have K x d1 entries");
  const std::size_t steps = b_tilde.size() / static_cast<std::size_t>(d1);
  LikelihoodPath path;
  path.log_m.assign(steps + 1, 0.0);
  path.m.assign(steps + 1, 1.0);
  path.stochastic_integral.assign(steps + 1, 0.0);
  path.quadratic.assign(steps + 1, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    double ito = 0.0, sq = 0.0;
    for (int a = 0; a < d1; ++a) {
      const double b = b_tilde[k * d1 + a];
      ito += b * dW[k * d1 + a];
      sq += b * b;
    }
    path.stochastic_integral[k + 1] = path.stochastic_integral[k] + ito;
    path.quadratic[k + 1] = path.quadratic[k] + sq * dt;
    path.log_m[k + 1] = path.stochastic_integral[k + 1] - 0.5 * path.quadratic[k + 1];
    path.m[k + 1] = std::exp(path.log_m[k + 1]);
    if (!std::isfinite(path.m[k + 1]) || path.m[k + 1] <= 0.0) {
      throw EvaluationError("likelihood process leaves (0, inf) at step " + std::to_string(k + 1) +
                            " (log M = " + detail::format_number(path.log_m[k + 1]) + ")");
    }
  }
  return path;
}

MartingaleReport martingale_check(const Vector& c, std::size_t paths, double dt, double horizon, std::uint64_t seed,
                                  std::size_t time_stride) {
  require(paths >= 2, "martingale check needs at least two paths");
  require(dt > 0.0 && horizon > 0.0, "dt and T must be positive");
  require(time_stride >= 1, "time stride must be positive");
  require(c.size() >= 1 && c.size() <= kMaxDim, "integrand dimension must be in [1,3]");
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  const auto d1 = static_cast<std::size_t>(c.size());
  const double drift = 0.5 * c.squaredNorm() * dt;
  const double sqrt_dt = std::sqrt(dt);
  const GaussianStream stream(seed, Stream::kGirsanov);
  std::vector<double> log_m(paths, 0.0);

  MartingaleReport report;
  const auto record = [&](std::size_t k) {
    double sum = 0.0;
    for (double l : log_m) sum += std::exp(l);
    const double mean = sum / static_cast<double>(paths);
    double ss = 0.0;
    for (double l : log_m) {
      const double e = std::exp(l) - mean;
      ss += e * e;
    }
    const double se = std::sqrt(ss / static_cast<double>(paths - 1) / static_cast<double>(paths));
    if (!std::isfinite(mean)) throw EvaluationError("likelihood mean overflows at step " + std::to_string(k));
    report.series.push_back({static_cast<double>(k) * dt, mean, se});
  };
  record(0);
  for (std::size_t k = 0; k < steps; ++k) {
    detail::parallel_for(paths, [&](std::size_t p) {
      double z[kMaxDim];
      stream.fill(p, k, std::span(z, d1));
      double ito = 0.0;
      for (std::size_t a = 0; a < d1; ++a) ito += c[static_cast<Eigen::Index>(a)] * z[a] * sqrt_dt;
      log_m[p] += ito - drift;
    });
    if ((k + 1) % time_stride == 0 || k + 1 == steps) record(k + 1);
  }
  report.mean_final = report.series.back().mean;
  report.se_final = report.series.back().se;
  report.pass = std::abs(report.mean_final - 1.0) <= 3.0 * report.se_final;
  return report;
}

void write_martingale_csv(std::ostream& os, const MartingaleReport& report) {
  std::string line = "t,mean_M,se\n";
  for (const auto& p : report.series) {
    detail::append_number(line, p.t);
    line += ',';
    detail::append_number(line, p.mean);
    line += ',';
    detail::append_number(line, p.se);
    line += '\n';
  }
  os << line;
}

// ---------------------------------------------------------------- stability

namespace {

using DriftFactory = std::function<PathDrift(std::size_t)>;

std::size_t slice_for(const ParticleEnsemble& e, double t) {
  const double steps = t / e.config.dt;
  const auto k = static_cast<std::size_t>(std::llround(steps));
  require(t >= 0.0 && std::abs(steps - static_cast<double>(k)) <= 1e-9 * std::max(1.0, steps),
          "stability time must lie on the time grid");
  require(e.start_index() + k < e.slices(), "stability time exceeds the simulated horizon");
  return e.start_index() + k;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  MeanSe out;
  out.mean = sum / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

std::vector<RhsEstimate> rhs_series(const ParticleEnsemble& e1, const ParticleEnsemble& e2, const DriftFactory& f1,
                                    const DriftFactory& f2, const WeightFunction& phi,
                                    const std::vector<double>& times) {
  require(e1.slices() == e2.slices() && e1.config.dt == e2.config.dt && e1.start_index() == e2.start_index(),
          "ensembles must share the time grid");
  require(e1.dim == e2.dim, "ensembles must share the state dimension");
  const ParticleEnsemble* ens[2] = {&e1, &e2};
  std::vector<std::size_t> targets;
  for (double t : times) targets.push_back(slice_for(e1, t));
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return targets[a] < targets[b]; });

  std::vector<double> integral[2] = {std::vector<double>(e1.particles(), 0.0),
                                     std::vector<double>(e2.particles(), 0.0)};
  std::vector<RhsEstimate> out(times.size());
  const double dt = e1.config.dt;

  const auto snapshot = [&](std::size_t slot, std::size_t k) {
    RhsEstimate r;
    r.t = times[slot];
    for (int i = 0; i < 2; ++i) {
      const auto& e = *ens[i];
      const std::size_t n = e.particles();
      std::vector<double> w(n), w2(n);
      detail::parallel_for(n, [&](std::size_t p) {
        const double f = phi(e.position(k, p));
        w[p] = f * integral[i][p];
        w2[p] = f * f;
      });
      const MeanSe a = mean_se(w);
      const MeanSe m2 = mean_se(w2);
      const MeanSe mi = mean_se(integral[i]);
      r.weighted_term[i] = a.mean;
      r.product_term[i] = std::sqrt(m2.mean) * std::sqrt(mi.mean);
      double rel = 0.0;
      if (m2.mean > 0.0) rel += m2.se / m2.mean;
      if (mi.mean > 0.0) rel += mi.se / mi.mean;
      r.value += r.weighted_term[i] + r.product_term[i];
      r.se += a.se + 0.5 * r.product_term[i] * rel;
    }
    out[slot] = r;
  };

  std::size_t next = 0;
  const std::size_t start = e1.start_index();
  while (next < order.size() && targets[order[next]] == start) snapshot(order[next++], start);
  for (std::size_t k = start; next < order.size(); ++k) {
    const PathDrift b1 = f1(k);
    const PathDrift b2 = f2(k);
    for (int i = 0; i < 2; ++i) {
      const auto& e = *ens[i];
      detail::parallel_for(e.particles(), [&](std::size_t p) {
        const PathView path(e.flow, p, k);
        const Vector d = b1(k, path) - b2(k, path);
        integral[i][p] += d.squaredNorm() * dt;
      });
    }
    while (next < order.size() && targets[order[next]] == k + 1) snapshot(order[next++], k + 1);
  }
  return out;
}

Matrix probe_dispersion(const CoefficientSet& c, double t, const Vector& x, const Vector& y) {
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  const std::span<const double> ys(y.data(), static_cast<std::size_t>(y.size()));
  if (const auto* f = std::get_if<FactoredDriftSpec>(&c)) return f->dispersion(t, PathView(xs, t));
  if (const auto* d = std::get_if<DelayedCoefficients>(&c)) return d->dispersion(t, PathView(xs, t));
  return std::get<PairwiseMeanFieldSpec>(c).dispersion(t, xs, ys);
}

}  // namespace

std::vector<RhsEstimate> tv_stability_rhs(const ParticleEnsemble& e1, const ParticleEnsemble& e2,
                                          const PathDrift& b1, const PathDrift& b2, const WeightFunction& phi,
                                          const std::vector<double>& times) {
  return rhs_series(e1, e2, [&](std::size_t) { return b1; }, [&](std::size_t) { return b2; }, phi, times);
}

double tv_stability_rhs(const ParticleEnsemble& e1, const ParticleEnsemble& e2, const PathDrift& b1,
                        const PathDrift& b2, const WeightFunction& phi, double t) {
  return tv_stability_rhs(e1, e2, b1, b2, phi, std::vector<double>{t}).front().value;
}

bool same_dispersion(const CoefficientSet& c1, const CoefficientSet& c2, double horizon) {
  if (state_dim(c1) != state_dim(c2) || noise_dim(c1) != noise_dim(c2)) return false;
  const int d = state_dim(c1);
  const double values[] = {-1.5, 0.0, 0.7, 2.0};
  for (double t : {0.0, 0.5 * horizon, horizon}) {
    for (double u : values) {
      for (double v : values) {
        const Vector x = Vector::Constant(d, u);
        const Vector y = Vector::Constant(d, v);
        const Matrix s1 = probe_dispersion(c1, t, x, y);
        const Matrix s2 = probe_dispersion(c2, t, x, y);
        if (s1.rows() != s2.rows() || s1.cols() != s2.cols() || s1 != s2) return false;
      }
    }
  }
  return true;
}

PathDrift drift_along(const CoefficientSet& coeffs, const ParticleEnsemble& law_source) {
  // One evaluator per slice, built on first use.
  struct Cache {
    std::mutex mutex;
    std::size_t k = static_cast<std::size_t>(-1);
    std::shared_ptr<const StepEvaluator> eval;
  };
  auto cache = std::make_shared<Cache>();
  return [&coeffs, &law_source, cache](std::size_t k, const PathView& path) {
    std::shared_ptr<const StepEvaluator> eval;
    {
      const std::lock_guard lock(cache->mutex);
      if (cache->k != k) {
        cache->eval = std::make_shared<const StepEvaluator>(coeffs, law_source.flow, k);
        cache->k = k;
      }
      eval = cache->eval;
    }
    return eval->drift_tilde(path);
  };
}

StabilityReport tv_stability_check(const CoefficientSet& c1, const ParticleEnsemble& e1, const CoefficientSet& c2,
                                   const ParticleEnsemble& e2, const StabilityConfig& cfg,
                                   const WeightFunction& phi) {
  require(cfg.cell_width > 0.0, "cell width must be positive");
  require(!cfg.times.empty(), "stability check needs at least one time");
  if (!same_dispersion(c1, c2, e1.config.horizon))
    throw InvalidArgument("stability check needs a shared dispersion; the two coefficient sets differ");

  const auto factory = [](const CoefficientSet& c, const ParticleEnsemble& law) {
    return [&c, &law](std::size_t k) -> PathDrift {
      auto eval = std::make_shared<StepEvaluator>(c, law.flow, k);
      return [eval](std::size_t, const PathView& path) { return eval->drift_tilde(path); };
    };
  };
  const auto rhs = rhs_series(e1, e2, factory(c1, e1), factory(c2, e2), phi, cfg.times);

  StabilityReport report;
  report.cell_width = cfg.cell_width;
  report.particles = e1.particles();
  report.pass = true;
  const int d = e1.dim;
  const std::vector<double> origin(static_cast<std::size_t>(d), 0.0);
  const std::vector<double> width(static_cast<std::size_t>(d), cfg.cell_width);
  const double n1 = static_cast<double>(e1.particles());
  const double n2 = static_cast<double>(e2.particles());

  for (std::size_t s = 0; s < cfg.times.size(); ++s) {
    const std::size_t k = slice_for(e1, cfg.times[s]);
    const GridSignedMeasure g1 = bin_to_grid(e1.flow.slice(k), origin, width);
    const GridSignedMeasure g2 = bin_to_grid(e2.flow.slice(k), origin, width);
    StabilityPoint pt;
    pt.t = cfg.times[s];
    pt.lhs = weighted_tv(g1 - g2, phi);
    pt.rhs = rhs[s].value;
    pt.rhs_se = rhs[s].se;

    std::map<CellIndex, std::pair<double, double>> cells;
    for (const auto& [c, m] : g1.cells()) cells[c].first = m;
    for (const auto& [c, m] : g2.cells()) cells[c].second = m;
    for (const auto& [c, m] : cells) {
      const auto center = g1.cell_center(c);
      const double f = phi(center);
      const double p1 = m.first, p2 = m.second;
      pt.lhs_se += f * std::sqrt(std::max(0.0, p1 * (1.0 - p1)) / n1 + std::max(0.0, p2 * (1.0 - p2)) / n2);
      double osc = 0.0;
      std::vector<double> corner(center);
      for (int mask = 0; mask < (1 << d); ++mask) {
        for (int a = 0; a < d; ++a) corner[a] = center[a] + ((mask >> a) & 1 ? 0.5 : -0.5) * cfg.cell_width;
        osc = std::max(osc, std::abs(phi(corner) - f));
      }
      pt.binning_slack += osc * (std::abs(p1) + std::abs(p2));
    }
    pt.slack = 3.0 * (pt.lhs_se + pt.rhs_se) + pt.binning_slack;
    pt.pass = pt.lhs <= pt.rhs + pt.slack;
    report.pass = report.pass && pt.pass;
    report.points.push_back(pt);
  }
  return report;
}

StabilityReport tv_stability_check(const CoefficientSet& c1, const CoefficientSet& c2, const InitialLaw& init,
                                   const StabilityConfig& cfg, const WeightFunction& phi) {
  if (!same_dispersion(c1, c2, cfg.sim.horizon))
    throw InvalidArgument("stability check needs a shared dispersion; the two coefficient sets differ");
  SimConfig s1 = cfg.sim;
  SimConfig s2 = cfg.sim;
  s2.seed = cfg.seed2;
  const ParticleEnsemble e1 = simulate(c1, init, s1);
  const ParticleEnsemble e2 = simulate(c2, init, s2);
  return tv_stability_check(c1, e1, c2, e2, cfg, phi);
}

void write_stability_csv(std::ostream& os, const StabilityReport& report) {
  std::string out = "t,lhs,lhs_se,rhs,rhs_se,binning_slack,slack,pass\n";
  for (const auto& p : report.points) {
    for (double v : {p.t, p.lhs, p.lhs_se, p.rhs, p.rhs_se, p.binning_slack, p.slack}) {
      detail::append_number(out, v);
      out += ',';
    }
    out += p.pass ? "1\n" : "0\n";
  }
  os << out;
}

}  // namespace lawsde
