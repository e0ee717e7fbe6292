#include "lawsde/oracle.hpp"

#include "lawsde/detail/format.hpp"
#include "lawsde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace lawsde {

void ScalarLawProblem::validate() const {
  require(static_cast<bool>(h), "h is not set");
  require(!weights.empty() && weights.size() == means.size() && weights.size() == sds.size(),
          "mu0 needs matching weights, means and sds");
  double total = 0.0;
  for (double w : weights) {
    require(w > 0.0, "mu0 weights must be positive");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-12, "mu0 weights must sum to 1");
  for (double s : sds) require(s >= 0.0 && std::isfinite(s), "mu0 sds must be nonnegative");
  for (double m : means) require(std::isfinite(m), "mu0 means must be finite");
  require(growth_C > 0.0 && growth_T > 0.0, "growth constants must be positive");
  require(horizon > 0.0 && horizon < growth_T, "horizon must lie in (0, growth T)");
}

double ScalarLawProblem::initial_mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) m += weights[k] * means[k];
  return m;
}

ScalarLawProblem ScalarLawProblem::with_h(const std::string& name, double c) {
  ScalarLawProblem p;
  p.name = name;
  if (name == "zero") {
    p.h = [](double) { return 0.0; };
  } else if (name == "constant") {
    p.h = [c](double) { return c; };
    p.growth_C = std::max(std::abs(c), 1.0);
  } else if (name == "identity") {
    p.h = [](double x) { return x; };
  } else if (name == "sign") {
    p.h = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
    p.breakpoints = {0.0};
  } else if (name == "gaussian-growth") {
    require(c > 0.0, "gaussian-growth needs T > 0");
    p.h = [c](double x) { return std::exp(x * x / (2.0 * c)); };
    p.growth_T = c;
    p.horizon = 0.5 * c;
  } else {
    throw InvalidArgument("unknown h '" + name + "' (known: zero, constant, identity, sign, gaussian-growth)");
  }
  return p;
}

namespace {

double phi_at_order(const ScalarLawProblem& p, double variance_shift, double x, int order) {
  double acc = 0.0;
  std::vector<double> bp(p.breakpoints);
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    const double var = p.sds[k] * p.sds[k] + variance_shift;
    acc += p.weights[k] * quadrature::gaussian_expectation(p.h, p.means[k] + x, var, bp, order);
  }
  return acc;
}

std::string where(double t, double x) {
  std::ostringstream os;
  os << "t=" << t << " x=" << x;
  return os.str();
}

// t >= 0; t = 0 is the small-time limit for the components with s_k > 0.
double phi_converged(const ScalarLawProblem& p, double t, double x, const PhiOptions& o) {
  require(o.order >= 2 && o.max_order >= o.order, "invalid quadrature orders");
  double prev = phi_at_order(p, t, x, o.order);
  if (!std::isfinite(prev)) throw EvaluationError("phi_h overflows at " + where(t, x));
  for (int n = 2 * o.order; n <= o.max_order; n *= 2) {
    const double next = phi_at_order(p, t, x, n);
    if (!std::isfinite(next)) throw EvaluationError("phi_h overflows at " + where(t, x));
    if (std::abs(next - prev) <= o.tolerance) return next;
    prev = next;
  }
  return prev;
}

}  // namespace

double phi_h(const ScalarLawProblem& problem, double t, double x, const PhiOptions& options) {
  problem.validate();
  if (!(t > 0.0)) throw InvalidArgument("phi_h needs t > 0 (got " + detail::format_number(t) + ")");
  require(t < problem.growth_T, "phi_h needs t below the growth bound T");
  return phi_converged(problem, t, x, options);
}

double phi_h_shifted(const ScalarLawProblem& problem, double t, double x, int order) {
  problem.validate();
  if (!(t > 0.0)) throw InvalidArgument("phi_h needs t > 0");
  const auto& gh = quadrature::gauss_hermite(order);
  double acc = 0.0;
  for (std::size_t k = 0; k < problem.weights.size(); ++k) {
    double comp = 0.0;
    const auto inner = [&](double x0) {
      std::vector<double> bp(problem.breakpoints);
      for (double& b : bp) b -= x0;
      return quadrature::gaussian_expectation([&](double w) { return problem.h(x0 + w); }, x, t, bp, order);
    };
    if (problem.sds[k] == 0.0) {
      comp = inner(problem.means[k]);
    } else {
      for (std::size_t j = 0; j < gh.nodes.size(); ++j)
        comp += gh.weights[j] * inner(problem.means[k] + problem.sds[k] * gh.nodes[j]);
    }
    acc += problem.weights[k] * comp;
  }
  if (!std::isfinite(acc)) throw EvaluationError("phi_h overflows at " + where(t, x));
  return acc;
}

GPath solve_g(const ScalarLawProblem& problem, double dt, const PhiOptions& options) {
  problem.validate();
  require(dt > 0.0, "dt must be positive");
  const auto steps = static_cast<std::size_t>(std::llround(problem.horizon / dt));
  require(steps >= 1, "horizon must cover at least one step");

  // The small-time limit is usable when every point mass of mu0 sits where h
  // is continuous; otherwise start from g(dt) = dt phi_h(dt, 0).
  bool limit_ok = true;
  for (std::size_t k = 0; k < problem.weights.size(); ++k) {
    if (problem.sds[k] > 0.0) continue;
    for (double b : problem.breakpoints)
      if (problem.means[k] == b) limit_ok = false;
  }
  const auto f = [&](double t, double g) {
    const double v = t > 0.0 ? phi_h(problem, t, g, options) : phi_converged(problem, 0.0, g, options);
    if (!std::isfinite(v)) throw EvaluationError("phi_h is non-finite during integration at " + where(t, g));
    return v;
  };

  GPath path;
  path.t.reserve(steps + 1);
  path.g.reserve(steps + 1);
  path.t.push_back(0.0);
  path.g.push_back(0.0);
  std::size_t first = 0;
  if (!limit_ok) {
    path.bootstrapped = true;
    path.t.push_back(dt);
    path.g.push_back(dt * f(dt, 0.0));
    first = 1;
  }
  for (std::size_t k = first; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double g = path.g.back();
    const double k1 = f(t, g);
    const double k2 = f(t + 0.5 * dt, g + 0.5 * dt * k1);
    const double k3 = f(t + 0.5 * dt, g + 0.5 * dt * k2);
    const double k4 = f(t + dt, g + dt * k3);
    path.t.push_back(static_cast<double>(k + 1) * dt);
    path.g.push_back(g + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  return path;
}

OracleReport oracle_compare(const ScalarLawProblem& problem, const ParticleEnsemble& ensemble,
                            double slack_coefficient, const PhiOptions& options) {
  return oracle_compare(problem, ensemble, solve_g(problem, ensemble.config.dt, options), slack_coefficient);
}

OracleReport oracle_compare(const ScalarLawProblem& problem, const ParticleEnsemble& ensemble, const GPath& g,
                            double slack_coefficient) {
  problem.validate();
  require(ensemble.dim == 1, "oracle comparison needs a scalar ensemble");
  if (std::abs(ensemble.config.horizon - problem.horizon) > 1e-12) {
    throw InvalidArgument("ensemble horizon " + detail::format_number(ensemble.config.horizon) +
                          " differs from the problem horizon " + detail::format_number(problem.horizon));
  }
  const std::size_t slices = ensemble.slices() - ensemble.start_index();
  require(g.g.size() == slices, "g path and ensemble have different time grids");

  OracleReport report;
  report.slack_coefficient = slack_coefficient;
  const double m0 = problem.initial_mean();
  const std::size_t n = ensemble.particles();
  for (std::size_t j = 0; j < slices; ++j) {
    const std::size_t k = ensemble.start_index() + j;
    const auto& slice = ensemble.flow.slice(k);
    double sum = 0.0;
    for (double v : slice.positions()) sum += v;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : slice.positions()) ss += (v - mean) * (v - mean);
    OraclePoint pt;
    pt.t = ensemble.time(k);
    pt.g = g.g[j];
    pt.expected = m0 + pt.g;
    pt.mean = mean;
    pt.se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    pt.error = std::abs(mean - pt.expected);
    report.sup_error = std::max(report.sup_error, pt.error);
    report.max_se = std::max(report.max_se, pt.se);
    report.series.push_back(pt);
  }
  report.tolerance = 3.0 * report.max_se + slack_coefficient * ensemble.config.dt;
  report.pass = report.sup_error <= report.tolerance;
  return report;
}

PairwiseMeanFieldSpec oracle_coefficients(const ScalarLawProblem& problem) {
  problem.validate();
  PairwiseMeanFieldSpec spec;
  spec.dim = 1;
  spec.noise_dim = 1;
  spec.name = "oracle-" + problem.name;
  const auto h = problem.h;
  spec.b = [h](double, std::span<const double>, std::span<const double> y) {
    Vector v(1);
    v[0] = h(y[0]);
    return v;
  };
  spec.sigma = [](double, std::span<const double>, std::span<const double>) { return Matrix::Identity(1, 1); };
  spec.b_tilde = spec.b;
  spec.separable_b.push_back({[](double, std::span<const double>) { return Matrix::Identity(1, 1); },
                              [h](double, std::span<const double> y) {
                                Vector v(1);
                                v[0] = h(y[0]);
                                return v;
                              }});
  spec.separable_sigma.push_back(
      {[](double, std::span<const double>) { return Matrix::Identity(1, 1); }, [](double, std::span<const double>) {
         return 1.0;
       }});
  spec.sigma_depends_on_y = false;
  return spec;
}

InitialLaw oracle_initial_law(const ScalarLawProblem& problem) {
  problem.validate();
  std::vector<Vector> means;
  for (double m : problem.means) means.push_back(Vector::Constant(1, m));
  if (problem.weights.size() == 1 && problem.sds[0] == 0.0) return InitialLaw::point(means[0]);
  return InitialLaw::mixture(problem.weights, means, problem.sds);
}

void write_oracle_csv(std::ostream& os, const OracleReport& report) {
  std::string out = "t,g,expected_mean,empirical_mean,se,error,bound\n";
  for (const auto& p : report.series) {
    for (double v : {p.t, p.g, p.expected, p.mean, p.se, p.error}) {
      detail::append_number(out, v);
      out += ',';
    }
    detail::append_number(out, report.tolerance);
    out += '\n';
  }
  os << out;
}

}  // namespace lawsde
