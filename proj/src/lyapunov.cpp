#include "lawsde/lyapunov.hpp"

#include "lawsde/detail/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lawsde {
namespace {

double squared_norm(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return s;
}

Vector to_vector(std::span<const double> s) {
  Vector v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v[static_cast<Eigen::Index>(i)] = s[i];
  return v;
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::string describe(double t, std::span<const double> x) {
  std::ostringstream os;
  os << "t=" << t << " x=(";
  for (std::size_t a = 0; a < x.size(); ++a) os << (a ? "," : "") << x[a];
  os << ")";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- V catalog

LyapunovFunction LyapunovFunction::quadratic() {
  LyapunovFunction v;
  v.kind_ = Kind::kQuadratic;
  v.name_ = "quadratic";
  return v;
}

LyapunovFunction LyapunovFunction::polynomial(double alpha) {
  require(alpha > 0.0 && std::isfinite(alpha), "polynomial V needs alpha > 0");
  LyapunovFunction v;
  v.kind_ = Kind::kPolynomial;
  v.alpha_ = alpha;
  v.name_ = "polynomial";
  v.at_one_ = v.profile(1.0);
  return v;
}

LyapunovFunction LyapunovFunction::exponential(double alpha, double p) {
  require(alpha > 0.0 && std::isfinite(alpha), "exponential V needs alpha > 0");
  require(p > 0.0 && p <= 2.0, "exponential V needs p in (0, 2]");
  LyapunovFunction v;
  v.kind_ = Kind::kExponential;
  v.alpha_ = alpha;
  v.p_ = p;
  v.name_ = "exponential";
  v.at_one_ = v.profile(1.0);
  // The inner quadratic P(s) = g + g1 (s-1) + g2/2 (s-1)^2 must stay >= 0 on [0,1].
  const auto [g, g1, g2] = v.at_one_;
  double lo = std::min(g, g - g1 + 0.5 * g2);
  if (g2 > 0.0) {
    const double s_star = 1.0 - g1 / g2;
    if (s_star > 0.0 && s_star < 1.0) lo = std::min(lo, g - 0.5 * g1 * g1 / g2);
  }
  if (lo < 0.0) {
    std::ostringstream os;
    os << "exponential V with alpha=" << alpha << " p=" << p << " has no nonnegative quadratic match inside |y|<1";
    throw InvalidArgument(os.str());
  }
  return v;
}

LyapunovFunction LyapunovFunction::custom(ValueMap value, GradientMap gradient, HessianMap hessian,
                                          ValueMap time_derivative, std::string name) {
  require(value && gradient && hessian, "custom V needs value, gradient and Hessian");
  LyapunovFunction v;
  v.kind_ = Kind::kCustom;
  v.value_ = std::move(value);
  v.gradient_ = std::move(gradient);
  v.hessian_ = std::move(hessian);
  v.time_derivative_ = std::move(time_derivative);
  v.name_ = std::move(name);
  return v;
}

LyapunovFunction::Profile LyapunovFunction::profile(double s) const {
  switch (kind_) {
    case Kind::kQuadratic:
      return {1.0 + s, 1.0, 0.0};
    case Kind::kPolynomial: {
      if (s < 1.0 && at_one_.g != 0.0) break;
      const double a = 0.5 * alpha_;
      return {1.0 + std::pow(s, a), a * std::pow(s, a - 1.0), a * (a - 1.0) * std::pow(s, a - 2.0)};
    }
    case Kind::kExponential: {
      if (s < 1.0 && at_one_.g != 0.0) break;
      const double c = 0.5 * p_;
      const double g = std::exp(alpha_ * std::pow(s, c));
      const double u = alpha_ * c * std::pow(s, c - 1.0);
      return {g, g * u, g * (u * u + alpha_ * c * (c - 1.0) * std::pow(s, c - 2.0))};
    }
    case Kind::kCustom:
      break;
  }
  const double h = s - 1.0;
  return {at_one_.g + at_one_.g1 * h + 0.5 * at_one_.g2 * h * h, at_one_.g1 + at_one_.g2 * h, at_one_.g2};
}

double LyapunovFunction::value(double t, std::span<const double> y) const {
  if (kind_ == Kind::kCustom) return scale_ * value_(t, y);
  return scale_ * profile(squared_norm(y)).g;
}

Vector LyapunovFunction::gradient(double t, std::span<const double> y) const {
  if (kind_ == Kind::kCustom) return scale_ * gradient_(t, y);
  const Profile pr = profile(squared_norm(y));
  return (2.0 * scale_ * pr.g1) * to_vector(y);
}

Matrix LyapunovFunction::hessian(double t, std::span<const double> y) const {
  if (kind_ == Kind::kCustom) return scale_ * hessian_(t, y);
  const Profile pr = profile(squared_norm(y));
  const Vector v = to_vector(y);
  const auto d = v.size();
  Matrix h = (2.0 * pr.g1) * Matrix::Identity(d, d) + (4.0 * pr.g2) * (v * v.transpose());
  return scale_ * h;
}

double LyapunovFunction::time_derivative(double t, std::span<const double> y) const {
  return time_derivative_ ? scale_ * time_derivative_(t, y) : 0.0;
}

LyapunovFunction LyapunovFunction::scaled(double lambda) const {
  require(lambda > 0.0, "V can only be scaled by a positive factor");
  LyapunovFunction v = *this;
  v.scale_ *= lambda;
  return v;
}

LyapunovCertificate LyapunovCertificate::power_family(double alpha, double C) {
  LyapunovCertificate cert;
  cert.V = LyapunovFunction::polynomial(alpha);
  cert.C = C;
  cert.phi = [alpha](double, std::span<const double> y) { return 1.0 + std::pow(squared_norm(y), alpha / 4.0); };
  cert.eta = [alpha](double, std::span<const double> y) { return 1.0 + std::pow(squared_norm(y), alpha / 8.0); };
  return cert;
}

LyapunovCertificate LyapunovCertificate::exponential_family(double alpha, double p, double C) {
  LyapunovCertificate cert;
  cert.V = LyapunovFunction::exponential(alpha, p);
  cert.C = C;
  cert.phi = [alpha, p](double, std::span<const double> y) {
    return std::exp(0.5 * alpha * std::pow(squared_norm(y), p / 2.0));
  };
  cert.eta = [alpha, p](double, std::span<const double> y) {
    return std::exp(0.25 * alpha * std::pow(squared_norm(y), p / 2.0));
  };
  return cert;
}

// ---------------------------------------------------------------- margins

namespace {

double generator_value(const LyapunovCertificate& cert, double t, std::span<const double> x, const Vector& b,
                       const Matrix& sigma) {
  const Vector grad = cert.V.gradient(t, x);
  const Matrix hess = cert.V.hessian(t, x);
  const double dt_v = cert.V.time_derivative(t, x);
  if (!grad.allFinite() || !hess.allFinite() || !std::isfinite(dt_v)) {
    throw EvaluationError("derivative of V is non-finite at " + describe(t, x));
  }
  const double trace = (sigma.transpose() * hess * sigma).trace();
  return dt_v + grad.dot(b) + 0.5 * trace - cert.C * cert.V.value(t, x);
}

Margin finish(std::string name, const std::pair<double, std::size_t>& worst, SamplePoint argmax, bool strict) {
  Margin m;
  m.name = std::move(name);
  m.worst = worst.first;
  m.argmax_index = worst.second;
  m.argmax = std::move(argmax);
  m.strict = strict;
  m.pass = strict ? m.worst < 0.0 : m.worst <= 0.0;
  return m;
}

}  // namespace

Margin generator_margin(const LyapunovCertificate& cert, const PointDrift& b, const PointDispersion& sigma,
                        const SampleDomain& samples, bool strict) {
  require(samples.size() > 0, "generator margin needs samples");
  const auto worst = scan_max(samples.size(), [&](std::size_t i) {
    const SamplePoint p = samples.at(i);
    return generator_value(cert, p.t, as_span(p.x), b(p), sigma(p));
  });
  return finish("generator", worst, samples.at(worst.second), strict);
}

Margin generator_margin(const LyapunovCertificate& cert, const PairwiseMeanFieldSpec& spec,
                        const SampleDomain& samples, bool strict) {
  const bool has_y = !samples.y_points.empty();
  return generator_margin(
      cert,
      [&](const SamplePoint& p) { return spec.drift(p.t, as_span(p.x), as_span(has_y ? p.y : p.x)); },
      [&](const SamplePoint& p) { return spec.dispersion(p.t, as_span(p.x), as_span(has_y ? p.y : p.x)); }, samples,
      strict);
}

// ---------------------------------------------------------------- monitor

MonitorReport monitor_expectation(const ParticleEnsemble& ensemble, const LyapunovCertificate& cert,
                                  double slack_coefficient) {
  MonitorReport report;
  report.C = cert.C;
  report.slack_coefficient = slack_coefficient;
  const std::size_t n = ensemble.particles();
  const double dt = ensemble.config.dt;
  std::vector<double> values(n);
  for (std::size_t k = ensemble.start_index(); k < ensemble.slices(); ++k) {
    const double t = ensemble.time(k);
    detail::parallel_for(n, [&](std::size_t i) { values[i] = cert.V.value(t, ensemble.position(k, i)); });
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    if (k == ensemble.start_index()) report.initial_mean = mean;
    MonitorPoint pt;
    pt.t = t;
    pt.mean = mean;
    pt.se = se;
    pt.bound = std::exp(cert.C * t) * report.initial_mean;
    pt.slack = slack_coefficient * dt * pt.bound;
    pt.flagged = !(mean - 3.0 * se <= pt.bound + pt.slack);
    if (pt.flagged && !report.first_flag) report.first_flag = t;
    report.series.push_back(pt);
  }
  return report;
}

// ---------------------------------------------------------------- delayed-drift conditions

ConditionsReport check_delayed_conditions(const DelayedInteractionDrift& interaction, const DispersionSpec& sigma,
                                          const LyapunovCertificate& cert, const SampleDomain& samples,
                                          const DiscreteSignedMeasure& initial_sample) {
  interaction.validate();
  require(samples.size() > 0, "condition check needs samples");
  require(!samples.y_points.empty(), "condition check needs y samples");
  ConditionsReport report;
  report.C = cert.C;
  const std::size_t atoms = interaction.kappa.size();
  const auto point_at = [&](std::size_t i) {
    SamplePoint p = samples.at(i / atoms);
    return std::pair{p, interaction.kappa[i % atoms].s};
  };

  const auto c1 = scan_max(samples.size() * atoms, [&](std::size_t i) {
    const auto [p, s] = point_at(i);
    const PathView path(as_span(p.x), p.t);
    const Matrix sig = sigma(p.t, path);
    const Vector beta = sig * interaction.beta_tilde(p.t, s, path, as_span(p.y));
    return generator_value(cert, p.t, as_span(p.x), beta, sig);
  });
  report.generator = finish("generator", c1, point_at(c1.second).first, false);

  const auto c2 = scan_max(samples.size() * atoms, [&](std::size_t i) {
    const auto [p, s] = point_at(i);
    const PathView path(as_span(p.x), p.t);
    const double lhs = interaction.beta_tilde(p.t, s, path, as_span(p.y)).norm();
    return lhs - cert.C * cert.phi_at(p.t + s, as_span(p.y)) * cert.eta_at(p.t + s, as_span(p.x));
  });
  report.interaction = finish("interaction", c2, point_at(c2.second).first, false);

  const std::size_t ny = samples.x_points.size();
  const auto c3 = scan_max(samples.times.size() * ny, [&](std::size_t i) {
    const double t = samples.times[i / ny];
    const auto y = as_span(samples.x_points[i % ny]);
    const double eta = cert.eta_at(t, y);
    const double phi = cert.phi_at(t, y);
    return eta * eta * eta * eta + phi * phi - cert.C * cert.V.value(t, y);
  });
  SamplePoint c3_point{samples.times[c3.second / ny], samples.x_points[c3.second % ny],
                       samples.x_points[c3.second % ny]};
  report.domination = finish("domination", c3, c3_point, false);

  double mass = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < initial_sample.size(); ++i) {
    mass += initial_sample.weight(i);
    acc += initial_sample.weight(i) * cert.V.value(0.0, initial_sample.position(i));
  }
  report.initial_mean_V = mass > 0.0 ? acc / mass : 0.0;
  report.initial_finite = mass > 0.0 && std::isfinite(report.initial_mean_V);

  report.pass = report.generator.pass && report.interaction.pass && report.domination.pass && report.initial_finite;
  return report;
}

DelayedCoefficients delayed_from_pairwise(const PairwiseMeanFieldSpec& spec) {
  require(!spec.sigma_depends_on_y, "delayed form needs a dispersion independent of y");
  DelayedCoefficients out;
  out.dispersion.dim = spec.dim;
  out.dispersion.noise_dim = spec.noise_dim;
  out.dispersion.name = spec.name;
  out.dispersion.map = [spec](double t, const PathView& path) {
    const auto x = path.current();
    return spec.sigma(t, x, x);
  };
  auto& drift = out.drift;
  drift.dim = spec.dim;
  drift.noise_dim = spec.noise_dim;
  drift.name = spec.name;
  drift.beta_tilde = [spec](double t, double, const PathView& path, std::span<const double> y) -> Vector {
    const auto x = path.current();
    return spec.drift_tilde(t, x, y);
  };
  for (const auto& term : spec.separable_b) {
    DelayedInteractionDrift::Term t;
    t.left = [spec, left = term.left](double time, double, const PathView& path) -> Matrix {
      const auto x = path.current();
      return pseudo_inverse(spec.sigma(time, x, x)) * left(time, x);
    };
    t.right = [right = term.right](double time, double, std::span<const double> y) { return right(time, y); };
    drift.separable.push_back(std::move(t));
  }
  return out;
}

}  // namespace lawsde
