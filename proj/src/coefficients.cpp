#include "lawsde/coefficients.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace lawsde {
namespace {

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Vector to_vector(std::span<const double> s) {
  Vector v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v[static_cast<Eigen::Index>(i)] = s[i];
  return v;
}

void check_finite(const Vector& v, const char* what, double t) {
  if (!v.allFinite()) {
    std::ostringstream os;
    os << what << " is non-finite at t=" << t;
    throw EvaluationError(os.str());
  }
}

void check_shape(const Matrix& m, int rows, int cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << " has shape " << m.rows() << "x" << m.cols() << ", expected " << rows << "x" << cols;
    throw InvalidArgument(os.str());
  }
}

}  // namespace

Matrix pseudo_inverse(const Matrix& m) {
  if (m.isZero(0.0)) return Matrix::Zero(m.cols(), m.rows());
  // Square and well conditioned relative to the Hadamard bound: plain inverse.
  if (m.rows() == m.cols()) {
    double hadamard = 1.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) hadamard *= m.col(j).norm();
    const auto try_inverse = [&]<int N>() -> std::optional<Matrix> {
      const Eigen::Matrix<double, N, N> f = m;
      const double det = f.determinant();
      if (!(std::abs(det) > 1e-10 * hadamard)) return std::nullopt;
      return Matrix(f.inverse());
    };
    std::optional<Matrix> inv;
    if (m.rows() == 1) inv = try_inverse.template operator()<1>();
    else if (m.rows() == 2) inv = try_inverse.template operator()<2>();
    else if (m.rows() == 3) inv = try_inverse.template operator()<3>();
    if (inv) return *inv;
  }
  Eigen::MatrixXd dyn = m;
  Eigen::MatrixXd inv = dyn.completeOrthogonalDecomposition().pseudoInverse();
  return inv;
}

// ---------------------------------------------------------------- views

PathView::PathView(const MeasureFlow& flow, std::size_t particle, std::size_t current)
    : flow_(&flow), particle_(particle), current_(current), time_(flow.time(current)),
      dim_(flow.slice(current).dim()) {}

PathView::PathView(std::span<const double> point, double t)
    : time_(t), dim_(static_cast<int>(point.size())), point_(to_vector(point)) {}

std::span<const double> PathView::at_index(std::size_t k) const {
  if (flow_ == nullptr) return as_span(point_);
  if (k > current_) {
    throw EvaluationError("path access beyond current time (slice " + std::to_string(k) + ")");
  }
  return flow_->slice(k).position(particle_);
}

std::span<const double> PathView::at_time(double t) const {
  if (flow_ == nullptr) return as_span(point_);
  if (t > time_ + 1e-12) throw EvaluationError("path access beyond current time");
  return at_index(flow_->index_at_or_below(t));
}

Vector PathView::current_vector() const { return to_vector(current()); }

const DiscreteSignedMeasure& LawView::at_index(std::size_t k) const {
  if (k > current_) {
    throw EvaluationError("law access beyond current time (slice " + std::to_string(k) + ")");
  }
  return flow_->slice(k);
}

const Vector& LawView::mean_at_index(std::size_t k) const {
  at_index(k);
  return flow_->mean(k);
}

std::size_t LawView::index_at_time(double t) const {
  const double t0 = flow_->time(0);
  if (t < t0 - 1e-9 || t > time() + 1e-9) {
    std::ostringstream os;
    os << "measure flow is missing the slice at t=" << t << " (available [" << t0 << ", " << time() << "])";
    throw EvaluationError(os.str());
  }
  return std::min(flow_->index_at_or_below(t), current_);
}

// ---------------------------------------------------------------- specs

Matrix DispersionSpec::operator()(double t, const PathView& path) const {
  Matrix m = map(t, path);
  check_shape(m, dim, noise_dim, "dispersion");
  return m;
}

DispersionSpec DispersionSpec::constant(Matrix value, std::string name) {
  DispersionSpec s;
  s.dim = static_cast<int>(value.rows());
  s.noise_dim = static_cast<int>(value.cols());
  s.map = [value](double, const PathView&) { return value; };
  s.name = std::move(name);
  return s;
}

DispersionSpec DispersionSpec::identity(int dim) {
  return constant(Matrix::Identity(dim, dim), "identity");
}

Vector FactoredDriftSpec::eval_b_tilde(double t, const PathView& path, const LawView& law) const {
  Vector v = b_tilde(t, path, law);
  require(v.size() == dispersion.noise_dim, "b_tilde must have noise dimension entries");
  return v;
}

Vector FactoredDriftSpec::drift(double t, const PathView& path, const LawView& law) const {
  return dispersion(t, path) * eval_b_tilde(t, path, law);
}

void DelayedInteractionDrift::validate() const {
  require(tau >= 0.0, "delay tau must be nonnegative");
  require(!kappa.empty(), "kappa needs at least one atom");
  double total = 0.0;
  for (const auto& a : kappa) {
    require(a.weight >= 0.0, "kappa weights must be nonnegative");
    require(a.s <= 0.0 && a.s >= -tau - 1e-12, "kappa atoms must lie in [-tau, 0]");
    total += a.weight;
  }
  require(std::abs(total - 1.0) <= 1e-12, "kappa weights must sum to 1");
  require(static_cast<bool>(beta_tilde) || !separable.empty(), "delayed drift needs beta_tilde");
}

Vector PairwiseMeanFieldSpec::drift(double t, std::span<const double> x, std::span<const double> y) const {
  return b(t, x, y);
}

Matrix PairwiseMeanFieldSpec::dispersion(double t, std::span<const double> x,
                                         std::span<const double> y) const {
  return sigma(t, x, y);
}

Vector PairwiseMeanFieldSpec::drift_tilde(double t, std::span<const double> x,
                                          std::span<const double> y) const {
  if (b_tilde) return b_tilde(t, x, y);
  return pseudo_inverse(sigma(t, x, y)) * b(t, x, y);
}

int state_dim(const CoefficientSet& c) {
  return std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FactoredDriftSpec>) return s.dispersion.dim;
        else if constexpr (std::is_same_v<T, DelayedCoefficients>) return s.dispersion.dim;
        else return s.dim;
      },
      c);
}

int noise_dim(const CoefficientSet& c) {
  return std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FactoredDriftSpec>) return s.dispersion.noise_dim;
        else if constexpr (std::is_same_v<T, DelayedCoefficients>) return s.dispersion.noise_dim;
        else return s.noise_dim;
      },
      c);
}

double required_delay(const CoefficientSet& c) {
  if (const auto* d = std::get_if<DelayedCoefficients>(&c)) return d->drift.tau;
  return 0.0;
}

std::string coefficient_name(const CoefficientSet& c) {
  return std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DelayedCoefficients>) return s.drift.name;
        else return s.name;
      },
      c);
}

// ---------------------------------------------------------------- evaluation

Vector eval_drift_interaction(const DelayedInteractionDrift& spec, const DispersionSpec& sigma,
                              double t, const PathView& path, const LawView& law) {
  spec.validate();
  Vector acc = Vector::Zero(spec.noise_dim);
  for (const auto& atom : spec.kappa) {
    if (atom.weight == 0.0) continue;
    const DiscreteSignedMeasure& slice = law.at_time(t + atom.s);
    Vector integral = Vector::Zero(spec.noise_dim);
    for (std::size_t j = 0; j < slice.size(); ++j) {
      Vector v;
      if (spec.beta_tilde) {
        v = spec.beta_tilde(t, atom.s, path, slice.position(j));
      } else {
        v = Vector::Zero(spec.noise_dim);
        for (const auto& term : spec.separable)
          v += term.left(t, atom.s, path) * term.right(t, atom.s, slice.position(j));
      }
      integral += slice.weight(j) * v;
    }
    acc += atom.weight * integral;
  }
  Vector out = sigma(t, path) * acc;
  check_finite(out, "interaction drift", t);
  return out;
}

MeanFieldValue eval_pairwise_mean_field(const PairwiseMeanFieldSpec& spec, double t,
                                        std::span<const double> x, const DiscreteSignedMeasure& ensemble) {
  require(!ensemble.empty(), "mean-field evaluation needs a nonempty ensemble");
  MeanFieldValue out{Vector::Zero(spec.dim), Matrix::Zero(spec.dim, spec.noise_dim)};
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    const double w = ensemble.weight(j);
    out.drift += w * spec.b(t, x, ensemble.position(j));
    out.dispersion += w * spec.sigma(t, x, ensemble.position(j));
  }
  check_finite(out.drift, "mean-field drift", t);
  return out;
}

StepEvaluator::StepEvaluator(const CoefficientSet& coeffs, const MeasureFlow& flow, std::size_t current)
    : coeffs_(&coeffs), flow_(&flow), current_(current), time_(flow.time(current)) {
  const LawView law(flow, current);
  if (const auto* pw = std::get_if<PairwiseMeanFieldSpec>(&coeffs)) {
    const auto& slice = flow.slice(current);
    for (const auto& term : pw->separable_b) {
      Vector mean;
      for (std::size_t j = 0; j < slice.size(); ++j) {
        Vector r = slice.weight(j) * term.right(time_, slice.position(j));
        if (j == 0) mean = r;
        else mean += r;
      }
      b_means_.push_back(mean);
    }
    for (const auto& term : pw->separable_sigma) {
      double mean = 0.0;
      for (std::size_t j = 0; j < slice.size(); ++j)
        mean += slice.weight(j) * term.right(time_, slice.position(j));
      sigma_means_.push_back(mean);
    }
  } else if (const auto* dl = std::get_if<DelayedCoefficients>(&coeffs)) {
    dl->drift.validate();
    if (!dl->drift.separable.empty()) {
      for (const auto& atom : dl->drift.kappa) {
        const auto& slice = law.at_time(time_ + atom.s);
        std::vector<Vector> means;
        for (const auto& term : dl->drift.separable) {
          Vector mean;
          for (std::size_t j = 0; j < slice.size(); ++j) {
            Vector r = slice.weight(j) * term.right(time_, atom.s, slice.position(j));
            if (j == 0) mean = r;
            else mean += r;
          }
          means.push_back(mean);
        }
        delay_means_.push_back(std::move(means));
      }
    }
  }
}

MeanFieldValue StepEvaluator::operator()(std::size_t particle) const {
  return at(PathView(*flow_, particle, current_));
}

Vector StepEvaluator::drift_tilde(const PathView& path) const {
  const LawView law(*flow_, current_);
  if (const auto* f = std::get_if<FactoredDriftSpec>(coeffs_)) return f->eval_b_tilde(time_, path, law);
  if (const auto* dl = std::get_if<DelayedCoefficients>(coeffs_)) {
    if (dl->drift.separable.empty()) {
      Vector acc = Vector::Zero(dl->drift.noise_dim);
      for (const auto& atom : dl->drift.kappa) {
        const auto& slice = law.at_time(time_ + atom.s);
        for (std::size_t j = 0; j < slice.size(); ++j)
          acc += atom.weight * slice.weight(j) * dl->drift.beta_tilde(time_, atom.s, path, slice.position(j));
      }
      return acc;
    }
    Vector acc = Vector::Zero(dl->drift.noise_dim);
    for (std::size_t a = 0; a < dl->drift.kappa.size(); ++a) {
      const auto& atom = dl->drift.kappa[a];
      for (std::size_t k = 0; k < dl->drift.separable.size(); ++k)
        acc += atom.weight * (dl->drift.separable[k].left(time_, atom.s, path) * delay_means_[a][k]);
    }
    return acc;
  }
  const MeanFieldValue v = at(path);
  return pseudo_inverse(v.dispersion) * v.drift;
}

MeanFieldValue StepEvaluator::at(const PathView& path) const {
  const LawView law(*flow_, current_);
  return std::visit(
      [&](const auto& s) -> MeanFieldValue {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FactoredDriftSpec>) {
          Matrix sig = s.dispersion(time_, path);
          return {sig * s.eval_b_tilde(time_, path, law), sig};
        } else if constexpr (std::is_same_v<T, DelayedCoefficients>) {
          Matrix sig = s.dispersion(time_, path);
          if (s.drift.separable.empty()) {
            return {eval_drift_interaction(s.drift, s.dispersion, time_, path, law), sig};
          }
          Vector acc = Vector::Zero(s.drift.noise_dim);
          for (std::size_t a = 0; a < s.drift.kappa.size(); ++a) {
            const auto& atom = s.drift.kappa[a];
            for (std::size_t k = 0; k < s.drift.separable.size(); ++k)
              acc += atom.weight * (s.drift.separable[k].left(time_, atom.s, path) * delay_means_[a][k]);
          }
          return {sig * acc, sig};
        } else {
          const auto x = path.current();
          const bool fast_b = !s.separable_b.empty();
          const bool fast_sigma = !s.separable_sigma.empty();
          if (!fast_b || !fast_sigma) {
            MeanFieldValue brute = eval_pairwise_mean_field(s, time_, x, flow_->slice(current_));
            if (!fast_b && !fast_sigma) return brute;
            MeanFieldValue out = brute;
            if (fast_b) {
              out.drift = Vector::Zero(s.dim);
              for (std::size_t k = 0; k < s.separable_b.size(); ++k)
                out.drift += s.separable_b[k].left(time_, x) * b_means_[k];
            }
            if (fast_sigma) {
              out.dispersion = Matrix::Zero(s.dim, s.noise_dim);
              for (std::size_t k = 0; k < s.separable_sigma.size(); ++k)
                out.dispersion += s.separable_sigma[k].left(time_, x) * sigma_means_[k];
            }
            return out;
          }
          MeanFieldValue out{Vector::Zero(s.dim), Matrix::Zero(s.dim, s.noise_dim)};
          for (std::size_t k = 0; k < s.separable_b.size(); ++k)
            out.drift += s.separable_b[k].left(time_, x) * b_means_[k];
          for (std::size_t k = 0; k < s.separable_sigma.size(); ++k)
            out.dispersion += s.separable_sigma[k].left(time_, x) * sigma_means_[k];
          return out;
        }
      },
      *coeffs_);
}

FactoredDriftSpec factored_from_pairwise(const PairwiseMeanFieldSpec& spec) {
  require(!spec.sigma_depends_on_y, "factored form needs a dispersion independent of y");
  FactoredDriftSpec out;
  out.name = spec.name;
  out.dispersion.dim = spec.dim;
  out.dispersion.noise_dim = spec.noise_dim;
  out.dispersion.name = spec.name;
  out.dispersion.map = [spec](double t, const PathView& path) {
    const auto x = path.current();
    return spec.sigma(t, x, x);
  };
  out.b_tilde = [spec](double t, const PathView& path, const LawView& law) -> Vector {
    const auto x = path.current();
    const auto& slice = law.at_index(law.current_index());
    Vector mean_b = Vector::Zero(spec.dim);
    if (!spec.separable_b.empty()) {
      for (const auto& term : spec.separable_b) {
        Vector r;
        for (std::size_t j = 0; j < slice.size(); ++j) {
          Vector v = slice.weight(j) * term.right(t, slice.position(j));
          if (j == 0) r = v;
          else r += v;
        }
        mean_b += term.left(t, x) * r;
      }
    } else {
      for (std::size_t j = 0; j < slice.size(); ++j) mean_b += slice.weight(j) * spec.b(t, x, slice.position(j));
    }
    return pseudo_inverse(spec.sigma(t, x, x)) * mean_b;
  };
  return out;
}

// ---------------------------------------------------------------- checkers

SamplePoint SampleDomain::at(std::size_t index) const {
  const std::size_t ny = std::max<std::size_t>(y_points.size(), 1);
  const std::size_t nx = x_points.size();
  SamplePoint p;
  const std::size_t iy = index % ny;
  const std::size_t ix = (index / ny) % nx;
  const std::size_t it = index / (ny * nx);
  p.t = times[it];
  p.x = x_points[ix];
  p.y = y_points.empty() ? Vector::Zero(p.x.size()) : y_points[iy];
  return p;
}

std::vector<Vector> SampleDomain::grid_points(int dim, double lo, double hi, double step) {
  require(dim >= 1 && dim <= kMaxDim, "grid dimension must be in [1,3]");
  require(hi >= lo && step > 0.0, "grid needs hi >= lo and step > 0");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= n;
  std::vector<Vector> pts;
  pts.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    Vector v(dim);
    std::size_t rem = k;
    for (int a = dim - 1; a >= 0; --a) {
      v[a] = lo + static_cast<double>(rem % n) * step;
      rem /= n;
    }
    pts.push_back(v);
  }
  return pts;
}

SampleDomain SampleDomain::grid(int dim, double lo, double hi, double step, std::vector<double> times) {
  SampleDomain d;
  d.times = std::move(times);
  d.x_points = grid_points(dim, lo, hi, step);
  d.y_points = d.x_points;
  return d;
}

const Margin& MarginReport::margin(const std::string& name) const {
  for (const auto& m : margins)
    if (m.name == name) return m;
  for (const auto& m : extra)
    if (m.name == name) return m;
  throw InvalidArgument("no margin named " + name);
}

std::pair<double, std::size_t> scan_max(std::size_t n, const std::function<double(std::size_t)>& f) {
  require(n > 0, "scan over an empty sample set");
  const int threads = std::max(1, omp_get_max_threads());
  std::vector<double> best(threads, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> where(threads, n);
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
#pragma omp parallel for schedule(static, 1) num_threads(threads)
  for (int c = 0; c < threads; ++c) {
    try {
      const std::size_t lo = c * chunk, hi = std::min(n, lo + chunk);
      for (std::size_t i = lo; i < hi; ++i) {
        const double v = f(i);
        if (std::isnan(v)) throw EvaluationError("margin is NaN at sample " + std::to_string(i));
        if (where[c] == n || v > best[c]) {
          best[c] = v;
          where[c] = i;
        }
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  double value = -std::numeric_limits<double>::infinity();
  std::size_t index = n;
  for (int c = 0; c < threads; ++c) {
    if (where[c] == n) continue;
    if (index == n || best[c] > value) {
      value = best[c];
      index = where[c];
    }
  }
  return {value, index};
}

namespace {

Margin make_margin(std::string name, const SampleDomain& domain, const std::function<double(const SamplePoint&)>& f,
                   bool strict = false) {
  const auto [worst, index] = scan_max(domain.size(), [&](std::size_t i) { return f(domain.at(i)); });
  Margin m;
  m.name = std::move(name);
  m.worst = worst;
  m.argmax_index = index;
  m.argmax = domain.at(index);
  m.strict = strict;
  m.pass = strict ? worst < 0.0 : worst <= 0.0;
  return m;
}

MarginReport finish(MarginReport r) {
  r.pass = std::all_of(r.margins.begin(), r.margins.end(), [](const Margin& m) { return m.pass; });
  return r;
}

struct DriftTerms {
  double x2;       // |x|^2
  double x_dot_b;  // <x, b>
  double sigma2;   // |sigma|_F^2
  double sigmaT_x2;  // |sigma^T x|^2
};

DriftTerms drift_terms(const PairwiseMeanFieldSpec& spec, const SamplePoint& p) {
  const auto x = std::span<const double>(p.x.data(), p.x.size());
  const auto y = std::span<const double>(p.y.data(), p.y.size());
  const Vector b = spec.drift(p.t, x, y);
  const Matrix s = spec.dispersion(p.t, x, y);
  return {p.x.squaredNorm(), p.x.dot(b), s.squaredNorm(), (s.transpose() * p.x).squaredNorm()};
}

}  // namespace

MarginReport check_polynomial_growth(const PairwiseMeanFieldSpec& spec, double alpha, double q, double C,
                                     const SampleDomain& domain) {
  require(C > 0.0, "constant C must be positive");
  require(alpha >= 0.0, "alpha must be nonnegative");
  require(q > 2.0, "q must exceed 2");
  MarginReport r;
  r.constant = C;
  r.samples = domain.size();
  r.margins.push_back(make_margin("generator", domain, [&](const SamplePoint& p) {
    const auto d = drift_terms(spec, p);
    return d.x2 * (2.0 * d.x_dot_b + d.sigma2) + (alpha - 2.0) * d.sigmaT_x2 - C * (1.0 + d.x2 * d.x2);
  }));
  r.margins.push_back(make_margin("growth", domain, [&](const SamplePoint& p) {
    const auto x = std::span<const double>(p.x.data(), p.x.size());
    const auto y = std::span<const double>(p.y.data(), p.y.size());
    const double bt = spec.drift_tilde(p.t, x, y).norm();
    return bt - C * (1.0 + std::pow(p.y.norm(), alpha / 2.0)) * (1.0 + std::pow(p.x.norm(), alpha / 4.0));
  }));
  r.extra.push_back(make_margin("existence_growth", domain, [&](const SamplePoint& p) {
    const auto x = std::span<const double>(p.x.data(), p.x.size());
    const auto y = std::span<const double>(p.y.data(), p.y.size());
    return std::pow(spec.drift(p.t, x, y).norm(), q) + std::pow(spec.dispersion(p.t, x, y).norm(), q) -
           C * (1.0 + std::pow(p.x.norm(), alpha)) * (1.0 + std::pow(p.y.norm(), alpha));
  }));
  return finish(std::move(r));
}

MarginReport check_exponential_growth(const PairwiseMeanFieldSpec& spec, double alpha, double p, double q,
                                      double C, const SampleDomain& domain) {
  require(C > 0.0, "constant C must be positive");
  require(alpha > 0.0, "alpha must be positive");
  require(p >= 1.0 && p <= 2.0, "p must lie in [1,2]");
  require(q > 2.0, "q must exceed 2");
  MarginReport r;
  r.constant = C;
  r.samples = domain.size();
  r.margins.push_back(make_margin("generator", domain, [&](const SamplePoint& s) {
    const auto d = drift_terms(spec, s);
    const double xn = std::sqrt(d.x2);
    return d.x2 * (2.0 * d.x_dot_b + d.sigma2) + (alpha * p * std::pow(xn, p) + p - 2.0) * d.sigmaT_x2 -
           C * (1.0 + std::pow(xn, 4.0 - p));
  }));
  r.margins.push_back(make_margin("growth", domain, [&](const SamplePoint& s) {
    const auto x = std::span<const double>(s.x.data(), s.x.size());
    const auto y = std::span<const double>(s.y.data(), s.y.size());
    const double bt = spec.drift_tilde(s.t, x, y).norm();
    return bt - C * std::exp(alpha * std::pow(s.y.norm(), p) / 2.0 + alpha * std::pow(s.x.norm(), p) / 4.0);
  }));
  r.extra.push_back(make_margin("existence_growth", domain, [&](const SamplePoint& s) {
    const auto x = std::span<const double>(s.x.data(), s.x.size());
    const auto y = std::span<const double>(s.y.data(), s.y.size());
    return std::pow(spec.drift(s.t, x, y).norm(), q) + std::pow(spec.dispersion(s.t, x, y).norm(), q) -
           C * std::exp(alpha * std::pow(s.x.norm(), p) + alpha * std::pow(s.y.norm(), p));
  }));
  return finish(std::move(r));
}

MarginReport check_H_growth(const PairwiseMeanFieldSpec& spec,
                            const std::function<double(std::span<const double>)>& V, double q,
                            const SampleDomain& domain) {
  require(q > 2.0, "q must exceed 2");
  MarginReport r;
  r.samples = domain.size();
  r.margins.push_back(make_margin(
      "growth", domain,
      [&](const SamplePoint& p) {
        const auto x = std::span<const double>(p.x.data(), p.x.size());
        const auto y = std::span<const double>(p.y.data(), p.y.size());
        const double vx = V(x), vy = V(y);
        if (!(vx > 0.0) || !(vy > 0.0)) throw EvaluationError("V must be strictly positive on samples");
        return std::pow(spec.drift(p.t, x, y).norm(), q) + std::pow(spec.dispersion(p.t, x, y).norm(), q) -
               vx * vy;
      },
      /*strict=*/true));
  return finish(std::move(r));
}

NondegeneracyReport check_nondegeneracy(const PairwiseMeanFieldSpec& spec, double R,
                                        const std::vector<double>& times,
                                        const std::vector<Vector>& points) {
  require(!times.empty() && !points.empty(), "non-degeneracy check needs nonempty grids");
  std::vector<Vector> inside;
  for (const auto& p : points)
    if (p.norm() <= R) inside.push_back(p);
  require(!inside.empty(), "no grid point inside the ball of radius R");
  SampleDomain domain;
  domain.times = times;
  domain.x_points = inside;
  domain.y_points = inside;
  const auto [neg_min, index] = scan_max(domain.size(), [&](std::size_t i) {
    const SamplePoint p = domain.at(i);
    const Matrix s = spec.dispersion(p.t, {p.x.data(), static_cast<std::size_t>(p.x.size())},
                                     {p.y.data(), static_cast<std::size_t>(p.y.size())});
    if (!s.allFinite()) throw EvaluationError("dispersion has non-finite entries");
    const Matrix ssT = s * s.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(ssT, Eigen::EigenvaluesOnly);
    return -eig.eigenvalues().minCoeff();
  });
  NondegeneracyReport r;
  r.min_eigenvalue = -neg_min;
  r.argmin = domain.at(index);
  r.pass = r.min_eigenvalue > 0.0;
  return r;
}

double smallest_passing_constant(const std::function<bool(double)>& passes, double rel_tol) {
  double hi = 1.0;
  while (!passes(hi)) {
    hi *= 2.0;
    if (hi > 1e15) throw EvaluationError("no constant below 1e15 passes the check");
  }
  double lo = 0.0;
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid > 0.0 && passes(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

}  // namespace lawsde
