#include "lawsde/measure.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace lawsde {
namespace {

double norm(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return std::sqrt(s);
}

void check_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InvalidArgument(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

std::string describe_point(std::span<const double> y) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < y.size(); ++i) os << (i ? "," : "") << y[i];
  os << ')';
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- weight

WeightFunction WeightFunction::polynomial(double alpha) {
  require(alpha >= 0.0 && std::isfinite(alpha), "polynomial weight needs alpha >= 0");
  WeightFunction w;
  w.kind_ = Kind::kPolynomial;
  w.alpha_ = alpha;
  w.name_ = "polynomial";
  return w;
}

WeightFunction WeightFunction::exponential(double alpha, double p) {
  require(alpha >= 0.0 && std::isfinite(alpha), "exponential weight needs alpha >= 0");
  require(p >= 0.0 && p <= 2.0, "exponential weight needs p in [0,2]");
  WeightFunction w;
  w.kind_ = Kind::kExponential;
  w.alpha_ = alpha;
  w.p_ = p;
  w.name_ = "exponential";
  return w;
}

WeightFunction WeightFunction::custom(Map map, std::string name) {
  require(static_cast<bool>(map), "custom weight needs a callable");
  WeightFunction w;
  w.kind_ = Kind::kCustom;
  w.custom_ = std::move(map);
  w.name_ = std::move(name);
  return w;
}

WeightFunction WeightFunction::constant(double value) {
  require(value > 0.0 && std::isfinite(value), "constant weight must be positive");
  return custom([value](std::span<const double>) { return value; }, "constant");
}

double WeightFunction::operator()(std::span<const double> y) const {
  switch (kind_) {
    case Kind::kPolynomial:
      return 1.0 + std::pow(norm(y), alpha_);
    case Kind::kExponential:
      return std::exp(alpha_ * std::pow(norm(y), p_));
    case Kind::kCustom:
      return custom_(y);
  }
  return 0.0;
}

// ---------------------------------------------------------------- discrete

DiscreteSignedMeasure::DiscreteSignedMeasure(int dim, std::vector<double> positions,
                                             std::vector<double> weights)
    : dim_(dim), positions_(std::move(positions)), weights_(std::move(weights)) {
  require(dim >= 1 && dim <= kMaxDim, "measure dimension must be in [1,3]");
  require(positions_.size() % static_cast<std::size_t>(dim) == 0, "positions not a multiple of dim");
  require(weights_.size() == size(), "one weight per atom required");
  check_finite(positions_, "atom positions");
  check_finite(weights_, "atom weights");
}

DiscreteSignedMeasure DiscreteSignedMeasure::uniform(int dim, std::vector<double> positions,
                                                     double weight) {
  require(dim >= 1 && dim <= kMaxDim, "measure dimension must be in [1,3]");
  require(positions.size() % static_cast<std::size_t>(dim) == 0, "positions not a multiple of dim");
  require(std::isfinite(weight), "uniform weight must be finite");
  check_finite(positions, "atom positions");
  DiscreteSignedMeasure m;
  m.dim_ = dim;
  m.positions_ = std::move(positions);
  m.uniform_weight_ = weight;
  return m;
}

double DiscreteSignedMeasure::total_mass() const {
  if (weights_.empty()) return uniform_weight_ * static_cast<double>(size());
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

Vector DiscreteSignedMeasure::mean() const {
  Vector m = Vector::Zero(dim_);
  const std::size_t n = size();
  if (n == 0) return m;
  if (weights_.empty()) {
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < dim_; ++a) m[a] += positions_[i * dim_ + a];
    return m / static_cast<double>(n);
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass += weights_[i];
    for (int a = 0; a < dim_; ++a) m[a] += weights_[i] * positions_[i * dim_ + a];
  }
  return mass != 0.0 ? Vector(m / mass) : m;
}

DiscreteSignedMeasure DiscreteSignedMeasure::canonical() const {
  const std::size_t n = size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto pos = [this](std::size_t i) { return position(i); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto pa = pos(a), pb = pos(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  });
  std::vector<double> out_pos;
  std::vector<double> out_w;
  for (std::size_t k = 0; k < n;) {
    const auto p = pos(order[k]);
    double w = 0.0;
    std::size_t j = k;
    while (j < n && std::ranges::equal(pos(order[j]), p)) w += weight(order[j++]);
    if (w != 0.0) {
      out_pos.insert(out_pos.end(), p.begin(), p.end());
      out_w.push_back(w);
    }
    k = j;
  }
  return DiscreteSignedMeasure(dim_ == 0 ? 1 : dim_, std::move(out_pos), std::move(out_w));
}

DiscreteSignedMeasure DiscreteSignedMeasure::scaled(double c) const {
  DiscreteSignedMeasure m = *this;
  m.uniform_weight_ *= c;
  for (double& w : m.weights_) w *= c;
  return m;
}

DiscreteSignedMeasure operator+(const DiscreteSignedMeasure& a, const DiscreteSignedMeasure& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  require(a.dim() == b.dim(), "cannot add measures of different dimension");
  std::vector<double> pos(a.positions_.begin(), a.positions_.end());
  pos.insert(pos.end(), b.positions_.begin(), b.positions_.end());
  std::vector<double> w;
  w.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) w.push_back(a.weight(i));
  for (std::size_t i = 0; i < b.size(); ++i) w.push_back(b.weight(i));
  return DiscreteSignedMeasure(a.dim(), std::move(pos), std::move(w));
}

DiscreteSignedMeasure operator-(const DiscreteSignedMeasure& a, const DiscreteSignedMeasure& b) {
  return a + b.scaled(-1.0);
}

// ---------------------------------------------------------------- grid

GridSignedMeasure::GridSignedMeasure(std::vector<double> origin, std::vector<double> cell_width)
    : origin_(std::move(origin)), cell_width_(std::move(cell_width)) {
  require(!origin_.empty() && origin_.size() <= static_cast<std::size_t>(kMaxDim),
          "grid dimension must be in [1,3]");
  require(origin_.size() == cell_width_.size(), "one cell width per axis required");
  check_finite(origin_, "grid origin");
  for (double w : cell_width_) require(w > 0.0 && std::isfinite(w), "cell_width must be positive");
}

void GridSignedMeasure::add(const CellIndex& index, double mass) {
  require(std::isfinite(mass), "cell mass must be finite");
  cells_[index] += mass;
}

double GridSignedMeasure::mass(const CellIndex& index) const {
  const auto it = cells_.find(index);
  return it == cells_.end() ? 0.0 : it->second;
}

double GridSignedMeasure::total_mass() const {
  double s = 0.0;
  for (const auto& [idx, m] : cells_) s += m;
  return s;
}

std::vector<double> GridSignedMeasure::cell_center(const CellIndex& index) const {
  std::vector<double> c(origin_.size());
  for (std::size_t a = 0; a < c.size(); ++a)
    c[a] = origin_[a] + (static_cast<double>(index[a]) + 0.5) * cell_width_[a];
  return c;
}

CellIndex GridSignedMeasure::locate(std::span<const double> y) const {
  CellIndex idx{};
  for (std::size_t a = 0; a < origin_.size(); ++a) {
    if (!std::isfinite(y[a])) throw InvalidArgument("non-finite atom position " + describe_point(y));
    idx[a] = static_cast<std::int64_t>(std::floor((y[a] - origin_[a]) / cell_width_[a]));
  }
  return idx;
}

bool GridSignedMeasure::same_grid(const GridSignedMeasure& other) const {
  return origin_ == other.origin_ && cell_width_ == other.cell_width_;
}

GridSignedMeasure GridSignedMeasure::scaled(double c) const {
  GridSignedMeasure g = *this;
  for (auto& [idx, m] : g.cells_) m *= c;
  return g;
}

GridSignedMeasure operator+(const GridSignedMeasure& a, const GridSignedMeasure& b) {
  require(a.same_grid(b), "grid measures must share origin and cell width");
  GridSignedMeasure g = a;
  for (const auto& [idx, m] : b.cells_) g.cells_[idx] += m;
  return g;
}

GridSignedMeasure operator-(const GridSignedMeasure& a, const GridSignedMeasure& b) {
  return a + b.scaled(-1.0);
}

// ---------------------------------------------------------------- flow

MeasureFlow::MeasureFlow(double tau, double horizon, double dt)
    : tau_(tau), horizon_(horizon), dt_(dt) {
  require(tau >= 0.0 && horizon > 0.0 && dt > 0.0, "flow needs tau >= 0, T > 0, dt > 0");
  history_steps_ = static_cast<std::size_t>(std::llround(tau / dt));
  horizon_steps_ = static_cast<std::size_t>(std::llround(horizon / dt));
}

std::size_t MeasureFlow::index_at_or_below(double t) const {
  if (slices_.empty()) throw EvaluationError("measure flow is empty");
  const double k = std::floor((t + tau_) / dt_ + 1e-9);
  if (k < 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), slices_.size() - 1);
}

const DiscreteSignedMeasure& MeasureFlow::slice(std::size_t k) const {
  if (k >= slices_.size()) {
    std::ostringstream os;
    os << "measure flow has no slice " << k << " (t=" << time(k) << "); " << slices_.size()
       << " slices stored";
    throw EvaluationError(os.str());
  }
  return slices_[k];
}

void MeasureFlow::push_back(DiscreteSignedMeasure m) {
  means_.push_back(m.mean());
  slices_.push_back(std::move(m));
}

// ---------------------------------------------------------------- operations

double weighted_tv(const DiscreteSignedMeasure& mu, const WeightFunction& phi) {
  if (mu.empty()) return 0.0;
  const DiscreteSignedMeasure c = mu.canonical();
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double w = phi(c.position(i));
    if (!std::isfinite(w) || w <= 0.0) {
      throw EvaluationError("weight evaluation failed at atom " + std::to_string(i) + " " +
                            describe_point(c.position(i)));
    }
    s += w * std::abs(c.weight(i));
  }
  return s;
}

double weighted_tv(const GridSignedMeasure& mu, const WeightFunction& phi) {
  double s = 0.0;
  for (const auto& [idx, m] : mu.cells()) {
    if (m == 0.0) continue;
    const auto center = mu.cell_center(idx);
    const double w = phi(center);
    if (!std::isfinite(w) || w <= 0.0) {
      throw EvaluationError("weight evaluation failed at cell center " + describe_point(center));
    }
    s += w * std::abs(m);
  }
  return s;
}

std::pair<DiscreteSignedMeasure, DiscreteSignedMeasure> hahn_split(const DiscreteSignedMeasure& mu) {
  const int dim = mu.empty() ? std::max(mu.dim(), 1) : mu.dim();
  std::vector<double> pp, pw, np, nw;
  if (!mu.empty()) {
    const DiscreteSignedMeasure c = mu.canonical();
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto p = c.position(i);
      const double w = c.weight(i);
      if (w > 0.0) {
        pp.insert(pp.end(), p.begin(), p.end());
        pw.push_back(w);
      } else {
        np.insert(np.end(), p.begin(), p.end());
        nw.push_back(-w);
      }
    }
  }
  return {DiscreteSignedMeasure(dim, std::move(pp), std::move(pw)),
          DiscreteSignedMeasure(dim, std::move(np), std::move(nw))};
}

std::pair<GridSignedMeasure, GridSignedMeasure> hahn_split(const GridSignedMeasure& mu) {
  GridSignedMeasure pos(mu.origin(), mu.cell_width());
  GridSignedMeasure neg(mu.origin(), mu.cell_width());
  for (const auto& [idx, m] : mu.cells()) {
    if (m > 0.0) pos.add(idx, m);
    else if (m < 0.0) neg.add(idx, -m);
  }
  return {pos, neg};
}

DiscreteSignedMeasure empirical_from_particles(std::span<const double> positions, int dim,
                                               std::optional<std::span<const double>> weights) {
  require(dim >= 1 && dim <= kMaxDim, "dimension must be in [1,3]");
  require(!positions.empty(), "empirical measure needs at least one particle");
  require(positions.size() % static_cast<std::size_t>(dim) == 0, "positions not a multiple of dim");
  const std::size_t n = positions.size() / static_cast<std::size_t>(dim);
  std::vector<double> pos(positions.begin(), positions.end());
  if (!weights) return DiscreteSignedMeasure::uniform(dim, std::move(pos), 1.0 / static_cast<double>(n));
  require(weights->size() == n, "one weight per particle required");
  return DiscreteSignedMeasure(dim, std::move(pos), std::vector<double>(weights->begin(), weights->end()));
}

GridSignedMeasure bin_to_grid(const DiscreteSignedMeasure& mu, std::vector<double> origin,
                              std::vector<double> cell_width) {
  GridSignedMeasure g(std::move(origin), std::move(cell_width));
  if (!mu.empty()) require(mu.dim() == g.dim(), "grid and measure dimensions differ");
  for (std::size_t i = 0; i < mu.size(); ++i) g.add(g.locate(mu.position(i)), mu.weight(i));
  return g;
}

// ---------------------------------------------------------------- csv

void write_csv(std::ostream& os, const DiscreteSignedMeasure& mu) {
  const int dim = std::max(mu.dim(), 1);
  for (int a = 0; a < dim; ++a) os << 'x' << a << ',';
  os << "weight\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (double v : mu.position(i)) os << v << ',';
    os << mu.weight(i) << '\n';
  }
}

void write_csv(std::ostream& os, const GridSignedMeasure& mu) {
  os << std::setprecision(17) << "# origin=";
  for (int a = 0; a < mu.dim(); ++a) os << (a ? ";" : "") << mu.origin()[a];
  os << " cell_width=";
  for (int a = 0; a < mu.dim(); ++a) os << (a ? ";" : "") << mu.cell_width()[a];
  os << '\n';
  for (int a = 0; a < mu.dim(); ++a) os << 'i' << a << ',';
  os << "mass\n";
  for (const auto& [idx, m] : mu.cells()) {
    for (int a = 0; a < mu.dim(); ++a) os << idx[a] << ',';
    os << m << '\n';
  }
}

DiscreteSignedMeasure read_discrete_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("empty measure csv");
  const int columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  const int dim = columns - 1;
  require(dim >= 1 && dim <= kMaxDim, "measure csv must have 2..4 columns");
  std::vector<double> pos, w;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    int c = 0;
    while (std::getline(row, cell, ',')) {
      const double v = std::stod(cell);
      (c < dim ? pos : w).push_back(v);
      ++c;
    }
    require(c == columns, "ragged measure csv row: " + line);
  }
  return DiscreteSignedMeasure(dim, std::move(pos), std::move(w));
}

}  // namespace lawsde
