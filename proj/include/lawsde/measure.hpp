#pragma once

#include "lawsde/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lawsde {

/// Strictly positive weight phi used by the weighted total-variation norm.
class WeightFunction {
 public:
  enum class Kind { kPolynomial, kExponential, kCustom };
  using Map = std::function<double(std::span<const double>)>;

  /// 1 + |y|^alpha
  static WeightFunction polynomial(double alpha);
  /// exp(alpha |y|^p), p in [0, 2]
  static WeightFunction exponential(double alpha, double p);
  static WeightFunction custom(Map map, std::string name = "custom");
  static WeightFunction constant(double value);

  double operator()(std::span<const double> y) const;

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double p() const { return p_; }
  const std::string& name() const { return name_; }

 private:
  Kind kind_ = Kind::kCustom;
  double alpha_ = 0.0;
  double p_ = 0.0;
  Map custom_;
  std::string name_;
};

/// Finitely many weighted atoms in R^d.
///
/// Empirical measures store a single shared weight instead of one weight per
/// atom so that long particle histories stay compact.
class DiscreteSignedMeasure {
 public:
  DiscreteSignedMeasure() = default;
  DiscreteSignedMeasure(int dim, std::vector<double> positions, std::vector<double> weights);

  /// Atoms carrying the same weight each.
  static DiscreteSignedMeasure uniform(int dim, std::vector<double> positions, double weight);

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : positions_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return size() == 0; }

  std::span<const double> position(std::size_t i) const {
    return {positions_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  double weight(std::size_t i) const { return weights_.empty() ? uniform_weight_ : weights_[i]; }
  std::span<const double> positions() const { return positions_; }
  bool has_uniform_weights() const { return weights_.empty(); }

  double total_mass() const;
  /// Weighted mean of the atom positions, normalised by the total mass.
  Vector mean() const;

  /// Merge atoms at identical positions (sorted lexicographically); drop zeros.
  DiscreteSignedMeasure canonical() const;

  DiscreteSignedMeasure scaled(double c) const;
  /// Atom-list concatenation; coincident atoms merge under `canonical`.
  friend DiscreteSignedMeasure operator+(const DiscreteSignedMeasure& a, const DiscreteSignedMeasure& b);
  friend DiscreteSignedMeasure operator-(const DiscreteSignedMeasure& a, const DiscreteSignedMeasure& b);

 private:
  int dim_ = 0;
  std::vector<double> positions_;
  std::vector<double> weights_;
  double uniform_weight_ = 0.0;
};

using CellIndex = std::array<std::int64_t, kMaxDim>;

/// Histogram of signed mass on a regular grid of half-open cells.
class GridSignedMeasure {
 public:
  GridSignedMeasure() = default;
  GridSignedMeasure(std::vector<double> origin, std::vector<double> cell_width);

  int dim() const { return static_cast<int>(origin_.size()); }
  const std::vector<double>& origin() const { return origin_; }
  const std::vector<double>& cell_width() const { return cell_width_; }
  const std::map<CellIndex, double>& cells() const { return cells_; }

  void add(const CellIndex& index, double mass);
  double mass(const CellIndex& index) const;
  double total_mass() const;
  std::vector<double> cell_center(const CellIndex& index) const;
  /// Cell containing y: floor((y - origin) / width) per axis.
  CellIndex locate(std::span<const double> y) const;

  bool same_grid(const GridSignedMeasure& other) const;
  GridSignedMeasure scaled(double c) const;
  friend GridSignedMeasure operator+(const GridSignedMeasure& a, const GridSignedMeasure& b);
  friend GridSignedMeasure operator-(const GridSignedMeasure& a, const GridSignedMeasure& b);

 private:
  std::vector<double> origin_;
  std::vector<double> cell_width_;
  std::map<CellIndex, double> cells_;
};

/// Time-indexed laws on the uniform grid t_k = -tau + k dt.
class MeasureFlow {
 public:
  MeasureFlow() = default;
  MeasureFlow(double tau, double horizon, double dt);

  double tau() const { return tau_; }
  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  /// Number of slices covering [-tau, 0) (the slice at t = 0 is index history_steps()).
  std::size_t history_steps() const { return history_steps_; }
  std::size_t total_slices() const { return history_steps_ + horizon_steps_ + 1; }

  std::size_t size() const { return slices_.size(); }
  double time(std::size_t k) const { return -tau_ + static_cast<double>(k) * dt_; }
  /// Index of the slice at or below t (clamped to the stored range).
  std::size_t index_at_or_below(double t) const;

  const DiscreteSignedMeasure& slice(std::size_t k) const;
  const Vector& mean(std::size_t k) const { return means_.at(k); }

  void push_back(DiscreteSignedMeasure m);

 private:
  double tau_ = 0.0;
  double horizon_ = 0.0;
  double dt_ = 0.0;
  std::size_t history_steps_ = 0;
  std::size_t horizon_steps_ = 0;
  std::vector<DiscreteSignedMeasure> slices_;
  std::vector<Vector> means_;
};

/// sum over atoms of phi(position) |weight| after merging coincident atoms.
double weighted_tv(const DiscreteSignedMeasure& mu, const WeightFunction& phi);
/// sum over cells of phi(cell center) |mass|.
double weighted_tv(const GridSignedMeasure& mu, const WeightFunction& phi);

std::pair<DiscreteSignedMeasure, DiscreteSignedMeasure> hahn_split(const DiscreteSignedMeasure& mu);
std::pair<GridSignedMeasure, GridSignedMeasure> hahn_split(const GridSignedMeasure& mu);

/// Positions are a flat array of N points in R^dim. Default weights are 1/N.
DiscreteSignedMeasure empirical_from_particles(std::span<const double> positions, int dim,
                                               std::optional<std::span<const double>> weights = {});

GridSignedMeasure bin_to_grid(const DiscreteSignedMeasure& mu, std::vector<double> origin,
                              std::vector<double> cell_width);

void write_csv(std::ostream& os, const DiscreteSignedMeasure& mu);
void write_csv(std::ostream& os, const GridSignedMeasure& mu);
DiscreteSignedMeasure read_discrete_csv(std::istream& is);

}  // namespace lawsde
