#pragma once

#include "lawsde/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace lawsde {

/// Map (t, z) -> R^k with z in R^D (D = 2d for pairwise coefficients).
using JointMap = std::function<Eigen::VectorXd(double, std::span<const double>)>;

/// Smooth radial bump exp(1 - 1/(1 - |u|^2)) on the open unit ball, 0 outside.
double bump_profile(double radius);

/// Radial cutoff: 1 on |z| <= 1, 0 on |z| >= 2, smooth in between (a
/// normalised running integral of the bump profile).
double cutoff(std::span<const double> z);

struct MollifierSpec {
  int n = 1;            // cutoff radius scale: support of the result is |z| < 2n
  double r = 10.0;      // bump sharpness: the kernel is supported on |z~| <= 1/r
  int resolution = 21;  // quadrature points per axis over the bump support

  static MollifierSpec with_default_schedule(int n) { return {n, 10.0 * n, 21}; }
};

/// z |-> cutoff(z/n)^power * sum_i w_i f(t, z + u_i / r).
///
/// The weights w_i are the bump profile on a midpoint tensor grid of the
/// unit cube, normalised to sum to one, so constants are reproduced exactly.
class MollifiedMap {
 public:
  MollifiedMap(JointMap f, int joint_dim, MollifierSpec spec, int power);

  Eigen::VectorXd operator()(double t, std::span<const double> z) const;
  JointMap as_map() const;

  int joint_dim() const { return dim_; }
  const MollifierSpec& spec() const { return spec_; }
  double weight_sum() const;
  std::size_t quadrature_points() const { return weights_.size(); }
  /// Radius of the kernel support, 1/r.
  double support_radius() const { return 1.0 / spec_.r; }

 private:
  JointMap f_;
  int dim_;
  MollifierSpec spec_;
  int power_;
  std::vector<double> offsets_;  // quadrature_points x dim, already scaled by 1/r
  std::vector<double> weights_;
};

/// Drift uses power 2 (cutoff squared), dispersion power 1.
MollifiedMap mollify_coefficient(JointMap f, int joint_dim, const MollifierSpec& spec, int power);

/// max over t in `times` and midpoint grid points of [-R, R]^D inside the
/// closed ball |z| <= R of |f - g|.
double sup_distance_on_ball(const JointMap& f, const JointMap& g, int joint_dim, double R,
                            int resolution, const std::vector<double>& times = {0.0});

/// (sum |f - g|^p * cell volume)^(1/p) over midpoint cells of [0, T] x ball(R).
double lp_distance_on_ball(const JointMap& f, const JointMap& g, int joint_dim, double p, double R,
                           double T, int space_resolution, int time_resolution = 1);

}  // namespace lawsde
