#include "lawsde/mollify.hpp"

#include "lawsde/detail/parallel.hpp"
#include "lawsde/quadrature.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lawsde {
namespace {

double norm(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return std::sqrt(s);
}

// Integral of bump_profile(|2v - 1|) over v in [0, s], s in [0, 1].
double step_integral(double s) {
  const auto& gl = quadrature::gauss_legendre(64);
  double acc = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double v = 0.5 * s * (gl.nodes[i] + 1.0);
    acc += 0.5 * s * gl.weights[i] * bump_profile(std::abs(2.0 * v - 1.0));
  }
  return acc;
}

// Midpoint grid over [-R, R]^D; calls visit(point) for cells whose center is in the ball.
template <class Visit>
void for_each_ball_point(int dim, double R, int resolution, Visit visit) {
  const double h = 2.0 * R / resolution;
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(resolution);
  std::vector<double> z(static_cast<std::size_t>(dim));
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    double r2 = 0.0;
    for (int a = dim - 1; a >= 0; --a) {
      z[a] = -R + (static_cast<double>(rem % resolution) + 0.5) * h;
      rem /= resolution;
      r2 += z[a] * z[a];
    }
    if (r2 <= R * R * (1.0 + 1e-14)) visit(k, std::span<const double>(z));
  }
}

}  // namespace

double bump_profile(double radius) {
  if (radius >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - radius * radius));
}

double cutoff(std::span<const double> z) {
  const double rho = norm(z);
  if (rho <= 1.0) return 1.0;
  if (rho >= 2.0) return 0.0;
  static const double total = step_integral(1.0);
  return std::clamp(step_integral(2.0 - rho) / total, 0.0, 1.0);
}

MollifiedMap::MollifiedMap(JointMap f, int joint_dim, MollifierSpec spec, int power)
    : f_(std::move(f)), dim_(joint_dim), spec_(spec), power_(power) {
  require(static_cast<bool>(f_), "mollifier needs a coefficient map");
  require(joint_dim >= 1 && joint_dim <= kMaxJointDim, "joint dimension must be in [1,6]");
  require(spec.n >= 1, "cutoff scale n must be positive");
  require(spec.r > 0.0 && std::isfinite(spec.r), "bump sharpness r must be positive");
  require(spec.resolution >= 1, "quadrature resolution must be positive");
  require(power == 1 || power == 2, "cutoff power must be 1 or 2");
  const int m = spec.resolution;
  const double h = 2.0 / m;
  std::size_t total = 1;
  for (int a = 0; a < dim_; ++a) total *= static_cast<std::size_t>(m);
  std::vector<double> u(static_cast<std::size_t>(dim_));
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    double r2 = 0.0;
    for (int a = dim_ - 1; a >= 0; --a) {
      u[a] = -1.0 + (static_cast<double>(rem % m) + 0.5) * h;
      rem /= m;
      r2 += u[a] * u[a];
    }
    const double w = bump_profile(std::sqrt(r2));
    if (w <= 0.0) continue;
    for (double v : u) offsets_.push_back(v / spec.r);
    weights_.push_back(w);
  }
  require(!weights_.empty(), "quadrature grid misses the bump support");
  const double sum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  for (double& w : weights_) w /= sum;
}

double MollifiedMap::weight_sum() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

Eigen::VectorXd MollifiedMap::operator()(double t, std::span<const double> z) const {
  require(static_cast<int>(z.size()) == dim_, "mollified map evaluated with wrong dimension");
  std::vector<double> scaled(z.begin(), z.end());
  for (double& v : scaled) v /= spec_.n;
  const double psi = cutoff(scaled);
  Eigen::VectorXd acc;
  if (psi == 0.0) {
    acc = f_(t, z);
    acc.setZero();
    return acc;
  }
  std::vector<double> point(z.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    for (int a = 0; a < dim_; ++a) point[a] = z[a] + offsets_[i * dim_ + a];
    Eigen::VectorXd v = f_(t, point);
    if (!v.allFinite()) {
      std::ostringstream os;
      os << "non-finite coefficient value at (";
      for (int a = 0; a < dim_; ++a) os << (a ? "," : "") << point[a];
      os << ") inside the mollifier support";
      throw EvaluationError(os.str());
    }
    if (i == 0) acc = weights_[i] * v;
    else acc += weights_[i] * v;
  }
  return std::pow(psi, power_) * acc;
}

JointMap MollifiedMap::as_map() const {
  return [self = *this](double t, std::span<const double> z) { return self(t, z); };
}

MollifiedMap mollify_coefficient(JointMap f, int joint_dim, const MollifierSpec& spec, int power) {
  return MollifiedMap(std::move(f), joint_dim, spec, power);
}

double sup_distance_on_ball(const JointMap& f, const JointMap& g, int joint_dim, double R,
                            int resolution, const std::vector<double>& times) {
  require(R > 0.0 && resolution >= 1, "ball needs R > 0 and a positive resolution");
  double best = 0.0;
  for (double t : times) {
    for_each_ball_point(joint_dim, R, resolution, [&](std::size_t, std::span<const double> z) {
      best = std::max(best, (f(t, z) - g(t, z)).norm());
    });
  }
  return best;
}

double lp_distance_on_ball(const JointMap& f, const JointMap& g, int joint_dim, double p, double R,
                           double T, int space_resolution, int time_resolution) {
  require(p >= 1.0, "p must be at least 1");
  require(R > 0.0 && T > 0.0, "need R > 0 and T > 0");
  require(space_resolution >= 1 && time_resolution >= 1, "resolutions must be positive");
  const double h = 2.0 * R / space_resolution;
  const double dt = T / time_resolution;
  const double volume = std::pow(h, joint_dim) * dt;
  // Collect ball points first so the parallel sum has a fixed order.
  std::vector<double> pts;
  for_each_ball_point(joint_dim, R, space_resolution, [&](std::size_t, std::span<const double> z) {
    pts.insert(pts.end(), z.begin(), z.end());
  });
  const std::size_t n = pts.size() / static_cast<std::size_t>(joint_dim);
  std::vector<double> terms(n * static_cast<std::size_t>(time_resolution));
  detail::parallel_for(terms.size(), [&](std::size_t k) {
    const std::size_t it = k / n, ip = k % n;
    const double t = (static_cast<double>(it) + 0.5) * dt;
    const std::span<const double> z(pts.data() + ip * joint_dim, static_cast<std::size_t>(joint_dim));
    terms[k] = std::pow((f(t, z) - g(t, z)).norm(), p);
  });
  double s = 0.0;
  for (double v : terms) s += v;
  return std::pow(s * volume, 1.0 / p);
}

}  // namespace lawsde
