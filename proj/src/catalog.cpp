#include "lawsde/catalog.hpp"

#include <cmath>

namespace lawsde {
namespace {

using Span = std::span<const double>;

Vector span_vector(Span s) {
  Vector v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v[static_cast<Eigen::Index>(i)] = s[i];
  return v;
}

// sigma = s I, independent of (t, x, y); expressed as one separable term.
void constant_dispersion(PairwiseMeanFieldSpec& spec, double s) {
  const int d = spec.dim;
  const Matrix value = s * Matrix::Identity(d, d);
  spec.sigma = [value](double, Span, Span) { return value; };
  spec.separable_sigma = {{[value](double, Span) { return value; }, [](double, Span) { return 1.0; }}};
  spec.sigma_depends_on_y = false;
  if (s != 0.0) {
    const double inv = 1.0 / s;
    auto b = spec.b;
    spec.b_tilde = [b, inv](double t, Span x, Span y) -> Vector { return inv * b(t, x, y); };
  } else {
    spec.b_tilde = [d](double, Span, Span) -> Vector { return Vector::Zero(d); };
  }
}

PairwiseMeanFieldSpec base(const std::string& name, const CatalogParams& p) {
  require(p.dim >= 1 && p.dim <= kMaxDim, "catalog dimension must be in [1,3]");
  PairwiseMeanFieldSpec s;
  s.name = name;
  s.dim = p.dim;
  s.noise_dim = p.dim;
  return s;
}

PairwiseMeanFieldSpec make_zero(const CatalogParams& p) {
  auto s = base("zero", p);
  const int d = p.dim;
  s.b = [d](double, Span, Span) -> Vector { return Vector::Zero(d); };
  s.separable_b = {{[d](double, Span) -> Matrix { return Matrix::Zero(d, 1); },
                    [](double, Span) -> Vector { return Vector::Ones(1); }}};
  constant_dispersion(s, 0.0);
  return s;
}

PairwiseMeanFieldSpec make_constant(const CatalogParams& p) {
  auto s = base("constant", p);
  const int d = p.dim;
  const double c = p.c;
  s.b = [d, c](double, Span, Span) -> Vector { return Vector::Constant(d, c); };
  s.separable_b = {{[d, c](double, Span) -> Matrix { return Matrix::Constant(d, 1, c); },
                    [](double, Span) -> Vector { return Vector::Ones(1); }}};
  constant_dispersion(s, p.sigma);
  return s;
}

PairwiseMeanFieldSpec make_linear_meanfield(const CatalogParams& p) {
  auto s = base("linear-meanfield", p);
  const int d = p.dim;
  const double th = p.theta;
  s.b = [th](double, Span x, Span y) -> Vector { return th * (span_vector(y) - span_vector(x)); };
  // theta (y - x) = (-theta x) * 1 + (theta I) * y
  s.separable_b = {{[th](double, Span x) -> Matrix { return -th * span_vector(x); },
                    [](double, Span) -> Vector { return Vector::Ones(1); }},
                   {[th, d](double, Span) -> Matrix { return th * Matrix::Identity(d, d); },
                    [](double, Span y) -> Vector { return span_vector(y); }}};
  constant_dispersion(s, p.sigma);
  return s;
}

PairwiseMeanFieldSpec make_ou_attraction(const CatalogParams& p) {
  auto s = base("ou-attraction", p);
  const double th = p.theta, sh = p.shift;
  s.b = [th, sh](double, Span x, Span) -> Vector {
    Vector v = -th * span_vector(x);
    return v.array() + sh;
  };
  s.separable_b = {{[th, sh](double, Span x) -> Matrix {
                      Vector v = -th * span_vector(x);
                      return Matrix(v.array() + sh);
                    },
                    [](double, Span) -> Vector { return Vector::Ones(1); }}};
  constant_dispersion(s, p.sigma);
  return s;
}

PairwiseMeanFieldSpec make_cubic(const CatalogParams& p) {
  auto s = base("cubic", p);
  const double th = p.theta;
  s.b = [th](double, Span x, Span) -> Vector {
    const Vector v = span_vector(x);
    return th * v.squaredNorm() * v;
  };
  s.separable_b = {{[th](double, Span x) -> Matrix {
                      const Vector v = span_vector(x);
                      return th * v.squaredNorm() * v;
                    },
                    [](double, Span) -> Vector { return Vector::Ones(1); }}};
  constant_dispersion(s, p.sigma);
  return s;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

PairwiseMeanFieldSpec make_sign(const CatalogParams& p) {
  auto s = base("sign", p);
  const int d = p.dim;
  auto h = [](Span y) -> Vector {
    Vector v(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) v[static_cast<Eigen::Index>(i)] = sign(y[i]);
    return v;
  };
  s.b = [h](double, Span, Span y) { return h(y); };
  s.separable_b = {{[d](double, Span) -> Matrix { return Matrix::Identity(d, d); },
                    [h](double, Span y) { return h(y); }}};
  constant_dispersion(s, p.sigma);
  return s;
}

PairwiseMeanFieldSpec make_sin_product(const CatalogParams& p) {
  auto s = base("sin-product", p);
  const int d = p.dim;
  s.b = [d](double, Span x, Span y) -> Vector {
    return Vector::Constant(d, std::sin(span_vector(x).dot(span_vector(y))));
  };
  constant_dispersion(s, p.sigma);
  return s;
}

}  // namespace

CoefficientCatalog::CoefficientCatalog() {
  factories_["zero"] = make_zero;
  factories_["constant"] = make_constant;
  factories_["linear-meanfield"] = make_linear_meanfield;
  factories_["ou-attraction"] = make_ou_attraction;
  factories_["cubic"] = make_cubic;
  factories_["sign"] = make_sign;
  factories_["sin-product"] = make_sin_product;
}

CoefficientCatalog& CoefficientCatalog::instance() {
  static CoefficientCatalog catalog;
  return catalog;
}

void CoefficientCatalog::register_pairwise(const std::string& name, PairwiseFactory factory) {
  require(!name.empty() && static_cast<bool>(factory), "registration needs a name and a factory");
  factories_[name] = std::move(factory);
}

bool CoefficientCatalog::contains(const std::string& name) const { return factories_.count(name) > 0; }

PairwiseMeanFieldSpec CoefficientCatalog::make(const std::string& name, const CatalogParams& params) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) throw InvalidArgument("unknown coefficient '" + name + "'");
  return it->second(params);
}

std::vector<std::string> CoefficientCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : factories_) out.push_back(name);
  return out;
}

}  // namespace lawsde
