#pragma once

#include "lawsde/coefficients.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace lawsde {

/// Parameters understood by the built-in coefficient catalog.
struct CatalogParams {
  int dim = 1;
  double theta = 1.0;  // drift strength
  double sigma = 1.0;  // dispersion scale: sigma(t,x,y) = sigma * I
  double shift = 0.0;  // additive drift offset
  double c = 1.0;      // constant drift value
};

using PairwiseFactory = std::function<PairwiseMeanFieldSpec(const CatalogParams&)>;

/// Named pairwise coefficient families.
///
///   zero              b = 0,                    sigma = 0
///   constant          b = c 1,                  sigma = s I
///   linear-meanfield  b = theta (y - x),        sigma = s I
///   ou-attraction     b = -theta x + shift 1,   sigma = s I
///   cubic             b = theta |x|^2 x,        sigma = s I
///   sign              b = sign(y) (per axis),   sigma = s I
///   sin-product       b = sin(<x, y>) 1,        sigma = s I
///
/// Further entries can be registered at runtime.
class CoefficientCatalog {
 public:
  static CoefficientCatalog& instance();

  void register_pairwise(const std::string& name, PairwiseFactory factory);
  bool contains(const std::string& name) const;
  PairwiseMeanFieldSpec make(const std::string& name, const CatalogParams& params) const;
  std::vector<std::string> names() const;

 private:
  CoefficientCatalog();
  std::map<std::string, PairwiseFactory> factories_;
};

inline PairwiseMeanFieldSpec make_pairwise(const std::string& name, const CatalogParams& params = {}) {
  return CoefficientCatalog::instance().make(name, params);
}

}  // namespace lawsde
