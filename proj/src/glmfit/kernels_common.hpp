#pragma once

#include <cmath>

namespace kgap::glmfit::kernels::detail {

inline double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + e^eta) without overflow.
inline double softplus(double eta) {
  return (eta > 0.0 ? eta : 0.0) + std::log1p(std::exp(-std::abs(eta)));
}

}  // namespace kgap::glmfit::kernels::detail
