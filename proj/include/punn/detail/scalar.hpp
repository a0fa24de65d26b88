#pragma once

#include <cmath>

namespace punn {

inline double softplus(double x) noexcept {
  // log(1 + e^x) without overflow for large x
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double inverse_softplus(double y) noexcept {
  // y > 0; log(e^y - 1)
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace punn
