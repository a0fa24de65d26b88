#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "punn/numeric.hpp"

namespace oracle {

// Plain-loop forward pass over the flat layout: weights (out x in) then bias per layer.
inline std::vector<double> mlp(const std::vector<std::size_t>& widths, std::span<const double> p,
                               std::vector<double> x) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    std::vector<double> y(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double s = p[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += p[off + o * in + i] * x[i];
      y[o] = (l + 2 < widths.size()) ? std::max(0.0, s) : s;
    }
    off += in * out + out;
    x = std::move(y);
  }
  return x;
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline std::vector<double> random_vector(punn::Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace oracle
