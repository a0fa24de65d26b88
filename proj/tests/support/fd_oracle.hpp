#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace testing_support {

// Central differences over decade steps 1e-2 .. 1e-7. Per coordinate, keeps the
// step with the smallest estimated error: truncation from the change against
// the next larger step (error scales as h^2), rounding from a few ulps of f / h.
template <class F>
std::vector<double> converged_central_grad(F&& f, std::span<const double> p0) {
  constexpr int kSteps = 6;
  constexpr double kUlps = 2.0;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  std::vector<double> p(p0.begin(), p0.end()), g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    double d[kSteps], scale[kSteps], step[kSteps];
    double h = 1e-2;
    for (int s = 0; s < kSteps; ++s, h /= 10.0) {
      p[i] = orig + h;
      const double up = f(std::span<const double>(p));
      p[i] = orig - h;
      const double down = f(std::span<const double>(p));
      p[i] = orig;
      d[s] = (up - down) / (2.0 * h);
      scale[s] = std::max(std::abs(up), std::abs(down));
      step[s] = h;
    }
    double best = std::numeric_limits<double>::infinity();
    for (int s = 1; s < kSteps; ++s) {
      const double err = std::abs(d[s] - d[s - 1]) / 99.0 + kUlps * kEps * scale[s] / step[s];
      if (err < best) {
        best = err;
        g[i] = d[s];
      }
    }
  }
  return g;
}

}  // namespace testing_support
