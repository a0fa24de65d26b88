#pragma once

#include <cmath>
#include <iterator>
#include <vector>

#include "punn/partition.hpp"

namespace testing_support {

using namespace punn;

inline constexpr Activation kActivations[] = {Activation::Sigmoid, Activation::Gaussian, Activation::Bump,
                                              Activation::BumpTanh};
inline constexpr GateFamily kFamilies[] = {GateFamily::Mlp,   GateFamily::Radial,       GateFamily::Ellipsoid,
                                           GateFamily::Shell, GateFamily::FourierShell, GateFamily::HarmonicShell};

inline std::vector<double> uniform_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Fourier shells exist only in two dimensions; other d fall back to harmonic shells.
inline GateSpec random_gate(Rng& rng, GateFamily family, Activation act, std::size_t d) {
  if (family == GateFamily::FourierShell && d != 2) family = GateFamily::HarmonicShell;
  const auto c = uniform_vec(rng, d, -1.0, 1.0);
  const double s = rng.uniform(0.5, 5.0);
  switch (family) {
    case GateFamily::Mlp: {
      GateSpec g = GateSpec::mlp(act, MlpLayout({d, 1 + rng.below(8), 1}), rng);
      if (g.has_bump_width()) g.params().back() = rng.uniform(-1.0, 1.0);
      for (double& p : g.params()) p += rng.normal(0.0, 0.1);
      return g;
    }
    case GateFamily::Radial: return GateSpec::radial(act, c, rng.uniform(0.3, 1.5), s);
    case GateFamily::Ellipsoid:
      return GateSpec::ellipsoid(act, c, uniform_vec(rng, d, 0.3, 2.0), s, rng.uniform(-1.0, 1.0));
    case GateFamily::Shell: {
      const double r1 = rng.uniform(0.05, 0.5);
      return GateSpec::shell(act, c, r1, r1 + rng.uniform(0.3, 1.5), s);
    }
    case GateFamily::FourierShell: {
      const std::size_t K = 1 + rng.below(5);
      FourierRadius r;
      r.a0 = rng.uniform(1.0, 2.0);
      r.a = uniform_vec(rng, K, -0.3 / double(K), 0.3 / double(K));
      r.b = uniform_vec(rng, K, -0.3 / double(K), 0.3 / double(K));
      const double inner = rng.uniform() < 0.5 ? rng.uniform(0.05, 0.4) : -1.0;
      return GateSpec::fourier_shell(act, c, s, r, inner);
    }
    case GateFamily::HarmonicShell: {
      HarmonicRadius r;
      r.dim = d;
      r.degree = rng.below(3);
      const std::size_t m = harmonic_coeff_count(d, r.degree);
      r.coeffs = uniform_vec(rng, m, -0.3 / double(m), 0.3 / double(m));
      r.coeffs[0] = rng.uniform(1.0, 2.0);
      const double inner = rng.uniform() < 0.5 ? rng.uniform(0.05, 0.4) : -1.0;
      return GateSpec::harmonic_shell(act, c, s, r, inner);
    }
  }
  return {};
}

inline GateSpec random_gate(Rng& rng, std::size_t d) {
  const GateFamily f = kFamilies[rng.below(std::size(kFamilies))];
  const Activation a = kActivations[rng.below(std::size(kActivations))];
  return random_gate(rng, f, a, d);
}

inline PartitionModel random_model(Rng& rng, std::size_t k, std::size_t d) {
  std::vector<GateSpec> gates;
  for (std::size_t i = 0; i + 1 < k; ++i) gates.push_back(random_gate(rng, d));
  const std::size_t C = 2 + rng.below(k - 1);
  return PartitionModel(std::move(gates), C);
}

// A point at distance [0.2, 2.5] from `c` in a random direction.
inline std::vector<double> point_near(Rng& rng, std::span<const double> c) {
  std::vector<double> dir(c.size());
  double norm = 0.0;
  for (double& v : dir) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  const double r = rng.uniform(0.2, 2.5);
  std::vector<double> x(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) x[j] = c[j] + r * dir[j] / norm;
  return x;
}

}  // namespace testing_support
