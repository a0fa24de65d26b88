#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "punn/gates.hpp"
#include "punn/numeric.hpp"

namespace punn {

/// Axis-aligned box sampled on a regular grid. Points are ordered with the
/// first axis varying fastest; each axis includes both end points.
struct GridBox {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> resolution;

  std::size_t dim() const noexcept { return lo.size(); }
  std::size_t points() const noexcept;
  /// points() x dim() coordinates.
  DenseMatrix coordinates() const;
  void validate() const;
};

/// A probability map p : box -> simplex sampled on a grid.
struct ProbabilityMapGrid {
  GridBox box;
  DenseMatrix values;  // points x k

  std::size_t partitions() const noexcept { return values.cols(); }

  /// Samples `p` at every grid point.
  static ProbabilityMapGrid sample(GridBox box,
                                   const std::function<std::vector<double>(std::span<const double>)>& p);

  /// Throws DomainError unless every entry is > 0 and every row sums to 1
  /// within 1e-12.
  void validate() const;
};

struct GammaGrid {
  GridBox box;
  DenseMatrix values;  // points x (k - 1), entries in (0, 1)
};

GammaGrid gamma_from_pmap(const ProbabilityMapGrid& p);

/// Partition values obtained by using gamma as the gate values.
DenseMatrix exact_reconstruct(const GammaGrid& gamma);

inline constexpr double kGammaClamp = 1e-9;

struct PhiGrid {
  DenseMatrix values;        // points x (k - 1)
  std::size_t clamped = 0;   // entries pulled into [kGammaClamp, 1 - kGammaClamp]
};

/// Inverse activation applied to gamma: logit for the sigmoid. Other
/// activations are not injective onto (0, 1) and are rejected.
PhiGrid phi_targets(const GammaGrid& gamma, Activation activation = Activation::Sigmoid);

struct DensityFitConfig {
  std::vector<std::size_t> hidden{16};
  std::size_t epochs = 2000;
  double lr = 0.01;
  std::uint64_t seed = 42;
  /// After gradient training, solve the output layer exactly by linear
  /// least squares on the final hidden features.
  bool refit_output = true;
};

struct DensityFitResult {
  std::vector<MlpParams> nets;        // theta_1..theta_{k-1}
  std::vector<double> mse;            // final least-squares error per gate
  DenseMatrix fitted;                 // points x k fitted partition values
  double sup_error = 0.0;             // max_i max_grid |h~_i - p_i|
  double gate_bound = 0.0;            // sum_j max_grid |sigmoid(theta_j) - gamma_j|
  std::size_t clamped = 0;
  std::size_t param_count = 0;
};

/// Trains one MLP per gate against its logit target and reports the grid
/// sup-norm error of the resulting partition.
DensityFitResult fit_density_demo(const ProbabilityMapGrid& p, const DensityFitConfig& cfg);

struct ConvergencePoint {
  std::vector<std::size_t> hidden;
  std::size_t epochs = 0;
  std::size_t param_count = 0;
  double sup_error = 0.0;
  double gate_bound = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergencePoint> points;
  bool monotone = true;  // sup error non-increasing along the sweep
};

/// Runs fit_density_demo once per hidden-width entry.
ConvergenceReport density_sweep(const ProbabilityMapGrid& p, const DensityFitConfig& base,
                                std::span<const std::vector<std::size_t>> hidden_sweep);

/// Probability map realized by a random PUNN with sigmoid-MLP gates of the
/// given hidden widths. Returns the map and the generating nets.
struct RandomPunnMap {
  ProbabilityMapGrid map;
  std::vector<MlpParams> nets;
};
RandomPunnMap random_punn_map(GridBox box, std::size_t partitions,
                              std::span<const std::size_t> hidden, std::uint64_t seed,
                              double weight_scale = 1.0);

}  // namespace punn
