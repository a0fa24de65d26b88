#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "punn/baseline.hpp"
#include "punn/datasets.hpp"
#include "punn/partition.hpp"

namespace punn {

using Model = std::variant<PartitionModel, SoftmaxMlp>;

std::size_t model_param_count(const Model& model) noexcept;
std::size_t model_input_dim(const Model& model) noexcept;
std::size_t model_num_classes(const Model& model) noexcept;

/// Class probabilities for every row (n x C).
DenseMatrix model_predict_proba(const Model& model, const DenseMatrix& x);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 0.01;
  std::uint64_t seed = 42;
  double loss_eps = 1e-10;
  bool shuffle = true;

  void validate() const;
};

struct RunMetrics {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> loss_history;  // mean training loss per epoch
  double wall_ms = 0.0;
  std::size_t param_count = 0;
  std::size_t epochs = 0;
};

/// Mini-batch Adam on the model's own loss (NLL for partition models,
/// cross-entropy for the softmax baseline). Shuffles with a stream derived
/// from cfg.seed. Accuracies are filled in for `train` and, if given,
/// `test`.
RunMetrics train(Model& model, const Dataset& train, const TrainConfig& cfg,
                 const Dataset* test = nullptr);

struct Evaluation {
  double accuracy = 0.0;
  DenseMatrix confusion;  // C x C counts, rows = true class

  /// Rows scaled to sum to 1 (rows without samples stay zero).
  DenseMatrix normalized_confusion() const;
};

Evaluation evaluate(const Model& model, const Dataset& ds);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population std
};

MetricSummary summarize(std::span<const double> values);

struct MultiSeedResult {
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;
  MetricSummary train_accuracy;
  MetricSummary test_accuracy;
  MetricSummary wall_ms;
};

/// Runs `run` once per seed and aggregates accuracies.
MultiSeedResult multi_seed(std::span<const std::uint64_t> seeds,
                           const std::function<RunMetrics(std::uint64_t)>& run);

/// Seeds base, base + 1, ..., base + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count);

struct GridBounds {
  double x1_lo = -1.0, x1_hi = 1.0;
  double x2_lo = -1.0, x2_hi = 1.0;
};

struct GridResult {
  std::size_t resolution = 0;
  DenseMatrix points;  // resolution^2 x 2, x1 fastest
  DenseMatrix h;       // partition values (class probabilities for the baseline)
  std::vector<std::size_t> predicted;
};

GridResult grid_eval(const Model& model, const GridBounds& bounds, std::size_t resolution);

}  // namespace punn
