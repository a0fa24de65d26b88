#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "punn/gates.hpp"
#include "punn/numeric.hpp"

namespace punn {

/// k-1 gates producing k partition functions
///   h_1 = g_1,  h_i = prod_{j<i}(1 - g_j) g_i,  h_k = prod_{j<k}(1 - g_j),
/// aggregated into C <= k classes through class_map (partition -> class).
class PartitionModel {
 public:
  PartitionModel() = default;

  /// An empty class_map means round-robin assignment i mod C, which is the
  /// identity when k == C.
  PartitionModel(std::vector<GateSpec> gates, std::size_t num_classes,
                 std::vector<std::size_t> class_map = {});

  std::size_t partitions() const noexcept { return gates_.size() + 1; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t input_dim() const noexcept { return gates_.front().input_dim(); }
  std::span<const std::size_t> class_map() const noexcept { return class_map_; }

  std::vector<GateSpec>& gates() noexcept { return gates_; }
  const std::vector<GateSpec>& gates() const noexcept { return gates_; }

  std::size_t param_count() const noexcept;

 private:
  std::vector<GateSpec> gates_;
  std::size_t num_classes_ = 0;
  std::vector<std::size_t> class_map_;
};

/// Partition functions from gate values g_1..g_{k-1}.
std::vector<double> partition_from_gates(std::span<const double> gate_values);

std::vector<double> partition_forward(const PartitionModel& model, std::span<const double> x);

/// Batched forward: returns (batch x k) partition values and, optionally,
/// the (batch x (k-1)) gate values with per-gate caches.
struct PartitionCache {
  DenseMatrix gate_values;
  std::vector<GateCache> gates;
};
DenseMatrix partition_forward(const PartitionModel& model, const DenseMatrix& x,
                              PartitionCache* cache = nullptr);

std::vector<double> class_probs(std::span<const double> h, std::span<const std::size_t> class_map,
                                std::size_t num_classes);

struct Prediction {
  std::size_t label;
  std::vector<double> probs;
};

/// Lowest index wins ties.
std::size_t argmax(std::span<const double> values) noexcept;

Prediction predict(const PartitionModel& model, std::span<const double> x);

/// Class probabilities for every row (batch x C).
DenseMatrix predict_proba(const PartitionModel& model, const DenseMatrix& x);

struct LossConfig {
  double eps = 1e-10;
};

struct LossResult {
  double loss = 0.0;                       // mean over the batch
  std::vector<std::vector<double>> grads;  // one vector per gate
};

/// Mean of -log(p_y(x_n) + eps) with gradients for every gate parameter.
LossResult nll_loss(const PartitionModel& model, const DenseMatrix& x,
                    std::span<const std::size_t> labels, const LossConfig& cfg = {},
                    bool with_grad = true);

/// |sum_{j<=m} h_j - (1 - prod_{j<=m}(1 - g_j))| for gate values g.
double stick_breaking_check(std::span<const double> gate_values, std::size_t m);

}  // namespace punn
