#include "punn/partition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace punn {

PartitionModel::PartitionModel(std::vector<GateSpec> gates, std::size_t num_classes,
                               std::vector<std::size_t> class_map)
    : gates_(std::move(gates)), num_classes_(num_classes), class_map_(std::move(class_map)) {
  const std::size_t k = gates_.size() + 1;
  if (gates_.empty()) throw ConfigError("a partition model needs at least one gate (k >= 2)");
  if (num_classes_ < 2) throw ConfigError("a partition model needs at least two classes");
  if (num_classes_ > k) {
    throw ConfigError("partitions k=" + std::to_string(k) + " must be >= classes C=" +
                      std::to_string(num_classes_));
  }
  const std::size_t d = gates_.front().input_dim();
  for (const auto& g : gates_) {
    if (g.input_dim() != d) throw InputShapeError("all gates must share the input dimension");
  }
  if (class_map_.empty()) {
    class_map_.resize(k);
    for (std::size_t i = 0; i < k; ++i) class_map_[i] = i % num_classes_;
  }
  if (class_map_.size() != k) {
    throw ConfigError("class map has " + std::to_string(class_map_.size()) +
                      " entries, expected one per partition (" + std::to_string(k) + ")");
  }
  std::vector<bool> hit(num_classes_, false);
  for (std::size_t c : class_map_) {
    if (c >= num_classes_) throw ConfigError("class map entry out of range");
    hit[c] = true;
  }
  if (!std::all_of(hit.begin(), hit.end(), [](bool b) { return b; })) {
    throw ConfigError("class map must reach every class");
  }
  if (k == num_classes_) {
    for (std::size_t i = 0; i < k; ++i) {
      if (class_map_[i] != i) throw ConfigError("with k == C the class map must be the identity");
    }
  }
}

std::size_t PartitionModel::param_count() const noexcept {
  std::size_t n = 0;
  for (const auto& g : gates_) n += g.param_count();
  return n;
}

std::vector<double> partition_from_gates(std::span<const double> gate_values) {
  std::vector<double> h(gate_values.size() + 1);
  double remaining = 1.0;
  for (std::size_t j = 0; j < gate_values.size(); ++j) {
    h[j] = remaining * gate_values[j];
    remaining *= 1.0 - gate_values[j];
  }
  h.back() = remaining;
  return h;
}

DenseMatrix partition_forward(const PartitionModel& model, const DenseMatrix& x,
                              PartitionCache* cache) {
  const std::size_t n = x.rows();
  const std::size_t gates = model.gates().size();
  DenseMatrix g(gates, n);  // gate-major while evaluating
  if (cache != nullptr) cache->gates.assign(gates, GateCache{});
  for (std::size_t j = 0; j < gates; ++j) {
    gate_eval(model.gates()[j], x, g.row(j), cache ? &cache->gates[j] : nullptr);
  }
  DenseMatrix h(n, gates + 1);
  for (std::size_t i = 0; i < n; ++i) {
    double remaining = 1.0;
    for (std::size_t j = 0; j < gates; ++j) {
      h(i, j) = remaining * g(j, i);
      remaining *= 1.0 - g(j, i);
    }
    h(i, gates) = remaining;
  }
  if (cache != nullptr) cache->gate_values = std::move(g);
  return h;
}

std::vector<double> partition_forward(const PartitionModel& model, std::span<const double> x) {
  DenseMatrix row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  DenseMatrix h = partition_forward(model, row);
  return {h.values().begin(), h.values().end()};
}

std::vector<double> class_probs(std::span<const double> h, std::span<const std::size_t> class_map,
                                std::size_t num_classes) {
  if (h.size() != class_map.size()) throw InputShapeError("class map length differs from partitions");
  std::vector<double> p(num_classes, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) p[class_map[i]] += h[i];
  return p;
}

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Prediction predict(const PartitionModel& model, std::span<const double> x) {
  auto h = partition_forward(model, x);
  auto p = class_probs(h, model.class_map(), model.num_classes());
  return {argmax(p), std::move(p)};
}

DenseMatrix predict_proba(const PartitionModel& model, const DenseMatrix& x) {
  DenseMatrix h = partition_forward(model, x);
  DenseMatrix p(x.rows(), model.num_classes());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < model.partitions(); ++j) p(i, model.class_map()[j]) += h(i, j);
  }
  return p;
}

LossResult nll_loss(const PartitionModel& model, const DenseMatrix& x,
                    std::span<const std::size_t> labels, const LossConfig& cfg, bool with_grad) {
  const std::size_t n = x.rows();
  if (n == 0) throw InputShapeError("loss over an empty batch");
  if (labels.size() != n) throw InputShapeError("label count differs from batch size");
  for (std::size_t y : labels) {
    if (y >= model.num_classes()) throw InputShapeError("label out of range");
  }
  const std::size_t gates = model.gates().size();
  const std::size_t k = gates + 1;
  const auto cmap = model.class_map();

  PartitionCache cache;
  DenseMatrix h = partition_forward(model, x, with_grad ? &cache : nullptr);

  LossResult result;
  DenseMatrix upstream;  // gate-major, d loss / d g_j per sample
  if (with_grad) upstream = DenseMatrix(gates, n);
  std::vector<double> u(k), prefix(k);
  const double inv_n = 1.0 / double(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double py = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (cmap[j] == labels[i]) py += h(i, j);
    }
    total += -std::log(py + cfg.eps);
    if (!with_grad) continue;

    const double dpy = -inv_n / (py + cfg.eps);
    for (std::size_t j = 0; j < k; ++j) u[j] = cmap[j] == labels[i] ? dpy : 0.0;
    // prefix[j] = prod_{l<j} (1 - g_l)
    prefix[0] = 1.0;
    for (std::size_t j = 1; j < k; ++j) prefix[j] = prefix[j - 1] * (1.0 - cache.gate_values(j - 1, i));
    // tail_j = sum_{m>j} u_m d h_m / d(1 - g_j) / prefix[j], built from the back
    // so no division by (1 - g_j) is needed.
    double tail = u[k - 1];
    for (std::size_t j = gates; j-- > 0;) {
      upstream(j, i) = prefix[j] * (u[j] - tail);
      const double gj = cache.gate_values(j, i);
      tail = u[j] * gj + (1.0 - gj) * tail;
    }
  }
  result.loss = total * inv_n;
  if (with_grad) {
    result.grads.resize(gates);
    for (std::size_t j = 0; j < gates; ++j) {
      const GateSpec& gate = model.gates()[j];
      result.grads[j].assign(gate.param_count(), 0.0);
      gate_grad(gate, x, cache.gates[j], upstream.row(j), result.grads[j]);
    }
  }
  return result;
}

double stick_breaking_check(std::span<const double> gate_values, std::size_t m) {
  if (m == 0 || m > gate_values.size()) throw InputShapeError("stick-breaking index out of range");
  double sum = 0.0;
  double remaining = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    sum += remaining * gate_values[j];
    remaining *= 1.0 - gate_values[j];
  }
  double product = 1.0;
  for (std::size_t j = 0; j < m; ++j) product *= 1.0 - gate_values[j];
  // same quantity as |sum - (1 - product)|, but exact in the base case m = 1
  return std::abs((1.0 - sum) - product);
}

}  // namespace punn
