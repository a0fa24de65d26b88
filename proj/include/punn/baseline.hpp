#pragma once

#include <span>
#include <vector>

#include "punn/numeric.hpp"
#include "punn/partition.hpp"

namespace punn {

/// Standard classifier: ReLU MLP with C linear outputs and a softmax.
struct SoftmaxMlp {
  MlpParams net;

  SoftmaxMlp() = default;
  explicit SoftmaxMlp(MlpParams params) : net(std::move(params)) {}
  static SoftmaxMlp glorot(std::size_t input_dim, std::span<const std::size_t> hidden,
                           std::size_t num_classes, Rng& rng);

  std::size_t input_dim() const noexcept { return net.layout.input_dim(); }
  std::size_t num_classes() const noexcept { return net.layout.output_dim(); }
  std::size_t param_count() const noexcept { return net.size(); }
};

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> z);

DenseMatrix predict_proba(const SoftmaxMlp& model, const DenseMatrix& x);
Prediction predict(const SoftmaxMlp& model, std::span<const double> x);

struct SoftmaxLoss {
  double loss = 0.0;  // mean cross-entropy
  std::vector<double> grad;
};

SoftmaxLoss cross_entropy_loss(const SoftmaxMlp& model, const DenseMatrix& x,
                               std::span<const std::size_t> labels, bool with_grad = true);

}  // namespace punn
