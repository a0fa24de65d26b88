#include "punn/baseline.hpp"

#include <algorithm>
#include <cmath>

namespace punn {

SoftmaxMlp SoftmaxMlp::glorot(std::size_t input_dim, std::span<const std::size_t> hidden,
                              std::size_t num_classes, Rng& rng) {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(num_classes);
  return SoftmaxMlp(MlpParams::glorot(MlpLayout(std::move(widths)), rng));
}

std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) return {};
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

DenseMatrix predict_proba(const SoftmaxMlp& model, const DenseMatrix& x) {
  DenseMatrix z = mlp_forward(model.net, x);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto p = softmax(z.row(i));
    std::copy(p.begin(), p.end(), z.row(i).begin());
  }
  return z;
}

Prediction predict(const SoftmaxMlp& model, std::span<const double> x) {
  auto p = softmax(mlp_forward(model.net, x));
  return {argmax(p), std::move(p)};
}

SoftmaxLoss cross_entropy_loss(const SoftmaxMlp& model, const DenseMatrix& x,
                               std::span<const std::size_t> labels, bool with_grad) {
  const std::size_t n = x.rows();
  if (n == 0) throw InputShapeError("loss over an empty batch");
  if (labels.size() != n) throw InputShapeError("label count differs from batch size");
  const std::size_t C = model.num_classes();
  MlpCache cache;
  DenseMatrix z = mlp_forward(model.net, x, with_grad ? &cache : nullptr);
  SoftmaxLoss out;
  DenseMatrix dz(n, C);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= C) throw InputShapeError("label out of range");
    auto zi = z.row(i);
    const double zmax = *std::max_element(zi.begin(), zi.end());
    double sum = 0.0;
    for (double v : zi) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    total += lse - zi[labels[i]];
    if (with_grad) {
      for (std::size_t c = 0; c < C; ++c) {
        dz(i, c) = (std::exp(zi[c] - lse) - (c == labels[i] ? 1.0 : 0.0)) / double(n);
      }
    }
  }
  out.loss = total / double(n);
  if (with_grad) {
    out.grad.assign(model.param_count(), 0.0);
    mlp_backward(model.net.layout, model.net.values, cache, dz, out.grad, false);
  }
  return out;
}

}  // namespace punn
