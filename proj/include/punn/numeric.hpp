#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "punn/error.hpp"

namespace punn {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Dense row-major matrix of doubles. Rows are samples wherever a matrix
/// holds a batch. Storage is SIMD-aligned so vectorized kernels take the
/// same code path, and round identically, on every run.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  MatrixMap eigen() { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }
  ConstMatrixMap eigen() const {
    return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)};
  }

  /// Copies the listed rows, in order, into a new matrix.
  DenseMatrix gather_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

/// xoshiro256** seeded through splitmix64. Normals come from the polar
/// Box-Muller method so streams do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

  /// Independent generator for a named sub-stream of this seed.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Layer widths of a fully connected net: {in, hidden..., out}. Hidden
/// layers use the rectifier, the output layer is linear.
class MlpLayout {
 public:
  MlpLayout() = default;
  explicit MlpLayout(std::vector<std::size_t> widths);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t num_layers() const noexcept { return widths_.empty() ? 0 : widths_.size() - 1; }
  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t output_dim() const noexcept { return widths_.back(); }
  std::size_t layer_in(std::size_t l) const noexcept { return widths_[l]; }
  std::size_t layer_out(std::size_t l) const noexcept { return widths_[l + 1]; }

  /// Offset of layer l's weight block (out x in, row-major); the bias block
  /// (out) follows immediately.
  std::size_t weight_offset(std::size_t l) const noexcept { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const noexcept {
    return offsets_[l] + layer_in(l) * layer_out(l);
  }
  std::size_t param_count() const noexcept { return offsets_.back(); }

  friend bool operator==(const MlpLayout& a, const MlpLayout& b) { return a.widths_ == b.widths_; }

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_{0};
};

/// Owning parameter set of an MLP, stored flat so the optimizer can treat it
/// as one vector.
struct MlpParams {
  MlpLayout layout;
  std::vector<double> values;

  MlpParams() = default;
  explicit MlpParams(MlpLayout l) : layout(std::move(l)), values(layout.param_count(), 0.0) {}

  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights and zero biases.
  static MlpParams glorot(const MlpLayout& layout, Rng& rng);

  std::size_t size() const noexcept { return values.size(); }

  MatrixMap weight(std::size_t l);
  ConstMatrixMap weight(std::size_t l) const;
  VectorMap bias(std::size_t l);
  ConstVectorMap bias(std::size_t l) const;
};

void glorot_init(const MlpLayout& layout, std::span<double> values, Rng& rng);

/// Activations kept by a forward pass for the matching backward pass.
struct MlpCache {
  MlpLayout layout;
  std::vector<DenseMatrix> inputs;  // input to each layer, batch x layer_in
  DenseMatrix output;               // batch x out
};

DenseMatrix mlp_forward(const MlpLayout& layout, std::span<const double> params,
                        const DenseMatrix& x, MlpCache* cache = nullptr);
std::vector<double> mlp_forward(const MlpLayout& layout, std::span<const double> params,
                                std::span<const double> x, MlpCache* cache = nullptr);

inline DenseMatrix mlp_forward(const MlpParams& p, const DenseMatrix& x, MlpCache* cache = nullptr) {
  return mlp_forward(p.layout, p.values, x, cache);
}
inline std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> x,
                                       MlpCache* cache = nullptr) {
  return mlp_forward(p.layout, p.values, x, cache);
}

/// Backpropagates `upstream` (batch x out) through the cached pass.
/// Parameter gradients are ADDED into `grad`; the input gradient
/// (batch x in) is returned, or an empty matrix when `input_grad` is false.
DenseMatrix mlp_backward(const MlpLayout& layout, std::span<const double> params,
                         const MlpCache& cache, const DenseMatrix& upstream,
                         std::span<double> grad, bool input_grad = true);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig config) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

  const AdamConfig& config() const noexcept { return config_; }
  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }
  std::uint64_t step_count() const noexcept { return t_; }
  std::size_t size() const noexcept { return m_.size(); }

 private:
  friend void adam_step(AdamState&, std::span<double>, std::span<const double>);

  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h per coordinate.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> params,
                                     double h = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries that
/// are zero up to rounding from dominating the ratio.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6);

inline std::size_t param_count(const MlpLayout& layout) { return layout.param_count(); }
inline std::size_t param_count(const MlpParams& params) { return params.size(); }

inline double softplus(double x) noexcept;
inline double inverse_softplus(double y) noexcept;
inline double sigmoid(double x) noexcept;

}  // namespace punn

#include "punn/detail/scalar.hpp"
