#include "punn/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace punn {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InputShape: return "input-shape";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Split: return "split";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// DenseMatrix

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
  if (data_.size() != rows_ * cols_) {
    throw InputShapeError("matrix data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::gather_rows(std::span<const std::size_t> indices) const {
  DenseMatrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept { return double(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's nearly divisionless method
  __uint128_t m = __uint128_t(next_u64()) * n;
  auto low = std::uint64_t(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = __uint128_t(next_u64()) * n;
      low = std::uint64_t(m);
    }
  }
  return std::uint64_t(m >> 64);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle(std::span<std::size_t>(idx));
  return idx;
}

Rng Rng::fork(std::uint64_t stream) const {
  std::uint64_t sm = seed_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  return Rng(splitmix64(sm));
}

// ---------------------------------------------------------------------------
// MLP

MlpLayout::MlpLayout(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) {
    throw InputShapeError("an MLP needs at least input and output widths");
  }
  for (std::size_t w : widths_) {
    if (w == 0) throw InputShapeError("MLP layer widths must be positive");
  }
  offsets_.assign(1, 0);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(offsets_.back() + widths_[l] * widths_[l + 1] + widths_[l + 1]);
  }
}

MlpParams MlpParams::glorot(const MlpLayout& layout, Rng& rng) {
  MlpParams p(layout);
  glorot_init(layout, p.values, rng);
  return p;
}

void glorot_init(const MlpLayout& layout, std::span<double> values, Rng& rng) {
  for (std::size_t l = 0; l < layout.num_layers(); ++l) {
    const std::size_t in = layout.layer_in(l);
    const std::size_t out = layout.layer_out(l);
    const double limit = std::sqrt(6.0 / double(in + out));
    const std::size_t w0 = layout.weight_offset(l);
    for (std::size_t i = 0; i < in * out; ++i) values[w0 + i] = rng.uniform(-limit, limit);
    const std::size_t b0 = layout.bias_offset(l);
    for (std::size_t i = 0; i < out; ++i) values[b0 + i] = 0.0;
  }
}

MatrixMap MlpParams::weight(std::size_t l) {
  return {values.data() + layout.weight_offset(l), Eigen::Index(layout.layer_out(l)),
          Eigen::Index(layout.layer_in(l))};
}
ConstMatrixMap MlpParams::weight(std::size_t l) const {
  return {values.data() + layout.weight_offset(l), Eigen::Index(layout.layer_out(l)),
          Eigen::Index(layout.layer_in(l))};
}
VectorMap MlpParams::bias(std::size_t l) {
  return {values.data() + layout.bias_offset(l), Eigen::Index(layout.layer_out(l))};
}
ConstVectorMap MlpParams::bias(std::size_t l) const {
  return {values.data() + layout.bias_offset(l), Eigen::Index(layout.layer_out(l))};
}

namespace {

// Aligned copy of a weight block. Small products reduce with alignment-
// dependent peeling, so operands must not sit at arbitrary heap offsets.
RowMajorMatrix weight_copy(const MlpLayout& layout, std::span<const double> params, std::size_t l) {
  return ConstMatrixMap(params.data() + layout.weight_offset(l), Eigen::Index(layout.layer_out(l)),
                        Eigen::Index(layout.layer_in(l)));
}
ConstVectorMap bias_view(const MlpLayout& layout, std::span<const double> params, std::size_t l) {
  return {params.data() + layout.bias_offset(l), Eigen::Index(layout.layer_out(l))};
}

}  // namespace

DenseMatrix mlp_forward(const MlpLayout& layout, std::span<const double> params,
                        const DenseMatrix& x, MlpCache* cache) {
  if (params.size() != layout.param_count()) {
    throw InputShapeError("MLP parameter vector has " + std::to_string(params.size()) +
                          " entries, layout needs " + std::to_string(layout.param_count()));
  }
  if (x.cols() != layout.input_dim()) {
    throw InputShapeError("MLP input has " + std::to_string(x.cols()) + " features, expected " +
                          std::to_string(layout.input_dim()));
  }
  if (cache != nullptr) {
    cache->layout = layout;
    cache->inputs.clear();
    cache->inputs.reserve(layout.num_layers());
  }
  DenseMatrix current = x;
  for (std::size_t l = 0; l < layout.num_layers(); ++l) {
    DenseMatrix next(current.rows(), layout.layer_out(l));
    auto out = next.eigen();
    const RowMajorMatrix w = weight_copy(layout, params, l);
    out.noalias() = current.eigen() * w.transpose();
    out.rowwise() += bias_view(layout, params, l).transpose();
    if (l + 1 < layout.num_layers()) {
      out = out.cwiseMax(0.0);
    }
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(current));
    }
    current = std::move(next);
  }
  if (cache != nullptr) cache->output = current;
  return current;
}

std::vector<double> mlp_forward(const MlpLayout& layout, std::span<const double> params,
                                std::span<const double> x, MlpCache* cache) {
  DenseMatrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
  DenseMatrix out = mlp_forward(layout, params, in, cache);
  return {out.values().begin(), out.values().end()};
}

DenseMatrix mlp_backward(const MlpLayout& layout, std::span<const double> params,
                         const MlpCache& cache, const DenseMatrix& upstream,
                         std::span<double> grad, bool input_grad) {
  if (!(cache.layout == layout) || cache.inputs.size() != layout.num_layers()) {
    throw InternalError("MLP cache does not belong to this layout");
  }
  if (upstream.rows() != cache.output.rows() || upstream.cols() != layout.output_dim()) {
    throw InternalError("upstream gradient shape does not match the cached forward pass");
  }
  if (grad.size() != layout.param_count() || params.size() != layout.param_count()) {
    throw InputShapeError("MLP gradient buffer has the wrong length");
  }
  RowMajorMatrix delta = upstream.eigen();
  for (std::size_t l = layout.num_layers(); l-- > 0;) {
    const DenseMatrix& input = cache.inputs[l];
    MatrixMap dW(grad.data() + layout.weight_offset(l), Eigen::Index(layout.layer_out(l)),
                 Eigen::Index(layout.layer_in(l)));
    VectorMap db(grad.data() + layout.bias_offset(l), Eigen::Index(layout.layer_out(l)));
    const RowMajorMatrix dw = delta.transpose() * input.eigen();
    dW += dw;
    const Eigen::RowVectorXd dbias = delta.colwise().sum();
    db += dbias.transpose();
    if (l == 0 && !input_grad) return {};
    RowMajorMatrix dinput = delta * weight_copy(layout, params, l);
    if (l > 0) {
      // input to layer l is the rectified output of layer l-1; subgradient 0 at 0
      dinput.array() *= (input.eigen().array() > 0.0).cast<double>();
    }
    delta = std::move(dinput);
  }
  DenseMatrix dx(upstream.rows(), layout.input_dim());
  dx.eigen() = delta;
  return dx;
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  const std::size_t n = state.m_.size();
  if (params.size() != n || grads.size() != n) {
    throw InputShapeError("Adam state, parameters and gradients differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient entry at index " + std::to_string(i));
    }
  }
  const AdamConfig& c = state.config_;
  state.t_ += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.t_));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.t_));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m_[i] = c.beta1 * state.m_[i] + (1.0 - c.beta1) * g;
    state.v_[i] = c.beta2 * state.v_[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m_[i] / bc1;
    const double v_hat = state.v_[i] / bc2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

// ---------------------------------------------------------------------------
// Finite differences

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> params,
                                     double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double fp = f(p);
    p[i] = saved - h;
    const double fm = f(p);
    p[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("non-finite function value while differencing coordinate " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw InputShapeError("gradient vectors differ in length");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace punn
