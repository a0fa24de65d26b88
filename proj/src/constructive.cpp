#include "punn/constructive.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>

#include "punn/partition.hpp"

namespace punn {

std::size_t GridBox::points() const noexcept {
  if (resolution.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t r : resolution) n *= r;
  return n;
}

void GridBox::validate() const {
  if (lo.empty() || lo.size() != hi.size() || lo.size() != resolution.size()) {
    throw ConfigError("grid box needs matching lo, hi and resolution per axis");
  }
  for (std::size_t a = 0; a < lo.size(); ++a) {
    if (!(hi[a] > lo[a])) throw ConfigError("grid box axis " + std::to_string(a) + " has hi <= lo");
    if (resolution[a] < 1) throw ConfigError("grid resolution must be >= 1");
  }
}

DenseMatrix GridBox::coordinates() const {
  validate();
  const std::size_t d = dim();
  DenseMatrix x(points(), d);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double frac = resolution[a] == 1 ? 0.0 : double(idx[a]) / double(resolution[a] - 1);
      x(i, a) = lo[a] + (hi[a] - lo[a]) * frac;
    }
    for (std::size_t a = 0; a < d; ++a) {
      if (++idx[a] < resolution[a]) break;
      idx[a] = 0;
    }
  }
  return x;
}

ProbabilityMapGrid ProbabilityMapGrid::sample(
    GridBox box, const std::function<std::vector<double>(std::span<const double>)>& p) {
  DenseMatrix x = box.coordinates();
  ProbabilityMapGrid out;
  out.box = std::move(box);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto v = p(x.row(i));
    if (i == 0) out.values = DenseMatrix(x.rows(), v.size());
    if (v.size() != out.values.cols()) throw InputShapeError("probability map changes length");
    std::copy(v.begin(), v.end(), out.values.row(i).begin());
  }
  out.validate();
  return out;
}

void ProbabilityMapGrid::validate() const {
  if (values.cols() < 2) throw DomainError("probability map needs k >= 2 entries");
  if (values.rows() != box.points()) throw InputShapeError("probability map does not match its grid");
  for (std::size_t i = 0; i < values.rows(); ++i) {
    double sum = 0.0;
    for (double v : values.row(i)) {
      if (!(v > 0.0)) {
        throw DomainError("probability map leaves the simplex interior at grid point " +
                          std::to_string(i));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw DomainError("probability map does not sum to 1 at grid point " + std::to_string(i));
    }
  }
}

GammaGrid gamma_from_pmap(const ProbabilityMapGrid& p) {
  const std::size_t n = p.values.rows();
  const std::size_t k = p.partitions();
  if (k < 2) throw DomainError("probability map needs k >= 2 entries");
  GammaGrid out;
  out.box = p.box;
  out.values = DenseMatrix(n, k - 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto pi = p.values.row(i);
    for (double v : pi) {
      if (!(v > 0.0)) {
        throw DomainError("probability map leaves the simplex interior at grid point " +
                          std::to_string(i));
      }
    }
    // tail sums from the back: tail_j = sum_{m >= j} p_m
    double tail = pi[k - 1];
    std::vector<double> tails(k);
    tails[k - 1] = tail;
    for (std::size_t j = k - 1; j-- > 0;) {
      tail += pi[j];
      tails[j] = tail;
    }
    for (std::size_t j = 0; j + 1 < k; ++j) {
      // gamma_1 = p_1 exactly; later entries divide by the remaining mass
      out.values(i, j) = j == 0 ? pi[0] : pi[j] / tails[j];
    }
  }
  return out;
}

DenseMatrix exact_reconstruct(const GammaGrid& gamma) {
  DenseMatrix h(gamma.values.rows(), gamma.values.cols() + 1);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    auto row = partition_from_gates(gamma.values.row(i));
    std::copy(row.begin(), row.end(), h.row(i).begin());
  }
  return h;
}

PhiGrid phi_targets(const GammaGrid& gamma, Activation activation) {
  if (activation != Activation::Sigmoid) {
    throw UnsupportedError("phi targets need a strictly monotone activation onto (0, 1); only "
                           "sigmoid qualifies");
  }
  PhiGrid out;
  out.values = DenseMatrix(gamma.values.rows(), gamma.values.cols());
  auto src = gamma.values.values();
  auto dst = out.values.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    double g = src[i];
    if (!(g > 0.0 && g < 1.0)) {
      throw DomainError("gamma value " + std::to_string(g) + " is outside (0, 1)");
    }
    if (g < kGammaClamp || g > 1.0 - kGammaClamp) {
      g = std::clamp(g, kGammaClamp, 1.0 - kGammaClamp);
      ++out.clamped;
    }
    dst[i] = std::log(g) - std::log1p(-g);
  }
  return out;
}

namespace {

// Mean squared error of net(x) against target column; adds its gradient.
double mse_loss(const MlpParams& net, const DenseMatrix& x, std::span<const double> target,
                std::span<double> grad, MlpCache& cache) {
  DenseMatrix out = mlp_forward(net, x, &cache);
  const double inv_n = 1.0 / double(x.rows());
  DenseMatrix upstream(x.rows(), 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double r = out(i, 0) - target[i];
    loss += r * r;
    upstream(i, 0) = 2.0 * r * inv_n;
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  mlp_backward(net.layout, net.values, cache, upstream, grad, false);
  return loss * inv_n;
}

void refit_output_layer(MlpParams& net, const DenseMatrix& x, std::span<const double> target) {
  MlpCache cache;
  mlp_forward(net, x, &cache);
  const std::size_t last = net.layout.num_layers() - 1;
  const DenseMatrix& feats = cache.inputs[last];
  Eigen::MatrixXd a(feats.rows(), feats.cols() + 1);
  a.leftCols(feats.cols()) = feats.eigen();
  a.col(feats.cols()).setOnes();
  Eigen::VectorXd b = ConstVectorMap(target.data(), Eigen::Index(target.size()));
  Eigen::VectorXd w = a.colPivHouseholderQr().solve(b);
  if (!w.allFinite()) return;
  for (std::size_t j = 0; j < feats.cols(); ++j) net.weight(last)(0, Eigen::Index(j)) = w[Eigen::Index(j)];
  net.bias(last)[0] = w[Eigen::Index(feats.cols())];
}

}  // namespace

DensityFitResult fit_density_demo(const ProbabilityMapGrid& p, const DensityFitConfig& cfg) {
  p.validate();
  if (cfg.epochs == 0 && !cfg.refit_output) throw ConfigError("density fit needs epochs >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("density fit learning rate must be positive");
  const GammaGrid gamma = gamma_from_pmap(p);
  const PhiGrid phi = phi_targets(gamma);
  const DenseMatrix x = p.box.coordinates();
  const std::size_t n = x.rows();
  const std::size_t gates = gamma.values.cols();

  std::vector<std::size_t> widths{p.box.dim()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  const MlpLayout layout(widths);

  DensityFitResult result;
  result.clamped = phi.clamped;
  Rng root(cfg.seed);
  DenseMatrix fitted_gates(n, gates);
  std::vector<double> target(n);
  for (std::size_t j = 0; j < gates; ++j) {
    for (std::size_t i = 0; i < n; ++i) target[i] = phi.values(i, j);
    Rng rng = root.fork(j);
    MlpParams net = MlpParams::glorot(layout, rng);
    AdamState adam(net.size(), AdamConfig{.lr = cfg.lr});
    std::vector<double> grad(net.size());
    MlpCache cache;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      const double loss = mse_loss(net, x, target, grad, cache);
      if (!std::isfinite(loss)) {
        throw NumericError("density fit diverged for gate " + std::to_string(j + 1) + " at epoch " +
                           std::to_string(e + 1) + " (loss " + std::to_string(loss) + ")");
      }
      adam_step(adam, net.values, grad);
    }
    if (cfg.refit_output) refit_output_layer(net, x, target);
    const double final_loss = mse_loss(net, x, target, grad, cache);
    if (!std::isfinite(final_loss)) {
      throw NumericError("density fit produced a non-finite error for gate " + std::to_string(j + 1));
    }
    result.mse.push_back(final_loss);
    DenseMatrix theta = mlp_forward(net, x);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      fitted_gates(i, j) = sigmoid(theta(i, 0));
      worst = std::max(worst, std::abs(fitted_gates(i, j) - gamma.values(i, j)));
    }
    result.gate_bound += worst;
    result.param_count += net.size();
    result.nets.push_back(std::move(net));
  }

  result.fitted = DenseMatrix(n, gates + 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto h = partition_from_gates(fitted_gates.row(i));
    for (std::size_t m = 0; m < h.size(); ++m) {
      result.fitted(i, m) = h[m];
      result.sup_error = std::max(result.sup_error, std::abs(h[m] - p.values(i, m)));
    }
  }
  return result;
}

ConvergenceReport density_sweep(const ProbabilityMapGrid& p, const DensityFitConfig& base,
                                std::span<const std::vector<std::size_t>> hidden_sweep) {
  ConvergenceReport report;
  for (const auto& hidden : hidden_sweep) {
    DensityFitConfig cfg = base;
    cfg.hidden = hidden;
    const DensityFitResult fit = fit_density_demo(p, cfg);
    if (!report.points.empty() && fit.sup_error > report.points.back().sup_error) {
      report.monotone = false;
    }
    report.points.push_back({hidden, cfg.epochs, fit.param_count, fit.sup_error, fit.gate_bound});
  }
  return report;
}

RandomPunnMap random_punn_map(GridBox box, std::size_t partitions,
                              std::span<const std::size_t> hidden, std::uint64_t seed,
                              double weight_scale) {
  if (partitions < 2) throw ConfigError("random map needs k >= 2");
  std::vector<std::size_t> widths{box.dim()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  const MlpLayout layout(widths);
  const DenseMatrix x = box.coordinates();

  RandomPunnMap out;
  Rng root(seed);
  DenseMatrix g(x.rows(), partitions - 1);
  for (std::size_t j = 0; j + 1 < partitions; ++j) {
    Rng rng = root.fork(j);
    MlpParams net = MlpParams::glorot(layout, rng);
    for (double& v : net.values) v *= weight_scale;
    // random biases so the gates are not all centred at the origin
    for (std::size_t l = 0; l < layout.num_layers(); ++l) {
      for (Eigen::Index b = 0; b < net.bias(l).size(); ++b) net.bias(l)[b] = rng.uniform(-0.5, 0.5);
    }
    DenseMatrix theta = mlp_forward(net, x);
    for (std::size_t i = 0; i < x.rows(); ++i) g(i, j) = sigmoid(theta(i, 0));
    out.nets.push_back(std::move(net));
  }
  out.map.box = std::move(box);
  out.map.values = DenseMatrix(x.rows(), partitions);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto h = partition_from_gates(g.row(i));
    std::copy(h.begin(), h.end(), out.map.values.row(i).begin());
  }
  return out;
}

}  // namespace punn
