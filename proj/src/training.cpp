#include "punn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace punn {

namespace {

template <class... Fs>
struct Overload : Fs... {
  using Fs::operator()...;
};

constexpr std::size_t kEvalChunk = 2048;

}  // namespace

std::size_t model_param_count(const Model& model) noexcept {
  return std::visit([](const auto& m) { return m.param_count(); }, model);
}

std::size_t model_input_dim(const Model& model) noexcept {
  return std::visit([](const auto& m) { return m.input_dim(); }, model);
}

std::size_t model_num_classes(const Model& model) noexcept {
  return std::visit([](const auto& m) { return m.num_classes(); }, model);
}

DenseMatrix model_predict_proba(const Model& model, const DenseMatrix& x) {
  if (x.cols() != model_input_dim(model)) {
    throw InputShapeError("input has " + std::to_string(x.cols()) + " features, model expects " +
                          std::to_string(model_input_dim(model)));
  }
  const std::size_t C = model_num_classes(model);
  DenseMatrix out(x.rows(), C);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows(); start += kEvalChunk) {
    const std::size_t stop = std::min(x.rows(), start + kEvalChunk);
    idx.resize(stop - start);
    for (std::size_t i = start; i < stop; ++i) idx[i - start] = i;
    const DenseMatrix chunk = x.gather_rows(idx);
    const DenseMatrix p = std::visit([&](const auto& m) { return predict_proba(m, chunk); }, model);
    std::copy(p.values().begin(), p.values().end(), out.row(start).begin());
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be > 0");
  if (!(loss_eps >= 0.0)) throw ConfigError("train.loss_eps must be >= 0");
}

RunMetrics train(Model& model, const Dataset& train_set, const TrainConfig& cfg,
                 const Dataset* test) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = train_set.size();
  if (n == 0) throw InputShapeError("training set is empty");
  if (train_set.dim() != model_input_dim(model)) {
    throw InputShapeError("training data has " + std::to_string(train_set.dim()) +
                          " features, model expects " + std::to_string(model_input_dim(model)));
  }
  if (train_set.num_classes > model_num_classes(model)) {
    throw InputShapeError("training data has more classes than the model");
  }

  // one Adam state per parameter block
  std::vector<AdamState> adam;
  const AdamConfig adam_cfg{.lr = cfg.lr};
  std::visit(Overload{[&](PartitionModel& m) {
                        for (const auto& g : m.gates()) adam.emplace_back(g.param_count(), adam_cfg);
                      },
                      [&](SoftmaxMlp& m) { adam.emplace_back(m.param_count(), adam_cfg); }},
             model);

  Rng rng = Rng(cfg.seed).fork(0x7368756666ULL);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<std::size_t> labels;
  RunMetrics metrics;
  metrics.param_count = model_param_count(model);
  metrics.epochs = cfg.epochs;
  const LossConfig loss_cfg{cfg.loss_eps};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t batch = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const DenseMatrix xb = train_set.features.gather_rows(idx);
      labels.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train_set.labels[idx[i]];

      auto where = [&] {
        return " at epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch + 1);
      };
      try {
        const double loss = std::visit(
            Overload{[&](PartitionModel& m) {
                       LossResult r = nll_loss(m, xb, labels, loss_cfg, true);
                       if (!std::isfinite(r.loss)) return r.loss;
                       for (std::size_t j = 0; j < m.gates().size(); ++j) {
                         adam_step(adam[j], m.gates()[j].params(), r.grads[j]);
                       }
                       return r.loss;
                     },
                     [&](SoftmaxMlp& m) {
                       SoftmaxLoss r = cross_entropy_loss(m, xb, labels, true);
                       if (!std::isfinite(r.loss)) return r.loss;
                       adam_step(adam[0], m.net.values, r.grad);
                       return r.loss;
                     }},
            model);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss");
        epoch_loss += loss * double(idx.size());
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + where());
      }
    }
    metrics.loss_history.push_back(epoch_loss / double(n));
  }

  metrics.train_accuracy = evaluate(model, train_set).accuracy;
  if (test != nullptr && test->size() > 0) metrics.test_accuracy = evaluate(model, *test).accuracy;
  metrics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return metrics;
}

DenseMatrix Evaluation::normalized_confusion() const {
  DenseMatrix out = confusion;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double sum = 0.0;
    for (double v : out.row(r)) sum += v;
    if (sum > 0.0) {
      for (double& v : out.row(r)) v /= sum;
    }
  }
  return out;
}

Evaluation evaluate(const Model& model, const Dataset& ds) {
  if (ds.size() == 0) throw InputShapeError("cannot evaluate on an empty dataset");
  const DenseMatrix p = model_predict_proba(model, ds.features);
  const std::size_t C = model_num_classes(model);
  Evaluation ev;
  ev.confusion = DenseMatrix(C, C);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t y = ds.labels[i];
    if (y >= C) throw InputShapeError("label " + std::to_string(y) + " exceeds model classes");
    const std::size_t yhat = argmax(p.row(i));
    ev.confusion(y, yhat) += 1.0;
    if (yhat == y) ++correct;
  }
  ev.accuracy = double(correct) / double(ds.size());
  return ev;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / double(values.size()));
  return s;
}

MultiSeedResult multi_seed(std::span<const std::uint64_t> seeds,
                           const std::function<RunMetrics(std::uint64_t)>& run) {
  if (seeds.empty()) throw ConfigError("multi-seed runs need at least one seed");
  MultiSeedResult out;
  out.seeds.assign(seeds.begin(), seeds.end());
  std::vector<double> tr, te, ms;
  for (std::uint64_t s : seeds) {
    out.runs.push_back(run(s));
    tr.push_back(out.runs.back().train_accuracy);
    te.push_back(out.runs.back().test_accuracy);
    ms.push_back(out.runs.back().wall_ms);
  }
  out.train_accuracy = summarize(tr);
  out.test_accuracy = summarize(te);
  out.wall_ms = summarize(ms);
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = base + i;
  return s;
}

GridResult grid_eval(const Model& model, const GridBounds& b, std::size_t resolution) {
  if (model_input_dim(model) != 2) {
    throw UnsupportedError("grid evaluation needs a 2-D model, got d=" +
                           std::to_string(model_input_dim(model)));
  }
  if (resolution < 1) throw ConfigError("grid resolution must be >= 1");
  if (!(b.x1_hi > b.x1_lo) || !(b.x2_hi > b.x2_lo)) throw ConfigError("grid bounds need hi > lo");
  GridResult g;
  g.resolution = resolution;
  g.points = DenseMatrix(resolution * resolution, 2);
  auto coord = [&](double lo, double hi, std::size_t i) {
    return resolution == 1 ? lo : lo + (hi - lo) * double(i) / double(resolution - 1);
  };
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      g.points(r * resolution + c, 0) = coord(b.x1_lo, b.x1_hi, c);
      g.points(r * resolution + c, 1) = coord(b.x2_lo, b.x2_hi, r);
    }
  }
  g.h = std::visit(Overload{[&](const PartitionModel& m) { return partition_forward(m, g.points); },
                            [&](const SoftmaxMlp& m) { return predict_proba(m, g.points); }},
                   model);
  g.predicted.resize(g.points.rows());
  std::visit(Overload{[&](const PartitionModel& m) {
                        for (std::size_t i = 0; i < g.points.rows(); ++i) {
                          g.predicted[i] = argmax(class_probs(g.h.row(i), m.class_map(), m.num_classes()));
                        }
                      },
                      [&](const SoftmaxMlp&) {
                        for (std::size_t i = 0; i < g.points.rows(); ++i) g.predicted[i] = argmax(g.h.row(i));
                      }},
             model);
  return g;
}

}  // namespace punn
