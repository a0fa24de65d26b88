// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "punn/experiment.hpp"
#include "random_models.hpp"
#include "fd_oracle.hpp"

using namespace punn;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

fs::path g_root;

// Accuracy means are averages of exact fractions; this slack only absorbs
// rounding in the summation.
constexpr double kSlack = 1e-9;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
std::string pct(double v) { return fmt("%.2f", 100.0 * v); }

Json read_json(const fs::path& rel) {
  std::ifstream in(g_root / rel);
  if (!in) throw ConfigError("cannot open " + (g_root / rel).string());
  return Json::parse(in);
}

ExperimentConfig config(const std::string& rel) { return parse_config(read_json("configs/" + rel), g_root); }

double mean_test_acc(const ExperimentConfig& cfg) {
  const auto records = run_experiment(cfg, false);
  double s = 0.0;
  for (const auto& r : records) s += r.test_acc;
  return s / double(records.size());
}

std::size_t config_params(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg.dataset, cfg.seeds.front());
  return model_param_count(build_model(cfg.model, data.train, cfg.seeds.front()));
}

ExperimentConfig ablation_variant(const std::string& rel, const Json& value) {
  const AblationSpec spec = parse_ablation(read_json("configs/" + rel), g_root);
  Json doc = spec.base;
  doc[Json::json_pointer(spec.pointer)] = value;
  return parse_config(doc, g_root);
}

void fail_if(Outcome& o, bool bad, const std::string& why) {
  if (bad) {
    o.status = Status::Fail;
    o.detail += " [" + why + "]";
  }
}

// ---------------------------------------------------------------------------

Outcome partition_of_unity() {
  using namespace testing_support;
  Rng rng(20240601);
  const std::size_t dims[] = {2, 4, 8};
  double worst_sum = 0.0, worst_min = 0.0, worst_stick = 0.0;
  std::set<GateFamily> families;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t d = dims[trial % 3];
    const std::size_t k = 2 + std::size_t(trial % 9);
    std::vector<GateSpec> gates;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      // cycle through families so each appears in every (k, d) cell
      const GateFamily f = kFamilies[(trial + i) % std::size(kFamilies)];
      gates.push_back(random_gate(rng, f, kActivations[rng.below(4)], d));
      families.insert(gates.back().family());
    }
    PartitionModel m(std::move(gates), 2 + rng.below(k - 1));
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform(-3, 3);
    const auto h = partition_forward(m, x);
    double s = 0.0, lo = 1.0;
    for (double v : h) {
      s += v;
      lo = std::min(lo, v);
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    worst_min = std::min(worst_min, lo);
    std::vector<double> g;
    for (const auto& gate : m.gates()) g.push_back(gate_eval(gate, x));
    for (std::size_t mm = 1; mm <= g.size(); ++mm) worst_stick = std::max(worst_stick, stick_breaking_check(g, mm));
  }
  Outcome o;
  o.detail = "10000 models, " + std::to_string(families.size()) + " families; max|sum h - 1| = " +
             fmt("%.2e", worst_sum) + ", min h = " + fmt("%.2e", worst_min) + ", stick residual " +
             fmt("%.2e", worst_stick);
  fail_if(o, families.size() != std::size(kFamilies), "not every family exercised");
  fail_if(o, !(worst_sum < 1e-12), "sum tolerance");
  fail_if(o, worst_min < 0.0, "negative partition");
  fail_if(o, !(worst_stick < 1e-15), "stick-breaking tolerance");
  return o;
}

Outcome gradients() {
  using namespace testing_support;
  Rng rng(77);
  double worst = 0.0;
  std::string worst_where;
  int instances = 0;
  auto record = [&](double err, const std::string& where) {
    ++instances;
    if (err > worst) {
      worst = err;
      worst_where = where;
    }
  };
  for (GateFamily f : kFamilies) {
    for (int i = 0; i < 100; ++i) {
      const Activation a = kActivations[i % 4];
      std::size_t d = 2 + rng.below(3);
      if (f == GateFamily::FourierShell) d = 2;
      GateSpec g = random_gate(rng, f, a, d);
      std::vector<double> c(d, 0.0);
      if (f != GateFamily::Mlp) c.assign(g.center().begin(), g.center().end());
      DenseMatrix x(4, d);
      for (std::size_t r = 0; r < 4; ++r) {
        auto p = point_near(rng, c);
        std::copy(p.begin(), p.end(), x.row(r).begin());
      }
      std::vector<double> up(4);
      for (double& u : up) u = rng.uniform(-1, 1);
      GateCache cache;
      std::vector<double> out(4), grad(g.param_count(), 0.0);
      gate_eval(g, x, out, &cache);
      gate_grad(g, x, cache, up, grad);
      auto fd = converged_central_grad(
          [&](std::span<const double> p) {
            GateSpec gg = g;
            gg.set_params(p);
            std::vector<double> v(4);
            gate_eval(gg, x, v);
            double s = 0.0;
            for (int r = 0; r < 4; ++r) s += up[r] * v[r];
            return s;
          },
          std::vector<double>(g.params().begin(), g.params().end()));
      record(max_relative_error(grad, fd), std::string(to_string(f)) + "/" + std::string(to_string(a)));
    }
  }
  for (int i = 0; i < 100; ++i) {
    PartitionModel m = random_model(rng, 2 + rng.below(5), 2 + rng.below(2));
    DenseMatrix x(6, m.input_dim());
    for (double& v : x.values()) v = rng.uniform(-2, 2);
    std::vector<std::size_t> y(6);
    for (auto& v : y) v = rng.below(m.num_classes());
    const LossResult res = nll_loss(m, x, y);
    double err = 0.0;
    for (std::size_t gi = 0; gi < m.gates().size(); ++gi) {
      const std::vector<double> p0(m.gates()[gi].params().begin(), m.gates()[gi].params().end());
      auto loss = [&](std::span<const double> p) {
        PartitionModel mm = m;
        mm.gates()[gi].set_params(p);
        return nll_loss(mm, x, y, {}, false).loss;
      };
      const auto fd = converged_central_grad(loss, p0);
      err = std::max(err, max_relative_error(res.grads[gi], fd));
    }
    record(err, "nll");
  }
  Outcome o;
  o.detail = std::to_string(instances) + " instances (100 per family + 100 loss); max rel err " +
             fmt("%.2e", worst) + " (" + worst_where + ")";
  fail_if(o, !(worst < 1e-4), "relative error");
  return o;
}

Outcome constructive() {
  Rng rng(4242);
  double worst = 0.0;
  for (std::size_t k = 2; k <= 6; ++k) {
    for (int rep = 0; rep < 4; ++rep) {
      ProbabilityMapGrid p;
      p.box = GridBox{{-1, -1}, {1, 1}, {50, 50}};
      p.values = DenseMatrix(2500, k);
      for (std::size_t i = 0; i < 2500; ++i) {
        double s = 0.0;
        for (double& v : p.values.row(i)) s += (v = rng.uniform(1e-3, 1.0));
        for (double& v : p.values.row(i)) v /= s;
      }
      const DenseMatrix h = exact_reconstruct(gamma_from_pmap(p));
      for (std::size_t i = 0; i < h.size(); ++i) worst = std::max(worst, std::abs(h.values()[i] - p.values.values()[i]));
    }
  }
  const DensityDemoSpec spec = parse_density_demo(read_json("configs/density/self_realizability.json"));
  const DensityFitResult fit = fit_density_demo(density_target(spec), spec.fit);
  Outcome o;
  o.detail = "round trip max err " + fmt("%.2e", worst) + " (k=2..6, 50x50); self-realizability sup err " +
             fmt("%.4f", fit.sup_error) + " with " + std::to_string(fit.param_count) + " params";
  fail_if(o, !(worst < 1e-12), "round trip");
  fail_if(o, !(fit.sup_error < 0.05), "refit error");
  return o;
}

Outcome param_counts(std::vector<std::string>& info) {
  struct Row {
    std::string what;
    std::size_t expected, got;
  };
  std::vector<Row> rows;
  auto add = [&](const std::string& what, std::size_t expected, std::size_t got) { rows.push_back({what, expected, got}); };

  add("moons PUNN-Sigma", 1185, config_params(config("synthetic/moons_punn_sigmoid.json")));
  const std::size_t bump = config_params(config("synthetic/moons_punn_bump.json"));
  add("moons PUNN-Bump", 1186, bump);
  add("moons PUNN-Bump MLP core", 1185, bump - 1);
  add("moons MLP", 1218, config_params(config("synthetic/moons_mlp.json")));

  // MNIST shapes only depend on the 784-10 geometry, not on the pixels
  Dataset mnist_shape;
  mnist_shape.features = DenseMatrix(10, 784);
  for (std::size_t c = 0; c < 10; ++c) mnist_shape.labels.push_back(c);
  mnist_shape.num_classes = 10;
  for (const auto& [file, expected] : {std::pair{"mnist/mnist_punn_sigmoid.json", 2403081u},
                                       std::pair{"mnist/mnist_mlp.json", 269322u}}) {
    const Json doc = read_json(std::string("configs/") + file);
    ModelSpec spec;
    spec.type = doc["model"]["type"].get<std::string>();
    spec.hidden = doc["model"]["hidden"].get<std::vector<std::size_t>>();
    add(std::string(file), expected, model_param_count(build_model(spec, mnist_shape, 42)));
  }

  add("circles radial", 4, config_params(config("shapes/circles_radial.json")));
  add("circles MLP", 1218, config_params(config("shapes/circles_mlp.json")));
  add("rings shell", 10, config_params(config("shapes/rings_shell.json")));
  add("rings MLP", 1251, config_params(config("shapes/rings_mlp.json")));
  add("iris ellipsoid", 20, config_params(config("shapes/iris_ellipsoid.json")));
  add("iris MLP", 1315, config_params(config("shapes/iris_mlp.json")));
  const std::size_t harmonic[] = {12, 20, 40};
  for (int L = 0; L <= 2; ++L) {
    add("harmonic L=" + std::to_string(L), harmonic[L],
        config_params(ablation_variant("ablations/harmonics_iris.json", L)));
  }
  const std::size_t parts[][2] = {{2, 4}, {4, 12}, {6, 20}, {8, 28}};
  for (const auto& [k, expected] : parts) {
    add("partitions k=" + std::to_string(k), expected,
        config_params(ablation_variant("ablations/partitions_circles.json", k)));
  }

  const std::size_t fourier = config_params(config("shapes/moons_fourier.json"));
  info.push_back("moons Fourier shell (K=5): implemented " + std::to_string(fourier) +
                 " = centre 2 + sharpness 1 + radius 2K+1");

  Outcome o;
  std::size_t ok = 0;
  for (const Row& r : rows) {
    if (r.expected == r.got) {
      ++ok;
    } else {
      fail_if(o, true, r.what + ": expected " + std::to_string(r.expected) + ", got " + std::to_string(r.got));
    }
  }
  o.detail = std::to_string(ok) + "/" + std::to_string(rows.size()) + " exact" + o.detail;
  return o;
}

Outcome synthetic() {
  Outcome o;
  for (const char* ds : {"moons", "circles", "xor", "helix"}) {
    const double punn = mean_test_acc(config(std::string("synthetic/") + ds + "_punn_sigmoid.json"));
    const double mlp = mean_test_acc(config(std::string("synthetic/") + ds + "_mlp.json"));
    const double mlp_floor = std::string(ds) == "circles" ? 0.97 : 0.985;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + ds + " PUNN-Sigma " + pct(punn) + " MLP " + pct(mlp);
    if (punn + kSlack < 0.985) o.detail += " (PUNN-Sigma < 98.5)";
    if (mlp + kSlack < mlp_floor) o.detail += " (MLP < " + pct(mlp_floor) + ")";
    if (punn + kSlack < 0.985 || mlp + kSlack < mlp_floor) o.status = Status::Fail;
  }
  return o;
}

Outcome shape() {
  struct Case {
    const char* file;
    std::size_t params;
    double floor;
  };
  const Case cases[] = {{"shapes/circles_radial.json", 4, 0.97},
                        {"shapes/rings_shell.json", 10, 0.99},
                        {"shapes/iris_ellipsoid.json", 20, 0.92}};
  Outcome o;
  for (const Case& c : cases) {
    const ExperimentConfig cfg = config(c.file);
    const double acc = mean_test_acc(cfg);
    const std::size_t p = config_params(cfg);
    o.detail += std::string(o.detail.empty() ? "" : "; ") + cfg.name + " " + pct(acc) + " (" +
                std::to_string(p) + " params, " + std::to_string(cfg.seeds.size()) + " seeds)";
    fail_if(o, acc + kSlack < c.floor, cfg.name + " below " + pct(c.floor));
    fail_if(o, p != c.params, cfg.name + " parameter count");
    fail_if(o, cfg.seeds.size() != 5, cfg.name + " seed count");
  }
  return o;
}

Outcome ablations() {
  Outcome o;
  const AblationSpec parts = parse_ablation(read_json("configs/ablations/partitions_circles.json"), g_root);
  std::vector<double> acc;
  o.detail = "partitions";
  for (const AblationPoint& p : run_ablation(parts, false)) {
    acc.push_back(p.result.test_accuracy.mean);
    o.detail += " k=" + p.value.dump() + ":" + pct(acc.back());
  }
  const double gain = acc.at(1) - acc.at(0);
  o.detail += " (gain 2->4 " + fmt("%.2f", 100 * gain) + " pp)";
  fail_if(o, gain + kSlack < 0.08, "gain 2->4 below 8 pp");

  const AblationSpec harm = parse_ablation(read_json("configs/ablations/harmonics_iris.json"), g_root);
  o.detail += "; harmonics";
  for (const AblationPoint& p : run_ablation(harm, false)) {
    const double a = p.result.test_accuracy.mean;
    o.detail += " L=" + p.value.dump() + ":" + pct(a);
    fail_if(o, std::abs(a - 0.953) > 0.04 + kSlack, "L=" + p.value.dump() + " outside 95.3 +- 4");
  }
  return o;
}

Outcome uci() {
  struct Case {
    const char* name;
    double floor;
  };
  const Case cases[] = {{"iris", 0.92}, {"wine", 0.94}, {"breast_cancer", 0.93}};
  Outcome o;
  for (const Case& c : cases) {
    const ExperimentConfig pc = config(std::string("uci/") + c.name + "_punn_sigmoid.json");
    const double punn = mean_test_acc(pc);
    const double mlp = mean_test_acc(config(std::string("uci/") + c.name + "_mlp.json"));
    o.detail += std::string(o.detail.empty() ? "" : "; ") + c.name + " PUNN-Sigma " + pct(punn) + " MLP " +
                pct(mlp) + " (" + std::to_string(pc.seeds.size()) + " seeds)";
    fail_if(o, punn + kSlack < c.floor, std::string(c.name) + " below " + pct(c.floor));
    fail_if(o, std::abs(punn - mlp) > 0.015 + kSlack, std::string(c.name) + " gap to MLP over 1.5 pp");
  }
  return o;
}

struct MnistOutcome {
  Outcome full;
  Outcome subset;
};

MnistOutcome mnist() {
  MnistOutcome r;
  if (!fs::exists(g_root / "data/mnist/train-images-idx3-ubyte")) {
    r.full = {Status::Skip, "data/mnist (60k IDX files) not present"};
  } else {
    const double punn = mean_test_acc(config("mnist/mnist_punn_sigmoid.json"));
    const double mlp = mean_test_acc(config("mnist/mnist_mlp.json"));
    r.full.detail = "PUNN-Sigma " + pct(punn) + " MLP " + pct(mlp);
    fail_if(r.full, punn + kSlack < 0.97, "PUNN-Sigma below 97.0");
    fail_if(r.full, mlp + kSlack < 0.975, "MLP below 97.5");
  }
  if (!fs::exists(g_root / "data/mnist10k/train-images-idx3-ubyte")) {
    r.subset = {Status::Skip, "data/mnist10k not present"};
  } else {
    const ExperimentConfig cfg = config("mnist/mnist10k_punn_sigmoid.json");
    const PreparedData data = prepare_data(cfg.dataset, cfg.seeds.front());
    const double punn = mean_test_acc(cfg);
    r.subset.detail = "PUNN-Sigma " + pct(punn) + " on " + std::to_string(data.train.size()) + " train / " +
                      std::to_string(data.test.size()) + " test";
    fail_if(r.subset, punn + kSlack < 0.94, "below 94.0");
  }
  return r;
}

Outcome determinism() {
  Outcome o;
  const char* files[] = {"synthetic/moons_punn_sigmoid.json", "synthetic/xor_mlp.json", "shapes/rings_shell.json"};
  for (const char* f : files) {
    const ExperimentConfig cfg = config(f);
    const SeedRun a = run_seed(cfg, cfg.seeds.front()), b = run_seed(cfg, cfg.seeds.front());
    Json ja = a.record.to_json(), jb = b.record.to_json();
    ja.erase("wall_ms");
    jb.erase("wall_ms");
    const bool same = ja == jb && a.metrics.loss_history == b.metrics.loss_history &&
                      model_to_json(a.model) == model_to_json(b.model);
    fail_if(o, !same, std::string(f) + " differs between runs");
  }
  o.detail = "3 configs rerun: records, loss histories and parameters identical" + o.detail;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string root = ".";
  std::vector<std::string> only;
  bool with_mnist = false;
  app.add_option("--root", root, "repository root (configs/, data/)");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_flag("--mnist", with_mnist, "run the long MNIST criterion");
  CLI11_PARSE(app, argc, argv);
  g_root = fs::absolute(root);

  auto selected = [&](const std::string& key) {
    return only.empty() || std::find(only.begin(), only.end(), key) != only.end();
  };

  int failures = 0, ran = 0, skipped = 0;
  auto report = [&](const char* label, const Outcome& o, double seconds, double limit) {
    Outcome out = o;
    if (limit > 0 && seconds > limit && out.status == Status::Pass) {
      out.status = Status::Fail;
      out.detail += " [runtime over " + fmt("%.0f", limit) + " s]";
    }
    const char* tag = out.status == Status::Pass ? "PASS" : out.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << tag << "  " << label << ": " << out.detail;
    if (out.status != Status::Skip) std::cout << " (" << fmt("%.1f", seconds) << " s)";
    std::cout << std::endl;
    if (out.status == Status::Fail) ++failures;
    if (out.status == Status::Skip) ++skipped;
    else ++ran;
  };
  auto timed = [&](const char* key, const char* label, double limit, const std::function<Outcome()>& fn) {
    if (!selected(key)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("error: ") + e.what()};
    }
    report(label, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), limit);
  };

  std::vector<std::string> info;
  timed("pou", "partition of unity", 10, partition_of_unity);
  timed("gradients", "gradient suite", 30, gradients);
  timed("constructive", "constructive oracle", 120, constructive);
  timed("params", "parameter counts", 0, [&] { return param_counts(info); });
  timed("synthetic", "synthetic accuracy", 180, synthetic);
  timed("shape", "shape-informed gates", 120, shape);
  timed("ablations", "ablations", 0, ablations);
  timed("uci", "UCI small sets", 300, uci);
  if (selected("mnist")) {
    if (!with_mnist) {
      report("MNIST", {Status::Skip, "long run; pass --mnist"}, 0, 0);
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      MnistOutcome m;
      try {
        m = mnist();
      } catch (const std::exception& e) {
        m.full = m.subset = {Status::Fail, std::string("error: ") + e.what()};
      }
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report("MNIST full", m.full, s, 0);
      report("MNIST 10k subset substitute", m.subset, s, 0);
    }
  }
  timed("determinism", "determinism", 0, determinism);

  for (const auto& line : info) std::cout << "INFO  " << line << '\n';
  std::cout << ran << " checked, " << failures << " failed, " << skipped << " skipped" << std::endl;
  if (failures > 0) return 1;
  // nothing was actually checked: report as skipped to the test driver
  if (ran == 0 && skipped > 0) return 77;
  return 0;
}
