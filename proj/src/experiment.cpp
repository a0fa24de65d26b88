#include "punn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace punn {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Config field readers. Every error names the field as a JSON path.

class Fields {
 public:
  Fields(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  std::string at(const char* key) const { return path_ + "." + key; }

  std::string str(const char* key, std::string fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    return v.get<std::string>();
  }
  double num(const char* key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
    return v.get<double>();
  }
  std::uint64_t uint(const char* key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return as_uint(obj_.at(key), at(key));
  }
  bool flag(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(at(key) + ": expected true or false");
    return v.get<bool>();
  }
  std::vector<std::size_t> uints(const char* key, std::vector<std::size_t> fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of non-negative integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(as_uint(v[i], at(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
  std::vector<double> nums(const char* key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  const Json* object(const char* key) {
    if (!has(key)) return nullptr;
    return &obj_.at(key);
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown field");
    }
  }

  static std::uint64_t as_uint(const Json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return std::uint64_t(v.get<std::int64_t>());
    throw ConfigError(where + ": expected a non-negative integer");
  }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

bool is_synthetic(const std::string& kind) {
  return kind == "moons" || kind == "circles" || kind == "xor" || kind == "helix" || kind == "rings";
}

std::size_t synthetic_classes(const std::string& kind) { return kind == "rings" ? 3 : 2; }

template <class F>
auto rethrow_as_config(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

GridBounds parse_bounds(const Json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 4) {
    throw ConfigError(where + ": expected [x1_lo, x1_hi, x2_lo, x2_hi]");
  }
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + ": bounds must be numbers");
  }
  GridBounds b{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
  if (!(b.x1_hi > b.x1_lo) || !(b.x2_hi > b.x2_lo)) throw ConfigError(where + ": need hi > lo");
  return b;
}

}  // namespace

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const Json& doc, const fs::path& base_dir) {
  ExperimentConfig cfg;
  Fields top(doc, "config");
  cfg.name = top.str("name", "experiment");
  if (top.has("description")) {
    // free text, ignored
  }

  const Json* ds_doc = top.object("dataset");
  if (ds_doc == nullptr) throw ConfigError("config.dataset: missing");
  {
    Fields f(*ds_doc, "dataset");
    DatasetSpec& d = cfg.dataset;
    d.kind = f.str("kind", d.kind);
    if (!is_synthetic(d.kind) && d.kind != "csv" && d.kind != "mnist") {
      throw ConfigError(f.at("kind") + ": unknown dataset kind '" + d.kind +
                        "' (expected moons, circles, xor, helix, rings, csv or mnist)");
    }
    d.n = f.uint("n", d.n);
    if (d.n < 2) throw ConfigError(f.at("n") + ": need at least 2 samples");
    d.noise = f.num("noise", d.noise);
    if (!(d.noise >= 0.0)) throw ConfigError(f.at("noise") + ": must be >= 0");
    if (f.has("seed")) d.seed = f.uint("seed", 0);
    if (f.has("path")) {
      d.path = f.str("path", "");
      if (d.path.is_relative() && !base_dir.empty()) d.path = base_dir / d.path;
    }
    if (f.has("label_column")) {
      const Json& lc = ds_doc->at("label_column");
      if (lc.is_string()) d.label_column = lc.get<std::string>();
      else if (lc.is_number_integer()) d.label_column = std::to_string(lc.get<std::int64_t>());
      else throw ConfigError(f.at("label_column") + ": expected a column name or index");
    }
    d.header = f.flag("header", d.header);
    d.test_fraction = f.num("test_fraction", d.test_fraction);
    if (!(d.test_fraction >= 0.0 && d.test_fraction < 1.0)) {
      throw ConfigError(f.at("test_fraction") + ": must lie in [0, 1)");
    }
    d.standardize = f.flag("standardize", d.standardize);
    d.class_order = f.uints("class_order", d.class_order);
    f.reject_unknown();
    if (d.kind == "csv" || d.kind == "mnist") {
      if (d.path.empty()) throw ConfigError(f.at("path") + ": required for kind '" + d.kind + "'");
      if (!fs::exists(d.path)) {
        throw ConfigError(f.at("path") + ": '" + d.path.string() + "' does not exist");
      }
    }
  }

  const Json* model_doc = top.object("model");
  if (model_doc == nullptr) throw ConfigError("config.model: missing");
  {
    Fields f(*model_doc, "model");
    ModelSpec& m = cfg.model;
    m.type = f.str("type", m.type);
    if (m.type != "punn" && m.type != "mlp") {
      throw ConfigError(f.at("type") + ": expected 'punn' or 'mlp'");
    }
    if (f.has("gate")) {
      m.gate = rethrow_as_config(f.at("gate"), [&] { return parse_gate_family(f.str("gate", "")); });
    }
    if (f.has("activation")) {
      m.activation = rethrow_as_config(f.at("activation"),
                                       [&] { return parse_activation(f.str("activation", "")); });
    }
    m.hidden = f.uints("hidden", m.hidden);
    for (std::size_t w : m.hidden) {
      if (w == 0) throw ConfigError(f.at("hidden") + ": widths must be >= 1");
    }
    m.partitions = f.uint("partitions", m.partitions);
    if (m.partitions == 1) throw ConfigError(f.at("partitions") + ": need k >= 2");
    m.class_map = f.uints("class_map", m.class_map);
    if (!m.class_map.empty() && m.partitions != 0 && m.class_map.size() != m.partitions) {
      throw ConfigError(f.at("class_map") + ": needs one entry per partition");
    }
    m.order = f.uint("order", m.order);
    m.inner = f.flag("inner", m.inner);
    m.init_sharpness = f.num("init_sharpness", m.init_sharpness);
    if (!(m.init_sharpness > 0.0)) throw ConfigError(f.at("init_sharpness") + ": must be > 0");
    f.reject_unknown();
    if (m.type == "mlp" && m.partitions != 0) {
      throw ConfigError(f.at("partitions") + ": only meaningful for type 'punn'");
    }
    if (is_synthetic(cfg.dataset.kind) && m.partitions != 0 &&
        m.partitions < synthetic_classes(cfg.dataset.kind)) {
      throw ConfigError(f.at("partitions") + ": k=" + std::to_string(m.partitions) +
                        " is below the class count C=" +
                        std::to_string(synthetic_classes(cfg.dataset.kind)));
    }
  }

  if (const Json* t = top.object("train")) {
    Fields f(*t, "train");
    TrainConfig& tc = cfg.train;
    tc.epochs = f.uint("epochs", tc.epochs);
    tc.batch_size = f.uint("batch_size", tc.batch_size);
    tc.lr = f.num("lr", tc.lr);
    tc.loss_eps = f.num("loss_eps", tc.loss_eps);
    tc.shuffle = f.flag("shuffle", tc.shuffle);
    f.reject_unknown();
    rethrow_as_config("train", [&] {
      tc.validate();
      return 0;
    });
  }

  const std::uint64_t base_seed = top.uint("seed", 42);
  const std::uint64_t runs = top.uint("runs", 1);
  if (runs < 1) throw ConfigError("config.runs: must be >= 1");
  if (top.has("seeds")) {
    std::vector<std::size_t> s = top.uints("seeds", {});
    if (s.empty()) throw ConfigError("config.seeds: needs at least one seed");
    cfg.seeds.assign(s.begin(), s.end());
  } else {
    cfg.seeds = seed_range(base_seed, runs);
  }
  cfg.train.seed = cfg.seeds.front();

  if (const Json* o = top.object("output")) {
    Fields f(*o, "output");
    OutputSpec& out = cfg.output;
    out.dir = f.str("dir", out.dir.string());
    if (out.dir.is_relative() && !base_dir.empty()) out.dir = base_dir / out.dir;
    out.metrics = f.str("metrics", out.metrics);
    out.save_model = f.flag("save_model", out.save_model);
    if (const Json* g = f.object("grid")) {
      Fields gf(*g, "output.grid");
      GridSpec spec;
      spec.resolution = gf.uint("resolution", spec.resolution);
      if (spec.resolution < 1) throw ConfigError(gf.at("resolution") + ": must be >= 1");
      if (gf.has("bounds")) spec.bounds = parse_bounds(g->at("bounds"), gf.at("bounds"));
      gf.reject_unknown();
      out.grid = spec;
    }
    f.reject_unknown();
  }
  top.reject_unknown();

  cfg.raw = doc;
  Json hashed = doc;
  hashed.erase("output");
  cfg.hash = fnv1a_hex(hashed.dump());
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  // relative paths resolve against the working directory
  return parse_config(doc, {});
}

// ---------------------------------------------------------------------------
// Data and models

PreparedData prepare_data(const DatasetSpec& spec, std::uint64_t seed) {
  PreparedData out;
  if (spec.kind == "mnist") {
    MnistData m = load_mnist(spec.path);
    out.train = std::move(m.train);
    out.test = std::move(m.test);
    if (!spec.class_order.empty()) {
      out.train = reorder_classes(out.train, spec.class_order);
      out.test = reorder_classes(out.test, spec.class_order);
    }
  } else {
    Dataset ds = spec.kind == "csv"
                     ? load_csv(spec.path, spec.label_column, spec.header)
                     : make_synthetic(parse_synthetic_kind(spec.kind), spec.n, spec.noise,
                                      spec.seed.value_or(seed));
    if (!spec.class_order.empty()) ds = reorder_classes(ds, spec.class_order);
    Split s = stratified_split(ds, spec.test_fraction, seed);
    out.train = std::move(s.train);
    out.test = std::move(s.test);
  }
  if (spec.standardize) {
    Dataset* others[] = {&out.test};
    out.stats = standardize(out.train, others);
  }
  return out;
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 1.0;
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

struct ClassShape {
  std::vector<double> center;
  std::vector<double> variance;
  std::vector<double> distances;
};

ClassShape class_shape(const Dataset& ds, std::size_t cls, Rng& rng) {
  const std::size_t d = ds.dim();
  ClassShape s;
  s.center.assign(d, 0.0);
  s.variance.assign(d, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] != cls) continue;
    ++count;
    for (std::size_t j = 0; j < d; ++j) s.center[j] += ds.features(i, j);
  }
  if (count == 0) throw ConfigError("class " + std::to_string(cls) + " has no training samples");
  for (double& c : s.center) c /= double(count);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] != cls) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = ds.features(i, j) - s.center[j];
      s.variance[j] += delta * delta / double(count);
    }
  }
  // small seeded offset so runs differ beyond the data split
  for (std::size_t j = 0; j < d; ++j) {
    s.center[j] += 0.05 * std::sqrt(std::max(s.variance[j], 1e-6)) * rng.normal();
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] != cls) continue;
    double r2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = ds.features(i, j) - s.center[j];
      r2 += delta * delta;
    }
    s.distances.push_back(std::sqrt(r2));
  }
  return s;
}

GateSpec shape_gate(const ModelSpec& m, const ClassShape& s) {
  const std::size_t d = s.center.size();
  const double sharp = m.init_sharpness;
  const double r_in = std::max(2.0 * kRadiusFloor, quantile(s.distances, 0.05));
  const double r_out = std::max(r_in + 2.0 * kRadiusFloor, quantile(s.distances, 0.9));
  switch (m.gate) {
    case GateFamily::Radial: return GateSpec::radial(m.activation, s.center, r_out, sharp);
    case GateFamily::Ellipsoid: {
      std::vector<double> axis(d);
      for (std::size_t j = 0; j < d; ++j) axis[j] = 1.0 / (4.0 * std::max(s.variance[j], 1e-3));
      return GateSpec::ellipsoid(m.activation, s.center, axis, sharp, 0.0);
    }
    case GateFamily::Shell:
      return GateSpec::shell(m.activation, s.center, r_in, r_out, sharp);
    case GateFamily::FourierShell: {
      if (d != 2) throw ConfigError("model.gate: fourier_shell needs 2-D data");
      FourierRadius r;
      r.a.assign(m.order, 0.0);
      r.b.assign(m.order, 0.0);
      r.a0 = m.inner ? r_out - r_in : r_out;
      return GateSpec::fourier_shell(m.activation, s.center, sharp, r, m.inner ? r_in : -1.0);
    }
    case GateFamily::HarmonicShell: {
      HarmonicRadius r;
      r.dim = d;
      r.degree = m.order;
      r.coeffs.assign(harmonic_coeff_count(d, m.order), 0.0);
      r.coeffs[0] = m.inner ? r_out - r_in : r_out;
      return GateSpec::harmonic_shell(m.activation, s.center, sharp, r, m.inner ? r_in : -1.0);
    }
    case GateFamily::Mlp: break;
  }
  throw InternalError("shape_gate called for an MLP gate");
}

std::string model_label(const ModelSpec& m) {
  if (m.type == "mlp") return "mlp";
  std::string s = "punn-" + std::string(to_string(m.activation)) + "-" + std::string(to_string(m.gate));
  if (m.gate == GateFamily::FourierShell || m.gate == GateFamily::HarmonicShell) {
    s += "-" + std::to_string(m.order);
  }
  return s;
}

}  // namespace

Model build_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed) {
  const std::size_t d = train.dim();
  const std::size_t C = train.num_classes;
  Rng rng = Rng(seed).fork(0x696e6974ULL);
  if (spec.type == "mlp") return SoftmaxMlp::glorot(d, spec.hidden, C, rng);

  const std::size_t k = spec.partitions == 0 ? C : spec.partitions;
  if (k < C) {
    throw ConfigError("model.partitions: k=" + std::to_string(k) + " is below the class count C=" +
                      std::to_string(C));
  }
  std::vector<std::size_t> cmap = spec.class_map;
  if (cmap.empty()) {
    for (std::size_t i = 0; i < k; ++i) cmap.push_back(i % C);
  }
  if (cmap.size() != k) throw ConfigError("model.class_map: needs one entry per partition");

  std::vector<GateSpec> gates;
  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(1);
  const MlpLayout layout(widths);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (spec.gate == GateFamily::Mlp) {
      gates.push_back(GateSpec::mlp(spec.activation, layout, rng));
    } else {
      if (cmap[i] >= C) throw ConfigError("model.class_map: entry out of range");
      gates.push_back(shape_gate(spec, class_shape(train, cmap[i], rng)));
    }
  }
  return rethrow_as_config("model", [&] { return Model(PartitionModel(std::move(gates), C, cmap)); });
}

Json RunRecord::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  return Json{{"name", name},           {"dataset", dataset},    {"model", model},
              {"seed", seed},           {"params", params},      {"train_acc", num(train_acc)},
              {"test_acc", num(test_acc)}, {"epochs", epochs},   {"final_loss", num(final_loss)},
              {"wall_ms", wall_ms},     {"config_hash", config_hash}};
}

// ---------------------------------------------------------------------------
// Model files

Json model_to_json(const ModelFile& file) {
  Json model;
  if (const auto* pm = std::get_if<PartitionModel>(&file.model)) {
    model["type"] = "punn";
    model["num_classes"] = pm->num_classes();
    model["class_map"] = std::vector<std::size_t>(pm->class_map().begin(), pm->class_map().end());
    Json gates = Json::array();
    for (const auto& g : pm->gates()) {
      gates.push_back({{"family", to_string(g.family())},
                       {"activation", to_string(g.activation())},
                       {"dim", g.input_dim()},
                       {"mlp_widths", g.family() == GateFamily::Mlp ? g.mlp_layout().widths()
                                                                    : std::vector<std::size_t>{}},
                       {"order", g.order()},
                       {"inner", g.has_inner()},
                       {"params", std::vector<double>(g.params().begin(), g.params().end())}});
    }
    model["gates"] = std::move(gates);
  } else {
    const auto& mlp = std::get<SoftmaxMlp>(file.model);
    model["type"] = "mlp";
    model["widths"] = mlp.net.layout.widths();
    model["params"] = mlp.net.values;
  }
  return Json{{"format", "punn-model"},
              {"version", kModelFormatVersion},
              {"name", file.name},
              {"provenance", {{"config_hash", file.config_hash}, {"seed", file.seed}}},
              {"standardization", {{"mean", file.stats.mean}, {"std", file.stats.stddev}}},
              {"model", std::move(model)}};
}

ModelFile model_from_json(const Json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", "") != "punn-model") {
      throw ParseError("not a model file (missing format tag)");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw UnsupportedError("unsupported model file version " + std::to_string(version) +
                             " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
    }
    ModelFile file;
    file.name = doc.at("name").get<std::string>();
    file.config_hash = doc.at("provenance").at("config_hash").get<std::string>();
    file.seed = doc.at("provenance").at("seed").get<std::uint64_t>();
    file.stats.mean = doc.at("standardization").at("mean").get<std::vector<double>>();
    file.stats.stddev = doc.at("standardization").at("std").get<std::vector<double>>();
    if (file.stats.mean.size() != file.stats.stddev.size()) {
      throw ParseError("standardization mean and std differ in length");
    }
    const Json& m = doc.at("model");
    const std::string type = m.at("type").get<std::string>();
    if (type == "punn") {
      std::vector<GateSpec> gates;
      for (const Json& g : m.at("gates")) {
        gates.push_back(GateSpec::from_raw(parse_activation(g.at("activation").get<std::string>()),
                                           parse_gate_family(g.at("family").get<std::string>()),
                                           g.at("dim").get<std::size_t>(),
                                           g.at("mlp_widths").get<std::vector<std::size_t>>(),
                                           g.at("order").get<std::size_t>(), g.at("inner").get<bool>(),
                                           g.at("params").get<std::vector<double>>()));
      }
      file.model = PartitionModel(std::move(gates), m.at("num_classes").get<std::size_t>(),
                                  m.at("class_map").get<std::vector<std::size_t>>());
    } else if (type == "mlp") {
      MlpParams p(MlpLayout(m.at("widths").get<std::vector<std::size_t>>()));
      auto values = m.at("params").get<std::vector<double>>();
      if (values.size() != p.size()) throw ParseError("MLP parameter count does not match widths");
      p.values = std::move(values);
      file.model = SoftmaxMlp(std::move(p));
    } else {
      throw ParseError("unknown model type '" + type + "'");
    }
    if (!file.stats.empty() && file.stats.mean.size() != model_input_dim(file.model)) {
      throw ParseError("standardization length does not match the model input dimension");
    }
    return file;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ModelFile& file, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file '" + path.string() + "'");
  out << model_to_json(file).dump(1) << '\n';
}

ModelFile load_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError("model file '" + path.string() + "' is corrupt: " + e.what());
  }
  return model_from_json(doc);
}

// ---------------------------------------------------------------------------
// Runs

SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedRun run;
  run.data = prepare_data(cfg.dataset, seed);
  Model model = build_model(cfg.model, run.data.train, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  run.metrics = train(model, run.data.train, tc, run.data.test.size() > 0 ? &run.data.test : nullptr);
  if (run.data.test.size() == 0) run.metrics.test_accuracy = std::numeric_limits<double>::quiet_NaN();

  run.model = ModelFile{std::move(model), run.data.stats, cfg.name, cfg.hash, seed};
  RunRecord& r = run.record;
  r.name = cfg.name;
  r.dataset = cfg.dataset.kind == "csv" ? cfg.dataset.path.stem().string() : cfg.dataset.kind;
  r.model = model_label(cfg.model);
  r.seed = seed;
  r.params = run.metrics.param_count;
  r.train_acc = run.metrics.train_accuracy;
  r.test_acc = run.metrics.test_accuracy;
  r.epochs = run.metrics.epochs;
  r.final_loss = run.metrics.loss_history.back();
  r.wall_ms = run.metrics.wall_ms;
  r.config_hash = cfg.hash;
  return run;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  std::ofstream metrics;
  if (write_outputs) {
    fs::create_directories(cfg.output.dir);
    const fs::path mpath = cfg.output.dir / cfg.output.metrics;
    metrics.open(mpath);
    if (!metrics) throw ConfigError("cannot write metrics file '" + mpath.string() + "'");
  }
  std::vector<RunRecord> records;
  for (std::uint64_t seed : cfg.seeds) {
    SeedRun run = run_seed(cfg, seed);
    records.push_back(run.record);
    if (!write_outputs) continue;
    metrics << run.record.to_json().dump() << '\n' << std::flush;
    const std::string stem = cfg.name + "_seed" + std::to_string(seed);
    if (cfg.output.save_model) save_model(run.model, cfg.output.dir / (stem + ".model.json"));
    if (cfg.output.grid) {
      const GridResult g = grid_eval(run.model, cfg.output.grid->bounds, cfg.output.grid->resolution);
      write_grid_csv(g, cfg.output.dir / (stem + "_grid.csv"));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Explanations and grids

DecisionTrace explain(const ModelFile& file, std::span<const double> x) {
  const std::size_t d = model_input_dim(file.model);
  if (x.size() != d) {
    throw InputShapeError("input has " + std::to_string(x.size()) + " values, model expects " +
                          std::to_string(d));
  }
  std::vector<double> z(x.begin(), x.end());
  if (!file.stats.empty()) z = file.stats.apply(x);

  DecisionTrace trace;
  if (const auto* pm = std::get_if<PartitionModel>(&file.model)) {
    double mass = 1.0;
    std::vector<double> g;
    for (std::size_t j = 0; j < pm->gates().size(); ++j) {
      const double gj = gate_eval(pm->gates()[j], z);
      g.push_back(gj);
      TraceStep s;
      s.gate = j + 1;
      s.acceptance = gj;
      s.mass_before = mass;
      s.partition = mass * gj;
      s.mass_after = mass * (1.0 - gj);
      s.cls = pm->class_map()[j];
      trace.steps.push_back(s);
      mass = s.mass_after;
    }
    trace.h = partition_from_gates(g);
    trace.probs = class_probs(trace.h, pm->class_map(), pm->num_classes());
  } else {
    trace.probs = predict(std::get<SoftmaxMlp>(file.model), z).probs;
    trace.h = trace.probs;
  }
  trace.predicted = argmax(trace.probs);
  return trace;
}

void print_trace(const DecisionTrace& t, std::ostream& out) {
  if (t.steps.empty()) {
    out << "softmax model: no gate hierarchy\n";
  }
  for (const auto& s : t.steps) {
    out << "gate " << s.gate << ": remaining mass " << fmt17(s.mass_before) << ", accept "
        << fmt17(s.acceptance) << " -> h_" << s.gate << " = " << fmt17(s.partition) << " (class "
        << s.cls << "), pass on " << fmt17(s.mass_after) << '\n';
  }
  if (!t.steps.empty()) {
    out << "final partition h_" << t.h.size() << " = " << fmt17(t.h.back()) << '\n';
  }
  out << "class probabilities:";
  for (double p : t.probs) out << ' ' << fmt17(p);
  out << "\npredicted class: " << t.predicted << '\n';
}

GridResult grid_eval(const ModelFile& file, const GridBounds& b, std::size_t resolution) {
  GridBounds z = b;
  if (!file.stats.empty()) {
    if (file.stats.mean.size() != 2) throw UnsupportedError("grid evaluation needs a 2-D model");
    z = {(b.x1_lo - file.stats.mean[0]) / file.stats.stddev[0],
         (b.x1_hi - file.stats.mean[0]) / file.stats.stddev[0],
         (b.x2_lo - file.stats.mean[1]) / file.stats.stddev[1],
         (b.x2_hi - file.stats.mean[1]) / file.stats.stddev[1]};
  }
  GridResult g = grid_eval(file.model, z, resolution);
  // report raw coordinates
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      auto at = [&](double lo, double hi, std::size_t i) {
        return resolution == 1 ? lo : lo + (hi - lo) * double(i) / double(resolution - 1);
      };
      g.points(r * resolution + c, 0) = at(b.x1_lo, b.x1_hi, c);
      g.points(r * resolution + c, 1) = at(b.x2_lo, b.x2_hi, r);
    }
  }
  return g;
}

void write_grid_csv(const GridResult& grid, std::ostream& out) {
  out << "x1,x2";
  for (std::size_t j = 0; j < grid.h.cols(); ++j) out << ",h_" << j + 1;
  out << ",class\n";
  for (std::size_t i = 0; i < grid.points.rows(); ++i) {
    out << fmt17(grid.points(i, 0)) << ',' << fmt17(grid.points(i, 1));
    for (double v : grid.h.row(i)) out << ',' << fmt17(v);
    out << ',' << grid.predicted[i] << '\n';
  }
}

void write_grid_csv(const GridResult& grid, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write grid file '" + path.string() + "'");
  write_grid_csv(grid, out);
}

// ---------------------------------------------------------------------------
// Ablations

AblationSpec parse_ablation(const Json& doc, const fs::path& base_dir) {
  Fields f(doc, "ablation");
  AblationSpec spec;
  spec.base_dir = base_dir;
  const Json* base = f.object("base");
  if (base == nullptr) throw ConfigError("ablation.base: missing");
  if (base->is_string()) {
    fs::path p = base->get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) throw ConfigError("ablation.base: cannot open '" + p.string() + "'");
    try {
      spec.base = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw ConfigError("ablation.base: '" + p.string() + "' is not valid JSON: " + e.what());
    }
  } else {
    spec.base = *base;
  }
  spec.pointer = f.str("parameter", "");
  if (spec.pointer.empty() || spec.pointer.front() != '/') {
    throw ConfigError("ablation.parameter: expected a JSON pointer such as /model/partitions");
  }
  const Json* values = f.object("values");
  if (values == nullptr || !values->is_array() || values->empty()) {
    throw ConfigError("ablation.values: expected a non-empty array");
  }
  spec.values.assign(values->begin(), values->end());
  f.reject_unknown();
  // validate every variant up front
  for (const Json& v : spec.values) {
    Json patched = spec.base;
    patched[Json::json_pointer(spec.pointer)] = v;
    parse_config(patched, base_dir);
  }
  return spec;
}

std::vector<AblationPoint> run_ablation(const AblationSpec& spec, bool write_outputs) {
  std::vector<AblationPoint> points;
  std::ofstream metrics;
  for (const Json& v : spec.values) {
    Json patched = spec.base;
    patched[Json::json_pointer(spec.pointer)] = v;
    const std::string base_name = patched.value("name", std::string("ablation"));
    patched["name"] = base_name + "[" + spec.pointer + "=" + v.dump() + "]";
    const ExperimentConfig cfg = parse_config(patched, spec.base_dir);
    if (write_outputs && !metrics.is_open()) {
      fs::create_directories(cfg.output.dir);
      metrics.open(cfg.output.dir / cfg.output.metrics);
      if (!metrics) throw ConfigError("cannot write ablation metrics file");
    }
    AblationPoint point;
    point.value = v;
    point.result = multi_seed(cfg.seeds, [&](std::uint64_t seed) {
      SeedRun run = run_seed(cfg, seed);
      point.records.push_back(run.record);
      if (write_outputs) metrics << run.record.to_json().dump() << '\n' << std::flush;
      return run.metrics;
    });
    point.params = point.records.front().params;
    points.push_back(std::move(point));
  }
  return points;
}

// ---------------------------------------------------------------------------
// Density demo

DensityDemoSpec parse_density_demo(const Json& doc) {
  Fields f(doc, "density");
  DensityDemoSpec s;
  s.target = f.str("target", s.target);
  if (s.target != "punn" && s.target != "sigmoid_ridge" && s.target != "constant") {
    throw ConfigError(f.at("target") + ": expected punn, sigmoid_ridge or constant");
  }
  s.box.lo = {-1.0, -1.0};
  s.box.hi = {1.0, 1.0};
  s.box.resolution = {50, 50};
  if (const Json* g = f.object("grid")) {
    Fields gf(*g, "density.grid");
    s.box.lo = gf.nums("lo", s.box.lo);
    s.box.hi = gf.nums("hi", s.box.hi);
    s.box.resolution = gf.uints("resolution", s.box.resolution);
    gf.reject_unknown();
  }
  rethrow_as_config("density.grid", [&] {
    s.box.validate();
    return 0;
  });
  if (s.box.dim() > 3) throw ConfigError("density.grid: at most 3 dimensions");
  s.partitions = f.uint("partitions", s.partitions);
  if (s.partitions < 2) throw ConfigError(f.at("partitions") + ": need k >= 2");
  s.generator_hidden = f.uints("generator_hidden", s.generator_hidden);
  s.constant = f.nums("constant", s.constant);
  s.ridge_slope = f.num("ridge_slope", s.ridge_slope);
  s.seed = f.uint("seed", s.seed);
  if (const Json* fit = f.object("fit")) {
    Fields ff(*fit, "density.fit");
    s.fit.hidden = ff.uints("hidden", s.fit.hidden);
    s.fit.epochs = ff.uint("epochs", s.fit.epochs);
    s.fit.lr = ff.num("lr", s.fit.lr);
    s.fit.refit_output = ff.flag("refit_output", s.fit.refit_output);
    ff.reject_unknown();
  }
  s.fit.seed = s.seed + 1;
  if (const Json* sw = f.object("sweep")) {
    if (!sw->is_array()) throw ConfigError("density.sweep: expected an array of hidden-width lists");
    for (std::size_t i = 0; i < sw->size(); ++i) {
      const std::string where = "density.sweep[" + std::to_string(i) + "]";
      if (!(*sw)[i].is_array()) throw ConfigError(where + ": expected an array");
      std::vector<std::size_t> widths;
      for (const Json& w : (*sw)[i]) widths.push_back(Fields::as_uint(w, where));
      s.sweep.push_back(std::move(widths));
    }
  }
  f.reject_unknown();
  return s;
}

ProbabilityMapGrid density_target(const DensityDemoSpec& spec) {
  if (spec.target == "punn") {
    return random_punn_map(spec.box, spec.partitions, spec.generator_hidden, spec.seed).map;
  }
  if (spec.target == "sigmoid_ridge") {
    const double slope = spec.ridge_slope;
    return ProbabilityMapGrid::sample(spec.box, [slope](std::span<const double> x) {
      const double p1 = sigmoid(slope * x[0]);
      return std::vector<double>{p1, 1.0 - p1};
    });
  }
  const std::vector<double> c = spec.constant;
  return ProbabilityMapGrid::sample(spec.box, [c](std::span<const double>) { return c; });
}

Json run_density_demo(const DensityDemoSpec& spec) {
  const ProbabilityMapGrid p = density_target(spec);
  const DensityFitResult fit = fit_density_demo(p, spec.fit);
  Json report{{"target", spec.target},
              {"partitions", p.partitions()},
              {"grid_points", p.values.rows()},
              {"fit",
               {{"hidden", spec.fit.hidden},
                {"epochs", spec.fit.epochs},
                {"params", fit.param_count},
                {"sup_error", fit.sup_error},
                {"gate_bound", fit.gate_bound},
                {"mse", fit.mse},
                {"clamped", fit.clamped}}}};
  if (!spec.sweep.empty()) {
    const ConvergenceReport conv = density_sweep(p, spec.fit, spec.sweep);
    Json rows = Json::array();
    for (const auto& pt : conv.points) {
      rows.push_back({{"hidden", pt.hidden},
                      {"epochs", pt.epochs},
                      {"params", pt.param_count},
                      {"sup_error", pt.sup_error},
                      {"gate_bound", pt.gate_bound}});
    }
    report["sweep"] = std::move(rows);
    report["monotone"] = conv.monotone;
  }
  return report;
}

}  // namespace punn
