#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "punn/constructive.hpp"
#include "punn/datasets.hpp"
#include "punn/training.hpp"

namespace punn {

using Json = nlohmann::json;

struct DatasetSpec {
  std::string kind = "moons";  // a synthetic kind, "csv" or "mnist"
  std::size_t n = 1000;
  double noise = 0.1;
  std::optional<std::uint64_t> seed;  // generator seed; defaults to the run seed
  std::filesystem::path path;
  std::string label_column = "-1";
  bool header = true;
  double test_fraction = 0.2;
  bool standardize = true;
  std::vector<std::size_t> class_order;
};

struct ModelSpec {
  std::string type = "punn";  // "punn" or "mlp"
  GateFamily gate = GateFamily::Mlp;
  Activation activation = Activation::Sigmoid;
  std::vector<std::size_t> hidden{32, 32};
  std::size_t partitions = 0;  // 0 means one per class
  std::vector<std::size_t> class_map;
  std::size_t order = 0;  // Fourier K or harmonic degree L
  bool inner = false;
  double init_sharpness = 5.0;
};

struct GridSpec {
  std::size_t resolution = 300;
  GridBounds bounds;
};

struct OutputSpec {
  std::filesystem::path dir = "results";
  std::string metrics = "metrics.jsonl";
  bool save_model = false;
  std::optional<GridSpec> grid;
};

struct ExperimentConfig {
  std::string name;
  DatasetSpec dataset;
  ModelSpec model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{42};
  OutputSpec output;
  Json raw;
  std::string hash;  // FNV-1a of the canonical config text, 16 hex digits
};

/// Validates and converts a config document. Relative paths resolve
/// against `base_dir`. Errors are ConfigError naming the offending field.
ExperimentConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

std::string fnv1a_hex(std::string_view text);

struct PreparedData {
  Dataset train;
  Dataset test;
  StandardizationStats stats;
};

PreparedData prepare_data(const DatasetSpec& spec, std::uint64_t seed);

/// Builds an untrained model. Shape gates start at the statistics of the
/// class their partition maps to (centre at the class mean, radii at
/// distance quantiles); MLP parameters are Glorot-initialised from `seed`.
Model build_model(const ModelSpec& spec, const Dataset& train, std::uint64_t seed);

struct RunRecord {
  std::string name;
  std::string dataset;
  std::string model;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::size_t epochs = 0;
  double final_loss = 0.0;
  double wall_ms = 0.0;
  std::string config_hash;

  Json to_json() const;
};

struct ModelFile {
  Model model;
  StandardizationStats stats;
  std::string name;
  std::string config_hash;
  std::uint64_t seed = 0;
};

inline constexpr int kModelFormatVersion = 1;

Json model_to_json(const ModelFile& file);
ModelFile model_from_json(const Json& doc);
void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

struct SeedRun {
  ModelFile model;
  PreparedData data;
  RunMetrics metrics;
  RunRecord record;
};

SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed, appends one JSON line per run to the metrics file and
/// writes model and grid files when requested.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

struct TraceStep {
  std::size_t gate = 0;         // 1-based
  double acceptance = 0.0;      // g_i(x)
  double mass_before = 0.0;     // prod_{j<i}(1 - g_j)
  double partition = 0.0;       // h_i = mass_before * g_i
  double mass_after = 0.0;      // mass_before * (1 - g_i)
  std::size_t cls = 0;          // pi(i)
};

struct DecisionTrace {
  std::vector<TraceStep> steps;
  std::vector<double> h;        // h_1..h_k
  std::vector<double> probs;    // class probabilities
  std::size_t predicted = 0;
};

/// Hierarchical accept/reject trace for a raw (unstandardized) input.
DecisionTrace explain(const ModelFile& file, std::span<const double> x);
void print_trace(const DecisionTrace& trace, std::ostream& out);

/// Grid over raw coordinates; the model sees standardized inputs.
GridResult grid_eval(const ModelFile& file, const GridBounds& bounds, std::size_t resolution);

/// CSV with header x1,x2,h_1..h_k,class; rows in grid order, x1 fastest.
void write_grid_csv(const GridResult& grid, std::ostream& out);
void write_grid_csv(const GridResult& grid, const std::filesystem::path& path);

struct AblationSpec {
  Json base;
  std::string pointer;  // JSON pointer into the base config
  std::vector<Json> values;
  std::filesystem::path base_dir;
};

struct AblationPoint {
  Json value;
  std::size_t params = 0;
  MultiSeedResult result;
  std::vector<RunRecord> records;
};

AblationSpec parse_ablation(const Json& doc, const std::filesystem::path& base_dir = {});
std::vector<AblationPoint> run_ablation(const AblationSpec& spec, bool write_outputs = true);

struct DensityDemoSpec {
  std::string target = "punn";  // "punn", "sigmoid_ridge" or "constant"
  GridBox box;
  std::size_t partitions = 3;
  std::vector<std::size_t> generator_hidden{8};
  std::vector<double> constant{0.3, 0.7};
  double ridge_slope = 3.0;
  std::uint64_t seed = 42;
  DensityFitConfig fit;
  std::vector<std::vector<std::size_t>> sweep;
};

DensityDemoSpec parse_density_demo(const Json& doc);
ProbabilityMapGrid density_target(const DensityDemoSpec& spec);
Json run_density_demo(const DensityDemoSpec& spec);

}  // namespace punn
