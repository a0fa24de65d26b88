#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "punn/experiment.hpp"

namespace fs = std::filesystem;
using namespace punn;

namespace {

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Numeric: return 3;
    default: return 1;
  }
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partition of unity neural networks: experiments and tools"};
  app.require_subcommand(1);

  std::string config_path;
  bool no_write = false;
  auto* run = app.add_subcommand("run", "train and evaluate every seed of a config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_flag("--no-write", no_write, "skip metrics/model/grid files");

  std::string model_path;
  std::vector<double> input;
  auto* explain_cmd = app.add_subcommand("explain", "hierarchical decision trace for one input");
  explain_cmd->add_option("model", model_path, "model file")->required();
  explain_cmd->add_option("x", input, "input vector in raw feature units")->required();

  std::vector<double> bounds{-1.5, 2.5, -1.5, 1.5};
  std::size_t resolution = 300;
  std::string out_path;
  auto* grid_cmd = app.add_subcommand("export-grid", "partition values on a 2-D grid as CSV");
  grid_cmd->add_option("model", model_path, "model file")->required();
  grid_cmd->add_option("--bounds", bounds, "x1_lo x1_hi x2_lo x2_hi")->expected(4);
  grid_cmd->add_option("--resolution", resolution, "points per axis");
  grid_cmd->add_option("-o,--out", out_path, "output CSV")->required();

  std::string density_path;
  auto* density_cmd = app.add_subcommand("density-demo", "fit gate nets to a probability map");
  density_cmd->add_option("config", density_path, "density demo config (JSON)")->required();
  density_cmd->add_option("-o,--out", out_path, "write the convergence report here");

  std::string ablation_path;
  auto* ablate_cmd = app.add_subcommand("ablate", "sweep one config field over a list of values");
  ablate_cmd->add_option("config", ablation_path, "ablation spec (JSON)")->required();
  ablate_cmd->add_flag("--no-write", no_write, "skip the metrics file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      for (const RunRecord& r : run_experiment(cfg, !no_write)) {
        std::cout << r.to_json().dump() << '\n';
      }
    } else if (explain_cmd->parsed()) {
      print_trace(explain(load_model(model_path), input), std::cout);
    } else if (grid_cmd->parsed()) {
      const GridBounds b{bounds[0], bounds[1], bounds[2], bounds[3]};
      if (resolution < 1) throw ConfigError("--resolution must be >= 1");
      if (!(b.x1_hi > b.x1_lo) || !(b.x2_hi > b.x2_lo)) throw ConfigError("--bounds need hi > lo");
      write_grid_csv(grid_eval(load_model(model_path), b, resolution), fs::path(out_path));
      std::cout << "wrote " << resolution * resolution << " rows to " << out_path << '\n';
    } else if (density_cmd->parsed()) {
      const Json report = run_density_demo(parse_density_demo(read_json(density_path)));
      if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw ConfigError("cannot write '" + out_path + "'");
        out << report.dump(2) << '\n';
      }
      std::cout << report.dump(2) << '\n';
    } else if (ablate_cmd->parsed()) {
      const AblationSpec spec = parse_ablation(read_json(ablation_path));
      std::cout << "value\tparams\ttest_acc_mean\ttest_acc_std\n";
      for (const AblationPoint& p : run_ablation(spec, !no_write)) {
        std::cout << p.value.dump() << '\t' << p.params << '\t' << pct(p.result.test_accuracy.mean)
                  << '\t' << pct(p.result.test_accuracy.stddev) << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
