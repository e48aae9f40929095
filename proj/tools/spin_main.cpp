// Command line front end: spin run | sweep | eval.

#include "spin/errors.hpp"
#include "spin/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <fstream>
#include <sstream>

namespace {

// One string option per config key; the flag name is the key.
std::map<std::string, std::string> add_key_flags(CLI::App& cmd) {
  std::map<std::string, std::string> flags;
  for (const auto& key : spin::config_keys()) flags[key];
  for (auto& [key, value] : flags) cmd.add_option("--" + key, value, "config key " + key);
  return flags;
}

void overlay_flags(spin::ConfigMap& map, CLI::App& cmd,
                   const std::map<std::string, std::string>& flags) {
  for (const auto& [key, value] : flags) {
    if (cmd.count("--" + key) > 0) map[key] = value;
  }
}

spin::ConfigGrid to_grid(const spin::ConfigMap& map) {
  std::string text;
  for (const auto& [key, value] : map) text += key + " = " + value + "\n";
  return spin::parse_grid_text(text);
}

std::string grid_to_text(const spin::ConfigGrid& grid) {
  std::string text;
  for (const auto& [key, values] : grid) {
    text += key + " = ";
    for (std::size_t i = 0; i < values.size(); ++i) text += (i ? "," : "") + values[i];
    text += "\n";
  }
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe policy improvement for non-stationary decision problems"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment and write its CSV logs");
  std::string run_config;
  std::string run_out = "run";
  run->add_option("--config", run_config, "flat key = value config file");
  run->add_option("--out", run_out, "output directory");
  auto run_flags = add_key_flags(*run);

  auto* sw = app.add_subcommand("sweep", "run the cartesian product of comma-separated values");
  std::string sweep_config;
  std::string sweep_out = "sweep";
  int n_seeds = 1;
  int workers = 1;
  sw->add_option("--config", sweep_config, "grid file; values may be comma-separated lists");
  sw->add_option("--out", sweep_out, "output directory");
  sw->add_option("--seeds", n_seeds, "seeds per grid point")->check(CLI::PositiveNumber);
  sw->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  auto sweep_flags = add_key_flags(*sw);

  auto* ev = app.add_subcommand("eval", "recompute metrics of a finished run directory");
  std::string eval_dir;
  std::string eval_config;
  ev->add_option("--run", eval_dir, "run directory written by `spin run`")->required();
  ev->add_option("--config", eval_config, "config file (default: <run>/config.txt)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      spin::ConfigMap map = run_config.empty() ? spin::ConfigMap{} : spin::load_config_file(run_config);
      spin::apply_env_overrides(map);
      overlay_flags(map, *run, run_flags);
      const spin::ExperimentConfig config = spin::config_from_map(map);
      const spin::MetricsRow row = spin::run_experiment(config, run_out);
      spin::write_metrics_csv(std::cout, {row});
      return row.error.empty() ? 0 : 3;
    }
    if (*sw) {
      spin::ConfigMap map;
      if (!sweep_config.empty()) {
        for (const auto& [key, values] : spin::load_grid_file(sweep_config)) {
          std::string joined;
          for (std::size_t i = 0; i < values.size(); ++i) joined += (i ? "," : "") + values[i];
          map[key] = joined;
        }
      }
      spin::apply_env_overrides(map);
      overlay_flags(map, *sw, sweep_flags);
      const spin::ConfigGrid grid = to_grid(map);
      std::filesystem::create_directories(sweep_out);
      {
        std::ofstream out(std::filesystem::path(sweep_out) / "grid.txt");
        out << grid_to_text(grid);
      }
      const spin::SweepResult result = spin::run_sweep(grid, n_seeds, workers, sweep_out);
      spin::write_aggregate_csv(std::cout, result);
      return 0;
    }
    if (*ev) {
      const std::filesystem::path dir(eval_dir);
      const std::filesystem::path cfg = eval_config.empty() ? dir / "config.txt" : std::filesystem::path(eval_config);
      const spin::ExperimentConfig config = spin::config_from_map(spin::load_config_file(cfg));
      spin::write_metrics_csv(std::cout, {spin::evaluate_run_dir(dir, config)});
      return 0;
    }
  } catch (const spin::ConfigError& e) {
    std::cerr << "spin: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "spin: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
