#include "spin/errors.hpp"
#include "spin/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>
#include <tuple>

namespace spin {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string clean(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

MetricsRow run_cell(const ExperimentConfig& config) {
  MetricsRow row;
  row.algorithm = to_string(config.algorithm);
  row.speed = config.speed;
  row.seed = config.seed;
  try {
    const Experiment experiment = build_experiment(config);
    const DeploymentLog log = run_algorithm(config, experiment);
    row = compute_metrics(config, log, experiment.env);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  if (xs.empty()) return {std::nan(""), std::nan("")};
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return out;
}

}  // namespace

std::vector<ExperimentConfig> expand_grid(const ConfigGrid& grid, int n_seeds) {
  if (n_seeds < 1) throw ConfigError("n_seeds", "must be at least 1");
  if (const auto it = grid.find("seed"); it != grid.end() && it->second.size() != 1) {
    throw ConfigError("seed", "the master seed takes a single value");
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> axes(grid.begin(), grid.end());
  std::size_t n_points = 1;
  for (const auto& [key, values] : axes) n_points *= values.size();

  std::vector<ExperimentConfig> cells;
  cells.reserve(n_points * static_cast<std::size_t>(n_seeds));
  std::uint64_t cell = 0;
  for (std::size_t point = 0; point < n_points; ++point) {
    ConfigMap map;
    std::size_t rest = point;
    // Last key varies fastest.
    for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
      map[it->first] = it->second[rest % it->second.size()];
      rest /= it->second.size();
    }
    const ExperimentConfig base = config_from_map(map);
    const Rng master(base.seed);
    for (int s = 0; s < n_seeds; ++s, ++cell) {
      ExperimentConfig c = base;
      c.seed = master.child(cell).seed();
      cells.push_back(c);
    }
  }
  return cells;
}

SweepResult sweep(const std::vector<ExperimentConfig>& cells, int workers) {
  if (cells.empty()) throw ConfigError("grid", "sweep needs at least one cell");
  SweepResult result;
  result.cells = cells;
  result.rows.resize(cells.size());
  const auto n_threads =
      static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(cells.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) result.rows[i] = run_cell(cells[i]);
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  return result;
}

void write_cells_csv(std::ostream& out, const SweepResult& result) {
  out << "#schema=spin-cells/1\n"
      << "cell,algorithm,speed,seed,delta,fourier_order,entropy_coeff,learning_rate,"
         "violation_rate,mean_normalized_improvement,deploy_rate,error\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& c = result.cells[i];
    const auto& r = result.rows[i];
    out << i << ',' << r.algorithm << ',' << r.speed << ',' << r.seed << ',' << c.delta << ','
        << c.fourier_order << ',' << num(c.entropy_coeff) << ',' << num(c.learning_rate) << ',';
    if (r.error.empty()) {
      out << num(r.violation_rate) << ',' << num(r.mean_normalized_improvement) << ','
          << num(r.deploy_rate) << ",\n";
    } else {
      out << ",,," << clean(r.error) << '\n';
    }
  }
}

void write_aggregate_csv(std::ostream& out, const SweepResult& result) {
  struct Group {
    std::vector<double> violation, improvement, deploy;
    int failed = 0;
  };
  std::map<std::tuple<std::string, int>, Group> groups;
  for (const auto& r : result.rows) {
    Group& g = groups[{r.algorithm, r.speed}];
    if (!r.error.empty()) {
      ++g.failed;
      continue;
    }
    g.violation.push_back(r.violation_rate);
    g.improvement.push_back(r.mean_normalized_improvement);
    g.deploy.push_back(r.deploy_rate);
  }
  out << "#schema=spin-aggregate/1\n"
      << "# mean_normalized_improvement: mean over episodes of "
         "(perf(deployed) - perf(safe)) / (perf(optimal) - perf(safe)), 0 where safe is optimal\n"
      << "algorithm,speed,n,failed,violation_rate_mean,violation_rate_se,"
         "mean_normalized_improvement_mean,mean_normalized_improvement_se,"
         "deploy_rate_mean,deploy_rate_se\n";
  for (const auto& [key, g] : groups) {
    const MeanSe v = mean_se(g.violation);
    const MeanSe m = mean_se(g.improvement);
    const MeanSe d = mean_se(g.deploy);
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << g.violation.size() << ','
        << g.failed << ',' << num(v.mean) << ',' << num(v.se) << ',' << num(m.mean) << ','
        << num(m.se) << ',' << num(d.mean) << ',' << num(d.se) << '\n';
  }
}

SweepResult run_sweep(const ConfigGrid& grid, int n_seeds, int workers,
                      const std::filesystem::path& out_dir) {
  SweepResult result = sweep(expand_grid(grid, n_seeds), workers);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "cells.csv");
    if (!out) throw Error("cannot write " + (out_dir / "cells.csv").string());
    write_cells_csv(out, result);
  }
  std::ofstream out(out_dir / "aggregate.csv");
  if (!out) throw Error("cannot write " + (out_dir / "aggregate.csv").string());
  write_aggregate_csv(out, result);
  return result;
}

}  // namespace spin
