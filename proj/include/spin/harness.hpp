#pragma once

#include "spin/envsim.hpp"
#include "spin/spinloop.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spin {

enum class Domain { RecoSys, Tabular, TwoState };
enum class Algorithm { Spin, Baseline };

std::string to_string(Domain d);
std::string to_string(Algorithm a);

/// One experiment. The defaults (alpha 0.05, delta 8, 2 delta gradient steps,
/// step size 0.1, 200 / 500 replicates, order 3) and the recommender settings
/// are the calibrated configuration used by the acceptance sweep.
struct ExperimentConfig {
  Domain domain = Domain::RecoSys;
  Algorithm algorithm = Algorithm::Spin;
  int speed = 0;
  double alpha = 0.05;
  int delta = 8;
  int n_steps = 16;
  double learning_rate = 0.1;
  double entropy_coeff = 1e-2;
  int B_candidate = 200;
  int B_safety = 500;
  int fourier_order = 3;
  double train_fraction = 0.5;
  Episode episode_budget = 2000;
  std::uint64_t seed = 0;
  bool reuse_test_data = true;
  bool warm_start = true;
  double time_scale = 0.0;     // <= 0: season_length (recosys) or episode_budget
  double weight_cap = 0.0;     // <= 0: no cap
  // recommender
  int n_items = 8;
  double season_length = 250.0;
  double noise_scale = 0.05;
  // random tabular MDP
  int n_states = 3;
  int n_actions = 2;
  int horizon = 3;
  double gamma = 0.9;
  double drift_rate = 0.01;  // radians of drift per episode and unit of speed

  RunConfig run_config() const;
};

/// Ordered key -> value text map.
using ConfigMap = std::map<std::string, std::string>;

/// Every key accepted in config files, flags and environment overrides.
const std::vector<std::string>& config_keys();

/// Flat `key = value` lines; `#` starts a comment. Throws ConfigError on
/// malformed lines, unknown keys and duplicates.
ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::filesystem::path& path);

/// Environment variable prefix for overrides: SPIN_<KEY IN UPPER CASE>.
inline constexpr std::string_view kEnvPrefix = "SPIN_";

/// Overwrites entries whose SPIN_* variable is set. `lookup` returns the
/// variable's value if present (defaults to std::getenv).
void apply_env_overrides(ConfigMap& map,
                         const std::function<std::optional<std::string>(const std::string&)>& lookup = {});

/// Parses and validates every field; errors name the offending key.
ExperimentConfig config_from_map(const ConfigMap& map);
ConfigMap config_to_map(const ExperimentConfig& config);
std::string config_to_text(const ExperimentConfig& config);

/// Environment and safe policy of a configured domain.
struct Experiment {
  Environment env;
  Eigen::MatrixXd safe_theta;
};

/// Recommender used by the experiments. Items 0 and 1 have mean rewards
/// 0.5 +- 0.45 cos(2 pi speed k / season_length), so the best item flips every
/// half season; the remaining items are fillers near 0.15. With the default
/// eight items the safe policy puts half its mass on the best item.
SeasonalRecoSys make_recosys(int n_items, int speed, double season_length, double noise_scale);

Experiment build_experiment(const ExperimentConfig& config);

DeploymentLog run_algorithm(const ExperimentConfig& config, const Experiment& experiment,
                            const EpisodeSink& sink = {});

struct MetricsRow {
  std::string algorithm;
  int speed = 0;
  std::uint64_t seed = 0;
  double violation_rate = 0.0;
  double mean_normalized_improvement = 0.0;
  double deploy_rate = 0.0;
  std::string error;
};

/// Fraction of decisions that deployed a candidate whose true mean
/// performance over its deployed episodes was below the safe policy's over
/// the same episodes. Equals P(unsafe | candidate) * P(candidate); safe
/// deployments never count. Throws UnsupportedOracleError without an oracle.
double evaluate_safety(const DeploymentLog& log, const Environment& env);

/// Fraction of decisions that passed the safety test (0 without decisions).
double deploy_rate(const DeploymentLog& log);

/// Mean over episodes of (rho(deployed,k) - rho(safe,k)) / (rho(opt,k) - rho(safe,k)),
/// with episodes where the safe policy is already optimal counted as 0.
double normalized_improvement(const DeploymentLog& log, const Environment& env);

MetricsRow compute_metrics(const ExperimentConfig& config, const DeploymentLog& log,
                           const Environment& env);

// CSV files of a run directory.
void write_episodes_csv(std::ostream& out, const DeploymentLog& log);
void write_decisions_csv(std::ostream& out, const DeploymentLog& log);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

/// Reads episodes.csv, decisions.csv and policies/ back into a log.
DeploymentLog read_run_dir(const std::filesystem::path& dir, int delta, double temperature);

/// Runs the configured algorithm and writes config.txt, episodes.csv,
/// decisions.csv, errors.csv, metrics.csv and policies/policy_<id>.csv under
/// `out_dir`.
MetricsRow run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Recomputes metrics of a finished run directory with the exact oracle.
MetricsRow evaluate_run_dir(const std::filesystem::path& dir, const ExperimentConfig& config);

/// Config file whose values may be comma-separated lists; the sweep runs
/// their cartesian product.
using ConfigGrid = std::map<std::string, std::vector<std::string>>;

ConfigGrid parse_grid_text(std::string_view text);
ConfigGrid load_grid_file(const std::filesystem::path& path);

/// One ExperimentConfig per (grid point, seed index). The grid's `seed` is
/// the master seed; cell c runs with Rng(master).child(c).seed().
std::vector<ExperimentConfig> expand_grid(const ConfigGrid& grid, int n_seeds);

struct SweepResult {
  std::vector<ExperimentConfig> cells;
  std::vector<MetricsRow> rows;  // rows[i] belongs to cells[i]
};

/// Runs every cell on `workers` threads. Failed cells keep their error text
/// and are skipped by the aggregate.
SweepResult sweep(const std::vector<ExperimentConfig>& cells, int workers);

void write_cells_csv(std::ostream& out, const SweepResult& result);

/// Mean and standard error per (algorithm, speed).
void write_aggregate_csv(std::ostream& out, const SweepResult& result);

/// Runs the sweep and writes cells.csv and aggregate.csv into out_dir.
SweepResult run_sweep(const ConfigGrid& grid, int n_seeds, int workers,
                      const std::filesystem::path& out_dir);

}  // namespace spin
