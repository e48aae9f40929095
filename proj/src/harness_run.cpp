#include "spin/errors.hpp"
#include "spin/harness.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace spin {

namespace {

constexpr const char* kEpisodesHeader = "episode,policy_id,return,true_perf,safe_true_perf";
constexpr const char* kDecisionsHeader = "k,passed,lb_candidate,ub_safe,deployed_policy_id";
constexpr const char* kMetricsHeader =
    "algorithm,speed,seed,violation_rate,mean_normalized_improvement,deploy_rate,error";

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Text fields never contain commas or newlines after this.
std::string clean(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Data rows of a CSV file: comments and the header are skipped.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                const std::string& header, std::size_t width) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != header) throw Error(path.string() + ": unexpected header '" + line + "'");
      seen_header = true;
      continue;
    }
    auto cells = split(line);
    if (cells.size() != width) throw Error(path.string() + ": malformed row '" + line + "'");
    rows.push_back(std::move(cells));
  }
  if (!seen_header) throw Error(path.string() + ": missing header");
  return rows;
}

double to_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double x = std::stod(s, &used);
  if (used != s.size()) throw Error("not a number: '" + s + "'");
  return x;
}

}  // namespace

void write_episodes_csv(std::ostream& out, const DeploymentLog& log) {
  out << "#schema=spin-episodes/1\n" << kEpisodesHeader << '\n';
  for (const auto& e : log.episodes) {
    out << e.episode << ',' << e.policy_id << ',' << num(e.ret) << ',' << num(e.true_perf) << ','
        << num(e.safe_true_perf) << '\n';
  }
}

void write_decisions_csv(std::ostream& out, const DeploymentLog& log) {
  out << "#schema=spin-decisions/1\n" << kDecisionsHeader << '\n';
  for (const auto& d : log.decisions) {
    out << d.k << ',' << (d.passed ? 1 : 0) << ',' << num(d.lb_candidate) << ','
        << num(d.ub_safe) << ',' << d.deployed_policy_id << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "#schema=spin-metrics/1\n"
      << "# mean_normalized_improvement: mean over episodes of "
         "(perf(deployed) - perf(safe)) / (perf(optimal) - perf(safe)), 0 where safe is optimal\n"
      << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.speed << ',' << r.seed << ',' << num(r.violation_rate) << ','
        << num(r.mean_normalized_improvement) << ',' << num(r.deploy_rate) << ','
        << clean(r.error) << '\n';
  }
}

DeploymentLog read_run_dir(const std::filesystem::path& dir, int delta, double temperature) {
  DeploymentLog log;
  log.delta = delta;
  log.temperature = temperature;
  for (const auto& row : read_rows(dir / "episodes.csv", kEpisodesHeader, 5)) {
    EpisodeRecord e;
    e.episode = std::stoll(row[0]);
    e.policy_id = std::stoi(row[1]);
    e.ret = to_double(row[2]);
    e.true_perf = to_double(row[3]);
    e.safe_true_perf = to_double(row[4]);
    log.episodes.push_back(e);
  }
  for (const auto& row : read_rows(dir / "decisions.csv", kDecisionsHeader, 5)) {
    DecisionRecord d;
    d.k = std::stoll(row[0]);
    d.passed = row[1] == "1";
    d.lb_candidate = to_double(row[2]);
    d.ub_safe = to_double(row[3]);
    d.deployed_policy_id = std::stoi(row[4]);
    log.decisions.push_back(std::move(d));
  }
  for (int id = 0;; ++id) {
    const auto path = dir / "policies" / ("policy_" + std::to_string(id) + ".csv");
    if (!std::filesystem::exists(path)) break;
    std::ifstream in = open_in(path);
    log.policies.push_back(read_theta_csv(in));
  }
  if (log.policies.empty()) throw Error((dir / "policies").string() + ": no policies");
  return log;
}

MetricsRow run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "policies");
  {
    auto out = open_out(out_dir / "config.txt");
    out << config_to_text(config);
  }
  const Experiment experiment = build_experiment(config);

  // Episodes are streamed so a crashed run still leaves its history behind.
  auto episodes = open_out(out_dir / "episodes.csv");
  episodes << "#schema=spin-episodes/1\n" << kEpisodesHeader << '\n';
  const DeploymentLog log = run_algorithm(config, experiment, [&](const EpisodeRecord& e) {
    episodes << e.episode << ',' << e.policy_id << ',' << num(e.ret) << ',' << num(e.true_perf)
             << ',' << num(e.safe_true_perf) << '\n';
  });
  episodes.close();

  {
    auto out = open_out(out_dir / "decisions.csv");
    write_decisions_csv(out, log);
  }
  {
    auto out = open_out(out_dir / "errors.csv");
    out << "k,error\n";
    for (const auto& d : log.decisions) {
      if (!d.error.empty()) out << d.k << ',' << clean(d.error) << '\n';
    }
    if (!log.abort_error.empty()) out << "abort," << clean(log.abort_error) << '\n';
  }
  for (std::size_t id = 0; id < log.policies.size(); ++id) {
    auto out = open_out(out_dir / "policies" / ("policy_" + std::to_string(id) + ".csv"));
    write_theta_csv(out, log.policies[id]);
  }

  const MetricsRow row = compute_metrics(config, log, experiment.env);
  auto out = open_out(out_dir / "metrics.csv");
  write_metrics_csv(out, {row});
  return row;
}

MetricsRow evaluate_run_dir(const std::filesystem::path& dir, const ExperimentConfig& config) {
  const DeploymentLog log = read_run_dir(dir, config.delta, 1.0);
  const Experiment experiment = build_experiment(config);
  return compute_metrics(config, log, experiment.env);
}

}  // namespace spin
