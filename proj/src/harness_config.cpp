#include "spin/errors.hpp"
#include "spin/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace spin {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool known_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

// Shared line parser for config and grid files.
template <class OnEntry>
void parse_lines(std::string_view text, OnEntry on_entry) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(body, "line " + std::to_string(line_no) + " is not of the form key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!known_key(key)) throw ConfigError(key, "unknown key");
    on_entry(key, value);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key, "integer out of range: " + v);
  }
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v.empty()) throw ConfigError(key, "expected a number, got an empty value");
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x)) {
    throw ConfigError(key, "expected a finite number, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

void validate(const ExperimentConfig& c) {
  require(c.alpha > 0.0 && c.alpha < 1.0, "alpha", "must lie in (0, 1)");
  require(c.delta >= 1, "delta", "must be at least 1");
  require(c.n_steps >= 1, "n_steps", "must be at least 1");
  require(c.learning_rate >= 0.0, "learning_rate", "must be non-negative");
  require(c.entropy_coeff >= 0.0, "entropy_coeff", "must be non-negative");
  // Both bounds are taken at alpha / 2 and read the (alpha / 4) B-th order
  // statistic, which must exist.
  require(c.B_candidate * c.alpha / 2.0 >= 2.0 - 1e-12, "B_candidate",
          "must be at least 4 / alpha");
  require(c.B_safety * c.alpha / 2.0 >= 2.0 - 1e-12, "B_safety", "must be at least 4 / alpha");
  require(c.fourier_order >= 0, "fourier_order", "must be non-negative");
  require(c.train_fraction > 0.0 && c.train_fraction < 1.0, "train_fraction",
          "must lie in (0, 1)");
  require(c.delta * std::min(c.train_fraction, 1.0 - c.train_fraction) >= 1.0 - 1e-12,
          "train_fraction", "leaves an empty train or test part for a batch of delta episodes");
  require(c.episode_budget >= 0, "episode_budget", "must be non-negative");
  require(c.speed >= 0, "speed", "must be non-negative");
  require(c.time_scale >= 0.0, "time_scale", "must be non-negative");
  require(c.weight_cap >= 0.0, "weight_cap", "must be non-negative");
  require(c.n_items >= 2, "n_items", "must be at least 2");
  require(c.season_length > 0.0, "season_length", "must be positive");
  require(c.noise_scale >= 0.0, "noise_scale", "must be non-negative");
  require(c.n_states >= 1, "n_states", "must be at least 1");
  require(c.n_actions >= 1, "n_actions", "must be at least 1");
  require(c.horizon >= 1, "horizon", "must be at least 1");
  require(c.gamma >= 0.0 && c.gamma < 1.0, "gamma", "must lie in [0, 1)");
  require(c.drift_rate >= 0.0, "drift_rate", "must be non-negative");
}

}  // namespace

std::string to_string(Domain d) {
  switch (d) {
    case Domain::RecoSys: return "recosys";
    case Domain::Tabular: return "tabular";
    case Domain::TwoState: return "two-state";
  }
  return "?";
}

std::string to_string(Algorithm a) { return a == Algorithm::Spin ? "spin" : "baseline"; }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "domain",        "algorithm",    "speed",          "alpha",          "delta",
      "n_steps",       "learning_rate", "entropy_coeff", "B_candidate",    "B_safety",
      "fourier_order", "train_fraction", "episode_budget", "seed",         "reuse_test_data",
      "warm_start",    "time_scale",   "weight_cap",     "n_items",        "season_length",
      "noise_scale",   "n_states",     "n_actions",      "horizon",        "gamma",
      "drift_rate"};
  return keys;
}

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  parse_lines(text, [&](const std::string& key, const std::string& value) {
    if (!out.emplace(key, value).second) throw ConfigError(key, "given twice");
  });
  return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_file(path));
}

void apply_env_overrides(
    ConfigMap& map, const std::function<std::optional<std::string>(const std::string&)>& lookup) {
  for (const auto& key : config_keys()) {
    std::string var(kEnvPrefix);
    for (const char ch : key) var += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    std::optional<std::string> value;
    if (lookup) {
      value = lookup(var);
    } else if (const char* raw = std::getenv(var.c_str())) {
      value = std::string(raw);
    }
    if (value) map[key] = trim(*value);
  }
}

ExperimentConfig config_from_map(const ConfigMap& map) {
  ExperimentConfig c;
  for (const auto& [key, v] : map) {
    if (key == "domain") {
      if (v == "recosys") c.domain = Domain::RecoSys;
      else if (v == "tabular") c.domain = Domain::Tabular;
      else if (v == "two-state") c.domain = Domain::TwoState;
      else throw ConfigError(key, "expected recosys, tabular or two-state, got '" + v + "'");
    } else if (key == "algorithm") {
      if (v == "spin") c.algorithm = Algorithm::Spin;
      else if (v == "baseline") c.algorithm = Algorithm::Baseline;
      else throw ConfigError(key, "expected spin or baseline, got '" + v + "'");
    } else if (key == "speed") c.speed = parse_int(key, v);
    else if (key == "alpha") c.alpha = parse_double(key, v);
    else if (key == "delta") c.delta = parse_int(key, v);
    else if (key == "n_steps") c.n_steps = parse_int(key, v);
    else if (key == "learning_rate") c.learning_rate = parse_double(key, v);
    else if (key == "entropy_coeff") c.entropy_coeff = parse_double(key, v);
    else if (key == "B_candidate") c.B_candidate = parse_int(key, v);
    else if (key == "B_safety") c.B_safety = parse_int(key, v);
    else if (key == "fourier_order") c.fourier_order = parse_int(key, v);
    else if (key == "train_fraction") c.train_fraction = parse_double(key, v);
    else if (key == "episode_budget") c.episode_budget = parse_integer(key, v);
    else if (key == "seed") c.seed = parse_u64(key, v);
    else if (key == "reuse_test_data") c.reuse_test_data = parse_bool(key, v);
    else if (key == "warm_start") c.warm_start = parse_bool(key, v);
    else if (key == "time_scale") c.time_scale = parse_double(key, v);
    else if (key == "weight_cap") c.weight_cap = parse_double(key, v);
    else if (key == "n_items") c.n_items = parse_int(key, v);
    else if (key == "season_length") c.season_length = parse_double(key, v);
    else if (key == "noise_scale") c.noise_scale = parse_double(key, v);
    else if (key == "n_states") c.n_states = parse_int(key, v);
    else if (key == "n_actions") c.n_actions = parse_int(key, v);
    else if (key == "horizon") c.horizon = parse_int(key, v);
    else if (key == "gamma") c.gamma = parse_double(key, v);
    else if (key == "drift_rate") c.drift_rate = parse_double(key, v);
    else throw ConfigError(key, "unknown key");
  }
  validate(c);
  return c;
}

ConfigMap config_to_map(const ExperimentConfig& c) {
  ConfigMap m;
  m["domain"] = to_string(c.domain);
  m["algorithm"] = to_string(c.algorithm);
  m["speed"] = std::to_string(c.speed);
  m["alpha"] = fmt_double(c.alpha);
  m["delta"] = std::to_string(c.delta);
  m["n_steps"] = std::to_string(c.n_steps);
  m["learning_rate"] = fmt_double(c.learning_rate);
  m["entropy_coeff"] = fmt_double(c.entropy_coeff);
  m["B_candidate"] = std::to_string(c.B_candidate);
  m["B_safety"] = std::to_string(c.B_safety);
  m["fourier_order"] = std::to_string(c.fourier_order);
  m["train_fraction"] = fmt_double(c.train_fraction);
  m["episode_budget"] = std::to_string(c.episode_budget);
  m["seed"] = std::to_string(c.seed);
  m["reuse_test_data"] = c.reuse_test_data ? "true" : "false";
  m["warm_start"] = c.warm_start ? "true" : "false";
  m["time_scale"] = fmt_double(c.time_scale);
  m["weight_cap"] = fmt_double(c.weight_cap);
  m["n_items"] = std::to_string(c.n_items);
  m["season_length"] = fmt_double(c.season_length);
  m["noise_scale"] = fmt_double(c.noise_scale);
  m["n_states"] = std::to_string(c.n_states);
  m["n_actions"] = std::to_string(c.n_actions);
  m["horizon"] = std::to_string(c.horizon);
  m["gamma"] = fmt_double(c.gamma);
  m["drift_rate"] = fmt_double(c.drift_rate);
  return m;
}

std::string config_to_text(const ExperimentConfig& config) {
  const ConfigMap m = config_to_map(config);
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + m.at(key) + "\n";
  return out;
}

RunConfig ExperimentConfig::run_config() const {
  RunConfig r;
  r.alpha = alpha;
  r.delta = delta;
  r.n_steps = n_steps;
  r.learning_rate = learning_rate;
  r.entropy_coeff = entropy_coeff;
  r.replicates_search = B_candidate;
  r.replicates_safety = B_safety;
  r.fourier_order = fourier_order;
  if (time_scale > 0.0) {
    r.time_scale = time_scale;
  } else if (domain == Domain::RecoSys) {
    r.time_scale = season_length;
  }
  r.train_fraction = train_fraction;
  r.episode_budget = episode_budget;
  r.reuse_test_data = reuse_test_data;
  r.warm_start = warm_start;
  if (weight_cap > 0.0) r.pdis.weight_cap = weight_cap;
  return r;
}

ConfigGrid parse_grid_text(std::string_view text) {
  ConfigGrid out;
  parse_lines(text, [&](const std::string& key, const std::string& value) {
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError(key, "empty entry in list '" + value + "'");
      items.push_back(item);
    }
    if (items.empty()) throw ConfigError(key, "no value");
    if (!out.emplace(key, std::move(items)).second) throw ConfigError(key, "given twice");
  });
  return out;
}

ConfigGrid load_grid_file(const std::filesystem::path& path) {
  return parse_grid_text(read_file(path));
}

}  // namespace spin
