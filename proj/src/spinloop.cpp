#include "spin/spinloop.hpp"

#include "spin/errors.hpp"
#include "spin/wildboot.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iterator>

namespace spin {

namespace {

// Stream tags for the non-episode random streams of decision d. Episode
// streams use the episode index itself, which never reaches these ranges.
constexpr std::uint64_t kSplitStream = 0x5000000000000000ULL;
constexpr std::uint64_t kSearchStream = 0x6000000000000000ULL;
constexpr std::uint64_t kSafetyStream = 0x7000000000000000ULL;

// Appends sorted `more` to sorted `into`, keeping episode order.
void merge_into(std::vector<Trajectory>& into, std::vector<Trajectory>&& more) {
  const auto mid = static_cast<std::ptrdiff_t>(into.size());
  into.insert(into.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  std::inplace_merge(into.begin(), into.begin() + mid, into.end(),
                     [](const Trajectory& x, const Trajectory& y) { return x.episode < y.episode; });
}

DeploymentLog run_loop(const Environment& env, const Eigen::MatrixXd& safe_theta,
                       const RunConfig& config, const FourierBasis& basis, const Rng& rng,
                       const EpisodeSink& sink) {
  config.validate();
  const double gamma = env_gamma(env);
  const bool oracle = has_oracle(env);

  DeploymentLog log;
  log.delta = config.delta;
  log.temperature = config.temperature;
  log.policies.push_back(safe_theta);

  const SoftmaxPolicy safe(safe_theta, config.temperature);
  SoftmaxPolicy current = safe;
  int current_id = 0;
  Eigen::MatrixXd search_start = safe_theta;

  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
  const auto min_points = static_cast<std::size_t>(basis.dim() + 1);

  Episode k = 0;
  std::uint64_t decision = 0;
  try {
    while (k < config.episode_budget) {
      const int n = static_cast<int>(std::min<Episode>(config.delta, config.episode_budget - k));
      std::vector<Trajectory> batch;
      batch.reserve(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        ++k;
        Rng episode_rng = rng.child(episode_stream(k));
        Trajectory traj = rollout(env, current, k, episode_rng);
        traj.policy_id = current_id;
        EpisodeRecord rec;
        rec.episode = k;
        rec.policy_id = current_id;
        rec.ret = traj.discounted_return(gamma);
        if (oracle) {
          rec.true_perf = true_performance(env, current, k);
          rec.safe_true_perf = current_id == 0 ? rec.true_perf : true_performance(env, safe, k);
        }
        if (sink) sink(rec);
        log.episodes.push_back(rec);
        batch.push_back(std::move(traj));
      }
      // Partial batches only happen at the end of the budget, and a decision
      // after the last episode would never be deployed.
      if (n < config.delta || k >= config.episode_budget) break;

      Rng split_rng = rng.child(kSplitStream + decision);
      auto [part_train, part_test] = split_batch(std::move(batch), config.train_fraction, split_rng);
      merge_into(train, std::move(part_train));
      merge_into(test, std::move(part_test));

      DecisionRecord rec;
      rec.k = k;
      const std::vector<Episode> tau = future_episodes(k, config.delta);
      if (train.size() < min_points || test.size() < min_points) {
        rec.error = "insufficient data";
      } else {
        SearchConfig search;
        search.n_steps = config.n_steps;
        search.learning_rate = config.learning_rate;
        search.entropy_coeff = config.entropy_coeff;
        search.alpha = config.alpha;
        search.replicates = config.replicates_search;
        search.basis = basis;
        search.horizon = tau;
        search.gamma = gamma;
        search.temperature = config.temperature;
        search.pdis = config.pdis;

        bool searched = false;
        try {
          Rng search_rng = rng.child(kSearchStream + decision);
          // The previous candidate continues the search; the safe policy is
          // a fallback start when that candidate has wandered off.
          std::vector<Eigen::MatrixXd> starts{search_start};
          if (search_start != safe_theta) starts.push_back(safe_theta);
          rec.candidate_theta = candidate_search(starts, train, search, search_rng);
          searched = rec.candidate_theta.allFinite();
          if (!searched) rec.error = "candidate search diverged";
        } catch (const Error& e) {
          rec.error = e.what();
        }

        if (searched) {
          SafetyTestConfig st;
          st.alpha = config.alpha;
          st.replicates = config.replicates_safety;
          st.basis = basis;
          st.horizon = tau;
          st.gamma = gamma;
          st.temperature = config.temperature;
          st.pdis = config.pdis;
          Rng safety_rng = rng.child(kSafetyStream + decision);
          const SafetyTestResult res = safety_test(test, rec.candidate_theta, safe_theta, st, safety_rng);
          rec.passed = res.passed;
          rec.lb_candidate = res.lb_candidate;
          rec.ub_safe = res.ub_safe;
          rec.error = res.error;
          if (config.warm_start) search_start = rec.candidate_theta;
          if (!config.reuse_test_data) test.clear();
        }
      }

      if (rec.passed) {
        log.policies.push_back(rec.candidate_theta);
        current_id = static_cast<int>(log.policies.size()) - 1;
        current = SoftmaxPolicy(rec.candidate_theta, config.temperature);
      } else {
        current_id = 0;
        current = safe;
      }
      rec.deployed_policy_id = current_id;
      log.decisions.push_back(std::move(rec));
      ++decision;
    }
  } catch (const std::exception& e) {
    log.abort_error = e.what();
  }
  return log;
}

}  // namespace

FourierBasis RunConfig::basis() const {
  const double scale = time_scale > 0.0 ? time_scale : static_cast<double>(episode_budget);
  return FourierBasis(fourier_order, scale);
}

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (delta < 1) throw DomainError("delta must be at least 1");
  if (n_steps < 1) throw DomainError("n_steps must be at least 1");
  if (!(learning_rate >= 0.0)) throw DomainError("learning rate must be non-negative");
  if (!(entropy_coeff >= 0.0)) throw DomainError("entropy coefficient must be non-negative");
  if (replicates_search < 1 || replicates_safety < 1) {
    throw DomainError("replicate counts must be positive");
  }
  if (fourier_order < 0) throw DomainError("Fourier order must be non-negative");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("train fraction must lie in (0, 1)");
  }
  if (episode_budget < 0) throw DomainError("episode budget must be non-negative");
  if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_batch(
    std::vector<Trajectory> batch, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("train fraction must lie in (0, 1)");
  }
  const auto n = static_cast<double>(batch.size());
  if (n * std::min(train_fraction, 1.0 - train_fraction) < 1.0 - 1e-12) {
    throw BatchTooSmallError("batch of " + std::to_string(batch.size()) +
                             " cannot be split with train fraction " +
                             std::to_string(train_fraction));
  }
  // Fisher-Yates on our own stream keeps the split identical across
  // standard libraries.
  for (std::size_t i = batch.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(batch[i - 1], batch[j]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::clamp<long long>(std::llround(n * train_fraction), 1,
                            static_cast<long long>(batch.size()) - 1));
  std::vector<Trajectory> first(std::make_move_iterator(batch.begin()),
                                std::make_move_iterator(batch.begin() + static_cast<long>(n_train)));
  std::vector<Trajectory> second(std::make_move_iterator(batch.begin() + static_cast<long>(n_train)),
                                 std::make_move_iterator(batch.end()));
  auto by_episode = [](const Trajectory& a, const Trajectory& b) { return a.episode < b.episode; };
  std::sort(first.begin(), first.end(), by_episode);
  std::sort(second.begin(), second.end(), by_episode);
  return {std::move(first), std::move(second)};
}

SafetyTestResult safety_test(std::span<const Trajectory> test_data,
                             const Eigen::MatrixXd& theta_candidate,
                             const Eigen::MatrixXd& theta_safe, const SafetyTestConfig& config,
                             Rng& rng) {
  SafetyTestResult out;
  try {
    if (test_data.empty()) throw DomainError("safety test needs test data");
    const SoftmaxPolicy candidate(theta_candidate, config.temperature);
    const SoftmaxPolicy safe(theta_safe, config.temperature);
    const PerformanceSeries yc = performance_series(test_data, candidate, config.gamma, config.pdis);
    const PerformanceSeries ys = performance_series(test_data, safe, config.gamma, config.pdis);
    const double level = config.alpha / 2.0;
    const PredictionInterval ic =
        prediction_interval_t(yc, config.basis, config.horizon, level, config.replicates, rng);
    const PredictionInterval is =
        prediction_interval_t(ys, config.basis, config.horizon, level, config.replicates, rng);
    out.lb_candidate = ic.lb;
    out.ub_safe = is.ub;
    out.passed = passes_safety(ic.lb, is.ub);
  } catch (const Error& e) {
    out.passed = false;
    out.error = e.what();
  }
  return out;
}

DeploymentLog spin_run(const Environment& env, const Eigen::MatrixXd& safe_theta,
                       const RunConfig& config, const Rng& rng, const EpisodeSink& sink) {
  return run_loop(env, safe_theta, config, config.basis(), rng, sink);
}

DeploymentLog baseline_run(const Environment& env, const Eigen::MatrixXd& safe_theta,
                           const RunConfig& config, const Rng& rng, const EpisodeSink& sink) {
  RunConfig stationary = config;
  stationary.fourier_order = 0;
  return run_loop(env, safe_theta, stationary, stationary.basis(), rng, sink);
}

}  // namespace spin
