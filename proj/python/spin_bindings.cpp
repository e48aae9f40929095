#include "spin/candidate.hpp"
#include "spin/envsim.hpp"
#include "spin/errors.hpp"
#include "spin/forecast.hpp"
#include "spin/harness.hpp"
#include "spin/ope.hpp"
#include "spin/policy.hpp"
#include "spin/spinloop.hpp"
#include "spin/wildboot.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace spin;

namespace {

ConfigMap to_config_map(const py::dict& d) {
  ConfigMap m;
  for (const auto& [k, v] : d) m[py::str(k)] = py::str(v);
  return m;
}

py::dict metrics_dict(const MetricsRow& r) {
  py::dict d;
  d["algorithm"] = r.algorithm;
  d["speed"] = r.speed;
  d["seed"] = r.seed;
  d["violation_rate"] = r.violation_rate;
  d["mean_normalized_improvement"] = r.mean_normalized_improvement;
  d["deploy_rate"] = r.deploy_rate;
  d["error"] = r.error;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Safe policy improvement for non-stationary decision problems";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<FullSupportError>(m, "FullSupportError", base.ptr());
  py::register_exception<SingularDesignError>(m, "SingularDesignError", base.ptr());
  py::register_exception<UnsupportedOracleError>(m, "UnsupportedOracleError", base.ptr());
  py::register_exception<BatchTooSmallError>(m, "BatchTooSmallError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def_property_readonly("seed", &Rng::seed)
      .def("child", &Rng::child, py::arg("tag"))
      .def("uniform", py::overload_cast<>(&Rng::uniform));

  py::class_<SoftmaxPolicy>(m, "SoftmaxPolicy")
      .def(py::init<Eigen::MatrixXd, double>(), py::arg("theta"), py::arg("temperature") = 1.0)
      .def_static("uniform", &SoftmaxPolicy::uniform)
      .def_static("from_probabilities", &SoftmaxPolicy::from_probabilities, py::arg("probs"),
                  py::arg("temperature") = 1.0)
      .def_property_readonly("theta", &SoftmaxPolicy::theta)
      .def_property_readonly("probs", &SoftmaxPolicy::prob_matrix)
      .def("action_prob", &SoftmaxPolicy::action_prob)
      .def("grad_log_prob", &SoftmaxPolicy::grad_log_prob);

  m.def("entropy", [](const SoftmaxPolicy& p, const std::vector<int>& states) {
    const ValueAndGrad v = entropy(p, states);
    return py::make_tuple(v.value, v.grad);
  });

  py::class_<Step>(m, "Step")
      .def(py::init([](int s, int a, double b, double r) { return Step{s, a, b, r}; }),
           py::arg("state"), py::arg("action"), py::arg("behavior_prob"), py::arg("reward"))
      .def_readwrite("state", &Step::state)
      .def_readwrite("action", &Step::action)
      .def_readwrite("behavior_prob", &Step::behavior_prob)
      .def_readwrite("reward", &Step::reward);

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init([](Episode episode, std::vector<Step> steps) {
             Trajectory t;
             t.episode = episode;
             t.steps = std::move(steps);
             return t;
           }),
           py::arg("episode"), py::arg("steps"))
      .def_readwrite("episode", &Trajectory::episode)
      .def_readwrite("steps", &Trajectory::steps)
      .def_readwrite("policy_id", &Trajectory::policy_id)
      .def("discounted_return", &Trajectory::discounted_return);

  py::class_<TabularNSMDP>(m, "TabularNSMDP")
      .def_readonly("n_states", &TabularNSMDP::n_states)
      .def_readonly("n_actions", &TabularNSMDP::n_actions)
      .def_readonly("gamma", &TabularNSMDP::gamma)
      .def_readonly("horizon", &TabularNSMDP::horizon)
      .def("transition", [](const TabularNSMDP& e, Episode k, int s, int a) { return e.transition(k, s, a); })
      .def("mean_reward", [](const TabularNSMDP& e, Episode k, int s, int a) { return e.mean_reward(k, s, a); });

  py::class_<SeasonalRecoSys>(m, "SeasonalRecoSys")
      .def(py::init<>())
      .def_readwrite("base_reward", &SeasonalRecoSys::base_reward)
      .def_readwrite("amplitude", &SeasonalRecoSys::amplitude)
      .def_readwrite("phase", &SeasonalRecoSys::phase)
      .def_readwrite("speed", &SeasonalRecoSys::speed)
      .def_readwrite("season_length", &SeasonalRecoSys::season_length)
      .def_readwrite("noise_scale", &SeasonalRecoSys::noise_scale)
      .def("mean_reward", &SeasonalRecoSys::mean_reward);

  m.def("two_state_drop_env", &two_state_drop_env);
  m.def("make_drifting_tabular", &make_drifting_tabular, py::arg("n_states"), py::arg("n_actions"),
        py::arg("horizon"), py::arg("gamma"), py::arg("drift"), py::arg("seed"));
  m.def("make_recosys", &make_recosys, py::arg("n_items"), py::arg("speed"),
        py::arg("season_length"), py::arg("noise_scale"));

  // Environments pass through as the variant of the classes above.
  m.def("rollout", &rollout, py::arg("env"), py::arg("policy"), py::arg("episode"), py::arg("rng"));
  m.def("true_performance", &true_performance, py::arg("env"), py::arg("policy"), py::arg("episode"));
  m.def("optimal_performance", &optimal_performance, py::arg("env"), py::arg("episode"));
  m.def("lipschitz_bound", &lipschitz_bound, py::arg("gamma"), py::arg("r_max"), py::arg("eps_p"),
        py::arg("eps_r"), py::arg("delta"));
  m.def("drift_constants", [](const TabularNSMDP& env, Episode k) {
    const DriftConstants d = drift_constants(env, k);
    return py::make_tuple(d.eps_p, d.eps_r);
  });

  m.def(
      "pdis",
      [](const Trajectory& t, const SoftmaxPolicy& p, double gamma, std::optional<double> cap) {
        return pdis(t, p, gamma, PdisOptions{cap});
      },
      py::arg("trajectory"), py::arg("policy"), py::arg("gamma"), py::arg("weight_cap") = py::none());
  m.def(
      "pdis_with_grad",
      [](const Trajectory& t, const SoftmaxPolicy& p, double gamma) {
        const ValueAndGrad v = pdis_with_grad(t, p, gamma);
        return py::make_tuple(v.value, v.grad);
      },
      py::arg("trajectory"), py::arg("policy"), py::arg("gamma"));

  py::class_<PerformanceSeries>(m, "PerformanceSeries")
      .def(py::init([](std::vector<Episode> eps, Eigen::VectorXd y) {
             PerformanceSeries s{std::move(eps), std::move(y)};
             s.validate();
             return s;
           }),
           py::arg("episodes"), py::arg("estimates"))
      .def_readonly("episodes", &PerformanceSeries::episodes)
      .def_readonly("estimates", &PerformanceSeries::estimates);

  py::class_<FourierBasis>(m, "FourierBasis")
      .def(py::init<int, double>(), py::arg("order"), py::arg("time_scale"))
      .def_property_readonly("dim", &FourierBasis::dim)
      .def("row", &FourierBasis::row);

  py::class_<RegressionFit>(m, "RegressionFit")
      .def_readonly("phi", &RegressionFit::phi)
      .def_readonly("w_hat", &RegressionFit::w_hat)
      .def_readonly("y_hat", &RegressionFit::y_hat)
      .def_readonly("residuals", &RegressionFit::residuals);

  m.def("fit", &fit, py::arg("basis"), py::arg("series"));
  m.def(
      "forecast",
      [](const RegressionFit& f, const FourierBasis& b, const std::vector<Episode>& tau) {
        const Forecast fc = forecast(f, b, tau);
        return py::make_tuple(fc.rho_hat, fc.variance);
      },
      py::arg("fit"), py::arg("basis"), py::arg("tau"));

  py::class_<BootstrapDraws>(m, "BootstrapDraws")
      .def(py::init([](Eigen::MatrixXd signs) { return BootstrapDraws{std::move(signs)}; }))
      .def_readonly("signs", &BootstrapDraws::signs);
  m.def("draw_rademacher", &draw_rademacher, py::arg("rng"), py::arg("replicates"), py::arg("length"));

  m.def(
      "prediction_interval_t",
      [](const PerformanceSeries& s, const FourierBasis& b, const std::vector<Episode>& tau,
         double alpha, const BootstrapDraws& d) {
        const PredictionInterval pi = prediction_interval_t(s, b, tau, alpha, d);
        return py::make_tuple(pi.lb, pi.ub, pi.rho_hat);
      },
      py::arg("series"), py::arg("basis"), py::arg("tau"), py::arg("alpha"), py::arg("draws"));
  m.def(
      "prediction_interval_percentile",
      [](const PerformanceSeries& s, const FourierBasis& b, const std::vector<Episode>& tau,
         double alpha, const BootstrapDraws& d) {
        const PercentileInterval pi = prediction_interval_percentile(s, b, tau, alpha, d);
        return py::make_tuple(pi.interval.lb, pi.interval.ub, pi.lower_replicate);
      },
      py::arg("series"), py::arg("basis"), py::arg("tau"), py::arg("alpha"), py::arg("draws"));

  py::class_<SearchConfig>(m, "SearchConfig")
      .def(py::init<>())
      .def_readwrite("n_steps", &SearchConfig::n_steps)
      .def_readwrite("learning_rate", &SearchConfig::learning_rate)
      .def_readwrite("entropy_coeff", &SearchConfig::entropy_coeff)
      .def_readwrite("alpha", &SearchConfig::alpha)
      .def_readwrite("replicates", &SearchConfig::replicates)
      .def_readwrite("basis", &SearchConfig::basis)
      .def_readwrite("horizon", &SearchConfig::horizon)
      .def_readwrite("gamma", &SearchConfig::gamma);

  m.def(
      "objective_with_grad",
      [](const Eigen::MatrixXd& theta, const std::vector<Trajectory>& train,
         const SearchConfig& config, const BootstrapDraws& draws) {
        const ObjectiveValue v = objective_with_grad(theta, train, config, draws);
        return py::make_tuple(v.value, v.grad);
      },
      py::arg("theta"), py::arg("train"), py::arg("config"), py::arg("draws"));
  m.def(
      "candidate_search",
      [](const Eigen::MatrixXd& theta, const std::vector<Trajectory>& train,
         const SearchConfig& config, Rng& rng) { return candidate_search(theta, train, config, rng); },
      py::arg("theta_init"), py::arg("train"), py::arg("config"), py::arg("rng"));

  m.def("config_keys", &config_keys);
  m.def(
      "default_config", [] { return config_to_map(ExperimentConfig{}); },
      "Default experiment configuration as a key -> text dict.");
  m.def(
      "run_experiment",
      [](const py::dict& config, const std::filesystem::path& out_dir) {
        const ExperimentConfig c = config_from_map(to_config_map(config));
        MetricsRow r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c, out_dir);
        }
        return metrics_dict(r);
      },
      py::arg("config"), py::arg("out_dir"));
  m.def(
      "evaluate_run",
      [](const std::filesystem::path& dir) {
        const ExperimentConfig c = config_from_map(load_config_file(dir / "config.txt"));
        return metrics_dict(evaluate_run_dir(dir, c));
      },
      py::arg("run_dir"));
  m.def(
      "sweep",
      [](const py::dict& grid, int n_seeds, int workers, const std::filesystem::path& out_dir) {
        ConfigGrid g;
        for (const auto& [k, v] : grid) {
          std::vector<std::string> values;
          if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
            for (const auto& x : v) values.emplace_back(py::str(x));
          } else {
            values.emplace_back(py::str(v));
          }
          g[py::str(k)] = std::move(values);
        }
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = run_sweep(g, n_seeds, workers, out_dir);
        }
        py::list rows;
        for (const auto& row : r.rows) rows.append(metrics_dict(row));
        return rows;
      },
      py::arg("grid"), py::arg("n_seeds"), py::arg("workers") = 1, py::arg("out_dir"));
}
