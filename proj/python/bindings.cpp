#include <pybind11/functional.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "carbondac/dac_env.hpp"
#include "carbondac/errors.hpp"
#include "carbondac/evolve.hpp"
#include "carbondac/instance.hpp"
#include "carbondac/instgen.hpp"
#include "carbondac/ppo.hpp"
#include "carbondac/schedule.hpp"
#include "carbondac/stats.hpp"
#include "carbondac/tuner.hpp"

namespace py = pybind11;
using namespace carbondac;

namespace {

// Episode environment over a fixed instance pool.
class Env {
 public:
  Env(std::vector<Instance> instances, std::vector<double> f_ideal, EAConfig config, std::uint64_t seed)
      : config_(config), rng_(seed) {
    if (instances.size() != f_ideal.size()) throw DimensionMismatch("one f_ideal per instance is required");
    for (std::size_t i = 0; i < instances.size(); ++i) {
      pool_.push_back(std::make_shared<const TrainingInstance>(TrainingInstance{instances[i], f_ideal[i]}));
    }
  }

  Observation reset() {
    auto [state, obs] = episode_reset(pool_, config_, rng_);
    state_ = std::move(state);
    started_ = true;
    return obs;
  }

  py::tuple step(const ActionVector& action) {
    if (!started_) throw EpisodeFinished("reset() must be called first");
    const StepResult r = episode_step(state_, action);
    return py::make_tuple(r.observation, r.reward, r.done, r.params);
  }

  const EnvState& state() const { return state_; }

 private:
  InstancePool pool_;
  EAConfig config_;
  Rng rng_;
  EnvState state_;
  bool started_ = false;
};

InstancePool make_pool(const std::vector<Instance>& instances, const std::vector<double>& f_ideal) {
  if (instances.size() != f_ideal.size()) throw DimensionMismatch("one f_ideal per instance is required");
  InstancePool pool;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    pool.push_back(std::make_shared<const TrainingInstance>(TrainingInstance{instances[i], f_ideal[i]}));
  }
  return pool;
}

}  // namespace

PYBIND11_MODULE(_carbondac, m) {
  m.doc() = "Carbon-aware flow shop scheduling with a memetic algorithm under learned parameter control";

  py::register_exception<Error>(m, "CarbondacError", PyExc_RuntimeError);

  py::class_<Instance>(m, "Instance")
      .def(py::init<>())
      .def_readwrite("id", &Instance::id)
      .def_readwrite("machines", &Instance::machines)
      .def_readwrite("jobs", &Instance::jobs)
      .def_readwrite("horizon_slots", &Instance::horizon_slots)
      .def_readwrite("slot_hours", &Instance::slot_hours)
      .def_readwrite("horizon_days", &Instance::horizon_days)
      .def_readwrite("proc", &Instance::proc)
      .def_readwrite("power", &Instance::power)
      .def_readwrite("renewable", &Instance::renewable)
      .def_readwrite("grid_intensity", &Instance::grid_intensity)
      .def_property_readonly("operations", &Instance::operations)
      .def("validate", [](const Instance& i) { validate_instance(i); })
      .def("to_json", [](const Instance& i) { return format_instance(i); })
      .def_static("from_json", [](const std::string& text) { return parse_instance(text); })
      .def("__eq__", [](const Instance& a, const Instance& b) { return a == b; })
      .def("__repr__", [](const Instance& i) {
        return "<Instance " + i.id + " M=" + std::to_string(i.machines) + " J=" + std::to_string(i.jobs) +
               " H=" + std::to_string(i.horizon_slots) + ">";
      });
  m.def("load_instance", &load_instance, py::arg("path"));
  m.def("save_instance", &save_instance, py::arg("instance"), py::arg("path"));

  py::class_<Chromosome>(m, "Chromosome")
      .def(py::init<>())
      .def(py::init([](std::vector<double> job_keys, std::vector<double> pause_keys) {
             return Chromosome{std::move(job_keys), std::move(pause_keys)};
           }),
           py::arg("job_keys"), py::arg("pause_keys"))
      .def_readwrite("job_keys", &Chromosome::job_keys)
      .def_readwrite("pause_keys", &Chromosome::pause_keys);
  m.def("make_chromosome", &make_chromosome, py::arg("instance"), py::arg("job_key"), py::arg("pause_key"));
  m.def(
      "random_chromosome",
      [](const Instance& inst, std::uint64_t seed) {
        Rng rng(seed);
        return random_chromosome(inst, rng);
      },
      py::arg("instance"), py::arg("seed"));

  py::class_<Schedule>(m, "Schedule")
      .def_readonly("sequence", &Schedule::sequence)
      .def_readonly("start", &Schedule::start)
      .def_readonly("fitness", &Schedule::fitness)
      .def("start_at", &Schedule::start_at, py::arg("job"), py::arg("machines"), py::arg("machine"));
  m.def("decode_sequence", [](const std::vector<double>& keys) { return decode_sequence(keys); }, py::arg("job_keys"));
  m.def("decode_schedule", &decode_schedule, py::arg("instance"), py::arg("chromosome"));
  m.def("evaluate_emissions", &evaluate_emissions, py::arg("instance"), py::arg("schedule"));
  m.def("chromosome_fitness", &chromosome_fitness, py::arg("instance"), py::arg("chromosome"));
  m.def("find_schedule_violation", &find_schedule_violation, py::arg("instance"), py::arg("schedule"));
  m.def("schedule_makespan", &schedule_makespan, py::arg("instance"), py::arg("schedule"));

  py::class_<DynamicParams>(m, "DynamicParams")
      .def(py::init<>())
      .def_readwrite("crossover_rate", &DynamicParams::crossover_rate)
      .def_readwrite("job_swap_prob", &DynamicParams::job_swap_prob)
      .def_readwrite("pause_swap_prob", &DynamicParams::pause_swap_prob)
      .def_readwrite("job_mutation_prob", &DynamicParams::job_mutation_prob)
      .def_readwrite("pause_mutation_prob", &DynamicParams::pause_mutation_prob)
      .def_readwrite("job_mutation_sigma", &DynamicParams::job_mutation_sigma)
      .def_readwrite("pause_mutation_sigma", &DynamicParams::pause_mutation_sigma)
      .def("to_list", &DynamicParams::to_array)
      .def_static("from_list", &DynamicParams::from_array)
      .def_static("names", [] {
        std::vector<std::string> out;
        for (const char* n : DynamicParams::names()) out.emplace_back(n);
        return out;
      })
      .def("validate", &DynamicParams::validate)
      .def("__eq__", [](const DynamicParams& a, const DynamicParams& b) { return a == b; });
  m.def("default_params", &default_params);
  m.def("tuned_params", &tuned_params);

  py::class_<EAConfig>(m, "EAConfig")
      .def(py::init([](int population_size, int max_generations, std::uint64_t rng_seed, int threads) {
             EAConfig c;
             c.population_size = population_size;
             c.max_generations = max_generations;
             c.rng_seed = rng_seed;
             c.evaluation_threads = threads;
             return c;
           }),
           py::arg("population_size") = 250, py::arg("max_generations") = 100, py::arg("rng_seed") = 0,
           py::arg("evaluation_threads") = 1)
      .def_readwrite("population_size", &EAConfig::population_size)
      .def_readwrite("max_generations", &EAConfig::max_generations)
      .def_readwrite("rng_seed", &EAConfig::rng_seed)
      .def_readwrite("evaluation_threads", &EAConfig::evaluation_threads);

  py::class_<GenerationStats>(m, "GenerationStats")
      .def_readonly("best", &GenerationStats::best)
      .def_readonly("mean", &GenerationStats::mean)
      .def_readonly("std", &GenerationStats::std);
  py::class_<StaticRunResult>(m, "StaticRunResult")
      .def_readonly("best_fitness", &StaticRunResult::best_fitness)
      .def_readonly("best", &StaticRunResult::best)
      .def_readonly("trace", &StaticRunResult::trace)
      .def("per_generation_best", &StaticRunResult::per_generation_best);
  m.def("run_static", &run_static, py::arg("instance"), py::arg("config"), py::arg("params"),
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_controlled",
      [](const Instance& inst, const EAConfig& cfg, const std::function<ActionVector(const Observation&)>& controller) {
        return run_controlled(inst, cfg, controller);
      },
      py::arg("instance"), py::arg("config"), py::arg("controller"));

  py::class_<Observation>(m, "Observation")
      .def_readonly("norm_best", &Observation::norm_best)
      .def_readonly("norm_mean", &Observation::norm_mean)
      .def_readonly("coeff_variation", &Observation::coeff_variation)
      .def_readonly("remaining_budget", &Observation::remaining_budget)
      .def_readonly("stagnation", &Observation::stagnation)
      .def("to_list", &Observation::to_array);
  m.def("rescale_action", &rescale_action, py::arg("action"));
  m.def("unscale_params", &unscale_params, py::arg("params"));
  m.def("clip_action", &clip_action, py::arg("action"));
  m.def("action_bounds", [] { return py::make_tuple(action_bounds().min, action_bounds().max); });

  py::class_<RewardTracker>(m, "RewardTracker")
      .def(py::init([](double f_initial, double f_ideal) {
             RewardTracker t;
             t.f_initial = f_initial;
             t.f_ideal = f_ideal;
             t.f_previous = f_initial;
             t.f_current = f_initial;
             return t;
           }),
           py::arg("f_initial"), py::arg("f_ideal"))
      .def_readwrite("f_initial", &RewardTracker::f_initial)
      .def_readwrite("f_ideal", &RewardTracker::f_ideal)
      .def_readwrite("f_previous", &RewardTracker::f_previous)
      .def_readwrite("f_current", &RewardTracker::f_current)
      .def_readonly("delta_previous", &RewardTracker::delta_previous)
      .def_readonly("delta_current", &RewardTracker::delta_current)
      .def("step", [](RewardTracker& t, double f_current) {
        t.f_current = f_current;
        return reward(t);
      }, py::arg("f_current"));
  m.def("normalized_improvement", &normalized_improvement, py::arg("f_initial"), py::arg("f_ideal"), py::arg("f"));
  m.def("compute_ideal", &compute_ideal, py::arg("instance"), py::arg("config"), py::arg("params"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());
  m.def("ideal_seed", &ideal_seed, py::arg("instance"));

  py::class_<Env>(m, "Env")
      .def(py::init<std::vector<Instance>, std::vector<double>, EAConfig, std::uint64_t>(), py::arg("instances"),
           py::arg("f_ideal"), py::arg("config"), py::arg("seed") = 0)
      .def("reset", &Env::reset)
      .def("step", &Env::step, py::arg("action"), "Returns (observation, reward, done, params).")
      .def_property_readonly("episode_reward", [](const Env& e) { return e.state().episode_reward; })
      .def_property_readonly("instance_id", [](const Env& e) {
        return e.state().entry ? e.state().entry->instance.id : std::string();
      });

  py::class_<PpoHyperparams>(m, "PpoHyperparams")
      .def(py::init<>())
      .def_readwrite("hidden_units", &PpoHyperparams::hidden_units)
      .def_readwrite("learning_rate", &PpoHyperparams::learning_rate)
      .def_readwrite("n_steps", &PpoHyperparams::n_steps)
      .def_readwrite("batch_size", &PpoHyperparams::batch_size)
      .def_readwrite("n_epochs", &PpoHyperparams::n_epochs)
      .def_readwrite("gamma", &PpoHyperparams::gamma)
      .def_readwrite("gae_lambda", &PpoHyperparams::gae_lambda)
      .def_readwrite("clip_range", &PpoHyperparams::clip_range)
      .def_readwrite("ent_coef", &PpoHyperparams::ent_coef)
      .def_readwrite("vf_coef", &PpoHyperparams::vf_coef)
      .def_readwrite("max_grad_norm", &PpoHyperparams::max_grad_norm)
      .def_readwrite("log_std_init", &PpoHyperparams::log_std_init)
      .def_readwrite("normalize_advantage", &PpoHyperparams::normalize_advantage)
      .def_readwrite("n_envs", &PpoHyperparams::n_envs)
      .def_readwrite("env_threads", &PpoHyperparams::env_threads)
      .def_readwrite("reward_scale", &PpoHyperparams::reward_scale);

  py::class_<TrainedPolicy>(m, "Policy")
      .def_static("load", &TrainedPolicy::load, py::arg("path"))
      .def("save", &TrainedPolicy::save, py::arg("path"))
      .def(
          "act",
          [](const TrainedPolicy& p, const Observation& obs, bool deterministic, std::uint64_t seed) {
            Rng rng(seed);
            return act(p.network, obs, deterministic, rng);
          },
          py::arg("observation"), py::arg("deterministic") = true, py::arg("seed") = 0)
      .def(
          "act_array",
          [](const TrainedPolicy& p, const std::array<double, kObservationSize>& o, bool deterministic,
             std::uint64_t seed) {
            Rng rng(seed);
            return act(p.network, Observation{o[0], o[1], o[2], o[3], o[4]}, deterministic, rng);
          },
          py::arg("observation"), py::arg("deterministic") = true, py::arg("seed") = 0)
      .def_property_readonly("log_std", [](const TrainedPolicy& p) {
        const auto s = p.network.log_std();
        return std::vector<double>(s.begin(), s.end());
      });

  py::class_<TrainingResult>(m, "TrainingResult")
      .def_readonly("policy", &TrainingResult::policy)
      .def_readonly("episode_rewards", &TrainingResult::episode_rewards)
      .def_readonly("updates", &TrainingResult::updates);
  m.def(
      "train",
      [](const std::vector<Instance>& instances, const std::vector<double>& f_ideal, long total_steps,
         const EAConfig& config, const PpoHyperparams& hp, std::uint64_t seed) {
        const InstancePool pool = make_pool(instances, f_ideal);
        py::gil_scoped_release release;
        return train(pool, total_steps, config, hp, seed);
      },
      py::arg("instances"), py::arg("f_ideal"), py::arg("total_steps"), py::arg("config"),
      py::arg("hyperparams") = PpoHyperparams{}, py::arg("seed") = 0);

  py::class_<RankSumResult>(m, "RankSumResult")
      .def_readonly("u", &RankSumResult::u)
      .def_readonly("p", &RankSumResult::p)
      .def_readonly("exact", &RankSumResult::exact)
      .def_readonly("degenerate", &RankSumResult::degenerate);
  m.def(
      "wilcoxon_rank_sum",
      [](const std::vector<double>& a, const std::vector<double>& b, int exact_limit) {
        return wilcoxon_rank_sum(a, b, exact_limit);
      },
      py::arg("a"), py::arg("b"), py::arg("exact_limit") = 16);

  m.def("dataset_names", [] {
    std::vector<std::string> out;
    for (const auto& s : standard_dataset_specs()) out.push_back(s.name);
    return out;
  });
  m.def(
      "operations_range",
      [](const std::string& name) {
        const auto& s = standard_dataset_spec(name);
        return py::make_tuple(s.min_operations, s.max_operations);
      },
      py::arg("family"));
  m.def(
      "generate_instance",
      [](const std::string& family, int index) {
        return generate_instance(standard_dataset_spec(family), GeneratorParams{}, index);
      },
      py::arg("family"), py::arg("index"));

  py::class_<TuningResult>(m, "TuningResult")
      .def_readonly("best_params", &TuningResult::best_params)
      .def_readonly("best_score", &TuningResult::best_score)
      .def_property_readonly("scores", [](const TuningResult& r) {
        std::vector<double> out;
        for (const auto& t : r.history) out.push_back(t.score);
        return out;
      });
  m.def(
      "tune",
      [](const std::vector<Instance>& instances, const EAConfig& config, int trials, int generations_per_trial,
         std::uint64_t seed) {
        TuningBudget budget;
        budget.trials = trials;
        budget.instances_per_trial = static_cast<int>(instances.size());
        budget.generations_per_trial = generations_per_trial;
        py::gil_scoped_release release;
        return run_tuning(instances, config, budget, seed);
      },
      py::arg("instances"), py::arg("config"), py::arg("trials"), py::arg("generations_per_trial"),
      py::arg("seed") = 0);
}
