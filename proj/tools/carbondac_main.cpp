// carbondac: dataset generation, tuning, policy training and benchmarking.
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "carbondac/bench.hpp"
#include "carbondac/config.hpp"
#include "carbondac/dac_env.hpp"
#include "carbondac/errors.hpp"
#include "carbondac/instgen.hpp"
#include "carbondac/io.hpp"
#include "carbondac/parallel.hpp"
#include "carbondac/ppo.hpp"
#include "carbondac/schedule.hpp"
#include "carbondac/stats.hpp"
#include "carbondac/tuner.hpp"

namespace fs = std::filesystem;
using namespace carbondac;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct Paths {
  fs::path root;
  fs::path datasets() const { return root / "datasets"; }
  fs::path training_manifest() const { return root / "training.json"; }
  fs::path ideal() const { return root / "ideal.json"; }
  fs::path tuned_params() const { return root / "tuned_params.json"; }
  fs::path tuning_history() const { return root / "tuning_history.csv"; }
  fs::path policy() const { return root / "policy.json"; }
  fs::path curve() const { return root / "training_curve.csv"; }
  fs::path reports() const { return root / "reports"; }
};

std::vector<std::string> dataset_names(const AppConfig& cfg) {
  if (!cfg.datasets.empty()) return cfg.datasets;
  std::vector<std::string> names;
  for (const auto& s : standard_dataset_specs()) names.push_back(s.name);
  return names;
}

std::string str(const std::ostringstream& os) { return os.str(); }

// Training instances listed in the training manifest, loaded from their datasets.
std::vector<Instance> training_instances(const Paths& paths) {
  const TrainingSelection sel = read_training_manifest(paths.training_manifest());
  std::map<std::string, Instance> by_id;
  for (const auto& id : sel.training_ids) {
    const auto cut = id.rfind('_');
    if (cut == std::string::npos) throw ParseError("malformed instance id '" + id + "'");
    const fs::path file = paths.datasets() / id.substr(0, cut) / ("instance_" + id.substr(cut + 1) + ".json");
    by_id.emplace(id, load_instance(file));
  }
  std::vector<Instance> out;
  for (const auto& id : sel.training_ids) out.push_back(by_id.at(id));
  return out;
}

void cmd_generate(const AppConfig& cfg, const Paths& paths) {
  std::vector<Dataset> known;
  for (const auto& name : dataset_names(cfg)) {
    DatasetSpec spec = standard_dataset_spec(name);
    spec.instance_count = cfg.instances_per_dataset + (spec.role == DatasetRole::kKnown ? cfg.training_per_dataset : 0);
    Dataset ds{spec, generate_dataset(spec, cfg.generator, cfg.workers)};
    write_dataset(paths.datasets(), ds, cfg.generator, cfg.instances_per_dataset);
    std::cout << "generated " << name << ": " << ds.instances.size() << " instances\n";
    if (spec.role == DatasetRole::kKnown) known.push_back(std::move(ds));
  }
  if (!known.empty()) {
    const TrainingSelection sel =
        select_training_set(known, cfg.training_per_dataset, cfg.seed, cfg.instances_per_dataset);
    write_training_manifest(paths.training_manifest(), sel, cfg.seed, cfg.training_per_dataset);
    std::cout << "training set: " << sel.training_ids.size() << " instances -> " << paths.training_manifest().string()
              << "\n";
  }
}

IdealCache ensure_ideals(const AppConfig& cfg, const Paths& paths, const std::vector<Instance>& instances) {
  IdealCache cache(cfg.ea, tuned_params());
  if (fs::exists(paths.ideal())) {
    const IdealCache stored = IdealCache::load(paths.ideal());
    for (const auto& [id, v] : stored.values()) cache.set(id, v);
  }
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!cache.contains(instances[i].id)) todo.push_back(i);
  }
  std::vector<double> values(todo.size());
  parallel_for(todo.size(), cfg.workers, [&](std::size_t k) {
    const Instance& inst = instances[todo[k]];
    values[k] = compute_ideal(inst, cfg.ea, tuned_params(), ideal_seed(inst));
  });
  for (std::size_t k = 0; k < todo.size(); ++k) cache.set(instances[todo[k]].id, values[k]);
  if (!todo.empty()) cache.save(paths.ideal());
  return cache;
}

void cmd_ideal(const AppConfig& cfg, const Paths& paths) {
  const auto instances = training_instances(paths);
  const IdealCache cache = ensure_ideals(cfg, paths, instances);
  for (const auto& inst : instances) std::cout << inst.id << " f_ideal=" << format_double(cache.at(inst.id)) << "\n";
}

void cmd_tune(const AppConfig& cfg, const Paths& paths) {
  const auto instances = training_instances(paths);
  TuningBudget budget = cfg.budget;
  budget.instances_per_trial = static_cast<int>(instances.size());
  const TuningResult res = run_tuning(instances, cfg.ea, budget, cfg.seed, cfg.tpe, cfg.workers);
  for (const auto& line : res.log) std::cout << line << "\n";
  save_params(res.best_params, paths.tuned_params());
  std::ostringstream csv;
  write_history_csv(res.history, csv);
  write_file_atomic(paths.tuning_history(), str(csv));
  std::cout << "best score " << format_double(res.best_score) << " -> " << paths.tuned_params().string() << "\n";
}

void cmd_train(const AppConfig& cfg, const Paths& paths) {
  const auto instances = training_instances(paths);
  const IdealCache cache = ensure_ideals(cfg, paths, instances);
  InstancePool pool;
  for (const auto& inst : instances) {
    pool.push_back(std::make_shared<const TrainingInstance>(TrainingInstance{inst, cache.at(inst.id)}));
  }
  PpoHyperparams hp = cfg.ppo;
  hp.env_threads = std::max(hp.env_threads, std::min(cfg.workers, hp.n_envs));
  const TrainingResult res = train(pool, cfg.train_total_steps, cfg.ea, hp, cfg.seed);
  res.policy.save(paths.policy());
  std::ostringstream csv;
  write_curve_csv(res.curve, csv);
  write_file_atomic(paths.curve(), str(csv));
  std::cout << "episodes " << res.episode_rewards.size() << ", updates " << res.updates << " -> "
            << paths.policy().string() << "\n";
}

ExperimentPlan make_plan(const AppConfig& cfg, const Paths& paths) {
  ExperimentPlan plan;
  for (const auto& name : dataset_names(cfg)) plan.dataset_dirs.push_back(paths.datasets() / name);
  plan.variants.clear();
  for (const auto& v : cfg.variants) plan.variants.push_back(variant_from_name(v));
  plan.repetitions = cfg.repetitions;
  plan.base_seed = cfg.seed;
  plan.tuned_params_path = paths.tuned_params();
  plan.policy_path = paths.policy();
  plan.config = cfg.ea;
  plan.out_dir = paths.root;
  plan.instance_limit = cfg.instance_limit;
  plan.workers = cfg.workers;
  return plan;
}

void cmd_run(const AppConfig& cfg, const Paths& paths) {
  const auto results = run_experiment(make_plan(cfg, paths));
  std::ostringstream csv;
  write_raw_results_csv(results, csv);
  write_file_atomic(paths.root / "raw_results.csv", str(csv));
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (!r.ok) {
      ++failed;
      std::cerr << "run failed: " << r.dataset << "/" << r.instance_id << "/" << variant_name(r.variant) << "/"
                << r.repetition << ": " << r.error << "\n";
    }
  }
  std::cout << results.size() << " runs, " << failed << " failed\n";
  if (failed > 0) throw IncompleteResults(std::to_string(failed) + " run(s) failed");
}

void cmd_report(const Paths& paths) {
  const Aggregate agg = aggregate(load_results(paths.root));
  for (const auto& p : emit_reports(agg, paths.reports())) std::cout << p.string() << "\n";
}

// Fast consistency checks of the installed build.
bool cmd_selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << "\n";
    failures += ok ? 0 : 1;
  };
  {
    ActionVector lo;
    ActionVector hi;
    lo.fill(-1.0);
    hi.fill(1.0);
    const auto& b = action_bounds();
    check("action rescaling endpoints",
          rescale_action(lo) == b.min && rescale_action(hi) == b.max);
  }
  {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{4, 5, 6};
    const RankSumResult t = wilcoxon_rank_sum(a, b);
    check("rank-sum exact p", t.u == 0.0 && std::abs(t.p - 0.1) < 1e-12);
  }
  {
    DatasetSpec spec = standard_dataset_spec("M1T1");
    const Instance inst = generate_instance(spec, GeneratorParams{}, 0);
    Rng rng(7);
    bool feasible = true;
    for (int i = 0; i < 100; ++i) {
      const Schedule s = decode_schedule(inst, random_chromosome(inst, rng));
      feasible = feasible && !find_schedule_violation(inst, s).has_value();
    }
    check("decoder feasibility", feasible);
  }
  {
    RewardTracker t;
    t.f_initial = 100.0;
    t.f_ideal = 0.0;
    t.f_previous = 100.0;
    t.f_current = 60.0;
    check("reward substitution", std::abs(reward(t) - 1600.0) < 1e-12);
  }
  return failures == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carbon-aware flow shop scheduling with dynamically configured memetic search"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Base seed (overrides config)");
  app.add_option("--workers", workers, "Worker threads (overrides config)")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "Artifact directory")->capture_default_str();

  auto* generate = app.add_subcommand("generate", "Generate the benchmark datasets and training split");
  auto* tune = app.add_subcommand("tune", "Tune static parameters on the training instances");
  auto* ideal = app.add_subcommand("ideal", "Compute the f_ideal cache for the training instances");
  auto* trainc = app.add_subcommand("train", "Train the parameter control policy");
  auto* run = app.add_subcommand("run", "Run the benchmark variants");
  auto* report = app.add_subcommand("report", "Aggregate results into tables and convergence data");
  auto* selftest = app.add_subcommand("selftest", "Run quick consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    AppConfig cfg = config_path.empty() ? AppConfig{} : load_app_config(config_path);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    const Paths paths{out_dir};
    if (generate->parsed()) cmd_generate(cfg, paths);
    if (tune->parsed()) cmd_tune(cfg, paths);
    if (ideal->parsed()) cmd_ideal(cfg, paths);
    if (trainc->parsed()) cmd_train(cfg, paths);
    if (run->parsed()) cmd_run(cfg, paths);
    if (report->parsed()) cmd_report(paths);
    if (selftest->parsed() && !cmd_selftest()) return kExitRuntime;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.category() == ErrorCategory::kData ? kExitData : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
