// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "carbondac/bench.hpp"
#include "carbondac/config.hpp"
#include "carbondac/dac_env.hpp"
#include "carbondac/evolve.hpp"
#include "carbondac/instgen.hpp"
#include "carbondac/io.hpp"
#include "carbondac/ppo.hpp"
#include "carbondac/schedule.hpp"
#include "carbondac/stats.hpp"
#include "carbondac/tuner.hpp"
#include "oracles.hpp"

using namespace carbondac;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

ActionVector filled(double v) {
  ActionVector a;
  a.fill(v);
  return a;
}

InstancePool fuzz_pool(Rng& rng, int count) {
  InstancePool pool;
  for (int i = 0; i < count; ++i) {
    Instance inst = oracle::random_instance(rng, 3 + static_cast<int>(rng.below(6)), 1 + static_cast<int>(rng.below(4)));
    inst.id = "fuzz_" + std::to_string(i);
    pool.push_back(std::make_shared<const TrainingInstance>(TrainingInstance{inst, 0.0}));
  }
  return pool;
}

// The four tiny instances shared by the learning and tuning smoke runs.
std::vector<Instance> smoke_instances() {
  std::vector<Instance> out;
  for (int i = 0; i < 4; ++i) out.push_back(generate_instance(standard_dataset_spec("M5T1"), GeneratorParams{}, i));
  return out;
}

EAConfig smoke_config() {
  EAConfig cfg;
  cfg.population_size = 30;
  cfg.max_generations = 30;
  return cfg;
}

Outcome rescale_endpoints() {
  const auto lo = rescale_action(filled(-1.0)).to_array();
  const auto hi = rescale_action(filled(1.0)).to_array();
  const auto min = action_bounds().min.to_array();
  const auto max = action_bounds().max.to_array();
  const std::array<double, 7> table_min{0.5, 0.1, 0.05, 0.01, 0.01, 0.008, 0.15};
  const std::array<double, 7> table_max{0.9, 0.5, 0.5, 0.2, 0.11, 0.2, 0.25};
  const bool ok = lo == table_min && hi == table_max && min == table_min && max == table_max;
  return {ok, ok ? "7/7 parameters exact at -1 and +1" : "endpoint mismatch"};
}

Outcome reward_cases() {
  RewardTracker t;
  t.f_initial = 100.0;
  t.f_ideal = 50.0;
  t.f_previous = 100.0;
  t.f_current = 80.0;
  const double r1 = reward(t);
  t.f_current = 70.0;
  const double r2 = reward(t);
  t.f_current = 75.0;
  const double r3 = reward(t);
  bool ok = std::abs(r1 - 1600.0) <= 1e-12 && std::abs(r2 - 2000.0) <= 1e-12 && r3 == 0.0;

  Rng rng(11);
  Rng actions(12);
  const InstancePool pool = fuzz_pool(rng, 10);
  double worst = 0.0;
  int episodes = 0;
  for (; episodes < 200; ++episodes) {
    EAConfig cfg;
    cfg.population_size = 4 + static_cast<int>(rng.below(10));
    cfg.max_generations = 1 + static_cast<int>(rng.below(20));
    auto [state, obs] = episode_reset(pool, cfg, rng);
    double total = 0.0;
    while (!state.done) {
      ActionVector a;
      for (auto& x : a) x = actions.uniform(-1.5, 1.5);
      total += episode_step(state, a).reward;
    }
    const double d = normalized_improvement(state.tracker.f_initial, state.tracker.f_ideal, state.population.best().fitness);
    const double expected = state.degenerate ? 0.0 : d * d;
    if (expected == 0.0) {
      if (total != 0.0) worst = std::max(worst, 1.0);
    } else {
      worst = std::max(worst, relative_gap(total, expected));
    }
  }
  ok = ok && worst <= 1e-9;
  return {ok, fmt("r = %.12g, %.12g, %g", r1, r2, r3) +
                  fmt("; worst telescoping gap %.2e over 200 episodes", worst)};
}

Outcome observation_bounds() {
  Rng rng(21);
  Rng actions(22);
  const InstancePool pool = fuzz_pool(rng, 16);
  long steps = 0;
  long violations = 0;
  while (steps < 100000) {
    EAConfig cfg;
    cfg.population_size = 4 + static_cast<int>(rng.below(8));
    cfg.max_generations = 5 + static_cast<int>(rng.below(30));
    auto [state, obs] = episode_reset(pool, cfg, rng);
    for (double x : obs.to_array()) violations += !(x >= 0.0 && x <= 1.0);
    while (!state.done && steps < 100000) {
      ActionVector a;
      for (auto& x : a) x = actions.uniform(-3.0, 3.0);
      const StepResult r = episode_step(state, a);
      for (double x : r.observation.to_array()) violations += !(x >= 0.0 && x <= 1.0);
      ++steps;
    }
  }
  return {violations == 0, fmt("%.0f steps, %.0f out-of-range components", static_cast<double>(steps),
                               static_cast<double>(violations))};
}

Outcome decoder_feasibility() {
  Rng rng(31);
  long chromosomes = 0;
  long violations = 0;
  long earliest_mismatch = 0;
  for (const DatasetSpec& spec : standard_dataset_specs()) {
    for (int index = 0; index < 10; ++index) {
      const Instance inst = generate_instance(spec, GeneratorParams{}, index);
      for (int k = 0; k < 100; ++k, ++chromosomes) {
        const Chromosome c = random_chromosome(inst, rng);
        const Schedule s = decode_schedule(inst, c);
        if (!oracle::violation(inst, s).empty() || find_schedule_violation(inst, s)) ++violations;
      }
      Chromosome zero = random_chromosome(inst, rng);
      std::fill(zero.pause_keys.begin(), zero.pause_keys.end(), 0.0);
      const Schedule s = decode_schedule(inst, zero);
      if (s.start != oracle::earliest_starts(inst, s.sequence)) ++earliest_mismatch;
      const Schedule all_zero = decode_schedule(inst, make_chromosome(inst, 0.0, 0.0));
      if (all_zero.start != oracle::earliest_starts(inst, all_zero.sequence)) ++earliest_mismatch;
    }
  }
  return {violations == 0 && earliest_mismatch == 0,
          fmt("%.0f chromosomes over 10 families, %.0f violations, %.0f earliest-start mismatches",
              static_cast<double>(chromosomes), static_cast<double>(violations),
              static_cast<double>(earliest_mismatch))};
}

Outcome emissions_oracle() {
  Rng rng(41);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Instance inst = oracle::random_instance(rng, 2 + static_cast<int>(rng.below(12)),
                                                  1 + static_cast<int>(rng.below(5)));
    const Schedule s = decode_schedule(inst, random_chromosome(inst, rng));
    worst = std::max(worst, relative_gap(evaluate_emissions(inst, s), oracle::emissions(inst, s)));
  }
  return {worst <= 1e-9, fmt("100 instances, worst relative gap %.2e", worst)};
}

Outcome elitism_and_local_search() {
  Rng rng(51);
  long violations = 0;
  long searches = 0;
  for (int run = 0; run < 100; ++run) {
    const Instance inst = oracle::random_instance(rng, 4 + static_cast<int>(rng.below(10)),
                                                  1 + static_cast<int>(rng.below(4)));
    EAConfig cfg;
    cfg.population_size = 12;
    cfg.max_generations = 20;
    cfg.rng_seed = static_cast<std::uint64_t>(run);
    const ActionVector a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                         rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const DynamicParams params = rescale_action(a);
    const StaticRunResult r = run_static(inst, cfg, params);
    const auto best = r.per_generation_best();
    for (std::size_t g = 1; g < best.size(); ++g) violations += best[g] > best[g - 1];
    for (int k = 0; k < 10; ++k, ++searches) {
      Chromosome c = random_chromosome(inst, rng);
      const double before = chromosome_fitness(inst, c);
      const double after = local_search(inst, c, before);
      violations += after > before;
      violations += after != chromosome_fitness(inst, c);
    }
  }
  return {violations == 0, fmt("100 runs, %.0f local searches, %.0f violations", static_cast<double>(searches),
                               static_cast<double>(violations))};
}

Outcome ppo_gradient() {
  double worst = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    Rng rng(61 + trial);
    PolicyNetwork policy(4 + 2 * trial, -0.5);
    policy.initialize(rng);
    for (auto& p : policy.parameters()) p += rng.normal(0.0, 0.1);
    RolloutBuffer buf(16, 1);
    for (int i = 0; i < 16; ++i) {
      for (auto& x : buf.observations[i]) x = rng.uniform();
      const ActionSample s = sample_action(policy, buf.observations[i], rng);
      buf.actions[i] = s.raw;
      double shift = 0.0;
      do {
        shift = rng.uniform(-0.6, 0.6);
      } while (std::abs(std::exp(-shift) - 0.8) < 0.02 || std::abs(std::exp(-shift) - 1.2) < 0.02);
      buf.log_probs[i] = s.log_prob + shift;
      buf.values[i] = s.value;
      buf.advantages[i] = rng.normal();
      buf.returns[i] = s.value + rng.normal();
    }
    std::vector<std::size_t> idx(16);
    std::iota(idx.begin(), idx.end(), 0);
    PpoHyperparams hp;
    hp.ent_coef = trial % 2 ? 0.01 : 0.0;
    hp.normalize_advantage = trial < 2;
    std::vector<double> grad(policy.parameters().size(), 0.0);
    ppo_loss(policy, buf, idx, hp, grad);
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double keep = policy.parameters()[k];
      const double h = 1e-6;
      policy.parameters()[k] = keep + h;
      const double up = ppo_loss(policy, buf, idx, hp, {}).total_loss;
      policy.parameters()[k] = keep - h;
      const double down = ppo_loss(policy, buf, idx, hp, {}).total_loss;
      policy.parameters()[k] = keep;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(grad[k] - numeric) / std::max({std::abs(grad[k]), std::abs(numeric), 1e-6}));
    }
  }
  return {worst < 1e-4, fmt("4 toy networks, max relative error %.2e", worst)};
}

Outcome learning_smoke() {
  const auto start = std::chrono::steady_clock::now();
  const EAConfig cfg = smoke_config();
  InstancePool pool;
  for (const Instance& inst : smoke_instances()) {
    const double ideal = compute_ideal(inst, cfg, tuned_params(), ideal_seed(inst));
    pool.push_back(std::make_shared<const TrainingInstance>(TrainingInstance{inst, ideal}));
  }
  PpoHyperparams hp;
  hp.n_steps = 512;
  hp.reward_scale = 1e-3;
  const TrainingResult r = train(pool, 100000, cfg, hp, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& e = r.episode_rewards;
  const std::size_t k = e.size() / 10;
  if (k == 0) return {false, "no completed episodes"};
  double first = 0.0;
  double last = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    first += e[i];
    last += e[e.size() - k + i];
  }
  first /= static_cast<double>(k);
  last /= static_cast<double>(k);
  const double ratio = last / first;
  return {ratio >= 1.2 && secs <= 1800.0,
          fmt("first 10%% mean %.1f, last 10%% mean %.1f, ratio %.3f", first, last, ratio) +
              " (" + std::to_string(e.size()) + fmt(" episodes, %.0f s)", secs)};
}

Outcome tuner_smoke() {
  EAConfig cfg = smoke_config();
  const std::vector<Instance> instances = smoke_instances();
  TuningBudget budget;
  budget.trials = 50;
  budget.instances_per_trial = 4;
  budget.generations_per_trial = cfg.max_generations;
  const TuningResult tuned = run_tuning(instances, cfg, budget, 1);
  std::vector<double> found;
  std::vector<double> defaults;
  for (const Instance& inst : instances) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      cfg.rng_seed = 1000 + seed;
      found.push_back(run_static(inst, cfg, tuned.best_params).best_fitness);
      defaults.push_back(run_static(inst, cfg, default_params()).best_fitness);
    }
  }
  return {mean(found) <= mean(defaults),
          fmt("tuned mean %.1f, default mean %.1f over 4 instances x 10 seeds", mean(found), mean(defaults))};
}

Outcome wilcoxon() {
  Rng rng(71);
  double worst_exact = 0.0;
  bool u_ok = true;
  for (int na = 1; na <= 8; ++na) {
    for (int nb = 1; nb <= 8; ++nb) {
      for (int rep = 0; rep < 4; ++rep) {
        std::vector<double> a(na);
        std::vector<double> b(nb);
        const bool ties = rep % 2 == 1;
        for (auto& x : a) x = ties ? static_cast<double>(rng.below(4)) : rng.uniform();
        for (auto& x : b) x = ties ? static_cast<double>(rng.below(4)) : rng.uniform() + 0.3 * rep;
        double u = 0.0;
        const double expected = oracle::rank_sum_p(a, b, &u);
        const RankSumResult got = wilcoxon_rank_sum(a, b);
        u_ok = u_ok && got.exact && got.u == u;
        worst_exact = std::max(worst_exact, std::abs(got.p - expected));
      }
    }
  }
  const double p_example =
      wilcoxon_rank_sum(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}).p;
  double worst_approx = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(8);
    std::vector<double> b(8);
    const double shift = rng.uniform(0.0, 1.5);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal() + shift;
    worst_approx = std::max(worst_approx, std::abs(wilcoxon_rank_sum(a, b).p - wilcoxon_rank_sum(a, b, 0).p));
  }
  return {u_ok && worst_exact <= 1e-12 && std::abs(p_example - 0.1) <= 1e-15 && worst_approx < 0.02,
          fmt("exact gap %.1e up to 8+8, {1,2,3} vs {4,5,6} p = %.15g, approximation gap %.4f", worst_exact,
              p_example, worst_approx)};
}

Outcome harness_determinism() {
  const fs::path root = fs::temp_directory_path() / "carbondac_acceptance_harness";
  fs::remove_all(root);
  DatasetSpec spec = standard_dataset_spec("M1T1");
  spec.instance_count = 2;
  write_dataset(root / "datasets", Dataset{spec, generate_dataset(spec, GeneratorParams{})}, GeneratorParams{}, 2);
  save_params(tuned_params(), root / "tuned.json");
  TrainedPolicy tp;
  tp.network = PolicyNetwork(16);
  Rng rng(81);
  tp.network.initialize(rng);
  tp.save(root / "policy.json");

  ExperimentPlan plan;
  plan.dataset_dirs = {root / "datasets" / "M1T1"};
  plan.variants = {Variant::kTuned, Variant::kDrl};
  plan.repetitions = 2;
  plan.base_seed = 3;
  plan.tuned_params_path = root / "tuned.json";
  plan.policy_path = root / "policy.json";
  plan.config.population_size = 20;
  plan.config.max_generations = 10;

  std::vector<std::vector<std::string>> contents;
  std::size_t file_count = 0;
  for (int pass = 0; pass < 2; ++pass) {
    plan.out_dir = root / ("out" + std::to_string(pass));
    plan.workers = pass + 1;
    const auto results = run_experiment(plan);
    const auto files = emit_reports(aggregate(results), plan.out_dir / "reports");
    std::vector<std::string> texts;
    for (const auto& f : files) texts.push_back(read_text_file(f));
    file_count = files.size();
    contents.push_back(texts);
  }
  fs::remove_all(root);
  const bool same = contents[0] == contents[1] && file_count > 0;
  return {same, std::to_string(file_count) + " report files, " +
                    (same ? "bit-identical across re-runs" : "differences found")};
}

Outcome dataset_conformance() {
  long instances = 0;
  long violations = 0;
  for (const DatasetSpec& spec : standard_dataset_specs()) {
    for (const Instance& inst : generate_dataset(spec, GeneratorParams{})) {
      ++instances;
      const int ops = inst.operations();
      const bool ok = inst.machines == spec.machines && ops >= spec.min_operations && ops <= spec.max_operations &&
                      inst.horizon_days == spec.horizon_days &&
                      std::abs(inst.horizon_slots * inst.slot_hours - 24.0 * spec.horizon_days) < 1e-9;
      violations += !ok;
      try {
        validate_instance(inst);
      } catch (const std::exception&) {
        ++violations;
      }
    }
  }
  const auto& m1t1 = standard_dataset_spec("M1T1");
  const auto& m10t3 = standard_dataset_spec("M10T3");
  const bool table = m1t1.min_operations == 6 && m1t1.max_operations == 15 && m10t3.min_operations == 650 &&
                     m10t3.max_operations == 830;
  return {violations == 0 && table,
          fmt("%.0f instances over 10 families, %.0f out of range", static_cast<double>(instances),
              static_cast<double>(violations))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"action rescaling endpoints", rescale_endpoints},
      {"reward cases and telescoping", reward_cases},
      {"observation bounds", observation_bounds},
      {"decoder feasibility", decoder_feasibility},
      {"emissions oracle", emissions_oracle},
      {"elitism and local search", elitism_and_local_search},
      {"ppo gradient check", ppo_gradient},
      {"learning smoke", learning_smoke},
      {"tuner smoke", tuner_smoke},
      {"wilcoxon exactness", wilcoxon},
      {"harness determinism", harness_determinism},
      {"dataset spec conformance", dataset_conformance},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !outcome.pass;
    std::printf("%s %s: %s [%.1f s]\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
