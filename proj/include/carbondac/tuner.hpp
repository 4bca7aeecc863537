#ifndef CARBONDAC_TUNER_HPP_
#define CARBONDAC_TUNER_HPP_

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "carbondac/evolve.hpp"
#include "carbondac/instance.hpp"
#include "carbondac/rng.hpp"

namespace carbondac {

struct Trial {
  int index = 0;
  DynamicParams params;
  std::vector<double> objectives;  // one per tuning instance
  double score = 0.0;              // mean of objectives
};

// Univariate tree-structured Parzen estimator settings.
struct TpeOptions {
  int startup_trials = 20;
  double good_fraction = 0.25;
  int candidates = 24;
  double prior_weight = 1.0;           // weight of the uniform prior in each density
  double min_bandwidth_fraction = 0.01;  // of the parameter range
};

// Uniform within the action ranges for the first startup trials, then
// the candidate (drawn from the good-trial density) with the largest
// good/bad density ratio.
DynamicParams suggest(std::span<const Trial> history, Rng& rng, const TpeOptions& options = {});

enum class BudgetUnit { kTrials, kGenerations, kEvaluations };

// Declared tuning budget. With kGenerations or kEvaluations the trial
// count is additionally capped so that the consumed counter stays within
// total_iterations.
struct TuningBudget {
  long total_iterations = 4'000'000;
  int trials = 333;
  int instances_per_trial = 12;
  int generations_per_trial = 100;
  BudgetUnit cap_unit = BudgetUnit::kTrials;

  long generations_per_trial_total() const { return static_cast<long>(instances_per_trial) * generations_per_trial; }
  long evaluations_per_trial(int population_size) const {
    return generations_per_trial_total() * population_size;
  }
  // Trials actually executed after applying the cap.
  int effective_trials(int population_size) const;
  std::string describe(int population_size) const;
};

struct TuningResult {
  DynamicParams best_params;
  double best_score = 0.0;
  std::vector<Trial> history;
  long generations_consumed = 0;
  long evaluations_consumed = 0;
  std::vector<std::string> log;
};

// Runs the budgeted trials; every trial runs `config` (with
// generations_per_trial generations) on each instance under a per-instance
// seed that is fixed across trials.
TuningResult run_tuning(const std::vector<Instance>& instances, const EAConfig& config, const TuningBudget& budget,
                        std::uint64_t seed, const TpeOptions& options = {}, int threads = 1);

// CSV with columns trial_index, the seven parameters, score.
void write_history_csv(const std::vector<Trial>& history, std::ostream& out);

}  // namespace carbondac

#endif  // CARBONDAC_TUNER_HPP_
