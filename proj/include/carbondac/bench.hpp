#ifndef CARBONDAC_BENCH_HPP_
#define CARBONDAC_BENCH_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "carbondac/evolve.hpp"

namespace carbondac {

enum class Variant { kDefault, kTuned, kDrl };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ExperimentPlan {
  std::vector<std::filesystem::path> dataset_dirs;
  std::vector<Variant> variants = {Variant::kDefault, Variant::kTuned, Variant::kDrl};
  int repetitions = 10;
  std::uint64_t base_seed = 0;
  std::filesystem::path tuned_params_path;  // required for the tuned variant
  std::filesystem::path policy_path;        // required for the drl variant
  EAConfig config;                          // population size and generations
  std::filesystem::path out_dir;            // run markers go to out_dir/runs
  int instance_limit = 0;                   // 0 = every evaluation instance
  int workers = 1;

  // Throws ParameterOutOfRange or MissingArtifact.
  void validate() const;
};

std::uint64_t run_seed(std::uint64_t base, const std::string& dataset, const std::string& instance, Variant variant,
                       int repetition);

struct RunResult {
  std::string dataset;
  std::string instance_id;
  Variant variant = Variant::kDefault;
  int repetition = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double best_fitness = 0.0;
  std::vector<double> best_trace;  // best fitness per generation, gamma + 1 entries
};

// Runs every (dataset, instance, variant, repetition) combination, reusing
// completed runs found under out_dir/runs. Failed runs are returned with
// ok = false. Results are ordered by dataset, instance, variant, repetition.
std::vector<RunResult> run_experiment(const ExperimentPlan& plan);

// Loads every completed run marker under out_dir/runs.
std::vector<RunResult> load_results(const std::filesystem::path& out_dir);

void write_raw_results_csv(const std::vector<RunResult>& results, std::ostream& out);

struct ComparisonRow {
  std::string dataset;
  Variant variant = Variant::kDefault;
  double mean = 0.0;        // over instances of the per-instance mean over repetitions
  double best = 0.0;        // over instances of the per-instance best over repetitions
  double std = 0.0;         // over instances of the per-instance std over repetitions
  double pct_delta = 0.0;   // relative improvement of drl over this row; NaN without drl
  bool best_mean = false;   // lowest mean in its dataset
  bool best_best = false;   // lowest best in its dataset
  bool significant = false; // best-mean row beats every other variant at p < 0.05
};

struct PairwiseTest {
  std::string dataset;
  Variant a = Variant::kDefault;
  Variant b = Variant::kDefault;
  double u = 0.0;
  double p = 1.0;
};

struct ConvergenceSeries {
  std::string dataset;
  std::vector<Variant> variants;
  std::vector<std::vector<double>> mean_best;  // [variant][generation]
};

struct Aggregate {
  std::vector<ComparisonRow> rows;
  std::vector<PairwiseTest> tests;
  std::vector<ConvergenceSeries> convergence;
};

// (Obj - Obj_drl) / Obj * 100.
double percent_delta(double objective, double drl_objective);

// Throws IncompleteResults naming the missing or failed runs.
Aggregate aggregate(const std::vector<RunResult>& results);

// Per dataset: <name>_results.csv, <name>_results.txt, <name>_pvalues.csv,
// <name>_convergence.csv. Returns the written paths.
std::vector<std::filesystem::path> emit_reports(const Aggregate& aggregate, const std::filesystem::path& report_dir);

}  // namespace carbondac

#endif  // CARBONDAC_BENCH_HPP_
