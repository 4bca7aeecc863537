#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "carbondac/bench.hpp"
#include "carbondac/config.hpp"
#include "carbondac/errors.hpp"
#include "carbondac/instgen.hpp"
#include "carbondac/io.hpp"
#include "carbondac/ppo.hpp"
#include "doctest.h"

using namespace carbondac;
namespace fs = std::filesystem;

namespace {

RunResult fake(const std::string& ds, const std::string& id, Variant v, int rep, double f) {
  RunResult r;
  r.dataset = ds;
  r.instance_id = id;
  r.variant = v;
  r.repetition = rep;
  r.ok = true;
  r.best_fitness = f;
  r.best_trace = {f + 10.0, f + 1.0, f};
  return r;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

struct Workspace {
  fs::path root;
  ExperimentPlan plan;

  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / name) {
    fs::remove_all(root);
    DatasetSpec spec = standard_dataset_spec("M1T1");
    spec.instance_count = 2;
    write_dataset(root / "datasets", Dataset{spec, generate_dataset(spec, GeneratorParams{})}, GeneratorParams{}, 2);
    save_params(tuned_params(), root / "tuned.json");
    TrainedPolicy tp;
    tp.network = PolicyNetwork(8);
    Rng rng(1);
    tp.network.initialize(rng);
    tp.save(root / "policy.json");
    plan.dataset_dirs = {root / "datasets" / "M1T1"};
    plan.variants = {Variant::kTuned, Variant::kDrl};
    plan.repetitions = 2;
    plan.base_seed = 5;
    plan.tuned_params_path = root / "tuned.json";
    plan.policy_path = root / "policy.json";
    plan.config.population_size = 8;
    plan.config.max_generations = 4;
    plan.out_dir = root / "out";
  }
  ~Workspace() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("percent delta") {
  CHECK(percent_delta(100.0, 97.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(percent_delta(97.0, 97.0) == 0.0);
  CHECK(percent_delta(50.0, 55.0) < 0.0);
}

TEST_CASE("variant names") {
  for (Variant v : {Variant::kDefault, Variant::kTuned, Variant::kDrl}) CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_THROWS_AS(variant_from_name("random"), ParameterOutOfRange);
}

TEST_CASE("run seeds are distinct across runs") {
  std::set<std::uint64_t> seeds;
  int count = 0;
  for (const char* ds : {"M1T1", "M3T3"}) {
    for (int i = 0; i < 10; ++i) {
      for (Variant v : {Variant::kDefault, Variant::kTuned, Variant::kDrl}) {
        for (int rep = 0; rep < 10; ++rep) {
          seeds.insert(run_seed(7, ds, std::string(ds) + "_" + std::to_string(i), v, rep));
          ++count;
        }
      }
    }
  }
  CHECK(seeds.size() == static_cast<std::size_t>(count));
  CHECK(run_seed(7, "a", "b", Variant::kDrl, 1) == run_seed(7, "a", "b", Variant::kDrl, 1));
}

TEST_CASE("aggregation arithmetic") {
  std::vector<RunResult> runs{
      fake("D", "D_0", Variant::kDefault, 0, 100.0), fake("D", "D_0", Variant::kDefault, 1, 110.0),
      fake("D", "D_1", Variant::kDefault, 0, 200.0), fake("D", "D_1", Variant::kDefault, 1, 200.0),
      fake("D", "D_0", Variant::kDrl, 0, 90.0),      fake("D", "D_0", Variant::kDrl, 1, 100.0),
      fake("D", "D_1", Variant::kDrl, 0, 190.0),     fake("D", "D_1", Variant::kDrl, 1, 194.0),
  };
  const Aggregate agg = aggregate(runs);
  REQUIRE(agg.rows.size() == 2);
  const ComparisonRow& def = agg.rows[0];
  const ComparisonRow& drl = agg.rows[1];
  CHECK(def.mean == (105.0 + 200.0) / 2);
  CHECK(def.best == (100.0 + 200.0) / 2);
  CHECK(def.std == (5.0 + 0.0) / 2);
  CHECK(drl.mean == (95.0 + 192.0) / 2);
  CHECK(drl.pct_delta == 0.0);
  CHECK(def.pct_delta == doctest::Approx(percent_delta(def.mean, drl.mean)));
  CHECK(drl.best_mean);
  CHECK(drl.best_best);
  CHECK_FALSE(def.best_mean);
  CHECK_FALSE(drl.significant);  // 4 vs 4 overlapping runs
  REQUIRE(agg.tests.size() == 1);
  CHECK((agg.tests[0].p > 0.05 && agg.tests[0].p <= 1.0));
  REQUIRE(agg.convergence.size() == 1);
  CHECK(agg.convergence[0].mean_best[0].size() == 3);
  CHECK(agg.convergence[0].mean_best[0][2] == doctest::Approx((100.0 + 110.0 + 200.0 + 200.0) / 4));
  for (const auto& row : agg.rows) {
    CHECK((row.mean >= 90.0 && row.mean <= 200.0));
  }

  const Aggregate single = aggregate({fake("S", "S_0", Variant::kTuned, 0, 42.0)});
  CHECK(single.rows[0].mean == 42.0);
  CHECK(single.rows[0].best == 42.0);
  CHECK(std::isnan(single.rows[0].pct_delta));
}

TEST_CASE("significance needs separated samples") {
  std::vector<RunResult> runs;
  for (int i = 0; i < 5; ++i) {
    for (int rep = 0; rep < 2; ++rep) {
      const std::string id = "D_" + std::to_string(i);
      runs.push_back(fake("D", id, Variant::kDefault, rep, 200.0 + i + rep));
      runs.push_back(fake("D", id, Variant::kTuned, rep, 150.0 + i + rep));
      runs.push_back(fake("D", id, Variant::kDrl, rep, 100.0 + i + rep));
    }
  }
  const Aggregate agg = aggregate(runs);
  CHECK(agg.tests.size() == 3);
  int flagged = 0;
  for (const auto& row : agg.rows) {
    if (row.significant) {
      ++flagged;
      CHECK(row.variant == Variant::kDrl);
    }
  }
  CHECK(flagged == 1);
}

TEST_CASE("incomplete results are reported") {
  std::vector<RunResult> runs{fake("D", "D_0", Variant::kDefault, 0, 1.0), fake("D", "D_0", Variant::kDefault, 1, 1.0),
                              fake("D", "D_0", Variant::kDrl, 0, 1.0)};
  CHECK_THROWS_AS(aggregate(runs), IncompleteResults);
  runs.push_back(fake("D", "D_0", Variant::kDrl, 1, 1.0));
  runs.back().ok = false;
  runs.back().error = "boom";
  try {
    aggregate(runs);
    FAIL("expected IncompleteResults");
  } catch (const IncompleteResults& e) {
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
  CHECK_THROWS_AS(aggregate({}), IncompleteResults);
}

TEST_CASE("experiment runs, resumes and reports") {
  Workspace ws("carbondac_bench_run");
  ExperimentPlan plan = ws.plan;
  plan.variants = {Variant::kTuned};
  plan.repetitions = 1;
  plan.instance_limit = 1;
  const auto one = run_experiment(plan);
  REQUIRE(one.size() == 1);
  CHECK(one[0].ok);
  CHECK(one[0].best_trace.size() == 5);

  const auto results = run_experiment(ws.plan);
  CHECK(results.size() == 8);
  for (const auto& r : results) {
    CHECK(r.ok);
    CHECK(r.best_trace.size() == 5);
    for (std::size_t g = 1; g < r.best_trace.size(); ++g) CHECK(r.best_trace[g] <= r.best_trace[g - 1]);
  }
  CHECK(results[0].best_fitness == one[0].best_fitness);  // resumed from the marker

  const auto loaded = load_results(ws.plan.out_dir);
  REQUIRE(loaded.size() == results.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].instance_id == results[i].instance_id);
    CHECK(loaded[i].best_fitness == results[i].best_fitness);
  }

  const auto files = emit_reports(aggregate(results), ws.root / "reports");
  CHECK(files.size() == 4);
  std::ifstream conv(ws.root / "reports" / "M1T1_convergence.csv");
  int lines = 0;
  for (std::string line; std::getline(conv, line);) ++lines;
  CHECK(lines == 1 + 5);
  const std::string table = slurp(ws.root / "reports" / "M1T1_results.csv");
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);

  const std::string first = slurp(ws.root / "reports" / "M1T1_results.txt");
  fs::remove_all(ws.plan.out_dir);
  emit_reports(aggregate(run_experiment(ws.plan)), ws.root / "reports");
  CHECK(slurp(ws.root / "reports" / "M1T1_results.txt") == first);

  std::ostringstream raw;
  write_raw_results_csv(results, raw);
  CHECK(raw.str().rfind("dataset,instance,variant,repetition,seed,status,best_fitness\n", 0) == 0);
}

TEST_CASE("plan validation") {
  Workspace ws("carbondac_bench_validate");
  ExperimentPlan plan = ws.plan;
  plan.repetitions = 0;
  CHECK_THROWS_AS(plan.validate(), ParameterOutOfRange);
  plan = ws.plan;
  plan.policy_path = ws.root / "nope.json";
  CHECK_THROWS_AS(plan.validate(), MissingArtifact);
  plan.variants = {Variant::kTuned};
  CHECK_NOTHROW(plan.validate());
}
