#include "carbondac/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "carbondac/config.hpp"
#include "carbondac/dac_env.hpp"
#include "carbondac/errors.hpp"
#include "carbondac/instgen.hpp"
#include "carbondac/io.hpp"
#include "carbondac/parallel.hpp"
#include "carbondac/ppo.hpp"
#include "carbondac/stats.hpp"
#include "json.hpp"

namespace carbondac {

using nlohmann::json;
namespace fs = std::filesystem;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kDefault: return "default";
    case Variant::kTuned: return "tuned";
    case Variant::kDrl: return "drl";
  }
  return "default";
}

Variant variant_from_name(const std::string& name) {
  if (name == "default") return Variant::kDefault;
  if (name == "tuned") return Variant::kTuned;
  if (name == "drl") return Variant::kDrl;
  throw ParameterOutOfRange("unknown variant '" + name + "' (expected default, tuned or drl)");
}

void ExperimentPlan::validate() const {
  if (repetitions < 1) throw ParameterOutOfRange("repetitions must be >= 1");
  if (variants.empty()) throw ParameterOutOfRange("plan has no variants");
  config.validate();
  for (const auto& dir : dataset_dirs) {
    if (!fs::exists(dir / "manifest.json")) throw MissingArtifact("dataset manifest not found in " + dir.string());
  }
  for (Variant v : variants) {
    if (v == Variant::kTuned && !fs::exists(tuned_params_path)) {
      throw MissingArtifact("tuned params file '" + tuned_params_path.string() + "' not found");
    }
    if (v == Variant::kDrl && !fs::exists(policy_path)) {
      throw MissingArtifact("policy file '" + policy_path.string() + "' not found");
    }
  }
}

std::uint64_t run_seed(std::uint64_t base, const std::string& dataset, const std::string& instance, Variant variant,
                       int repetition) {
  std::uint64_t h = hash_combine(base, hash_string(dataset));
  h = hash_combine(h, hash_string(instance));
  h = hash_combine(h, static_cast<std::uint64_t>(variant));
  return hash_combine(h, static_cast<std::uint64_t>(repetition));
}

namespace {

fs::path marker_path(const fs::path& out_dir, const RunResult& r) {
  return out_dir / "runs" / r.dataset /
         (r.instance_id + "__" + variant_name(r.variant) + "__" + std::to_string(r.repetition) + ".json");
}

json result_to_json(const RunResult& r) {
  return {{"dataset", r.dataset},       {"instance", r.instance_id},     {"variant", variant_name(r.variant)},
          {"repetition", r.repetition}, {"seed", r.seed},                {"best_fitness", r.best_fitness},
          {"best_trace", r.best_trace}};
}

RunResult result_from_json(const json& doc) {
  RunResult r;
  r.dataset = doc.at("dataset").get<std::string>();
  r.instance_id = doc.at("instance").get<std::string>();
  r.variant = variant_from_name(doc.at("variant").get<std::string>());
  r.repetition = doc.at("repetition").get<int>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.best_fitness = doc.at("best_fitness").get<double>();
  r.best_trace = doc.at("best_trace").get<std::vector<double>>();
  r.ok = true;
  return r;
}

std::optional<RunResult> read_marker(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return result_from_json(json::parse(read_text_file(path)));
  } catch (const std::exception&) {
    return std::nullopt;  // damaged marker: recompute
  }
}

struct Job {
  const Instance* instance;
  RunResult result;
};

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  std::optional<DynamicParams> tuned;
  std::optional<TrainedPolicy> policy;
  for (Variant v : plan.variants) {
    if (v == Variant::kTuned && !tuned) tuned = load_params(plan.tuned_params_path);
    if (v == Variant::kDrl && !policy) policy = TrainedPolicy::load(plan.policy_path);
  }

  std::vector<std::vector<Instance>> instances;
  std::vector<Job> jobs;
  for (const auto& dir : plan.dataset_dirs) {
    const Dataset ds = read_dataset(dir);
    std::vector<std::string> ids = read_test_ids(dir);
    if (plan.instance_limit > 0 && static_cast<int>(ids.size()) > plan.instance_limit) ids.resize(plan.instance_limit);
    std::vector<Instance> selected;
    for (const auto& id : ids) {
      auto it = std::find_if(ds.instances.begin(), ds.instances.end(), [&](const Instance& x) { return x.id == id; });
      if (it == ds.instances.end()) throw MissingArtifact("instance '" + id + "' listed in " + dir.string() + " is missing");
      selected.push_back(*it);
    }
    instances.push_back(std::move(selected));
  }
  for (std::size_t d = 0; d < instances.size(); ++d) {
    const std::string dataset = read_dataset(plan.dataset_dirs[d]).spec.name;
    for (const auto& inst : instances[d]) {
      for (Variant v : plan.variants) {
        for (int rep = 0; rep < plan.repetitions; ++rep) {
          Job job{&inst, {}};
          job.result.dataset = dataset;
          job.result.instance_id = inst.id;
          job.result.variant = v;
          job.result.repetition = rep;
          job.result.seed = run_seed(plan.base_seed, dataset, inst.id, v, rep);
          jobs.push_back(std::move(job));
        }
      }
    }
  }

  parallel_for(jobs.size(), plan.workers, [&](std::size_t k) {
    RunResult& r = jobs[k].result;
    const fs::path marker = marker_path(plan.out_dir, r);
    if (auto done = read_marker(marker); done && done->seed == r.seed) {
      r = *done;
      return;
    }
    try {
      EAConfig cfg = plan.config;
      cfg.rng_seed = r.seed;
      StaticRunResult run;
      switch (r.variant) {
        case Variant::kDefault: run = run_static(*jobs[k].instance, cfg, default_params()); break;
        case Variant::kTuned: run = run_static(*jobs[k].instance, cfg, *tuned); break;
        case Variant::kDrl: {
          Rng unused(0);
          const PolicyNetwork& net = policy->network;
          run = run_controlled(*jobs[k].instance, cfg,
                               [&](const Observation& obs) { return act(net, obs, true, unused); });
          break;
        }
      }
      r.best_fitness = run.best_fitness;
      r.best_trace = run.per_generation_best();
      r.ok = true;
      write_file_atomic(marker, result_to_json(r).dump() + "\n");
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
  });

  std::vector<RunResult> out;
  out.reserve(jobs.size());
  for (auto& job : jobs) out.push_back(std::move(job.result));
  return out;
}

std::vector<RunResult> load_results(const fs::path& out_dir) {
  std::vector<RunResult> out;
  const fs::path runs = out_dir / "runs";
  if (!fs::exists(runs)) throw MissingArtifact("no runs directory under " + out_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(runs)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    if (auto r = read_marker(f)) out.push_back(*r);
  }
  // Canonical order: dataset, instance index, variant, repetition.
  auto instance_key = [](const std::string& id) {
    const auto pos = id.rfind('_');
    try {
      return std::stol(id.substr(pos + 1));
    } catch (...) {
      return 0L;
    }
  };
  std::stable_sort(out.begin(), out.end(), [&](const RunResult& a, const RunResult& b) {
    if (a.dataset != b.dataset) return a.dataset < b.dataset;
    if (a.instance_id != b.instance_id) {
      const long ka = instance_key(a.instance_id);
      const long kb = instance_key(b.instance_id);
      return ka != kb ? ka < kb : a.instance_id < b.instance_id;
    }
    if (a.variant != b.variant) return a.variant < b.variant;
    return a.repetition < b.repetition;
  });
  return out;
}

void write_raw_results_csv(const std::vector<RunResult>& results, std::ostream& out) {
  out << "dataset,instance,variant,repetition,seed,status,best_fitness\n";
  for (const auto& r : results) {
    out << r.dataset << ',' << r.instance_id << ',' << variant_name(r.variant) << ',' << r.repetition << ','
        << r.seed << ',' << (r.ok ? "ok" : "failed") << ',' << (r.ok ? format_double(r.best_fitness) : "") << '\n';
  }
}

double percent_delta(double objective, double drl_objective) { return (objective - drl_objective) / objective * 100.0; }

Aggregate aggregate(const std::vector<RunResult>& results) {
  // Ordered by first appearance.
  std::vector<std::string> datasets;
  std::map<std::string, std::vector<std::string>> instances_of;
  std::map<std::string, std::vector<Variant>> variants_of;
  std::map<std::tuple<std::string, std::string, int>, std::vector<const RunResult*>> cell;
  std::vector<std::string> problems;
  for (const auto& r : results) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
    auto& ids = instances_of[r.dataset];
    if (std::find(ids.begin(), ids.end(), r.instance_id) == ids.end()) ids.push_back(r.instance_id);
    auto& vs = variants_of[r.dataset];
    if (std::find(vs.begin(), vs.end(), r.variant) == vs.end()) vs.push_back(r.variant);
    if (!r.ok) {
      problems.push_back(r.dataset + "/" + r.instance_id + "/" + variant_name(r.variant) + "/rep" +
                         std::to_string(r.repetition) + " failed: " + r.error);
      continue;
    }
    cell[{r.dataset, r.instance_id, static_cast<int>(r.variant)}].push_back(&r);
  }
  for (const auto& ds : datasets) {
    std::size_t expected = 0;
    for (const auto& id : instances_of[ds]) {
      for (Variant v : variants_of[ds]) expected = std::max(expected, cell[{ds, id, static_cast<int>(v)}].size());
    }
    for (const auto& id : instances_of[ds]) {
      for (Variant v : variants_of[ds]) {
        const auto have = cell[{ds, id, static_cast<int>(v)}].size();
        if (have < expected) {
          problems.push_back(ds + "/" + id + "/" + variant_name(v) + ": " + std::to_string(expected - have) +
                             " of " + std::to_string(expected) + " repetitions missing");
        }
      }
    }
  }
  if (results.empty()) problems.push_back("no results");
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " problem(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw IncompleteResults(msg);
  }

  Aggregate agg;
  for (const auto& ds : datasets) {
    const auto& variants = variants_of[ds];
    std::vector<ComparisonRow> rows;
    std::vector<std::vector<double>> pooled(variants.size());
    ConvergenceSeries conv;
    conv.dataset = ds;
    conv.variants = variants;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      ComparisonRow row;
      row.dataset = ds;
      row.variant = variants[vi];
      std::vector<double> means;
      std::vector<double> bests;
      std::vector<double> stds;
      std::vector<double> curve;
      std::size_t curve_count = 0;
      for (const auto& id : instances_of[ds]) {
        std::vector<double> finals;
        for (const RunResult* r : cell[{ds, id, static_cast<int>(variants[vi])}]) {
          finals.push_back(r->best_fitness);
          pooled[vi].push_back(r->best_fitness);
          if (curve.empty()) curve.assign(r->best_trace.size(), 0.0);
          if (r->best_trace.size() != curve.size()) {
            throw IncompleteResults(ds + "/" + id + ": convergence traces differ in length");
          }
          for (std::size_t g = 0; g < curve.size(); ++g) curve[g] += r->best_trace[g];
          ++curve_count;
        }
        means.push_back(mean(finals));
        bests.push_back(*std::min_element(finals.begin(), finals.end()));
        stds.push_back(pstdev(finals));
      }
      for (auto& c : curve) c /= static_cast<double>(curve_count);
      conv.mean_best.push_back(std::move(curve));
      row.mean = mean(means);
      row.best = mean(bests);
      row.std = mean(stds);
      rows.push_back(row);
    }
    const auto drl = std::find(variants.begin(), variants.end(), Variant::kDrl);
    for (auto& row : rows) {
      row.pct_delta = drl == variants.end() ? std::nan("") : percent_delta(row.mean, rows[drl - variants.begin()].mean);
    }
    std::size_t best_mean = 0;
    std::size_t best_best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].mean < rows[best_mean].mean) best_mean = i;
      if (rows[i].best < rows[best_best].best) best_best = i;
    }
    rows[best_mean].best_mean = true;
    rows[best_best].best_best = true;
    bool beats_all = rows.size() > 1;
    for (std::size_t i = 0; i < variants.size(); ++i) {
      for (std::size_t j = i + 1; j < variants.size(); ++j) {
        const RankSumResult t = wilcoxon_rank_sum(pooled[i], pooled[j]);
        agg.tests.push_back(PairwiseTest{ds, variants[i], variants[j], t.u, t.p});
        if ((i == best_mean || j == best_mean) && !(t.p < 0.05)) beats_all = false;
      }
    }
    rows[best_mean].significant = beats_all;
    for (auto& row : rows) agg.rows.push_back(row);
    agg.convergence.push_back(std::move(conv));
  }
  return agg;
}

namespace {

std::string sci(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string fixed2(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::vector<fs::path> emit_reports(const Aggregate& agg, const fs::path& report_dir) {
  std::vector<fs::path> written;
  std::vector<std::string> datasets;
  for (const auto& row : agg.rows) {
    if (std::find(datasets.begin(), datasets.end(), row.dataset) == datasets.end()) datasets.push_back(row.dataset);
  }
  for (const auto& ds : datasets) {
    std::ostringstream csv;
    std::ostringstream txt;
    csv << "dataset,variant,mean,best,std,pct_delta,bold_mean,bold_best,underline\n";
    txt << "Dataset " << ds << "   (*x* = best in column, _x_ = significant at p < 0.05)\n";
    const std::size_t w = 18;
    txt << pad("Method", 12) << pad("mean", w) << pad("best", w) << pad("std", w) << "%Delta\n";
    for (const auto& row : agg.rows) {
      if (row.dataset != ds) continue;
      csv << ds << ',' << variant_name(row.variant) << ',' << format_double(row.mean) << ','
          << format_double(row.best) << ',' << format_double(row.std) << ',' << format_double(row.pct_delta) << ','
          << row.best_mean << ',' << row.best_best << ',' << row.significant << '\n';
      std::string mean_cell = sci(row.mean);
      if (row.best_mean) mean_cell = "*" + mean_cell + "*";
      if (row.significant) mean_cell = "_" + mean_cell + "_";
      std::string best_cell = sci(row.best);
      if (row.best_best) best_cell = "*" + best_cell + "*";
      const std::string method = row.variant == Variant::kDrl ? "MA-DRL" : std::string("MA ") + variant_name(row.variant);
      txt << pad(method, 12) << pad(mean_cell, w) << pad(best_cell, w) << pad(sci(row.std), w)
          << fixed2(row.pct_delta) << '\n';
    }
    std::ostringstream pv;
    pv << "dataset,variant_a,variant_b,u,p\n";
    for (const auto& t : agg.tests) {
      if (t.dataset != ds) continue;
      pv << ds << ',' << variant_name(t.a) << ',' << variant_name(t.b) << ',' << format_double(t.u) << ','
         << format_double(t.p) << '\n';
    }
    std::ostringstream conv;
    for (const auto& c : agg.convergence) {
      if (c.dataset != ds) continue;
      conv << "generation";
      for (Variant v : c.variants) conv << ',' << variant_name(v);
      conv << '\n';
      const std::size_t gens = c.mean_best.empty() ? 0 : c.mean_best.front().size();
      for (std::size_t g = 0; g < gens; ++g) {
        conv << g;
        for (const auto& series : c.mean_best) conv << ',' << format_double(series[g]);
        conv << '\n';
      }
    }
    const std::pair<std::string, std::string> files[] = {
        {ds + "_results.csv", csv.str()},
        {ds + "_results.txt", txt.str()},
        {ds + "_pvalues.csv", pv.str()},
        {ds + "_convergence.csv", conv.str()},
    };
    for (const auto& [name, body] : files) {
      write_file_atomic(report_dir / name, body);
      written.push_back(report_dir / name);
    }
  }
  return written;
}

}  // namespace carbondac
