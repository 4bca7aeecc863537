#include "carbondac/instgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "carbondac/errors.hpp"
#include "carbondac/io.hpp"
#include "carbondac/parallel.hpp"
#include "carbondac/rng.hpp"

namespace carbondac {

using nlohmann::json;

namespace {

DatasetSpec make_spec(const char* name, int machines, int days, int lo, int hi, DatasetRole role) {
  DatasetSpec s;
  s.name = name;
  s.machines = machines;
  s.horizon_days = days;
  s.instance_count = 50;
  s.min_operations = lo;
  s.max_operations = hi;
  s.role = role;
  s.seed = hash_string(name);
  return s;
}

bool is_known_name(const std::string& name) {
  return name == "M1T1" || name == "M1T3" || name == "M3T1" || name == "M3T3";
}

}  // namespace

std::pair<int, int> DatasetSpec::job_range() const {
  if (machines < 1 || min_operations < 1 || max_operations < min_operations) {
    throw SpecInfeasible(name + ": invalid machines/operations range");
  }
  const int lo = (min_operations + machines - 1) / machines;
  const int hi = max_operations / machines;
  if (lo > hi) {
    throw SpecInfeasible(name + ": no job count J gives J*" + std::to_string(machines) + " in [" +
                         std::to_string(min_operations) + ", " + std::to_string(max_operations) + "]");
  }
  return {lo, hi};
}

void DatasetSpec::validate() const {
  if (horizon_days < 1) throw SpecInfeasible(name + ": horizon_days must be >= 1");
  if (instance_count < 0) throw SpecInfeasible(name + ": instance_count must be >= 0");
  if ((role == DatasetRole::kKnown) != is_known_name(name)) {
    throw SpecInfeasible(name + ": only M1T1, M1T3, M3T1 and M3T3 are known dataset types");
  }
  job_range();
}

const std::vector<DatasetSpec>& standard_dataset_specs() {
  static const std::vector<DatasetSpec> kSpecs = {
      make_spec("M1T1", 1, 1, 6, 15, DatasetRole::kKnown),
      make_spec("M1T3", 1, 3, 25, 40, DatasetRole::kKnown),
      make_spec("M3T1", 3, 1, 24, 54, DatasetRole::kKnown),
      make_spec("M3T3", 3, 3, 102, 183, DatasetRole::kKnown),
      make_spec("M5T1", 5, 1, 25, 65, DatasetRole::kUnknown),
      make_spec("M5T3", 5, 3, 145, 255, DatasetRole::kUnknown),
      make_spec("M10T1", 10, 1, 130, 200, DatasetRole::kUnknown),
      make_spec("M10T3", 10, 3, 650, 830, DatasetRole::kUnknown),
      make_spec("M15T1", 15, 1, 345, 465, DatasetRole::kUnknown),
      make_spec("M15T3", 15, 3, 1590, 2085, DatasetRole::kUnknown),
  };
  return kSpecs;
}

const DatasetSpec& standard_dataset_spec(const std::string& name) {
  for (const auto& s : standard_dataset_specs()) {
    if (s.name == name) return s;
  }
  throw SpecInfeasible("unknown dataset name '" + name + "'");
}

json to_json(const DatasetSpec& s) {
  return {{"name", s.name},
          {"machines", s.machines},
          {"horizon_days", s.horizon_days},
          {"instance_count", s.instance_count},
          {"operations_range", {s.min_operations, s.max_operations}},
          {"role", s.role == DatasetRole::kKnown ? "known" : "unknown"},
          {"seed", s.seed}};
}

DatasetSpec dataset_spec_from_json(const json& doc) {
  try {
    DatasetSpec s;
    s.name = doc.at("name").get<std::string>();
    s.machines = doc.at("machines").get<int>();
    s.horizon_days = doc.at("horizon_days").get<int>();
    s.instance_count = doc.at("instance_count").get<int>();
    s.min_operations = doc.at("operations_range").at(0).get<int>();
    s.max_operations = doc.at("operations_range").at(1).get<int>();
    s.role = doc.at("role").get<std::string>() == "known" ? DatasetRole::kKnown : DatasetRole::kUnknown;
    s.seed = doc.at("seed").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset spec: ") + e.what());
  }
}

json to_json(const GeneratorParams& p) {
  return {{"slot_hours", p.slot_hours},
          {"max_proc_slots", p.max_proc_slots},
          {"power_min_kw", p.power_min_kw},
          {"power_max_kw", p.power_max_kw},
          {"renewable_peak_fraction", p.renewable_peak_fraction},
          {"daylight_start_hour", p.daylight_start_hour},
          {"daylight_end_hour", p.daylight_end_hour},
          {"intensity_min", p.intensity_min},
          {"intensity_max", p.intensity_max},
          {"intensity_min_hour", p.intensity_min_hour},
          {"slack_factor", p.slack_factor},
          {"makespan_samples", p.makespan_samples},
          {"rejections_per_cap", p.rejections_per_cap}};
}

GeneratorParams generator_params_from_json(const json& doc) {
  GeneratorParams p;
  p.slot_hours = doc.value("slot_hours", p.slot_hours);
  p.max_proc_slots = doc.value("max_proc_slots", p.max_proc_slots);
  p.power_min_kw = doc.value("power_min_kw", p.power_min_kw);
  p.power_max_kw = doc.value("power_max_kw", p.power_max_kw);
  p.renewable_peak_fraction = doc.value("renewable_peak_fraction", p.renewable_peak_fraction);
  p.daylight_start_hour = doc.value("daylight_start_hour", p.daylight_start_hour);
  p.daylight_end_hour = doc.value("daylight_end_hour", p.daylight_end_hour);
  p.intensity_min = doc.value("intensity_min", p.intensity_min);
  p.intensity_max = doc.value("intensity_max", p.intensity_max);
  p.intensity_min_hour = doc.value("intensity_min_hour", p.intensity_min_hour);
  p.slack_factor = doc.value("slack_factor", p.slack_factor);
  p.makespan_samples = doc.value("makespan_samples", p.makespan_samples);
  p.rejections_per_cap = doc.value("rejections_per_cap", p.rejections_per_cap);
  return p;
}

Instance generate_instance(const DatasetSpec& spec, const GeneratorParams& params, int index) {
  const auto [j_lo, j_hi] = spec.job_range();
  if (!(params.slot_hours > 0.0) || params.max_proc_slots < 1 || params.slack_factor < 1.0) {
    throw SpecInfeasible("generator parameters out of range");
  }
  Rng rng = Rng(spec.seed).split(static_cast<std::uint64_t>(index));
  Instance inst;
  inst.id = spec.name + "_" + std::to_string(index);
  inst.machines = spec.machines;
  inst.horizon_days = spec.horizon_days;
  inst.slot_hours = params.slot_hours;
  inst.horizon_slots = static_cast<int>(std::lround(spec.horizon_days * 24.0 / params.slot_hours));
  inst.jobs = static_cast<int>(rng.uniform_int(j_lo, j_hi));
  const int jobs = inst.jobs;
  const int machines = inst.machines;
  const int chain = jobs + machines - 1;  // operations on any critical path
  if (params.slack_factor * chain > inst.horizon_slots) {
    throw SpecInfeasible(inst.id + ": even unit processing times exceed the horizon with the required slack");
  }

  // Start from a cap whose expected makespan roughly fits, then shrink it
  // after repeated rejections.
  const int fit_cap =
      static_cast<int>(std::floor(2.0 * inst.horizon_slots / (params.slack_factor * chain))) - 1;
  int cap = std::clamp(fit_cap, 1, params.max_proc_slots);
  std::vector<int> sequence(static_cast<std::size_t>(jobs));
  for (int attempt = 0;; ++attempt) {
    if (attempt > 0 && attempt % params.rejections_per_cap == 0 && cap > 1) --cap;
    inst.proc.resize(static_cast<std::size_t>(jobs) * machines);
    for (auto& p : inst.proc) p = static_cast<int>(rng.uniform_int(1, cap));
    int worst = 0;
    for (int s = 0; s < params.makespan_samples; ++s) {
      std::iota(sequence.begin(), sequence.end(), 0);
      for (std::size_t i = sequence.size(); i > 1; --i) std::swap(sequence[i - 1], sequence[rng.below(i)]);
      worst = std::max(worst, zero_idle_makespan(inst, sequence));
    }
    if (params.slack_factor * worst <= inst.horizon_slots) break;
    if (cap == 1 && attempt > params.rejections_per_cap * (params.max_proc_slots + 1)) {
      throw SpecInfeasible(inst.id + ": could not satisfy the horizon slack requirement");
    }
  }

  inst.power.resize(inst.proc.size());
  for (auto& w : inst.power) w = rng.uniform(params.power_min_kw, params.power_max_kw);

  double energy_slots = 0.0;  // kW * slots
  for (std::size_t op = 0; op < inst.proc.size(); ++op) energy_slots += inst.power[op] * inst.proc[op];
  const double mean_demand = energy_slots / inst.horizon_slots;
  const double peak = params.renewable_peak_fraction * mean_demand;
  const double daylight = params.daylight_end_hour - params.daylight_start_hour;
  const double mid = 0.5 * (params.intensity_min + params.intensity_max);
  const double amp = 0.5 * (params.intensity_max - params.intensity_min);
  inst.renewable.resize(static_cast<std::size_t>(inst.horizon_slots));
  inst.grid_intensity.resize(static_cast<std::size_t>(inst.horizon_slots));
  for (int t = 0; t < inst.horizon_slots; ++t) {
    const double hour = std::fmod((t + 0.5) * params.slot_hours, 24.0);
    const double phase = (hour - params.daylight_start_hour) / daylight;
    inst.renewable[t] = phase > 0.0 && phase < 1.0 ? peak * std::sin(std::numbers::pi * phase) : 0.0;
    inst.grid_intensity[t] = mid - amp * std::cos(2.0 * std::numbers::pi * (hour - params.intensity_min_hour) / 24.0);
  }
  validate_instance(inst);
  return inst;
}

std::vector<Instance> generate_dataset(const DatasetSpec& spec, const GeneratorParams& params, int threads) {
  spec.validate();
  std::vector<Instance> out(static_cast<std::size_t>(spec.instance_count));
  parallel_for(out.size(), threads, [&](std::size_t k) { out[k] = generate_instance(spec, params, static_cast<int>(k)); });
  return out;
}

TrainingSelection select_training_set(const std::vector<Dataset>& known, int per_dataset, std::uint64_t seed,
                                      int eval_count) {
  TrainingSelection sel;
  if (per_dataset < 0) throw ParameterOutOfRange("per_dataset must be >= 0");
  const Rng base(seed);
  for (std::size_t d = 0; d < known.size(); ++d) {
    const Dataset& ds = known[d];
    if (ds.spec.role != DatasetRole::kKnown) {
      throw ParameterOutOfRange("dataset " + ds.spec.name + " is not a known dataset type");
    }
    const int n = static_cast<int>(ds.instances.size());
    if (n < per_dataset + eval_count) {
      throw InsufficientInstances(ds.spec.name + " has " + std::to_string(n) + " instances, needs " +
                                  std::to_string(per_dataset + eval_count));
    }
    for (int k = 0; k < eval_count; ++k) sel.test_ids.push_back(ds.instances[k].id);
    std::vector<int> pool(static_cast<std::size_t>(n - eval_count));
    std::iota(pool.begin(), pool.end(), eval_count);
    Rng rng = base.split(hash_string(ds.spec.name));
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
    pool.resize(static_cast<std::size_t>(per_dataset));
    std::sort(pool.begin(), pool.end());
    for (int k : pool) sel.training_ids.push_back(ds.instances[k].id);
  }
  return sel;
}

void write_dataset(const std::filesystem::path& root, const Dataset& ds, const GeneratorParams& params, int eval_count) {
  const auto dir = root / ds.spec.name;
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["schema_version"] = 1;
  manifest["spec"] = to_json(ds.spec);
  manifest["generator"] = to_json(params);
  json files = json::array();
  json ids = json::array();
  json test = json::array();
  for (std::size_t k = 0; k < ds.instances.size(); ++k) {
    const std::string file = "instance_" + std::to_string(k) + ".json";
    save_instance(ds.instances[k], dir / file);
    files.push_back(file);
    ids.push_back(ds.instances[k].id);
    if (static_cast<int>(k) < eval_count) test.push_back(ds.instances[k].id);
  }
  manifest["instances"] = files;
  manifest["instance_ids"] = ids;
  manifest["instance_seeds"] = {{"base", ds.spec.seed}, {"stream", "index"}};
  manifest["test_ids"] = test;
  write_file_atomic(dir / "manifest.json", manifest.dump(1) + "\n");
}

namespace {

json read_manifest(const std::filesystem::path& dir) {
  try {
    return json::parse(read_text_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& dir) {
  const json manifest = read_manifest(dir);
  Dataset ds;
  ds.spec = dataset_spec_from_json(manifest.at("spec"));
  for (const auto& file : manifest.at("instances")) ds.instances.push_back(load_instance(dir / file.get<std::string>()));
  return ds;
}

std::vector<std::string> read_test_ids(const std::filesystem::path& dir) {
  return read_manifest(dir).at("test_ids").get<std::vector<std::string>>();
}

void write_training_manifest(const std::filesystem::path& path, const TrainingSelection& sel, std::uint64_t seed,
                             int per_dataset) {
  std::set<std::string> test(sel.test_ids.begin(), sel.test_ids.end());
  std::vector<std::string> overlap;
  for (const auto& id : sel.training_ids) {
    if (test.count(id)) overlap.push_back(id);
  }
  json doc;
  doc["schema_version"] = 1;
  doc["seed"] = seed;
  doc["per_dataset"] = per_dataset;
  doc["training_ids"] = sel.training_ids;
  doc["test_ids"] = sel.test_ids;
  doc["train_test_overlap"] = overlap;
  write_file_atomic(path, doc.dump(1) + "\n");
}

TrainingSelection read_training_manifest(const std::filesystem::path& path) {
  try {
    const json doc = json::parse(read_text_file(path));
    TrainingSelection sel;
    sel.training_ids = doc.at("training_ids").get<std::vector<std::string>>();
    sel.test_ids = doc.at("test_ids").get<std::vector<std::string>>();
    return sel;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace carbondac
