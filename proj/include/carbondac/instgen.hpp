#ifndef CARBONDAC_INSTGEN_HPP_
#define CARBONDAC_INSTGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "carbondac/instance.hpp"
#include "json.hpp"

namespace carbondac {

enum class DatasetRole { kKnown, kUnknown };

struct DatasetSpec {
  std::string name;
  int machines = 1;
  int horizon_days = 1;
  int instance_count = 50;
  int min_operations = 1;
  int max_operations = 1;
  DatasetRole role = DatasetRole::kUnknown;
  std::uint64_t seed = 0;

  // Job-count range implied by the operations range. Throws SpecInfeasible.
  std::pair<int, int> job_range() const;
  void validate() const;
};

// The ten dataset families (four known, six unknown).
const std::vector<DatasetSpec>& standard_dataset_specs();
const DatasetSpec& standard_dataset_spec(const std::string& name);

struct GeneratorParams {
  double slot_hours = 0.25;
  int max_proc_slots = 8;
  double power_min_kw = 5.0;
  double power_max_kw = 50.0;
  double renewable_peak_fraction = 0.6;  // of the expected mean demand
  double daylight_start_hour = 6.0;
  double daylight_end_hour = 18.0;
  double intensity_min = 80.0;   // gCO2/kWh
  double intensity_max = 400.0;
  double intensity_min_hour = 13.0;
  double slack_factor = 1.5;
  int makespan_samples = 50;
  int rejections_per_cap = 20;  // failed draws before the processing-time cap shrinks
};

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const GeneratorParams& params);
GeneratorParams generator_params_from_json(const nlohmann::json& doc);

// Instance `index` of a dataset; depends only on (spec.seed, index).
Instance generate_instance(const DatasetSpec& spec, const GeneratorParams& params, int index);

std::vector<Instance> generate_dataset(const DatasetSpec& spec, const GeneratorParams& params, int threads = 1);

struct Dataset {
  DatasetSpec spec;
  std::vector<Instance> instances;
};

struct TrainingSelection {
  std::vector<std::string> training_ids;
  std::vector<std::string> test_ids;
};

// Picks `per_dataset` training instances from each known dataset, outside
// its first `eval_count` instances (the evaluation set). Throws
// InsufficientInstances.
TrainingSelection select_training_set(const std::vector<Dataset>& known_datasets, int per_dataset, std::uint64_t seed,
                                      int eval_count = 50);

// <root>/<name>/instance_<k>.json plus <root>/<name>/manifest.json.
void write_dataset(const std::filesystem::path& root, const Dataset& dataset, const GeneratorParams& params,
                   int eval_count);
Dataset read_dataset(const std::filesystem::path& dataset_dir);
// Ids listed as the evaluation split in a dataset manifest.
std::vector<std::string> read_test_ids(const std::filesystem::path& dataset_dir);

void write_training_manifest(const std::filesystem::path& path, const TrainingSelection& selection,
                             std::uint64_t seed, int per_dataset);
TrainingSelection read_training_manifest(const std::filesystem::path& path);

}  // namespace carbondac

#endif  // CARBONDAC_INSTGEN_HPP_
