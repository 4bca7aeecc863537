#ifndef CARBONDAC_CONFIG_HPP_
#define CARBONDAC_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "carbondac/evolve.hpp"
#include "carbondac/instgen.hpp"
#include "carbondac/ppo.hpp"
#include "carbondac/tuner.hpp"
#include "json.hpp"

namespace carbondac {

nlohmann::json params_to_json(const DynamicParams& params);
// Accepts either {"params": {...}} or the bare parameter object.
DynamicParams params_from_json(const nlohmann::json& doc);
void save_params(const DynamicParams& params, const std::filesystem::path& path);
DynamicParams load_params(const std::filesystem::path& path);

// Every tunable constant of the pipeline, loadable from one JSON file.
// Missing keys keep their defaults.
struct AppConfig {
  EAConfig ea;
  GeneratorParams generator;
  std::vector<std::string> datasets;  // names of the dataset families to generate
  int instances_per_dataset = 50;     // evaluation instances per dataset
  int training_per_dataset = 3;
  PpoHyperparams ppo;
  long train_total_steps = 4'000'000;
  TpeOptions tpe;
  TuningBudget budget;
  int repetitions = 10;
  std::vector<std::string> variants = {"default", "tuned", "drl"};
  int instance_limit = 0;  // 0 = every evaluation instance
  std::uint64_t seed = 0;
  int workers = 1;
};

nlohmann::json to_json(const AppConfig& config);
AppConfig app_config_from_json(const nlohmann::json& doc);
AppConfig load_app_config(const std::filesystem::path& path);

}  // namespace carbondac

#endif  // CARBONDAC_CONFIG_HPP_
