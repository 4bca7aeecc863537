#include "carbondac/config.hpp"

#include "carbondac/errors.hpp"
#include "carbondac/io.hpp"

namespace carbondac {

using nlohmann::json;

json params_to_json(const DynamicParams& params) {
  json doc = json::object();
  const auto v = params.to_array();
  for (std::size_t i = 0; i < v.size(); ++i) doc[DynamicParams::names()[i]] = v[i];
  return doc;
}

DynamicParams params_from_json(const json& doc) {
  const json& obj = doc.contains("params") ? doc.at("params") : doc;
  std::array<double, DynamicParams::kSize> v{};
  try {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = obj.at(DynamicParams::names()[i]).get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("parameter set: ") + e.what());
  }
  DynamicParams p = DynamicParams::from_array(v);
  p.validate();
  return p;
}

void save_params(const DynamicParams& params, const std::filesystem::path& path) {
  json doc;
  doc["schema_version"] = 1;
  doc["params"] = params_to_json(params);
  write_file_atomic(path, doc.dump(1) + "\n");
}

DynamicParams load_params(const std::filesystem::path& path) {
  try {
    return params_from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

namespace {

const char* unit_name(BudgetUnit u) {
  switch (u) {
    case BudgetUnit::kTrials: return "trials";
    case BudgetUnit::kGenerations: return "generations";
    case BudgetUnit::kEvaluations: return "evaluations";
  }
  return "trials";
}

BudgetUnit unit_from_name(const std::string& s) {
  if (s == "trials") return BudgetUnit::kTrials;
  if (s == "generations") return BudgetUnit::kGenerations;
  if (s == "evaluations") return BudgetUnit::kEvaluations;
  throw ParseError("unknown budget cap_unit '" + s + "'");
}

}  // namespace

json to_json(const AppConfig& c) {
  json doc;
  doc["ea"] = {{"population_size", c.ea.population_size},
               {"max_generations", c.ea.max_generations},
               {"evaluation_threads", c.ea.evaluation_threads}};
  doc["generator"] = to_json(c.generator);
  doc["datasets"] = c.datasets;
  doc["instances_per_dataset"] = c.instances_per_dataset;
  doc["training_per_dataset"] = c.training_per_dataset;
  doc["ppo"] = to_json(c.ppo);
  doc["train_total_steps"] = c.train_total_steps;
  doc["tpe"] = {{"startup_trials", c.tpe.startup_trials},
                {"good_fraction", c.tpe.good_fraction},
                {"candidates", c.tpe.candidates},
                {"prior_weight", c.tpe.prior_weight},
                {"min_bandwidth_fraction", c.tpe.min_bandwidth_fraction}};
  doc["budget"] = {{"total_iterations", c.budget.total_iterations},
                   {"trials", c.budget.trials},
                   {"instances_per_trial", c.budget.instances_per_trial},
                   {"generations_per_trial", c.budget.generations_per_trial},
                   {"cap_unit", unit_name(c.budget.cap_unit)}};
  doc["repetitions"] = c.repetitions;
  doc["variants"] = c.variants;
  doc["instance_limit"] = c.instance_limit;
  doc["seed"] = c.seed;
  doc["workers"] = c.workers;
  return doc;
}

AppConfig app_config_from_json(const json& doc) {
  AppConfig c;
  try {
    if (doc.contains("ea")) {
      const json& ea = doc.at("ea");
      c.ea.population_size = ea.value("population_size", c.ea.population_size);
      c.ea.max_generations = ea.value("max_generations", c.ea.max_generations);
      c.ea.evaluation_threads = ea.value("evaluation_threads", c.ea.evaluation_threads);
    }
    if (doc.contains("generator")) c.generator = generator_params_from_json(doc.at("generator"));
    if (doc.contains("datasets")) c.datasets = doc.at("datasets").get<std::vector<std::string>>();
    c.instances_per_dataset = doc.value("instances_per_dataset", c.instances_per_dataset);
    c.training_per_dataset = doc.value("training_per_dataset", c.training_per_dataset);
    if (doc.contains("ppo")) c.ppo = ppo_hyperparams_from_json(doc.at("ppo"));
    c.train_total_steps = doc.value("train_total_steps", c.train_total_steps);
    if (doc.contains("tpe")) {
      const json& t = doc.at("tpe");
      c.tpe.startup_trials = t.value("startup_trials", c.tpe.startup_trials);
      c.tpe.good_fraction = t.value("good_fraction", c.tpe.good_fraction);
      c.tpe.candidates = t.value("candidates", c.tpe.candidates);
      c.tpe.prior_weight = t.value("prior_weight", c.tpe.prior_weight);
      c.tpe.min_bandwidth_fraction = t.value("min_bandwidth_fraction", c.tpe.min_bandwidth_fraction);
    }
    if (doc.contains("budget")) {
      const json& b = doc.at("budget");
      c.budget.total_iterations = b.value("total_iterations", c.budget.total_iterations);
      c.budget.trials = b.value("trials", c.budget.trials);
      c.budget.instances_per_trial = b.value("instances_per_trial", c.budget.instances_per_trial);
      c.budget.generations_per_trial = b.value("generations_per_trial", c.budget.generations_per_trial);
      c.budget.cap_unit = unit_from_name(b.value("cap_unit", std::string("trials")));
    }
    c.repetitions = doc.value("repetitions", c.repetitions);
    if (doc.contains("variants")) c.variants = doc.at("variants").get<std::vector<std::string>>();
    c.instance_limit = doc.value("instance_limit", c.instance_limit);
    c.seed = doc.value("seed", c.seed);
    c.workers = doc.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

AppConfig load_app_config(const std::filesystem::path& path) {
  try {
    return app_config_from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace carbondac
