#include "carbondac/dac_env.hpp"

#include <algorithm>
#include <cmath>

#include "carbondac/errors.hpp"
#include "carbondac/io.hpp"
#include "json.hpp"

namespace carbondac {

const ActionBounds& action_bounds() {
  static const ActionBounds kBounds{};
  return kBounds;
}

DynamicParams rescale_action(const ActionVector& action) {
  const auto lo = action_bounds().min.to_array();
  const auto hi = action_bounds().max.to_array();
  std::array<double, kActionSize> out{};
  for (std::size_t i = 0; i < kActionSize; ++i) {
    const double a = action[i];
    if (!(a >= -1.0 && a <= 1.0)) {
      throw OutOfBounds("action component " + std::to_string(i) + " = " + format_double(a) + " outside [-1, 1]");
    }
    out[i] = 0.5 * ((1.0 - a) * lo[i] + (1.0 + a) * hi[i]);
  }
  return DynamicParams::from_array(out);
}

ActionVector unscale_params(const DynamicParams& params) {
  const auto lo = action_bounds().min.to_array();
  const auto hi = action_bounds().max.to_array();
  const auto p = params.to_array();
  ActionVector out{};
  for (std::size_t i = 0; i < kActionSize; ++i) {
    if (!(p[i] >= lo[i] && p[i] <= hi[i])) {
      throw OutOfBounds(std::string(DynamicParams::names()[i]) + " = " + format_double(p[i]) +
                        " outside the action range");
    }
    out[i] = (2.0 * p[i] - lo[i] - hi[i]) / (hi[i] - lo[i]);
  }
  return out;
}

ActionVector clip_action(const ActionVector& raw) {
  ActionVector out{};
  for (std::size_t i = 0; i < kActionSize; ++i) {
    out[i] = std::isnan(raw[i]) ? 0.0 : std::clamp(raw[i], -1.0, 1.0);
  }
  return out;
}

Observation observe(const Population& population, int generation_index, const EAConfig& config, double f_initial,
                    int stagnation_count) {
  if (population.members.empty()) throw EmptyPopulation("cannot observe an empty population");
  if (!(f_initial > 0.0)) throw ParameterOutOfRange("f_initial must be positive to normalize observations");
  if (config.max_generations < 1) throw ParameterOutOfRange("max_generations must be >= 1");
  const GenerationStats stats = population_stats(population);
  const double horizon = config.max_generations;
  Observation obs;
  obs.norm_best = std::clamp(stats.best / f_initial, 0.0, 1.0);
  obs.norm_mean = std::clamp(stats.mean / f_initial, 0.0, 1.0);
  obs.coeff_variation = stats.mean > 0.0 ? std::clamp(stats.std / stats.mean, 0.0, 1.0) : 0.0;
  obs.remaining_budget = std::clamp((horizon - generation_index) / horizon, 0.0, 1.0);
  obs.stagnation = std::clamp(stagnation_count / horizon, 0.0, 1.0);
  return obs;
}

double normalized_improvement(double f_initial, double f_ideal, double f) {
  return 100.0 * (f_initial - f) / (f_initial - f_ideal);
}

double reward(RewardTracker& t) {
  if (!(t.f_initial > t.f_ideal)) {
    throw DegenerateNormalization("f_initial = " + format_double(t.f_initial) +
                                  " does not exceed f_ideal = " + format_double(t.f_ideal));
  }
  t.delta_previous = normalized_improvement(t.f_initial, t.f_ideal, t.f_previous);
  t.delta_current = normalized_improvement(t.f_initial, t.f_ideal, t.f_current);
  t.r = t.f_current < t.f_previous ? t.delta_current * t.delta_current - t.delta_previous * t.delta_previous : 0.0;
  t.f_previous = std::min(t.f_previous, t.f_current);
  return t.r;
}

std::uint64_t ideal_seed(const Instance& instance) { return hash_combine(hash_string(instance.id), hash_string("ideal")); }

double compute_ideal(const Instance& instance, const EAConfig& config, const DynamicParams& params, std::uint64_t seed) {
  EAConfig doubled = config;
  doubled.max_generations = 2 * config.max_generations;
  doubled.rng_seed = seed;
  return run_static(instance, doubled, params).best_fitness;
}

double IdealCache::get_or_compute(const Instance& instance) {
  if (auto it = values_.find(instance.id); it != values_.end()) return it->second;
  const double value = compute_ideal(instance, config_, params_, ideal_seed(instance));
  values_[instance.id] = value;
  return value;
}

double IdealCache::at(const std::string& id) const {
  auto it = values_.find(id);
  if (it == values_.end()) throw MissingArtifact("no f_ideal cached for instance '" + id + "'");
  return it->second;
}

void IdealCache::save(const std::filesystem::path& path) const {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["population_size"] = config_.population_size;
  doc["generations"] = 2 * config_.max_generations;
  const auto p = params_.to_array();
  for (std::size_t i = 0; i < p.size(); ++i) doc["params"][DynamicParams::names()[i]] = p[i];
  doc["f_ideal"] = nlohmann::json::object();
  for (const auto& [id, value] : values_) doc["f_ideal"][id] = value;
  write_file_atomic(path, doc.dump(1) + "\n");
}

IdealCache IdealCache::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (doc.value("schema_version", 0) != 1) throw SchemaVersionError(path.string() + ": expected schema_version 1");
  IdealCache cache;
  try {
    cache.config_.population_size = doc.at("population_size").get<int>();
    cache.config_.max_generations = doc.at("generations").get<int>() / 2;
    std::array<double, DynamicParams::kSize> p{};
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = doc.at("params").at(DynamicParams::names()[i]).get<double>();
    cache.params_ = DynamicParams::from_array(p);
    for (const auto& [id, value] : doc.at("f_ideal").items()) cache.values_[id] = value.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return cache;
}

std::pair<EnvState, Observation> episode_reset(const InstancePool& pool, const EAConfig& config, Rng& rng) {
  if (pool.empty()) throw EmptyPool("episode_reset needs at least one instance");
  config.validate();
  if (config.max_generations < 1) throw ParameterOutOfRange("episodes need max_generations >= 1");
  EnvState state;
  state.instance_index = static_cast<std::size_t>(rng.below(pool.size()));
  state.entry = pool[state.instance_index];
  state.config = config;
  state.run = Rng(rng.next_u64());
  state.population = initialize_population(state.entry->instance, config.population_size, state.run.split(0));
  const double f_initial = state.population.best().fitness;
  state.tracker.f_initial = f_initial;
  state.tracker.f_ideal = state.entry->f_ideal;
  state.tracker.f_previous = f_initial;
  state.tracker.f_current = f_initial;
  state.degenerate = !(f_initial > state.entry->f_ideal);
  Observation obs;
  if (f_initial > 0.0) {
    obs = observe(state.population, 0, config, f_initial, 0);
  } else {
    // Zero-emission start: nothing left to improve.
    obs = Observation{0.0, 0.0, 0.0, 1.0, 0.0};
    state.degenerate = true;
  }
  return {std::move(state), obs};
}

StepResult episode_step(EnvState& state, const ActionVector& raw_action) {
  if (state.done) throw EpisodeFinished("episode already reached its generation budget");
  StepResult out;
  out.params = rescale_action(clip_action(raw_action));
  const Instance& inst = state.entry->instance;
  state.population = step_generation(inst, state.population, out.params,
                                     state.run.split(static_cast<std::uint64_t>(state.population.generation + 1)),
                                     state.config.evaluation_threads);
  const double best = state.population.best().fitness;
  state.stagnation = best < state.tracker.f_previous ? 0 : state.stagnation + 1;
  state.tracker.f_current = best;
  if (state.degenerate) {
    state.tracker.r = 0.0;
    state.tracker.f_previous = std::min(state.tracker.f_previous, best);
  } else {
    reward(state.tracker);
  }
  out.reward = state.tracker.r;
  state.episode_reward += out.reward;
  state.done = state.population.generation >= state.config.max_generations;
  out.done = state.done;
  const double f_initial = state.tracker.f_initial;
  out.observation = f_initial > 0.0 ? observe(state.population, state.population.generation, state.config, f_initial,
                                              state.stagnation)
                                    : Observation{0.0, 0.0, 0.0,
                                                  1.0 - static_cast<double>(state.population.generation) /
                                                            state.config.max_generations,
                                                  0.0};
  return out;
}

StaticRunResult run_controlled(const Instance& instance, const EAConfig& config, const Controller& controller) {
  config.validate();
  validate_instance(instance);
  const Rng run(config.rng_seed);
  Population pop = initialize_population(instance, config.population_size, run.split(0));
  StaticRunResult result;
  result.trace.push_back(population_stats(pop));
  const double f_initial = pop.best().fitness;
  double best_so_far = f_initial;
  int stagnation = 0;
  for (int g = 1; g <= config.max_generations; ++g) {
    const Observation obs = f_initial > 0.0 ? observe(pop, g - 1, config, f_initial, stagnation)
                                            : Observation{0.0, 0.0, 0.0, 1.0, 0.0};
    const DynamicParams params = rescale_action(clip_action(controller(obs)));
    pop = step_generation(instance, pop, params, run.split(static_cast<std::uint64_t>(g)), config.evaluation_threads);
    const double best = pop.best().fitness;
    stagnation = best < best_so_far ? 0 : stagnation + 1;
    best_so_far = std::min(best_so_far, best);
    result.trace.push_back(population_stats(pop));
  }
  result.best_fitness = pop.best().fitness;
  result.best = pop.best().chromosome;
  return result;
}

void write_episode_csv(const std::vector<EpisodeStepRecord>& steps, std::ostream& out) {
  out << "step";
  for (std::size_t i = 0; i < kActionSize; ++i) out << ",action_" << i;
  out << ",reward,norm_best,norm_mean,coeff_variation,remaining_budget,stagnation\n";
  for (std::size_t s = 0; s < steps.size(); ++s) {
    out << s + 1;
    for (double a : steps[s].action) out << ',' << format_double(a);
    out << ',' << format_double(steps[s].reward);
    for (double o : steps[s].observation.to_array()) out << ',' << format_double(o);
    out << '\n';
  }
}

}  // namespace carbondac
