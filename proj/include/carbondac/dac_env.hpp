#ifndef CARBONDAC_DAC_ENV_HPP_
#define CARBONDAC_DAC_ENV_HPP_

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "carbondac/evolve.hpp"
#include "carbondac/instance.hpp"
#include "carbondac/rng.hpp"

namespace carbondac {

inline constexpr std::size_t kObservationSize = 5;
inline constexpr std::size_t kActionSize = DynamicParams::kSize;

using ActionVector = std::array<double, kActionSize>;

struct Observation {
  double norm_best = 0.0;
  double norm_mean = 0.0;
  double coeff_variation = 0.0;
  double remaining_budget = 0.0;
  double stagnation = 0.0;

  std::array<double, kObservationSize> to_array() const {
    return {norm_best, norm_mean, coeff_variation, remaining_budget, stagnation};
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

// Parameter range each action component is mapped onto.
struct ActionBounds {
  DynamicParams min{0.5, 0.1, 0.05, 0.01, 0.01, 0.008, 0.15};
  DynamicParams max{0.9, 0.5, 0.5, 0.2, 0.11, 0.2, 0.25};
};

const ActionBounds& action_bounds();

// Affine map from [-1, 1]^7 onto the bounds. Throws OutOfBounds.
DynamicParams rescale_action(const ActionVector& action);
// Inverse of rescale_action. Throws OutOfBounds for params outside the bounds.
ActionVector unscale_params(const DynamicParams& params);
ActionVector clip_action(const ActionVector& raw);

// Throws EmptyPopulation, ParameterOutOfRange (f_initial <= 0 or
// max_generations < 1).
Observation observe(const Population& population, int generation_index, const EAConfig& config, double f_initial,
                    int stagnation_count);

struct RewardTracker {
  double f_initial = 0.0;
  double f_ideal = 0.0;
  double f_previous = 0.0;  // best fitness found before the current step
  double f_current = 0.0;
  double delta_previous = 0.0;
  double delta_current = 0.0;
  double r = 0.0;
};

// 100 * (f_initial - f) / (f_initial - f_ideal).
double normalized_improvement(double f_initial, double f_ideal, double f);

// Difference of squared normalized improvements when f_current improves on
// f_previous, zero otherwise. Afterwards f_previous = min(f_previous,
// f_current). Throws DegenerateNormalization unless f_initial > f_ideal.
double reward(RewardTracker& tracker);

// Best fitness of a static run with twice the generation budget.
double compute_ideal(const Instance& instance, const EAConfig& config, const DynamicParams& params,
                     std::uint64_t seed);
std::uint64_t ideal_seed(const Instance& instance);

// Per-dataset f_ideal sidecar: instance id -> f_ideal.
class IdealCache {
 public:
  IdealCache() = default;
  IdealCache(EAConfig config, DynamicParams params) : config_(config), params_(params) {}

  double get_or_compute(const Instance& instance);
  bool contains(const std::string& id) const { return values_.count(id) != 0; }
  double at(const std::string& id) const;
  void set(const std::string& id, double value) { values_[id] = value; }
  const std::map<std::string, double>& values() const { return values_; }

  void save(const std::filesystem::path& path) const;
  static IdealCache load(const std::filesystem::path& path);

 private:
  EAConfig config_;
  DynamicParams params_ = tuned_params();
  std::map<std::string, double> values_;
};

struct TrainingInstance {
  Instance instance;
  double f_ideal = 0.0;
};

using InstancePool = std::vector<std::shared_ptr<const TrainingInstance>>;

struct EnvState {
  std::shared_ptr<const TrainingInstance> entry;
  std::size_t instance_index = 0;
  EAConfig config;
  Rng run{0};
  Population population;
  RewardTracker tracker;
  int stagnation = 0;
  bool degenerate = false;  // f_initial <= f_ideal; rewards are zero
  bool done = false;
  double episode_reward = 0.0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  DynamicParams params;
};

// Samples an instance uniformly from the pool and starts a fresh
// population on it. Throws EmptyPool.
std::pair<EnvState, Observation> episode_reset(const InstancePool& pool, const EAConfig& config, Rng& rng);

// Clips the raw action to [-1, 1], runs one generation with the rescaled
// parameters and returns the reward. Throws EpisodeFinished.
StepResult episode_step(EnvState& state, const ActionVector& raw_action);

// Deployment loop: asks `controller` for an action before every
// generation. Seeding matches run_static, so a constant controller
// reproduces the corresponding static run.
using Controller = std::function<ActionVector(const Observation&)>;
StaticRunResult run_controlled(const Instance& instance, const EAConfig& config, const Controller& controller);

struct EpisodeStepRecord {
  ActionVector action{};
  double reward = 0.0;
  Observation observation;
};

// CSV with columns step,action_0..action_6,reward,norm_best,norm_mean,
// coeff_variation,remaining_budget,stagnation.
void write_episode_csv(const std::vector<EpisodeStepRecord>& steps, std::ostream& out);

}  // namespace carbondac

#endif  // CARBONDAC_DAC_ENV_HPP_
