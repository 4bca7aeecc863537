#ifndef CARBONDAC_PPO_HPP_
#define CARBONDAC_PPO_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "carbondac/dac_env.hpp"
#include "carbondac/nn.hpp"
#include "carbondac/rng.hpp"
#include "json.hpp"

namespace carbondac {

struct PpoHyperparams {
  int hidden_units = 64;
  double learning_rate = 3e-4;
  int n_steps = 2048;  // rollout horizon per environment
  int batch_size = 64;
  int n_epochs = 10;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_range = 0.2;
  double ent_coef = 0.0;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  double log_std_init = 0.0;
  bool normalize_advantage = true;
  int n_envs = 1;
  int env_threads = 1;  // workers stepping environments; results do not depend on it
  double adam_eps = 1e-5;
  double reward_scale = 1.0;  // applied to rewards stored for learning; episode rewards stay raw

  void validate() const;
};

nlohmann::json to_json(const PpoHyperparams& hp);
PpoHyperparams ppo_hyperparams_from_json(const nlohmann::json& doc);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Gaussian actor-critic with state-independent log standard deviations.
// All parameters sit in one flat buffer: actor, log_std, critic.
class PolicyNetwork {
 public:
  PolicyNetwork() : PolicyNetwork(64) {}
  explicit PolicyNetwork(int hidden_units, double log_std_init = 0.0);

  // SB3-style orthogonal initialization.
  void initialize(Rng& rng);

  const nn::MlpShape& actor_shape() const { return actor_; }
  const nn::MlpShape& critic_shape() const { return critic_; }
  int hidden_units() const { return hidden_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<const double> actor_parameters() const { return {params_.data(), actor_.parameter_count()}; }
  std::span<const double> critic_parameters() const {
    return {params_.data() + critic_offset(), critic_.parameter_count()};
  }
  std::span<double> log_std() { return {params_.data() + actor_.parameter_count(), kActionSize}; }
  std::span<const double> log_std() const { return {params_.data() + actor_.parameter_count(), kActionSize}; }
  std::size_t log_std_offset() const { return actor_.parameter_count(); }
  std::size_t critic_offset() const { return actor_.parameter_count() + kActionSize; }

  ActionVector action_mean(const std::array<double, kObservationSize>& obs) const;
  double value(const std::array<double, kObservationSize>& obs) const;
  void clamp_log_std();

 private:
  int hidden_ = 64;
  nn::MlpShape actor_;
  nn::MlpShape critic_;
  std::vector<double> params_;
};

double gaussian_log_prob(const ActionVector& action, const ActionVector& mean, std::span<const double> log_std);

// Deterministic mode returns the clipped mean; otherwise each component
// is drawn from N(mean, exp(log_std)) and clipped. Throws NonFiniteOutput.
ActionVector act(const PolicyNetwork& policy, const Observation& obs, bool deterministic, Rng& rng);

// Unclipped Gaussian draw, as stored in the rollout buffer.
struct ActionSample {
  ActionVector raw{};
  double log_prob = 0.0;
  double value = 0.0;
};
ActionSample sample_action(const PolicyNetwork& policy, const std::array<double, kObservationSize>& obs, Rng& rng);

struct RolloutBuffer {
  int n_steps = 0;
  int n_envs = 0;
  // Indexed [step * n_envs + env].
  std::vector<std::array<double, kObservationSize>> observations;
  std::vector<ActionVector> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<char> dones;  // episode terminated after this step
  std::vector<double> advantages;
  std::vector<double> returns;

  RolloutBuffer() = default;
  RolloutBuffer(int steps, int envs);
  std::size_t size() const { return static_cast<std::size_t>(n_steps) * n_envs; }

  // Generalized advantage estimation; `last_values` bootstrap the
  // step after the buffer for environments that are not done.
  void compute_returns_and_advantages(std::span<const double> last_values, double gamma, double gae_lambda);
};

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy_loss = 0.0;
  double total_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Advantages of buffer rows `indices`, standardized (unbiased std) when
// `normalize` is set and there are at least two rows.
std::vector<double> minibatch_advantages(const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                                         bool normalize);

// Clipped-surrogate loss over buffer rows `indices`; accumulates its
// gradient into `grad` when non-empty. Advantages are normalized within the
// minibatch when enabled.
LossReport ppo_loss(const PolicyNetwork& policy, const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                    const PpoHyperparams& hp, std::span<double> grad);

class PpoOptimizer {
 public:
  PpoOptimizer(const PolicyNetwork& policy, const PpoHyperparams& hp)
      : hp_(hp), adam_(policy.parameters().size(), 0.9, 0.999, hp.adam_eps) {}

  // Epochs of shuffled minibatch updates; returns the mean report over all
  // minibatches. Throws NonFiniteLoss.
  LossReport update(PolicyNetwork& policy, const RolloutBuffer& buffer, Rng& rng);

 private:
  PpoHyperparams hp_;
  nn::Adam adam_;
};

struct TrainingManifest {
  std::uint64_t seed = 0;
  long total_steps = 0;
  std::vector<std::string> instance_ids;
  int population_size = 0;
  int max_generations = 0;
  PpoHyperparams hyperparams;
};

struct TrainedPolicy {
  PolicyNetwork network;
  TrainingManifest manifest;

  void save(const std::filesystem::path& path) const;
  static TrainedPolicy load(const std::filesystem::path& path);
};

nlohmann::json policy_to_json(const TrainedPolicy& policy);
TrainedPolicy policy_from_json(const nlohmann::json& doc);

struct CurvePoint {
  int update_index = 0;
  long env_steps = 0;
  double mean_episode_reward = 0.0;  // over the last 100 completed episodes
};

struct TrainingResult {
  TrainedPolicy policy;
  std::vector<CurvePoint> curve;
  std::vector<double> episode_rewards;  // in completion order
  std::vector<LossReport> losses;
  int updates = 0;
};

// Alternates rollouts and updates until `total_steps` environment steps are
// consumed; the last rollout is shortened, rounding up to a whole step of
// every environment. Throws NonFiniteLoss or environment errors.
TrainingResult train(const InstancePool& pool, long total_steps, const EAConfig& config, const PpoHyperparams& hp,
                     std::uint64_t seed);

// CSV with columns update_index,env_steps,mean_episode_reward.
void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out);

}  // namespace carbondac

#endif  // CARBONDAC_PPO_HPP_
