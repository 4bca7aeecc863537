#include "carbondac/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>
#include <sstream>

#include "carbondac/errors.hpp"
#include "carbondac/io.hpp"
#include "carbondac/parallel.hpp"

namespace carbondac {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

}  // namespace

void PpoHyperparams::validate() const {
  auto fail = [](const std::string& what) { throw ParameterOutOfRange("ppo: " + what); };
  if (hidden_units < 1) fail("hidden_units must be >= 1");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (n_steps < 1) fail("n_steps must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (n_epochs < 1) fail("n_epochs must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (!(clip_range > 0.0)) fail("clip_range must be > 0");
  if (!(max_grad_norm > 0.0)) fail("max_grad_norm must be > 0");
  if (n_envs < 1) fail("n_envs must be >= 1");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) fail("reward_scale must be positive");
}

nlohmann::json to_json(const PpoHyperparams& hp) {
  return {
      {"hidden_units", hp.hidden_units}, {"learning_rate", hp.learning_rate},
      {"n_steps", hp.n_steps},           {"batch_size", hp.batch_size},
      {"n_epochs", hp.n_epochs},         {"gamma", hp.gamma},
      {"gae_lambda", hp.gae_lambda},     {"clip_range", hp.clip_range},
      {"ent_coef", hp.ent_coef},         {"vf_coef", hp.vf_coef},
      {"max_grad_norm", hp.max_grad_norm}, {"log_std_init", hp.log_std_init},
      {"normalize_advantage", hp.normalize_advantage}, {"n_envs", hp.n_envs},
      {"env_threads", hp.env_threads},   {"adam_eps", hp.adam_eps},
      {"reward_scale", hp.reward_scale},
  };
}

PpoHyperparams ppo_hyperparams_from_json(const nlohmann::json& doc) {
  PpoHyperparams hp;
  hp.hidden_units = doc.value("hidden_units", hp.hidden_units);
  hp.learning_rate = doc.value("learning_rate", hp.learning_rate);
  hp.n_steps = doc.value("n_steps", hp.n_steps);
  hp.batch_size = doc.value("batch_size", hp.batch_size);
  hp.n_epochs = doc.value("n_epochs", hp.n_epochs);
  hp.gamma = doc.value("gamma", hp.gamma);
  hp.gae_lambda = doc.value("gae_lambda", hp.gae_lambda);
  hp.clip_range = doc.value("clip_range", hp.clip_range);
  hp.ent_coef = doc.value("ent_coef", hp.ent_coef);
  hp.vf_coef = doc.value("vf_coef", hp.vf_coef);
  hp.max_grad_norm = doc.value("max_grad_norm", hp.max_grad_norm);
  hp.log_std_init = doc.value("log_std_init", hp.log_std_init);
  hp.normalize_advantage = doc.value("normalize_advantage", hp.normalize_advantage);
  hp.n_envs = doc.value("n_envs", hp.n_envs);
  hp.env_threads = doc.value("env_threads", hp.env_threads);
  hp.adam_eps = doc.value("adam_eps", hp.adam_eps);
  hp.reward_scale = doc.value("reward_scale", hp.reward_scale);
  hp.validate();
  return hp;
}

PolicyNetwork::PolicyNetwork(int hidden_units, double log_std_init)
    : hidden_(hidden_units),
      actor_({static_cast<int>(kObservationSize), hidden_units, hidden_units, static_cast<int>(kActionSize)}),
      critic_({static_cast<int>(kObservationSize), hidden_units, hidden_units, 1}),
      params_(actor_.parameter_count() + kActionSize + critic_.parameter_count(), 0.0) {
  for (auto& s : log_std()) s = log_std_init;
}

void PolicyNetwork::initialize(Rng& rng) {
  std::span<double> all(params_);
  nn::orthogonal_init(actor_, all.subspan(0, actor_.parameter_count()), std::sqrt(2.0), 0.01, rng);
  nn::orthogonal_init(critic_, all.subspan(critic_offset(), critic_.parameter_count()), std::sqrt(2.0), 1.0, rng);
}

ActionVector PolicyNetwork::action_mean(const std::array<double, kObservationSize>& obs) const {
  thread_local nn::MlpCache cache;
  nn::forward(actor_, actor_parameters(), obs, cache);
  ActionVector mean{};
  std::copy(cache.activations.back().begin(), cache.activations.back().end(), mean.begin());
  return mean;
}

double PolicyNetwork::value(const std::array<double, kObservationSize>& obs) const {
  thread_local nn::MlpCache cache;
  nn::forward(critic_, critic_parameters(), obs, cache);
  return cache.activations.back()[0];
}

void PolicyNetwork::clamp_log_std() {
  for (auto& s : log_std()) s = std::clamp(s, kLogStdMin, kLogStdMax);
}

double gaussian_log_prob(const ActionVector& action, const ActionVector& mean, std::span<const double> log_std) {
  double lp = 0.0;
  for (std::size_t i = 0; i < kActionSize; ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

ActionVector act(const PolicyNetwork& policy, const Observation& obs, bool deterministic, Rng& rng) {
  const ActionVector mean = policy.action_mean(obs.to_array());
  ActionVector out{};
  const auto log_std = policy.log_std();
  for (std::size_t i = 0; i < kActionSize; ++i) {
    if (!std::isfinite(mean[i])) throw NonFiniteOutput("policy produced a non-finite action mean");
    const double a = deterministic ? mean[i] : mean[i] + std::exp(log_std[i]) * rng.normal();
    out[i] = std::clamp(a, -1.0, 1.0);
  }
  return out;
}

ActionSample sample_action(const PolicyNetwork& policy, const std::array<double, kObservationSize>& obs, Rng& rng) {
  ActionSample s;
  const ActionVector mean = policy.action_mean(obs);
  const auto log_std = policy.log_std();
  for (std::size_t i = 0; i < kActionSize; ++i) {
    if (!std::isfinite(mean[i])) throw NonFiniteOutput("policy produced a non-finite action mean");
    s.raw[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
  }
  s.log_prob = gaussian_log_prob(s.raw, mean, log_std);
  s.value = policy.value(obs);
  return s;
}

RolloutBuffer::RolloutBuffer(int steps, int envs) : n_steps(steps), n_envs(envs) {
  const std::size_t n = size();
  observations.resize(n);
  actions.resize(n);
  log_probs.assign(n, 0.0);
  rewards.assign(n, 0.0);
  values.assign(n, 0.0);
  dones.assign(n, 0);
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
}

void RolloutBuffer::compute_returns_and_advantages(std::span<const double> last_values, double gamma,
                                                   double gae_lambda) {
  for (int e = 0; e < n_envs; ++e) {
    double gae = 0.0;
    for (int t = n_steps - 1; t >= 0; --t) {
      const std::size_t i = static_cast<std::size_t>(t) * n_envs + e;
      const double non_terminal = dones[i] ? 0.0 : 1.0;
      const double next_value =
          t == n_steps - 1 ? last_values[e] : values[static_cast<std::size_t>(t + 1) * n_envs + e];
      const double delta = rewards[i] + gamma * next_value * non_terminal - values[i];
      gae = delta + gamma * gae_lambda * non_terminal * gae;
      advantages[i] = gae;
      returns[i] = gae + values[i];
    }
  }
}

std::vector<double> minibatch_advantages(const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                                         bool normalize) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(buffer.advantages[i]);
  const std::size_t n = out.size();
  if (!normalize || n < 2) return out;
  double mean = 0.0;
  for (double a : out) mean += a;
  mean /= static_cast<double>(n);
  double sq = 0.0;
  for (double a : out) sq += (a - mean) * (a - mean);
  const double scale = 1.0 / (std::sqrt(sq / static_cast<double>(n - 1)) + 1e-8);
  for (double& a : out) a = (a - mean) * scale;
  return out;
}

LossReport ppo_loss(const PolicyNetwork& policy, const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                    const PpoHyperparams& hp, std::span<double> grad) {
  LossReport report;
  const std::size_t n = indices.size();
  if (n == 0) return report;
  const double inv_n = 1.0 / static_cast<double>(n);

  const std::vector<double> advantages = minibatch_advantages(buffer, indices, hp.normalize_advantage);

  const bool with_grad = !grad.empty();
  const auto log_std = policy.log_std();
  std::array<double, kActionSize> inv_var{};
  for (std::size_t d = 0; d < kActionSize; ++d) inv_var[d] = std::exp(-2.0 * log_std[d]);

  nn::MlpCache actor_cache;
  nn::MlpCache critic_cache;
  std::array<double, kActionSize> grad_mean{};
  std::span<double> grad_actor;
  std::span<double> grad_log_std;
  std::span<double> grad_critic;
  if (with_grad) {
    grad_actor = grad.subspan(0, policy.actor_shape().parameter_count());
    grad_log_std = grad.subspan(policy.log_std_offset(), kActionSize);
    grad_critic = grad.subspan(policy.critic_offset(), policy.critic_shape().parameter_count());
  }

  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t idx = indices[row];
    const auto& obs = buffer.observations[idx];
    const auto& action = buffer.actions[idx];
    nn::forward(policy.actor_shape(), policy.actor_parameters(), obs, actor_cache);
    nn::forward(policy.critic_shape(), policy.critic_parameters(), obs, critic_cache);
    const auto& mean = actor_cache.activations.back();
    const double v = critic_cache.activations.back()[0];

    double log_prob = 0.0;
    for (std::size_t d = 0; d < kActionSize; ++d) {
      const double diff = action[d] - mean[d];
      log_prob += -0.5 * diff * diff * inv_var[d] - log_std[d] - kHalfLog2Pi;
    }
    const double log_ratio = log_prob - buffer.log_probs[idx];
    const double ratio = std::exp(log_ratio);
    const double adv = advantages[row];
    const double clipped = std::clamp(ratio, 1.0 - hp.clip_range, 1.0 + hp.clip_range);
    const double surr1 = adv * ratio;
    const double surr2 = adv * clipped;
    report.policy_loss += -std::min(surr1, surr2) * inv_n;
    const double target = buffer.returns[idx];
    report.value_loss += (target - v) * (target - v) * inv_n;
    if (std::abs(ratio - 1.0) > hp.clip_range) report.clip_fraction += inv_n;
    report.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

    if (!with_grad) continue;
    // The min selects the unclipped term whenever the gradient can flow.
    const double dloss_dlogp = surr1 <= surr2 ? -adv * ratio * inv_n : 0.0;
    for (std::size_t d = 0; d < kActionSize; ++d) {
      const double diff = action[d] - mean[d];
      grad_mean[d] = dloss_dlogp * diff * inv_var[d];
      grad_log_std[d] += dloss_dlogp * (diff * diff * inv_var[d] - 1.0);
    }
    nn::backward(policy.actor_shape(), policy.actor_parameters(), actor_cache, grad_mean, grad_actor);
    const double dv = hp.vf_coef * 2.0 * (v - target) * inv_n;
    nn::backward(policy.critic_shape(), policy.critic_parameters(), critic_cache, std::span<const double>(&dv, 1),
                 grad_critic);
  }

  double entropy = 0.0;
  for (std::size_t d = 0; d < kActionSize; ++d) entropy += 0.5 + kHalfLog2Pi + log_std[d];
  report.entropy_loss = -entropy;
  if (with_grad) {
    for (std::size_t d = 0; d < kActionSize; ++d) grad_log_std[d] += -hp.ent_coef;
  }
  report.total_loss = report.policy_loss + hp.ent_coef * report.entropy_loss + hp.vf_coef * report.value_loss;
  return report;
}

LossReport PpoOptimizer::update(PolicyNetwork& policy, const RolloutBuffer& buffer, Rng& rng) {
  const std::size_t n = buffer.size();
  std::vector<std::size_t> order(n);
  std::vector<double> grad(policy.parameters().size());
  LossReport mean_report;
  int batches = 0;
  for (int epoch = 0; epoch < hp_.n_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(hp_.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(hp_.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      const LossReport r =
          ppo_loss(policy, buffer, std::span<const std::size_t>(order).subspan(begin, end - begin), hp_, grad);
      const bool finite = std::isfinite(r.total_loss) &&
                          std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
      if (!finite) {
        std::ostringstream msg;
        msg << "epoch " << epoch << " minibatch at " << begin << ": policy_loss=" << r.policy_loss
            << " value_loss=" << r.value_loss << " approx_kl=" << r.approx_kl;
        throw NonFiniteLoss(msg.str());
      }
      nn::clip_grad_norm(grad, hp_.max_grad_norm);
      adam_.step(policy.parameters(), grad, hp_.learning_rate);
      policy.clamp_log_std();
      mean_report.policy_loss += r.policy_loss;
      mean_report.value_loss += r.value_loss;
      mean_report.entropy_loss += r.entropy_loss;
      mean_report.total_loss += r.total_loss;
      mean_report.clip_fraction += r.clip_fraction;
      mean_report.approx_kl += r.approx_kl;
      ++batches;
    }
  }
  if (batches > 0) {
    const double inv = 1.0 / batches;
    mean_report.policy_loss *= inv;
    mean_report.value_loss *= inv;
    mean_report.entropy_loss *= inv;
    mean_report.total_loss *= inv;
    mean_report.clip_fraction *= inv;
    mean_report.approx_kl *= inv;
  }
  return mean_report;
}

nlohmann::json policy_to_json(const TrainedPolicy& p) {
  nlohmann::json doc;
  doc["format"] = "carbondac-policy";
  doc["schema_version"] = 1;
  doc["observation_size"] = kObservationSize;
  doc["action_size"] = kActionSize;
  doc["hidden_units"] = p.network.hidden_units();
  doc["activation"] = "tanh";
  doc["observation_normalization"] = "identity";  // observations arrive in [0, 1]
  doc["action_bounds"]["min"] = action_bounds().min.to_array();
  doc["action_bounds"]["max"] = action_bounds().max.to_array();
  const auto params = p.network.parameters();
  doc["parameters"] = std::vector<double>(params.begin(), params.end());
  doc["manifest"] = {
      {"seed", p.manifest.seed},
      {"total_steps", p.manifest.total_steps},
      {"instance_ids", p.manifest.instance_ids},
      {"population_size", p.manifest.population_size},
      {"max_generations", p.manifest.max_generations},
      {"hyperparams", to_json(p.manifest.hyperparams)},
  };
  return doc;
}

TrainedPolicy policy_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "carbondac-policy") throw ParseError("not a policy file");
    if (doc.at("schema_version").get<int>() != 1) throw SchemaVersionError("unsupported policy schema_version");
    if (doc.at("observation_size").get<std::size_t>() != kObservationSize ||
        doc.at("action_size").get<std::size_t>() != kActionSize) {
      throw DimensionMismatch("policy observation/action sizes do not match");
    }
    TrainedPolicy p;
    p.network = PolicyNetwork(doc.at("hidden_units").get<int>());
    const auto params = doc.at("parameters").get<std::vector<double>>();
    if (params.size() != p.network.parameters().size()) {
      throw DimensionMismatch("policy has " + std::to_string(params.size()) + " parameters, expected " +
                              std::to_string(p.network.parameters().size()));
    }
    std::copy(params.begin(), params.end(), p.network.parameters().begin());
    const auto& m = doc.at("manifest");
    p.manifest.seed = m.at("seed").get<std::uint64_t>();
    p.manifest.total_steps = m.at("total_steps").get<long>();
    p.manifest.instance_ids = m.at("instance_ids").get<std::vector<std::string>>();
    p.manifest.population_size = m.at("population_size").get<int>();
    p.manifest.max_generations = m.at("max_generations").get<int>();
    p.manifest.hyperparams = ppo_hyperparams_from_json(m.at("hyperparams"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy file: ") + e.what());
  }
}

void TrainedPolicy::save(const std::filesystem::path& path) const {
  write_file_atomic(path, policy_to_json(*this).dump() + "\n");
}

TrainedPolicy TrainedPolicy::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return policy_from_json(doc);
}

TrainingResult train(const InstancePool& pool, long total_steps, const EAConfig& config, const PpoHyperparams& hp,
                     std::uint64_t seed) {
  hp.validate();
  config.validate();
  if (pool.empty()) throw EmptyPool("training needs at least one instance");
  if (total_steps < 1) throw ParameterOutOfRange("total_steps must be >= 1");

  const Rng master(seed);
  TrainingResult result;
  result.policy.network = PolicyNetwork(hp.hidden_units, hp.log_std_init);
  Rng init_rng = master.split(1);
  result.policy.network.initialize(init_rng);
  result.policy.manifest.seed = seed;
  result.policy.manifest.total_steps = total_steps;
  for (const auto& e : pool) result.policy.manifest.instance_ids.push_back(e->instance.id);
  result.policy.manifest.population_size = config.population_size;
  result.policy.manifest.max_generations = config.max_generations;
  result.policy.manifest.hyperparams = hp;

  PolicyNetwork& policy = result.policy.network;
  PpoOptimizer optimizer(policy, hp);
  Rng shuffle_rng = master.split(3);

  const int n_envs = hp.n_envs;
  std::vector<Rng> reset_rngs;
  std::vector<Rng> action_rngs;
  std::vector<EnvState> envs(static_cast<std::size_t>(n_envs));
  std::vector<Observation> current(static_cast<std::size_t>(n_envs));
  for (int e = 0; e < n_envs; ++e) {
    reset_rngs.push_back(master.split(100 + static_cast<std::uint64_t>(e)));
    action_rngs.push_back(master.split(200 + static_cast<std::uint64_t>(e)));
    auto [state, obs] = episode_reset(pool, config, reset_rngs[e]);
    envs[e] = std::move(state);
    current[e] = obs;
  }

  std::deque<double> recent;
  long steps_done = 0;
  while (steps_done < total_steps) {
    const long remaining = total_steps - steps_done;
    const int horizon = static_cast<int>(std::min<long>(hp.n_steps, (remaining + n_envs - 1) / n_envs));
    RolloutBuffer buffer(horizon, n_envs);
    std::vector<ActionSample> samples(static_cast<std::size_t>(n_envs));
    std::vector<StepResult> outcomes(static_cast<std::size_t>(n_envs));
    for (int t = 0; t < horizon; ++t) {
      // Sampling is sequential; stepping environments may be spread over threads.
      for (int e = 0; e < n_envs; ++e) samples[e] = sample_action(policy, current[e].to_array(), action_rngs[e]);
      parallel_for(static_cast<std::size_t>(n_envs), hp.env_threads,
                   [&](std::size_t e) { outcomes[e] = episode_step(envs[e], samples[e].raw); });
      for (int e = 0; e < n_envs; ++e) {
        const std::size_t i = static_cast<std::size_t>(t) * n_envs + e;
        buffer.observations[i] = current[e].to_array();
        buffer.actions[i] = samples[e].raw;
        buffer.log_probs[i] = samples[e].log_prob;
        buffer.values[i] = samples[e].value;
        buffer.rewards[i] = outcomes[e].reward * hp.reward_scale;
        buffer.dones[i] = outcomes[e].done ? 1 : 0;
        if (outcomes[e].done) {
          result.episode_rewards.push_back(envs[e].episode_reward);
          recent.push_back(envs[e].episode_reward);
          if (recent.size() > 100) recent.pop_front();
          auto [state, obs] = episode_reset(pool, config, reset_rngs[e]);
          envs[e] = std::move(state);
          current[e] = obs;
        } else {
          current[e] = outcomes[e].observation;
        }
      }
    }
    steps_done += static_cast<long>(horizon) * n_envs;

    std::vector<double> last_values(static_cast<std::size_t>(n_envs));
    for (int e = 0; e < n_envs; ++e) last_values[e] = policy.value(current[e].to_array());
    buffer.compute_returns_and_advantages(last_values, hp.gamma, hp.gae_lambda);
    result.losses.push_back(optimizer.update(policy, buffer, shuffle_rng));
    ++result.updates;

    CurvePoint point;
    point.update_index = result.updates;
    point.env_steps = steps_done;
    point.mean_episode_reward =
        recent.empty() ? std::nan("") : std::accumulate(recent.begin(), recent.end(), 0.0) / recent.size();
    result.curve.push_back(point);
  }
  return result;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out) {
  out << "update_index,env_steps,mean_episode_reward\n";
  for (const auto& p : curve) {
    out << p.update_index << ',' << p.env_steps << ',' << format_double(p.mean_episode_reward) << '\n';
  }
}

}  // namespace carbondac
