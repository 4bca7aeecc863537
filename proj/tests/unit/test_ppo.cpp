#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "carbondac/errors.hpp"
#include "carbondac/nn.hpp"
#include "carbondac/ppo.hpp"
#include "carbondac/stats.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace carbondac;

namespace {

std::array<double, kObservationSize> random_obs(Rng& rng) {
  std::array<double, kObservationSize> o{};
  for (auto& x : o) x = rng.uniform();
  return o;
}

Observation as_observation(const std::array<double, kObservationSize>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }

// Buffer whose stored log-probabilities put the probability ratios on both
// sides of the clip range, away from its kinks.
RolloutBuffer toy_buffer(const PolicyNetwork& policy, int n, Rng& rng) {
  RolloutBuffer buf(n, 1);
  for (int i = 0; i < n; ++i) {
    buf.observations[i] = random_obs(rng);
    const ActionSample s = sample_action(policy, buf.observations[i], rng);
    buf.actions[i] = s.raw;
    double shift = 0.0;
    do {
      shift = rng.uniform(-0.6, 0.6);
    } while (std::abs(std::exp(-shift) - 0.8) < 0.02 || std::abs(std::exp(-shift) - 1.2) < 0.02);
    buf.log_probs[i] = s.log_prob + shift;
    buf.values[i] = s.value;
    buf.advantages[i] = rng.normal();
    buf.returns[i] = buf.values[i] + rng.normal();
  }
  return buf;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double scale = std::max({std::abs(analytic[k]), std::abs(numeric[k]), 1e-6});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("mlp backward matches finite differences") {
  Rng rng(1);
  const nn::MlpShape shape({3, 4, 2});
  std::vector<double> params(shape.parameter_count());
  for (auto& p : params) p = rng.normal(0.0, 0.7);
  const std::vector<double> x{0.3, -0.2, 0.9};
  const std::vector<double> upstream{0.7, -1.3};
  auto loss = [&](std::span<const double> p) {
    nn::MlpCache c;
    nn::forward(shape, p, x, c);
    return upstream[0] * c.activations.back()[0] + upstream[1] * c.activations.back()[1];
  };
  nn::MlpCache cache;
  nn::forward(shape, params, x, cache);
  std::vector<double> grad(params.size(), 0.0);
  nn::backward(shape, params, cache, upstream, grad);
  std::vector<double> numeric(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params;
    const double h = 1e-6;
    p[k] += h;
    const double up = loss(p);
    p[k] -= 2 * h;
    numeric[k] = (up - loss(p)) / (2 * h);
  }
  CHECK(max_relative_error(grad, numeric) < 1e-6);
}

TEST_CASE("orthogonal initialization") {
  Rng rng(2);
  const nn::MlpShape shape({5, 8, 8, 3});
  std::vector<double> params(shape.parameter_count());
  nn::orthogonal_init(shape, params, std::sqrt(2.0), 0.01, rng);
  // First layer (8 x 5): columns orthogonal with squared norm gain^2.
  const std::size_t w = shape.weight_offset(0);
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      double dot = 0.0;
      for (int r = 0; r < 8; ++r) dot += params[w + r * 5 + a] * params[w + r * 5 + b];
      CHECK(dot == doctest::Approx(a == b ? 2.0 : 0.0).epsilon(1e-9).scale(1.0));
    }
  }
  for (int i = 0; i < 8; ++i) CHECK(params[shape.bias_offset(0) + i] == 0.0);
  // Last layer (3 x 8): rows orthonormal scaled by 0.01.
  const std::size_t last = shape.weight_offset(2);
  for (int a = 0; a < 3; ++a) {
    double sq = 0.0;
    for (int c = 0; c < 8; ++c) sq += params[last + a * 8 + c] * params[last + a * 8 + c];
    CHECK(sq == doctest::Approx(1e-4).epsilon(1e-9));
  }
}

TEST_CASE("ppo loss gradient matches central differences") {
  for (double ent : {0.0, 0.01}) {
    for (bool normalize : {true, false}) {
      Rng rng(3);
      PolicyNetwork policy(4, -0.5);
      policy.initialize(rng);
      for (auto& p : policy.parameters()) p += rng.normal(0.0, 0.1);
      const RolloutBuffer buf = toy_buffer(policy, 16, rng);
      std::vector<std::size_t> idx(16);
      std::iota(idx.begin(), idx.end(), 0);
      PpoHyperparams hp;
      hp.ent_coef = ent;
      hp.normalize_advantage = normalize;
      std::vector<double> grad(policy.parameters().size(), 0.0);
      const LossReport base = ppo_loss(policy, buf, idx, hp, grad);
      CHECK(base.clip_fraction > 0.0);
      CHECK(base.clip_fraction < 1.0);
      std::vector<double> numeric(grad.size());
      for (std::size_t k = 0; k < grad.size(); ++k) {
        const double keep = policy.parameters()[k];
        const double h = 1e-6;
        policy.parameters()[k] = keep + h;
        const double up = ppo_loss(policy, buf, idx, hp, {}).total_loss;
        policy.parameters()[k] = keep - h;
        const double down = ppo_loss(policy, buf, idx, hp, {}).total_loss;
        policy.parameters()[k] = keep;
        numeric[k] = (up - down) / (2 * h);
      }
      CHECK(max_relative_error(grad, numeric) < 1e-4);
    }
  }
}

TEST_CASE("gae with unit discount gives reward-to-go") {
  RolloutBuffer buf(6, 2);
  Rng rng(4);
  for (std::size_t i = 0; i < buf.size(); ++i) buf.rewards[i] = rng.uniform(0.0, 5.0);
  buf.dones[2 * 2 + 0] = 1;  // env 0 ends an episode after step 2
  const std::vector<double> last{0.0, 0.0};
  buf.compute_returns_and_advantages(last, 1.0, 1.0);
  for (int e = 0; e < 2; ++e) {
    // Reward-to-go accumulated from the end of the episode backwards.
    double togo = 0.0;
    for (int t = 5; t >= 0; --t) {
      if (buf.dones[t * 2 + e]) togo = 0.0;
      togo = buf.rewards[t * 2 + e] + togo;
      CHECK(buf.returns[t * 2 + e] == togo);
    }
  }

  for (std::size_t i = 0; i < buf.size(); ++i) buf.values[i] = rng.normal();
  const std::vector<double> boot{0.0, 2.5};
  buf.compute_returns_and_advantages(boot, 1.0, 1.0);
  for (int t = 0; t < 6; ++t) {
    double togo = boot[1];
    for (int k = t; k < 6; ++k) togo += buf.rewards[k * 2 + 1];
    CHECK(buf.returns[t * 2 + 1] == doctest::Approx(togo).epsilon(1e-12));
    CHECK(buf.advantages[t * 2 + 1] == doctest::Approx(togo - buf.values[t * 2 + 1]).epsilon(1e-12));
  }
}

TEST_CASE("minibatch advantage normalization") {
  RolloutBuffer buf(200, 1);
  Rng rng(5);
  for (auto& a : buf.advantages) a = rng.normal(30.0, 7.0);
  std::vector<std::size_t> idx(64);
  for (auto& i : idx) i = rng.below(200);
  const auto adv = minibatch_advantages(buf, idx, true);
  CHECK(std::abs(mean(adv)) < 1e-6);
  const double m = mean(adv);
  double sq = 0.0;
  for (double a : adv) sq += (a - m) * (a - m);
  CHECK(std::abs(std::sqrt(sq / (adv.size() - 1)) - 1.0) < 1e-3);
  CHECK(minibatch_advantages(buf, idx, false)[0] == buf.advantages[idx[0]]);
}

TEST_CASE("acting") {
  PolicyNetwork zero(8);
  Rng rng(6);
  const Observation o = as_observation(random_obs(rng));
  CHECK(act(zero, o, true, rng) == ActionVector{});

  PolicyNetwork policy(8, std::log(0.1));
  policy.initialize(rng);
  CHECK(act(policy, o, true, rng) == act(policy, o, true, rng));

  const ActionVector mean = policy.action_mean(o.to_array());
  std::vector<std::vector<double>> draws(kActionSize);
  for (int i = 0; i < 100000; ++i) {
    const ActionSample s = sample_action(policy, o.to_array(), rng);
    for (std::size_t d = 0; d < kActionSize; ++d) draws[d].push_back(s.raw[d] - mean[d]);
  }
  for (const auto& d : draws) CHECK(std::abs(pstdev(d) - 0.1) <= 0.005);

  PolicyNetwork wide(8, 1.0);
  wide.initialize(rng);
  for (int i = 0; i < 1000; ++i) {
    for (double a : act(wide, o, false, rng)) CHECK((a >= -1.0 && a <= 1.0));
  }

  policy.parameters()[0] = std::nan("");
  CHECK_THROWS_AS(act(policy, o, true, rng), NonFiniteOutput);
}

TEST_CASE("updates: zero learning rate, clip fraction range, log_std bounds") {
  Rng rng(7);
  PolicyNetwork policy(8);
  policy.initialize(rng);
  const RolloutBuffer buf = toy_buffer(policy, 64, rng);
  PpoHyperparams hp;
  hp.learning_rate = 0.0;
  hp.batch_size = 16;
  hp.n_epochs = 3;
  const std::vector<double> before(policy.parameters().begin(), policy.parameters().end());
  PpoOptimizer frozen(policy, hp);
  const LossReport r = frozen.update(policy, buf, rng);
  CHECK(std::equal(before.begin(), before.end(), policy.parameters().begin()));
  CHECK((r.clip_fraction >= 0.0 && r.clip_fraction <= 1.0));

  hp.learning_rate = 0.5;
  hp.ent_coef = 10.0;
  PpoOptimizer wild(policy, hp);
  for (int i = 0; i < 20; ++i) {
    const LossReport w = wild.update(policy, buf, rng);
    CHECK((w.clip_fraction >= 0.0 && w.clip_fraction <= 1.0));
    for (double s : policy.log_std()) CHECK((s >= kLogStdMin && s <= kLogStdMax));
  }
}

TEST_CASE("policy files round-trip") {
  Rng rng(8);
  TrainedPolicy tp;
  tp.network = PolicyNetwork(16, -0.3);
  tp.network.initialize(rng);
  tp.manifest.seed = 42;
  tp.manifest.total_steps = 1000;
  tp.manifest.instance_ids = {"a_1", "b_2"};
  const auto path = std::filesystem::temp_directory_path() / "carbondac_policy.json";
  tp.save(path);
  const TrainedPolicy back = TrainedPolicy::load(path);
  CHECK(back.manifest.instance_ids == tp.manifest.instance_ids);
  CHECK(back.manifest.seed == 42);
  for (int i = 0; i < 100; ++i) {
    const auto o = random_obs(rng);
    CHECK(back.network.action_mean(o) == tp.network.action_mean(o));
    CHECK(back.network.value(o) == tp.network.value(o));
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(TrainedPolicy::load(path), MissingArtifact);
}

TEST_CASE("training bookkeeping and determinism") {
  Rng rng(9);
  InstancePool pool;
  for (int i = 0; i < 2; ++i) {
    Instance inst = oracle::random_instance(rng, 4, 2);
    inst.id = "t" + std::to_string(i);
    pool.push_back(std::make_shared<const TrainingInstance>(TrainingInstance{inst, 0.0}));
  }
  EAConfig cfg;
  cfg.population_size = 6;
  cfg.max_generations = 5;
  PpoHyperparams hp;
  hp.n_steps = 32;
  hp.batch_size = 8;
  hp.n_epochs = 2;
  hp.hidden_units = 8;
  const TrainingResult one = train(pool, 32, cfg, hp, 5);
  CHECK(one.updates == 1);
  CHECK(one.episode_rewards.size() == 6);

  const TrainingResult a = train(pool, 70, cfg, hp, 5);
  const TrainingResult b = train(pool, 70, cfg, hp, 5);
  CHECK(a.updates == 3);
  CHECK(a.curve.back().env_steps == 70);
  CHECK(a.episode_rewards == b.episode_rewards);
  CHECK(std::equal(a.policy.network.parameters().begin(), a.policy.network.parameters().end(),
                   b.policy.network.parameters().begin()));

  hp.n_envs = 2;
  hp.env_threads = 1;
  const TrainingResult serial = train(pool, 64, cfg, hp, 6);
  hp.env_threads = 2;
  const TrainingResult threaded = train(pool, 64, cfg, hp, 6);
  CHECK(serial.episode_rewards == threaded.episode_rewards);

  std::ostringstream csv;
  write_curve_csv(a.curve, csv);
  CHECK(csv.str().rfind("update_index,env_steps,mean_episode_reward\n1,32,", 0) == 0);
  CHECK_THROWS_AS(train(InstancePool{}, 10, cfg, hp, 1), EmptyPool);
}
