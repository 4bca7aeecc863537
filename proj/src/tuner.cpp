#include "carbondac/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "carbondac/dac_env.hpp"
#include "carbondac/errors.hpp"
#include "carbondac/io.hpp"
#include "carbondac/parallel.hpp"

namespace carbondac {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Mixture of boundary-truncated Gaussian kernels plus a uniform prior.
class Parzen {
 public:
  Parzen(std::vector<double> points, double lo, double hi, const TpeOptions& options)
      : points_(std::move(points)), lo_(lo), hi_(hi), prior_weight_(options.prior_weight) {
    const double range = hi - lo;
    const double m = static_cast<double>(points_.size());
    double sd = 0.0;
    if (points_.size() > 1) {
      const double mu = std::accumulate(points_.begin(), points_.end(), 0.0) / m;
      for (double p : points_) sd += (p - mu) * (p - mu);
      sd = std::sqrt(sd / (m - 1.0));
    }
    // Silverman's rule of thumb.
    const double silverman = 1.06 * sd * std::pow(m, -0.2);
    bandwidth_ = std::max(silverman, options.min_bandwidth_fraction * range);
    mass_.reserve(points_.size());
    for (double p : points_) mass_.push_back(normal_cdf((hi - p) / bandwidth_) - normal_cdf((lo - p) / bandwidth_));
  }

  double density(double x) const {
    double acc = prior_weight_ / (hi_ - lo_);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double z = (x - points_[i]) / bandwidth_;
      acc += std::exp(-0.5 * z * z) / (bandwidth_ * std::sqrt(2.0 * std::numbers::pi) * mass_[i]);
    }
    return acc / (static_cast<double>(points_.size()) + prior_weight_);
  }

  double sample(Rng& rng) const {
    const double total = static_cast<double>(points_.size()) + prior_weight_;
    const double pick = rng.uniform() * total;
    if (pick >= static_cast<double>(points_.size())) return rng.uniform(lo_, hi_);
    const double centre = points_[static_cast<std::size_t>(pick)];
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double x = rng.normal(centre, bandwidth_);
      if (x >= lo_ && x <= hi_) return x;
    }
    return std::clamp(centre, lo_, hi_);
  }

 private:
  std::vector<double> points_;
  double lo_;
  double hi_;
  double prior_weight_;
  double bandwidth_ = 1.0;
  std::vector<double> mass_;
};

}  // namespace

DynamicParams suggest(std::span<const Trial> history, Rng& rng, const TpeOptions& options) {
  const auto lo = action_bounds().min.to_array();
  const auto hi = action_bounds().max.to_array();
  std::array<double, DynamicParams::kSize> out{};
  if (static_cast<int>(history.size()) < std::max(options.startup_trials, 2)) {
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = rng.uniform(lo[d], hi[d]);
    return DynamicParams::from_array(out);
  }

  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].score < history[b].score; });
  const std::size_t n_good = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(options.good_fraction * static_cast<double>(history.size()))), 1,
      history.size() - 1);

  std::vector<Parzen> good;
  std::vector<Parzen> bad;
  for (std::size_t d = 0; d < out.size(); ++d) {
    std::vector<double> g;
    std::vector<double> b;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const double v = std::clamp(history[order[k]].params.to_array()[d], lo[d], hi[d]);
      (k < n_good ? g : b).push_back(v);
    }
    good.emplace_back(std::move(g), lo[d], hi[d], options);
    bad.emplace_back(std::move(b), lo[d], hi[d], options);
  }

  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < std::max(1, options.candidates); ++c) {
    std::array<double, DynamicParams::kSize> candidate{};
    double score = 0.0;
    for (std::size_t d = 0; d < candidate.size(); ++d) {
      candidate[d] = good[d].sample(rng);
      score += std::log(good[d].density(candidate[d])) - std::log(bad[d].density(candidate[d]));
    }
    if (score > best_score) {
      best_score = score;
      out = candidate;
    }
  }
  return DynamicParams::from_array(out);
}

int TuningBudget::effective_trials(int population_size) const {
  long cap = trials;
  if (cap_unit == BudgetUnit::kGenerations && generations_per_trial_total() > 0) {
    cap = std::min(cap, total_iterations / generations_per_trial_total());
  } else if (cap_unit == BudgetUnit::kEvaluations && evaluations_per_trial(population_size) > 0) {
    cap = std::min(cap, total_iterations / evaluations_per_trial(population_size));
  }
  return static_cast<int>(std::max(0L, cap));
}

std::string TuningBudget::describe(int population_size) const {
  const int run = effective_trials(population_size);
  std::ostringstream s;
  s << "declared: trials=" << trials << " instances_per_trial=" << instances_per_trial
    << " generations_per_trial=" << generations_per_trial << " total_iterations=" << total_iterations
    << " cap_unit="
    << (cap_unit == BudgetUnit::kTrials ? "trials" : cap_unit == BudgetUnit::kGenerations ? "generations" : "evaluations")
    << "; per trial: generations=" << generations_per_trial_total()
    << " evaluations=" << evaluations_per_trial(population_size) << "; planned trials=" << run
    << " generations=" << generations_per_trial_total() * run
    << " evaluations=" << evaluations_per_trial(population_size) * run;
  return s.str();
}

TuningResult run_tuning(const std::vector<Instance>& instances, const EAConfig& config, const TuningBudget& budget,
                        std::uint64_t seed, const TpeOptions& options, int threads) {
  if (instances.empty()) throw EmptyPool("tuning needs at least one instance");
  if (static_cast<int>(instances.size()) != budget.instances_per_trial) {
    throw ParameterOutOfRange("budget declares " + std::to_string(budget.instances_per_trial) +
                              " instances per trial but " + std::to_string(instances.size()) + " were given");
  }
  const Rng master(seed);
  Rng suggest_rng = master.split(1);
  std::vector<EAConfig> run_configs(instances.size(), config);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    run_configs[i].max_generations = budget.generations_per_trial;
    run_configs[i].rng_seed = hash_combine(seed, hash_string(instances[i].id));
  }

  TuningResult result;
  result.log.push_back(budget.describe(config.population_size));
  const int trials = budget.effective_trials(config.population_size);
  for (int t = 0; t < trials; ++t) {
    Trial trial;
    trial.index = t;
    trial.params = suggest(result.history, suggest_rng, options);
    trial.objectives.assign(instances.size(), 0.0);
    parallel_for(instances.size(), threads, [&](std::size_t i) {
      trial.objectives[i] = run_static(instances[i], run_configs[i], trial.params).best_fitness;
    });
    trial.score = std::accumulate(trial.objectives.begin(), trial.objectives.end(), 0.0) /
                  static_cast<double>(trial.objectives.size());
    result.generations_consumed += budget.generations_per_trial_total();
    result.evaluations_consumed += budget.evaluations_per_trial(config.population_size);
    if (result.history.empty() || trial.score < result.best_score) {
      result.best_score = trial.score;
      result.best_params = trial.params;
    }
    result.history.push_back(std::move(trial));
  }
  if (result.history.empty()) throw ParameterOutOfRange("tuning budget allows zero trials");
  std::ostringstream done;
  done << "consumed: trials=" << result.history.size() << " generations=" << result.generations_consumed
       << " evaluations=" << result.evaluations_consumed << " best_score=" << format_double(result.best_score);
  result.log.push_back(done.str());
  return result;
}

void write_history_csv(const std::vector<Trial>& history, std::ostream& out) {
  out << "trial_index";
  for (const char* name : DynamicParams::names()) out << ',' << name;
  out << ",score\n";
  for (const auto& t : history) {
    out << t.index;
    for (double v : t.params.to_array()) out << ',' << format_double(v);
    out << ',' << format_double(t.score) << '\n';
  }
}

}  // namespace carbondac
