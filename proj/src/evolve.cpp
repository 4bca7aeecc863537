#include "carbondac/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "carbondac/errors.hpp"
#include "carbondac/io.hpp"
#include "carbondac/parallel.hpp"

namespace carbondac {

void EAConfig::validate() const {
  if (population_size < 2) throw ParameterOutOfRange("population_size must be >= 2");
  if (max_generations < 0) throw ParameterOutOfRange("max_generations must be >= 0");
}

std::array<double, DynamicParams::kSize> DynamicParams::to_array() const {
  return {crossover_rate,      job_swap_prob,      pause_swap_prob,     job_mutation_prob,
          pause_mutation_prob, job_mutation_sigma, pause_mutation_sigma};
}

DynamicParams DynamicParams::from_array(const std::array<double, kSize>& v) {
  return DynamicParams{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

const std::array<const char*, DynamicParams::kSize>& DynamicParams::names() {
  static const std::array<const char*, kSize> kNames = {
      "crossover_rate",      "job_swap_prob",      "pause_swap_prob",     "job_mutation_prob",
      "pause_mutation_prob", "job_mutation_sigma", "pause_mutation_sigma"};
  return kNames;
}

void DynamicParams::validate() const {
  const auto values = to_array();
  for (std::size_t i = 0; i < kSize; ++i) {
    const double v = values[i];
    const bool sigma = i >= 5;
    const bool ok = std::isfinite(v) && (sigma ? v > 0.0 : (v >= 0.0 && v <= 1.0));
    if (!ok) {
      throw ParameterOutOfRange(std::string(names()[i]) + " = " + format_double(v) +
                                (sigma ? " must be > 0" : " must lie in [0, 1]"));
    }
  }
}

DynamicParams default_params() { return DynamicParams{0.85, 0.5, 0.5, 0.05, 0.05, 0.2, 0.2}; }

DynamicParams tuned_params() { return DynamicParams{0.885, 0.418, 0.133, 0.017, 0.014, 0.012, 0.233}; }

GenerationStats population_stats(const Population& pop) {
  if (pop.members.empty()) throw EmptyPopulation("population has no members");
  GenerationStats s;
  s.best = pop.members.front().fitness;
  double sum = 0.0;
  for (const auto& ind : pop.members) {
    s.best = std::min(s.best, ind.fitness);
    sum += ind.fitness;
  }
  const double n = static_cast<double>(pop.members.size());
  s.mean = sum / n;
  double sq = 0.0;
  for (const auto& ind : pop.members) sq += (ind.fitness - s.mean) * (ind.fitness - s.mean);
  s.std = std::sqrt(sq / n);
  return s;
}

Chromosome random_chromosome(const Instance& inst, Rng& rng) {
  Chromosome c = make_chromosome(inst, 0.0, 0.0);
  for (auto& k : c.job_keys) k = rng.uniform();
  for (auto& k : c.pause_keys) k = rng.uniform();
  return c;
}

namespace {

void sort_members(std::vector<Individual>& members) {
  std::stable_sort(members.begin(), members.end(),
                   [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
}

}  // namespace

Population initialize_population(const Instance& inst, int population_size, Rng rng) {
  Population pop;
  pop.members.reserve(static_cast<std::size_t>(population_size));
  for (int i = 0; i < population_size; ++i) {
    Individual ind;
    ind.chromosome = random_chromosome(inst, rng);
    ind.fitness = chromosome_fitness(inst, ind.chromosome);
    pop.members.push_back(std::move(ind));
  }
  sort_members(pop.members);
  pop.generation = 0;
  return pop;
}

std::pair<Chromosome, Chromosome> crossover(const Chromosome& a, const Chromosome& b, double job_swap_prob,
                                            double pause_swap_prob, Rng& rng) {
  if (a.job_keys.size() != b.job_keys.size() || a.pause_keys.size() != b.pause_keys.size()) {
    throw DimensionMismatch("crossover parents differ in size");
  }
  std::pair<Chromosome, Chromosome> children{a, b};
  for (std::size_t i = 0; i < a.job_keys.size(); ++i) {
    if (rng.bernoulli(job_swap_prob)) std::swap(children.first.job_keys[i], children.second.job_keys[i]);
  }
  for (std::size_t i = 0; i < a.pause_keys.size(); ++i) {
    if (rng.bernoulli(pause_swap_prob)) std::swap(children.first.pause_keys[i], children.second.pause_keys[i]);
  }
  return children;
}

Chromosome mutate(const Chromosome& chromosome, double job_prob, double pause_prob, double job_sigma,
                  double pause_sigma, Rng& rng) {
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterOutOfRange(std::string(name) + " must lie in [0, 1]");
  };
  probability(job_prob, "job mutation probability");
  probability(pause_prob, "pause mutation probability");
  if (!(job_sigma > 0.0) || !(pause_sigma > 0.0) || !std::isfinite(job_sigma) || !std::isfinite(pause_sigma)) {
    throw ParameterOutOfRange("mutation standard deviations must be positive");
  }
  Chromosome out = chromosome;
  for (auto& k : out.job_keys) {
    if (rng.bernoulli(job_prob)) k = std::clamp(k + rng.normal(0.0, job_sigma), 0.0, 1.0);
  }
  for (auto& k : out.pause_keys) {
    if (rng.bernoulli(pause_prob)) k = std::clamp(k + rng.normal(0.0, pause_sigma), 0.0, 1.0);
  }
  return out;
}

double local_search(const Instance& inst, Chromosome& chrom, double fitness) {
  std::vector<int> sequence = decode_sequence(chrom.job_keys);
  for (std::size_t i = 0; i + 1 < sequence.size(); ++i) {
    const int a = sequence[i];
    const int b = sequence[i + 1];
    std::swap(chrom.job_keys[a], chrom.job_keys[b]);
    const double candidate = chromosome_fitness(inst, chrom);
    if (candidate < fitness) {
      fitness = candidate;
      sequence = decode_sequence(chrom.job_keys);
    } else {
      std::swap(chrom.job_keys[a], chrom.job_keys[b]);
    }
  }
  return fitness;
}

Chromosome local_search(const Instance& inst, const Chromosome& chromosome) {
  Chromosome out = chromosome;
  local_search(inst, out, chromosome_fitness(inst, out));
  return out;
}

int crossover_offspring_count(double crossover_rate, int population_size) {
  return static_cast<int>(std::floor(crossover_rate * population_size + 0.5));
}

Population step_generation(const Instance& inst, const Population& pop, const DynamicParams& params, Rng rng,
                           int evaluation_threads) {
  params.validate();
  const int size = static_cast<int>(pop.members.size());
  if (size == 0) throw EmptyPopulation("cannot step an empty population");
  const int n_cross = std::min(size, crossover_offspring_count(params.crossover_rate, size));

  Rng selection = rng.split(0);
  Rng crossover_stream = rng.split(1);
  Rng mutation_stream = rng.split(2);

  std::vector<Individual> offspring;
  offspring.reserve(static_cast<std::size_t>(size));
  for (std::uint64_t pair = 0; static_cast<int>(offspring.size()) < n_cross; ++pair) {
    const auto ia = selection.below(static_cast<std::uint64_t>(size));
    auto ib = selection.below(static_cast<std::uint64_t>(size - 1));
    if (ib >= ia) ++ib;
    Rng pair_rng = crossover_stream.split(pair);
    auto [ca, cb] = crossover(pop.members[ia].chromosome, pop.members[ib].chromosome, params.job_swap_prob,
                              params.pause_swap_prob, pair_rng);
    offspring.push_back(Individual{std::move(ca), 0.0});
    if (static_cast<int>(offspring.size()) < n_cross) offspring.push_back(Individual{std::move(cb), 0.0});
  }
  while (static_cast<int>(offspring.size()) < size) {
    offspring.push_back(pop.members[selection.below(static_cast<std::uint64_t>(size))]);
  }
  for (std::size_t i = 0; i < offspring.size(); ++i) {
    Rng child_rng = mutation_stream.split(i);
    offspring[i].chromosome =
        mutate(offspring[i].chromosome, params.job_mutation_prob, params.pause_mutation_prob,
               params.job_mutation_sigma, params.pause_mutation_sigma, child_rng);
  }

  parallel_for(offspring.size(), evaluation_threads, [&](std::size_t i) {
    Individual& child = offspring[i];
    child.fitness = local_search(inst, child.chromosome, chromosome_fitness(inst, child.chromosome));
  });

  Population next;
  next.members.reserve(pop.members.size() + offspring.size());
  next.members = pop.members;
  for (auto& child : offspring) next.members.push_back(std::move(child));
  sort_members(next.members);
  next.members.resize(static_cast<std::size_t>(size));
  next.generation = pop.generation + 1;
  return next;
}

std::vector<double> StaticRunResult::per_generation_best() const {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& s : trace) out.push_back(s.best);
  return out;
}

StaticRunResult run_static(const Instance& inst, const EAConfig& config, const DynamicParams& params) {
  config.validate();
  params.validate();
  validate_instance(inst);
  const Rng run(config.rng_seed);
  Population pop = initialize_population(inst, config.population_size, run.split(0));
  StaticRunResult result;
  result.trace.reserve(static_cast<std::size_t>(config.max_generations) + 1);
  result.trace.push_back(population_stats(pop));
  for (int g = 1; g <= config.max_generations; ++g) {
    pop = step_generation(inst, pop, params, run.split(static_cast<std::uint64_t>(g)), config.evaluation_threads);
    result.trace.push_back(population_stats(pop));
  }
  result.best_fitness = pop.best().fitness;
  result.best = pop.best().chromosome;
  return result;
}

void write_trace_csv(const std::vector<GenerationStats>& trace, std::ostream& out) {
  out << "generation,best_fitness,mean_fitness,std_fitness\n";
  for (std::size_t g = 0; g < trace.size(); ++g) {
    out << g << ',' << format_double(trace[g].best) << ',' << format_double(trace[g].mean) << ','
        << format_double(trace[g].std) << '\n';
  }
}

}  // namespace carbondac
