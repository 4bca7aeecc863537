#ifndef CARBONDAC_EVOLVE_HPP_
#define CARBONDAC_EVOLVE_HPP_

#include <array>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "carbondac/instance.hpp"
#include "carbondac/rng.hpp"
#include "carbondac/schedule.hpp"

namespace carbondac {

struct EAConfig {
  int population_size = 250;
  int max_generations = 100;
  std::uint64_t rng_seed = 0;
  // Threads used to local-search and evaluate offspring. Results do not
  // depend on this value.
  int evaluation_threads = 1;

  void validate() const;
};

// The seven variation parameters, in action order.
struct DynamicParams {
  double crossover_rate = 0.85;       // fraction of offspring produced by crossover
  double job_swap_prob = 0.5;         // per-gene swap probability, job keys
  double pause_swap_prob = 0.5;       // per-gene swap probability, pause keys
  double job_mutation_prob = 0.05;
  double pause_mutation_prob = 0.05;
  double job_mutation_sigma = 0.2;
  double pause_mutation_sigma = 0.2;

  static constexpr std::size_t kSize = 7;
  std::array<double, kSize> to_array() const;
  static DynamicParams from_array(const std::array<double, kSize>& values);
  static const std::array<const char*, kSize>& names();

  // Throws ParameterOutOfRange.
  void validate() const;

  friend bool operator==(const DynamicParams&, const DynamicParams&) = default;
};

// Default column of the parameter overview.
DynamicParams default_params();
// Tuned column of the parameter overview.
DynamicParams tuned_params();

struct Individual {
  Chromosome chromosome;
  double fitness = 0.0;
};

struct Population {
  std::vector<Individual> members;  // sorted by ascending fitness
  int generation = 0;

  const Individual& best() const { return members.front(); }
};

struct GenerationStats {
  double best = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

GenerationStats population_stats(const Population& population);

Chromosome random_chromosome(const Instance& instance, Rng& rng);
Population initialize_population(const Instance& instance, int population_size, Rng rng);

// Controlled swap crossover. Throws DimensionMismatch.
std::pair<Chromosome, Chromosome> crossover(const Chromosome& parent_a, const Chromosome& parent_b,
                                            double job_swap_prob, double pause_swap_prob, Rng& rng);

// Additive normal perturbation of each key with the given probability,
// clamped to [0, 1]. Throws ParameterOutOfRange.
Chromosome mutate(const Chromosome& chromosome, double job_prob, double pause_prob, double job_sigma,
                  double pause_sigma, Rng& rng);

// One left-to-right pass of first-improvement adjacent job swaps. Updates
// `chromosome` in place and returns its fitness (never above `fitness`).
double local_search(const Instance& instance, Chromosome& chromosome, double fitness);
Chromosome local_search(const Instance& instance, const Chromosome& chromosome);

// Number of offspring produced by crossover: round-half-up of rate * size.
int crossover_offspring_count(double crossover_rate, int population_size);

// One elitist (mu + lambda) generation. Offspring evaluation may be spread
// over `evaluation_threads`; every random draw happens before that, in a
// fixed order.
Population step_generation(const Instance& instance, const Population& population, const DynamicParams& params,
                           Rng rng, int evaluation_threads = 1);

struct StaticRunResult {
  double best_fitness = 0.0;
  Chromosome best;
  std::vector<GenerationStats> trace;  // max_generations + 1 entries

  std::vector<double> per_generation_best() const;
};

// Fixed-parameter run. Generation g draws from Rng(seed).split(g); the
// initial population uses split(0).
StaticRunResult run_static(const Instance& instance, const EAConfig& config, const DynamicParams& params);

// CSV with columns generation,best_fitness,mean_fitness,std_fitness.
void write_trace_csv(const std::vector<GenerationStats>& trace, std::ostream& out);

}  // namespace carbondac

#endif  // CARBONDAC_EVOLVE_HPP_
