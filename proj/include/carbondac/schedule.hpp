#ifndef CARBONDAC_SCHEDULE_HPP_
#define CARBONDAC_SCHEDULE_HPP_

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "carbondac/instance.hpp"

namespace carbondac {

// Dual random-key genotype. `pause_keys` is machines x jobs, row-major and
// indexed by job id, so a job's idle-time keys travel with the job when
// the sequence changes.
struct Chromosome {
  std::vector<double> job_keys;
  std::vector<double> pause_keys;

  double& pause(int machine, int job, int jobs) {
    return pause_keys[static_cast<std::size_t>(machine) * jobs + job];
  }
  double pause(int machine, int job, int jobs) const {
    return pause_keys[static_cast<std::size_t>(machine) * jobs + job];
  }

  friend bool operator==(const Chromosome&, const Chromosome&) = default;
};

struct Schedule {
  std::vector<int> sequence;  // job ids in processing order
  std::vector<int> start;     // jobs x machines, row-major, indexed by job id
  double fitness = 0.0;       // gCO2

  int start_at(int job, int machines, int machine) const {
    return start[static_cast<std::size_t>(job) * machines + machine];
  }
};

Chromosome make_chromosome(const Instance& instance, double job_key, double pause_key);

// Ascending stable argsort; ties keep the lower job index first.
std::vector<int> decode_sequence(std::span<const double> job_keys);

// Throws DimensionMismatch or InfeasibleInstance.
void check_dimensions(const Instance& instance, const Chromosome& chromosome);

// Places every operation between its earliest start (given already placed
// predecessors) and its latest start (backward zero-idle recursion from the
// horizon) by interpolating with the pause key. Fills in the fitness.
Schedule decode_schedule(const Instance& instance, const Chromosome& chromosome);

// Returns a description of the first violated schedule invariant, if any.
std::optional<std::string> find_schedule_violation(const Instance& instance, const Schedule& schedule);

// Scope-2 emissions in grams. Throws InvalidSchedule.
double evaluate_emissions(const Instance& instance, const Schedule& schedule);

// decode + evaluate without re-validating the decoder's output.
double chromosome_fitness(const Instance& instance, const Chromosome& chromosome);

// Debugging objective.
int schedule_makespan(const Instance& instance, const Schedule& schedule);

// CSV with columns job,machine,start_slot,end_slot.
void write_schedule_csv(const Instance& instance, const Schedule& schedule, std::ostream& out);

}  // namespace carbondac

#endif  // CARBONDAC_SCHEDULE_HPP_
