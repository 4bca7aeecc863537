#include "carbondac/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "carbondac/errors.hpp"

namespace carbondac {

namespace {

// Emissions for validated start slots.
double emissions_unchecked(const Instance& inst, std::span<const int> start) {
  thread_local std::vector<double> demand;
  demand.assign(static_cast<std::size_t>(inst.horizon_slots), 0.0);
  for (int j = 0; j < inst.jobs; ++j) {
    for (int m = 0; m < inst.machines; ++m) {
      const std::size_t op = static_cast<std::size_t>(j) * inst.machines + m;
      const double power = inst.power[op];
      const int s = start[op];
      const int e = s + inst.proc[op];
      for (int t = s; t < e; ++t) demand[t] += power;
    }
  }
  double total = 0.0;
  for (int t = 0; t < inst.horizon_slots; ++t) {
    const double grid = demand[t] - inst.renewable[t];
    if (grid > 0.0) total += grid * inst.slot_hours * inst.grid_intensity[t];
  }
  return total;
}

void decode_starts(const Instance& inst, const Chromosome& chrom, std::span<const int> sequence, std::span<int> start) {
  const int jobs = inst.jobs;
  const int machines = inst.machines;
  const int horizon = inst.horizon_slots;

  // Latest starts, indexed by sequence position.
  thread_local std::vector<int> latest;
  latest.resize(static_cast<std::size_t>(jobs) * machines);
  for (int k = jobs - 1; k >= 0; --k) {
    const int job = sequence[k];
    for (int m = machines - 1; m >= 0; --m) {
      int bound = horizon;
      if (m + 1 < machines) bound = std::min(bound, latest[static_cast<std::size_t>(k) * machines + m + 1]);
      if (k + 1 < jobs) bound = std::min(bound, latest[static_cast<std::size_t>(k + 1) * machines + m]);
      latest[static_cast<std::size_t>(k) * machines + m] = bound - inst.proc_at(job, m);
    }
  }
  if (latest[0] < 0) {
    throw InfeasibleInstance("instance '" + inst.id + "': zero-idle makespan " +
                             std::to_string(horizon - latest[0]) + " exceeds horizon " + std::to_string(horizon));
  }

  thread_local std::vector<int> machine_free;
  machine_free.assign(static_cast<std::size_t>(machines), 0);
  for (int k = 0; k < jobs; ++k) {
    const int job = sequence[k];
    int job_ready = 0;
    for (int m = 0; m < machines; ++m) {
      const int earliest = std::max(job_ready, machine_free[m]);
      const int late = latest[static_cast<std::size_t>(k) * machines + m];
      const double key = chrom.pause(m, job, jobs);
      // Rounded half down.
      int offset = static_cast<int>(std::ceil(key * (late - earliest) - 0.5));
      offset = std::clamp(offset, 0, late - earliest);
      const int s = earliest + offset;
      start[static_cast<std::size_t>(job) * machines + m] = s;
      job_ready = s + inst.proc_at(job, m);
      machine_free[m] = job_ready;
    }
  }
}

}  // namespace

Chromosome make_chromosome(const Instance& instance, double job_key, double pause_key) {
  Chromosome c;
  c.job_keys.assign(static_cast<std::size_t>(instance.jobs), job_key);
  c.pause_keys.assign(static_cast<std::size_t>(instance.jobs) * instance.machines, pause_key);
  return c;
}

std::vector<int> decode_sequence(std::span<const double> job_keys) {
  std::vector<int> order(job_keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return job_keys[a] < job_keys[b]; });
  return order;
}

void check_dimensions(const Instance& inst, const Chromosome& chrom) {
  if (chrom.job_keys.size() != static_cast<std::size_t>(inst.jobs) ||
      chrom.pause_keys.size() != static_cast<std::size_t>(inst.jobs) * inst.machines) {
    throw DimensionMismatch("chromosome does not match instance '" + inst.id + "' (" + std::to_string(inst.jobs) +
                            " jobs, " + std::to_string(inst.machines) + " machines)");
  }
}

Schedule decode_schedule(const Instance& inst, const Chromosome& chrom) {
  check_dimensions(inst, chrom);
  Schedule s;
  s.sequence = decode_sequence(chrom.job_keys);
  s.start.assign(static_cast<std::size_t>(inst.jobs) * inst.machines, 0);
  decode_starts(inst, chrom, s.sequence, s.start);
  s.fitness = emissions_unchecked(inst, s.start);
  return s;
}

double chromosome_fitness(const Instance& inst, const Chromosome& chrom) {
  thread_local std::vector<int> sequence;
  thread_local std::vector<int> start;
  sequence.resize(chrom.job_keys.size());
  std::iota(sequence.begin(), sequence.end(), 0);
  std::stable_sort(sequence.begin(), sequence.end(),
                   [&](int a, int b) { return chrom.job_keys[a] < chrom.job_keys[b]; });
  start.resize(static_cast<std::size_t>(inst.jobs) * inst.machines);
  decode_starts(inst, chrom, sequence, start);
  return emissions_unchecked(inst, start);
}

std::optional<std::string> find_schedule_violation(const Instance& inst, const Schedule& s) {
  const int jobs = inst.jobs;
  const int machines = inst.machines;
  if (s.sequence.size() != static_cast<std::size_t>(jobs) ||
      s.start.size() != static_cast<std::size_t>(jobs) * machines) {
    return "schedule dimensions do not match the instance";
  }
  std::vector<char> seen(static_cast<std::size_t>(jobs), 0);
  for (int job : s.sequence) {
    if (job < 0 || job >= jobs || seen[job]) return "sequence is not a permutation";
    seen[job] = 1;
  }
  for (int k = 0; k < jobs; ++k) {
    const int job = s.sequence[k];
    for (int m = 0; m < machines; ++m) {
      const int st = s.start_at(job, machines, m);
      if (st < 0) return "negative start for job " + std::to_string(job);
      if (m > 0 && st < s.start_at(job, machines, m - 1) + inst.proc_at(job, m - 1)) {
        return "precedence violated for job " + std::to_string(job) + " on machine " + std::to_string(m);
      }
      if (k > 0) {
        const int prev = s.sequence[k - 1];
        if (st < s.start_at(prev, machines, m) + inst.proc_at(prev, m)) {
          return "machine " + std::to_string(m) + " overlap between jobs " + std::to_string(prev) + " and " +
                 std::to_string(job);
        }
      }
    }
    if (s.start_at(job, machines, machines - 1) + inst.proc_at(job, machines - 1) > inst.horizon_slots) {
      return "job " + std::to_string(job) + " finishes after the horizon";
    }
  }
  return std::nullopt;
}

double evaluate_emissions(const Instance& inst, const Schedule& s) {
  if (auto violation = find_schedule_violation(inst, s)) throw InvalidSchedule(*violation);
  return emissions_unchecked(inst, s.start);
}

int schedule_makespan(const Instance& inst, const Schedule& s) {
  int makespan = 0;
  for (int j = 0; j < inst.jobs; ++j) {
    makespan = std::max(makespan, s.start_at(j, inst.machines, inst.machines - 1) + inst.proc_at(j, inst.machines - 1));
  }
  return makespan;
}

void write_schedule_csv(const Instance& inst, const Schedule& s, std::ostream& out) {
  out << "job,machine,start_slot,end_slot\n";
  for (int job : s.sequence) {
    for (int m = 0; m < inst.machines; ++m) {
      const int st = s.start_at(job, inst.machines, m);
      out << job << ',' << m << ',' << st << ',' << st + inst.proc_at(job, m) << '\n';
    }
  }
}

}  // namespace carbondac
