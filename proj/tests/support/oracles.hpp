// Independent reference computations shared by the unit and acceptance tests.
#ifndef CARBONDAC_TESTS_ORACLES_HPP_
#define CARBONDAC_TESTS_ORACLES_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "carbondac/instance.hpp"
#include "carbondac/rng.hpp"
#include "carbondac/schedule.hpp"

namespace oracle {

// Slot-by-slot recomputation: walk every slot, sum the power of every
// operation covering it.
inline double emissions(const carbondac::Instance& inst, const carbondac::Schedule& s) {
  double total = 0.0;
  for (int t = 0; t < inst.horizon_slots; ++t) {
    double demand = 0.0;
    for (int j = 0; j < inst.jobs; ++j) {
      for (int m = 0; m < inst.machines; ++m) {
        const int a = s.start_at(j, inst.machines, m);
        if (a <= t && t < a + inst.proc_at(j, m)) demand += inst.power_at(j, m);
      }
    }
    const double grid = std::max(0.0, demand - inst.renewable[t]);
    total += grid * inst.slot_hours * inst.grid_intensity[t];
  }
  return total;
}

// Earliest-start schedule for a sequence: no inserted idle time.
inline std::vector<int> earliest_starts(const carbondac::Instance& inst, const std::vector<int>& seq) {
  const int M = inst.machines;
  std::vector<int> start(static_cast<std::size_t>(inst.jobs) * M, 0);
  std::vector<int> machine_free(M, 0);
  for (int job : seq) {
    int ready = 0;
    for (int m = 0; m < M; ++m) {
      const int s = std::max(ready, machine_free[m]);
      start[static_cast<std::size_t>(job) * M + m] = s;
      ready = s + inst.proc_at(job, m);
      machine_free[m] = ready;
    }
  }
  return start;
}

// Schedule invariants checked directly from their definitions.
inline std::string violation(const carbondac::Instance& inst, const carbondac::Schedule& s) {
  const int M = inst.machines;
  const int J = inst.jobs;
  std::vector<int> seen(J, 0);
  for (int j : s.sequence) {
    if (j < 0 || j >= J || seen[j]++) return "sequence is not a permutation";
  }
  if (static_cast<int>(s.sequence.size()) != J) return "sequence length";
  for (int j = 0; j < J; ++j) {
    for (int m = 0; m < M; ++m) {
      const int a = s.start_at(j, M, m);
      if (a < 0) return "negative start";
      if (m > 0 && a < s.start_at(j, M, m - 1) + inst.proc_at(j, m - 1)) return "precedence";
    }
    if (s.start_at(j, M, M - 1) + inst.proc_at(j, M - 1) > inst.horizon_slots) return "horizon";
  }
  for (int m = 0; m < M; ++m) {
    for (std::size_t k = 1; k < s.sequence.size(); ++k) {
      const int prev = s.sequence[k - 1];
      const int cur = s.sequence[k];
      if (s.start_at(cur, M, m) < s.start_at(prev, M, m) + inst.proc_at(prev, m)) return "machine overlap";
    }
  }
  return {};
}

// Small random instance whose horizon is `slack` times the worst-case
// zero-idle makespan bound sum over machines of the largest job.
inline carbondac::Instance random_instance(carbondac::Rng& rng, int jobs, int machines, double slack = 1.6,
                                           int max_proc = 4) {
  carbondac::Instance inst;
  inst.id = "rand";
  inst.jobs = jobs;
  inst.machines = machines;
  inst.slot_hours = rng.uniform() < 0.5 ? 1.0 : 0.25;
  inst.horizon_days = 1;
  const std::size_t ops = static_cast<std::size_t>(jobs) * machines;
  inst.proc.resize(ops);
  inst.power.resize(ops);
  for (std::size_t k = 0; k < ops; ++k) {
    inst.proc[k] = static_cast<int>(rng.uniform_int(1, max_proc));
    inst.power[k] = rng.uniform(0.0, 40.0);
  }
  int bound = 0;
  for (int j = 0; j < jobs; ++j) {
    for (int m = 0; m < machines; ++m) bound += inst.proc_at(j, m);
  }
  inst.horizon_slots = static_cast<int>(std::ceil(slack * bound)) + 1;
  inst.renewable.resize(inst.horizon_slots);
  inst.grid_intensity.resize(inst.horizon_slots);
  for (int t = 0; t < inst.horizon_slots; ++t) {
    inst.renewable[t] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 60.0);
    inst.grid_intensity[t] = rng.uniform(50.0, 450.0);
  }
  return inst;
}

// Two-sided rank-sum p-value by listing every assignment of the pooled
// values to the first sample (bitmask over the pooled index set).
inline double rank_sum_p(const std::vector<double>& a, const std::vector<double>& b, double* u_out = nullptr) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const int n = static_cast<int>(pooled.size());
  const int na = static_cast<int>(a.size());
  std::vector<double> rank(n);
  for (int i = 0; i < n; ++i) {
    double less = 0.0;
    double equal = 0.0;
    for (int k = 0; k < n; ++k) {
      if (pooled[k] < pooled[i]) less += 1.0;
      if (pooled[k] == pooled[i]) equal += 1.0;
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  auto u_of = [&](std::uint32_t mask) {
    double r = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1U) r += rank[i];
    }
    return r - na * (na + 1) / 2.0;
  };
  const std::uint32_t observed = (1U << na) - 1U;
  const double u_obs = u_of(observed);
  if (u_out) *u_out = u_obs;
  const double centre = na * static_cast<double>(n - na) / 2.0;
  long hits = 0;
  long total = 0;
  for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
    if (std::popcount(mask) != na) continue;
    ++total;
    if (std::abs(u_of(mask) - centre) >= std::abs(u_obs - centre) - 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace oracle

#endif  // CARBONDAC_TESTS_ORACLES_HPP_
