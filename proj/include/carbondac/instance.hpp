#ifndef CARBONDAC_INSTANCE_HPP_
#define CARBONDAC_INSTANCE_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace carbondac {

inline constexpr int kInstanceSchemaVersion = 1;

// A carbon-aware permutation flow-shop instance. Time is discretized into
// integer slots of `slot_hours` hours each; every operation draws constant
// power for its whole duration.
struct Instance {
  std::string id;
  int machines = 0;
  int jobs = 0;
  int horizon_slots = 0;
  double slot_hours = 1.0;
  int horizon_days = 1;
  std::vector<int> proc;        // jobs x machines, row-major, in slots
  std::vector<double> power;    // jobs x machines, row-major, in kW
  std::vector<double> renewable;       // per slot, kW available on site
  std::vector<double> grid_intensity;  // per slot, gCO2 per kWh

  int proc_at(int job, int machine) const {
    return proc[static_cast<std::size_t>(job) * machines + machine];
  }
  double power_at(int job, int machine) const {
    return power[static_cast<std::size_t>(job) * machines + machine];
  }
  int operations() const { return jobs * machines; }

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Makespan of the earliest-start (no inserted idle time) schedule of a job
// sequence.
int zero_idle_makespan(const Instance& instance, std::span<const int> sequence);

// Checks dimensions, value ranges and the per-machine load bound
// (sum of processing times on each machine <= horizon). Throws
// DimensionMismatch or InfeasibleInstance.
void validate_instance(const Instance& instance);

nlohmann::json instance_to_json(const Instance& instance);
// Throws ParseError (field diagnostics) or SchemaVersionError.
Instance instance_from_json(const nlohmann::json& doc);

// Throws ParseError with the offending line for malformed text.
Instance parse_instance(const std::string& text);
std::string format_instance(const Instance& instance);

Instance load_instance(const std::filesystem::path& path);
void save_instance(const Instance& instance, const std::filesystem::path& path);

}  // namespace carbondac

#endif  // CARBONDAC_INSTANCE_HPP_
