#include "carbondac/instance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "carbondac/errors.hpp"
#include "carbondac/io.hpp"

namespace carbondac {

using nlohmann::json;

int zero_idle_makespan(const Instance& instance, std::span<const int> sequence) {
  const int machines = instance.machines;
  std::vector<int> finish(static_cast<std::size_t>(machines), 0);
  for (int job : sequence) {
    int prev_machine_finish = 0;
    for (int m = 0; m < machines; ++m) {
      const int start = std::max(finish[m], prev_machine_finish);
      finish[m] = start + instance.proc_at(job, m);
      prev_machine_finish = finish[m];
    }
  }
  return machines > 0 ? finish.back() : 0;
}

void validate_instance(const Instance& inst) {
  if (inst.machines <= 0 || inst.jobs <= 0 || inst.horizon_slots <= 0 || inst.horizon_days <= 0) {
    throw DimensionMismatch("instance '" + inst.id + "': machines, jobs, horizon_slots and horizon_days must be positive");
  }
  if (!(inst.slot_hours > 0.0) || !std::isfinite(inst.slot_hours)) {
    throw DimensionMismatch("instance '" + inst.id + "': slot_hours must be positive");
  }
  const auto ops = static_cast<std::size_t>(inst.jobs) * inst.machines;
  const auto horizon = static_cast<std::size_t>(inst.horizon_slots);
  if (inst.proc.size() != ops || inst.power.size() != ops) {
    throw DimensionMismatch("instance '" + inst.id + "': proc/power must be jobs x machines");
  }
  if (inst.renewable.size() != horizon || inst.grid_intensity.size() != horizon) {
    throw DimensionMismatch("instance '" + inst.id + "': renewable/grid_intensity must have horizon_slots entries");
  }
  for (int p : inst.proc) {
    if (p <= 0) throw DimensionMismatch("instance '" + inst.id + "': processing times must be positive");
  }
  auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!std::all_of(inst.power.begin(), inst.power.end(), non_negative) ||
      !std::all_of(inst.renewable.begin(), inst.renewable.end(), non_negative) ||
      !std::all_of(inst.grid_intensity.begin(), inst.grid_intensity.end(), non_negative)) {
    throw DimensionMismatch("instance '" + inst.id + "': power, renewable and intensity must be finite and non-negative");
  }
  for (int m = 0; m < inst.machines; ++m) {
    long load = 0;
    for (int j = 0; j < inst.jobs; ++j) load += inst.proc_at(j, m);
    if (load > inst.horizon_slots) {
      throw InfeasibleInstance("instance '" + inst.id + "': machine " + std::to_string(m) + " load " +
                               std::to_string(load) + " exceeds horizon " + std::to_string(inst.horizon_slots));
    }
  }
}

json instance_to_json(const Instance& inst) {
  json doc;
  doc["schema_version"] = kInstanceSchemaVersion;
  doc["id"] = inst.id;
  doc["units"] = {
      {"proc", "slots"},
      {"slot_hours", "hours per slot"},
      {"power", "kW"},
      {"renewable", "kW"},
      {"grid_intensity", "gCO2/kWh"},
  };
  doc["machines"] = inst.machines;
  doc["jobs"] = inst.jobs;
  doc["horizon_slots"] = inst.horizon_slots;
  doc["slot_hours"] = inst.slot_hours;
  doc["horizon_days"] = inst.horizon_days;
  json proc = json::array();
  json power = json::array();
  for (int j = 0; j < inst.jobs; ++j) {
    json prow = json::array();
    json wrow = json::array();
    for (int m = 0; m < inst.machines; ++m) {
      prow.push_back(inst.proc_at(j, m));
      wrow.push_back(inst.power_at(j, m));
    }
    proc.push_back(std::move(prow));
    power.push_back(std::move(wrow));
  }
  doc["proc"] = std::move(proc);
  doc["power"] = std::move(power);
  doc["renewable"] = inst.renewable;
  doc["grid_intensity"] = inst.grid_intensity;
  return doc;
}

namespace {

const json& require(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) throw ParseError(std::string("missing field '") + field + "'");
  return *it;
}

template <typename T>
T scalar(const json& doc, const char* field) {
  const json& v = require(doc, field);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ParseError(std::string("field '") + field + "' must be a string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ParseError(std::string("field '") + field + "' must be an integer");
  } else {
    if (!v.is_number()) throw ParseError(std::string("field '") + field + "' must be a number");
  }
  return v.get<T>();
}

template <typename T>
void read_matrix(const json& doc, const char* field, int rows, int cols, std::vector<T>& out) {
  const json& v = require(doc, field);
  if (!v.is_array() || static_cast<int>(v.size()) != rows) {
    throw ParseError(std::string("field '") + field + "': expected " + std::to_string(rows) + " rows");
  }
  out.clear();
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = v[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ParseError(std::string("field '") + field + "' row " + std::to_string(r) + ": expected " +
                       std::to_string(cols) + " entries, got " + std::to_string(row.is_array() ? row.size() : 0));
    }
    for (int c = 0; c < cols; ++c) {
      const json& e = row[c];
      const bool ok = std::is_integral_v<T> ? e.is_number_integer() : e.is_number();
      if (!ok) {
        throw ParseError(std::string("field '") + field + "' row " + std::to_string(r) + " column " +
                         std::to_string(c) + ": wrong type");
      }
      out.push_back(e.get<T>());
    }
  }
}

void read_vector(const json& doc, const char* field, int length, std::vector<double>& out) {
  const json& v = require(doc, field);
  if (!v.is_array() || static_cast<int>(v.size()) != length) {
    throw ParseError(std::string("field '") + field + "': expected " + std::to_string(length) + " entries");
  }
  out.clear();
  out.reserve(static_cast<std::size_t>(length));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ParseError(std::string("field '") + field + "' entry " + std::to_string(i) + ": not a number");
    out.push_back(v[i].get<double>());
  }
}

}  // namespace

Instance instance_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("instance document must be an object");
  const int version = scalar<int>(doc, "schema_version");
  if (version != kInstanceSchemaVersion) {
    throw SchemaVersionError("unsupported instance schema_version " + std::to_string(version));
  }
  Instance inst;
  inst.id = scalar<std::string>(doc, "id");
  inst.machines = scalar<int>(doc, "machines");
  inst.jobs = scalar<int>(doc, "jobs");
  inst.horizon_slots = scalar<int>(doc, "horizon_slots");
  inst.slot_hours = scalar<double>(doc, "slot_hours");
  inst.horizon_days = scalar<int>(doc, "horizon_days");
  if (inst.machines <= 0 || inst.jobs <= 0 || inst.horizon_slots <= 0) {
    throw ParseError("machines, jobs and horizon_slots must be positive");
  }
  read_matrix(doc, "proc", inst.jobs, inst.machines, inst.proc);
  read_matrix(doc, "power", inst.jobs, inst.machines, inst.power);
  read_vector(doc, "renewable", inst.horizon_slots, inst.renewable);
  read_vector(doc, "grid_intensity", inst.horizon_slots, inst.grid_intensity);
  validate_instance(inst);
  return inst;
}

Instance parse_instance(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto pos = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
    throw ParseError("line " + std::to_string(line) + ": " + e.what());
  }
  return instance_from_json(doc);
}

std::string format_instance(const Instance& instance) { return instance_to_json(instance).dump(1) + "\n"; }

Instance load_instance(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_instance(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_instance(const Instance& instance, const std::filesystem::path& path) {
  write_file_atomic(path, format_instance(instance));
}

}  // namespace carbondac
