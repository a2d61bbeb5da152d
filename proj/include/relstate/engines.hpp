#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "relstate/scenario.hpp"

namespace relstate::engines {

using scenario::Json;

// One tolerance comparison: passes when lo <= value <= hi.
struct Check {
  std::string name;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool pass() const { return value >= lo && value <= hi; }
};

// Plot data. Cells are numbers or strings.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
};

struct EngineResult {
  std::string key_metric;
  double key_value = 0.0;
  std::vector<Check> checks;
  Table table;
  Json details = Json::object();

  bool passed() const;
};

EngineResult run(const scenario::Scenario& s);

// RELSTATE_THREADS when set to a positive integer, else the hardware count.
int worker_count();

// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index is
// handled exactly once, so results written by index do not depend on the
// thread count.
void parallel_for(int n, const std::function<void(int)>& body);

std::string to_csv(const Table& t);
Json to_json(const scenario::Scenario& s, const EngineResult& r);

// Writes <engine>_<label>.csv/.json (as selected by the scenario) and the
// resolved scenario <engine>_<label>.scenario.json into dir.
std::vector<std::filesystem::path> write_artifacts(const scenario::Scenario& s, const EngineResult& r,
                                                   const std::filesystem::path& dir, const std::string& label);

std::string summary_line(const scenario::Scenario& s, const EngineResult& r);

}  // namespace relstate::engines
