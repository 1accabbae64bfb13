#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "horolab/manifold.hpp"

namespace horolab {

// Version of the report layout; bump when columns or JSON fields change.
inline constexpr int kReportSchemaVersion = 1;

const char* version();

struct ExperimentConfig {
  std::string source;  // file name used in diagnostics
  ModelDescriptor manifold;
  std::string experiment;

  // sampling
  std::uint64_t seed = 0;
  int count = 1;
  std::vector<double> time_grid;
  std::map<std::string, double> tolerances;  // overrides of the experiment's defaults
  std::optional<std::vector<double>> anchor;  // sampling point; default_anchor otherwise
  std::optional<std::vector<double>> vector;  // explicit direction (normalized to unit length)
  std::optional<int> axis;                    // keep directions with |axis component| >= min_axis
  double min_axis = 0.05;
  std::optional<double> min_curved_share;     // product sampling filter

  // Experiment-specific scalars (T, dt, r0, r_max, horo_offset, ...).
  std::map<std::string, double> parameters;

  std::string output_path;
  std::string format = "json";  // csv | json

  // Canonical JSON of the parsed config (key order fixed); hashed for provenance.
  std::string canonical;
};

// Parses a config document (YAML; JSON documents are accepted as a subset). Throws
// Error(Config) with "<source>:<line>: <field>: <problem>".
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

struct ExperimentInfo {
  std::string name;
  std::string pipeline;  // the module operations it runs
  std::vector<std::pair<std::string, double>> tolerances;  // names and defaults
  std::vector<std::string> parameters;                     // accepted parameter names
};
const std::vector<ExperimentInfo>& experiments();

// Report cell: null, integer, real, boolean or text.
using Cell = std::variant<std::monostate, std::int64_t, double, bool, std::string>;

struct ExperimentReport {
  std::string experiment;
  std::string config_canonical;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  bool pass = false;
  double max_deviation = 0.0;
  std::vector<std::pair<std::string, Cell>> summary_extras;  // experiment-specific fields
  std::vector<std::string> failures;   // property checks that did not hold
  std::vector<std::string> warnings;
  std::string config_hash;  // FNV-1a 64 of the canonical config, hex
};

// Runs the configured experiment. Solver and configuration errors propagate as Error.
ExperimentReport run_experiment(const ExperimentConfig& config, int jobs = 1);

std::string report_csv(const ExperimentReport& report);
std::string report_json(const ExperimentReport& report);

// Writes the report in the configured format under `out_dir` (or the config's path when
// out_dir is empty) and returns the path written. Throws Error(Io).
std::string write_report(const ExperimentReport& report, const ExperimentConfig& config,
                         const std::string& out_dir);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace horolab
