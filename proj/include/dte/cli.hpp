#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dte/montecarlo.hpp"

namespace dte {

/// Invalid configuration; `field` is the dotted path of the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class OutputFormat { csv, json, both };

struct RunConfig {
  double control_median = 6.0;
  double experimental_median = 9.0;
  DesignSpec design{};
  EnrollmentModel enrollment{};

  ScenarioGrid grid{{0, 1, 2, 3, 4, 5}, {{0, 0}, {0, 1}}, Truth::alternative,
                    Sizing::fixed_at_zero_delay};

  std::vector<double> fractions{0.75, 1.0};
  BoundaryFamily family = BoundaryFamily::lan_demets_obf;

  std::optional<AdaptiveConfig> adaptive;
  double n_max_factor = 15.0;

  std::optional<double> nominal_alpha;
  bool recalibrate = false;
  double recalibration_tolerance = 0.001;
  std::size_t recalibration_replicates = 10000;

  std::size_t replicates = 10000;
  std::uint64_t seed = 20240501;
  unsigned workers = 1;

  std::string out_dir = "out";
  OutputFormat format = OutputFormat::both;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  SimulationSettings settings() const;
};

/// Strict parse: unknown keys and wrong types are errors. Missing keys keep
/// their defaults. The result is validated.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
/// Fully resolved configuration, readable by parse_config.
nlohmann::json config_json(const RunConfig& config);

using Value = std::variant<long long, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
};

/// Shortest decimal form that reads back to the same double.
std::string format_number(double x);

/// Header row then one line per row. The first line is a `# config=` comment
/// carrying the resolved configuration.
std::string to_csv(const Table& table, const nlohmann::json& config);
/// {"config": ..., "columns": [...], "rows": [{column: value}], extra...}
nlohmann::json table_json(const Table& table, const nlohmann::json& config);

Table cmd_design(const RunConfig& config);
Table cmd_boundaries(const RunConfig& config);

struct SimulateReport {
  Table table;
  nlohmann::json manifest;
  std::vector<std::string> failures;  // one entry per failed cell
};

/// Fixed leading columns: delay, rho, gamma, rule, power_or_alpha, mc_se,
/// resize_freq, mean_resize_ratio, mean_events.
SimulateReport cmd_simulate(const RunConfig& config);
Table cmd_recalibrate(const RunConfig& config);

/// Writes <out_dir>/<name>.csv and/or .json per config.format and returns
/// the paths written.
std::vector<std::string> write_table(const std::string& name, const Table& table,
                                     const RunConfig& config,
                                     const nlohmann::json& extra = {});

}  // namespace dte
