#ifndef MRD_CONFIG_HPP
#define MRD_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "mrd/simulation.hpp"

namespace mrd {

enum class OutputFormat { csv, markdown };

// A parsed simulate config. Every scenario row and procedure has been
// validated (schedules built for each row's M) by the time parsing returns.
struct RunConfig {
  ExperimentGrid grid;
  std::uint64_t seed = 1;
  OutputFormat format = OutputFormat::csv;
  std::string out;  // empty: stdout
};

// Command-line values that take precedence over the config file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iterations;
  std::optional<int> workers;
  std::optional<OutputFormat> format;
  std::optional<std::string> out;
};

/// Parses a JSON document with sections scenario, procedures, schedule, run.
/// Errors are ValidationError messages of the form "<source>: <key path>: ...".
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");

RunConfig load_run_config(const std::string& path);

void apply_overrides(RunConfig& config, const RunOverrides& overrides);

OutputFormat parse_output_format(const std::string& name);

/// Renders the grid results in the configured format.
std::string render(const ResultTable& table, OutputFormat format);

}  // namespace mrd

#endif  // MRD_CONFIG_HPP
