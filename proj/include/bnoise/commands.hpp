#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnoise/model_spec.hpp"

namespace bnoise {

struct CommandFlags {
  std::string model_path;
  std::optional<double> horizon;  ///< --T
  std::optional<double> omega;
  std::optional<std::size_t> modes;
  std::optional<std::size_t> freq_terms;
  std::optional<std::size_t> samples;
  std::uint64_t seed = 1;
  std::optional<double> dt;
  std::string format = "json";
  std::string output;
  bool override_existence_gate = false;
  std::size_t workers = 1;
};

struct CommandOutput {
  nlohmann::json report;
  /// The command's CSV layout (covariance, paths or series).
  std::string csv;
};

std::vector<std::string> command_names();

/// Runs one command. Divergent verdicts are results; invalid input and
/// failed preconditions throw (see errors.hpp).
CommandOutput run_command(const std::string& command, const ModelSpec& spec, const CommandFlags& flags);

/// Report rendering: pretty JSON, or the CSV layout when format == "csv".
std::string render(const CommandOutput& out, const std::string& format);

/// Copy of a report without its timing block, for reproducibility checks.
nlohmann::json strip_timing(nlohmann::json report);

}  // namespace bnoise
