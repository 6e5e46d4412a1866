#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "atomdetect/config.hpp"

namespace atomdetect::cli {

/// Files written by a command, in write order.
struct CommandOutput
{
    std::vector<std::filesystem::path> files;
    std::string summary;   // short human-readable line for stdout
};

// Each command writes into `dir` (created if missing). Numerical failures
// surface as NumericalError, invalid inputs as ConfigError or
// std::invalid_argument.
CommandOutput cmd_scan(const config::RunConfig& config, const std::filesystem::path& dir);
CommandOutput cmd_detect(const config::RunConfig& config, const std::filesystem::path& dir);
CommandOutput cmd_optimize(const config::RunConfig& config, const std::filesystem::path& dir);
CommandOutput cmd_propagate(const config::RunConfig& config, const std::filesystem::path& dir);
CommandOutput cmd_validate(const config::RunConfig& config, const std::filesystem::path& dir);

/// Dispatch by subcommand name; throws std::invalid_argument for unknown names.
CommandOutput run_command(const std::string& name, const config::RunConfig& config,
                          const std::filesystem::path& dir);

/// 12 significant digits, scientific notation.
std::string format_number(double value);

} // namespace atomdetect::cli
