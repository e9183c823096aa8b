// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Each subcommand reads one JSON config file, writes
// its outputs plus a manifest.json into the output directory, and reports
// failures as a nonzero exit status with a diagnostic on stderr.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace faultline::cli {

inline constexpr std::string_view kVersion = "0.1.0";

struct Options {
  std::string command;  // train | infer | campaign | mitigate-eval | analyze
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string preset;
  bool trace = false;
};

/// Config file contents with command-line overrides applied.
nlohmann::json effective_config(const Options& options);

/// Runs one subcommand. Throws faultline::Error (or a filesystem error).
void run_command(const Options& options);

/// Parses argv and runs the subcommand; returns the process exit status.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace faultline::cli
