#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace sra::cli {

/// Defaults for every subcommand; a config file is merge-patched over this.
nlohmann::json default_config();

/// Runs one subcommand (argv[0] is the program name). Returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, with the arguments only (no program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Executes `subcommand` with a fully resolved config inside `dir` and
/// returns the written artifact names (relative to `dir`). `inputs` receives
/// the digests of everything read.
std::vector<std::string> execute(const std::string& subcommand, const nlohmann::json& config,
                                 const std::filesystem::path& dir, std::ostream& log,
                                 nlohmann::json* inputs = nullptr);

/// FNV-1a 64 over a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace sra::cli
