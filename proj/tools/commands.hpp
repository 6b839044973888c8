#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cqr/analysis.hpp"

namespace cqr::cli {

enum ExitCode : int { ok = 0, internal = 1, config = 2, data = 3, infeasible = 4 };

// Parses argv and runs one subcommand. Diagnostics go to `err` as one line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Records CSV with the fixed column order; skipped cells are not written.
void write_records(const std::filesystem::path& path, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records(const std::filesystem::path& path);

}  // namespace cqr::cli
