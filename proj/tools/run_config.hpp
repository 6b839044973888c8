#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "cqr/analysis.hpp"
#include "cqr/synthdata.hpp"

namespace cqr::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a command may need; every field has a default.
struct RunConfig {
  SyntheticSpec synthetic{};
  bool theta0_given = false;  // otherwise theta0 is drawn from the master seed
  std::size_t synth_count = 1000;

  SweepPlan sweep = default_sweep();

  std::filesystem::path out_dir = ".";

  static SweepPlan default_sweep();

  // Resolves theta0 (drawing it when not given) and validates everything.
  SyntheticSpec resolved_spec() const;
  void validate() const;
};

// Reads `key = value` INI text with sections [synthetic], [sweep], [sgd] and
// [output]. Unknown sections or keys are errors.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);

}  // namespace cqr::cli
