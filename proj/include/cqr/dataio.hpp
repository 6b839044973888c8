#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "cqr/core.hpp"

namespace cqr {

enum class FeatureKind { continuous, boolean, categorical };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
};

struct TabularSchema {
  std::vector<FeatureColumn> features;
  std::string label = "y";  // empty: unlabeled table, labels read as 0

  void validate() const;
  // Every header column except the label, continuous unless listed otherwise.
  static TabularSchema from_header(const std::vector<std::string>& header, const std::string& label,
                                   const std::vector<std::string>& categorical = {},
                                   const std::vector<std::string>& boolean = {});
};

struct LoadedTable {
  Dataset data;
  std::vector<std::string> feature_names;  // after one-hot expansion
};

std::vector<std::string> read_csv_header(const std::filesystem::path& path);

// Categorical columns expand to one indicator per level, levels in
// lexicographic order; booleans map to {0, 1}.
LoadedTable load_csv(const std::filesystem::path& path, const TabularSchema& schema);

// Header x1..xd,y unless names are given.
void write_csv(const std::filesystem::path& path, const Dataset& data,
               const std::vector<std::string>& feature_names = {},
               const std::string& label = "y");

struct SplitFractions {
  double test = 0.2;
  double train = 0.6;
  double calibration = 0.2;
};

struct DataSplit {
  Dataset train;
  Dataset calibration;
  Dataset test;
};

// Seeded shuffle, then contiguous slices [test | train | calibration]. Part
// sizes are floor(fraction * N); the unused share is floor((1 - sum) * N) and
// rows lost to flooring go to train.
DataSplit split(const Dataset& data, const SplitFractions& fractions, std::uint64_t seed);

// Per-feature standardization fitted on one dataset and applied to others.
class Scaler {
 public:
  static Scaler fit(const Dataset& train);

  Dataset apply(const Dataset& data) const;
  Dataset inverse(const Dataset& data) const;

  const std::vector<double>& means() const noexcept { return mean_; }
  const std::vector<double>& scales() const noexcept { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;  // 0 marks a constant feature
};

}  // namespace cqr
