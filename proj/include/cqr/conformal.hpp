#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cqr/core.hpp"

namespace cqr {

// Lower (alpha/2) and upper (1 - alpha/2) quantile regressors for CQR.
struct CqrModelPair {
  LinearQuantileModel lower;
  LinearQuantileModel upper;
  double alpha = 0.1;

  CqrModelPair() = default;
  CqrModelPair(Vector lower_theta, Vector upper_theta, double alpha);

  void validate() const;
};

class PredictionInterval {
 public:
  static PredictionInterval closed(double lo, double hi);
  static PredictionInterval empty_set() { return PredictionInterval{}; }

  bool empty() const noexcept { return empty_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double length() const noexcept { return empty_ ? 0.0 : hi_ - lo_; }
  bool contains(double y) const noexcept { return !empty_ && lo_ <= y && y <= hi_; }

 private:
  PredictionInterval() = default;
  double lo_ = 0.0;
  double hi_ = 0.0;
  bool empty_ = true;
};

struct CalibrationResult {
  double q_hat = 0.0;
  std::size_t m = 0;
  double alpha = 0.1;
  std::size_t k = 0;  // 1-based order statistic index
  std::vector<double> scores;  // sorted ascending
};

double cqr_score(const CqrModelPair& pair, std::span<const double> x, double y);
double cmr_score(const LinearQuantileModel& median, std::span<const double> x, double y);

// k = ceil((1 - alpha)(m + 1)); throws CalibrationInfeasible when k > m.
std::size_t conformal_quantile_index(std::size_t m, double alpha);

CalibrationResult calibrate(std::span<const double> scores, double alpha);

PredictionInterval cqr_interval(const CqrModelPair& pair, double q_hat, std::span<const double> x);
PredictionInterval cmr_interval(const LinearQuantileModel& median, double q_hat,
                                std::span<const double> x);

double coverage(std::span<const PredictionInterval> intervals, std::span<const double> ys);

// Mean over test points of | |C(x)| - |C*(x)| |.
double length_deviation(std::span<const PredictionInterval> intervals,
                        std::span<const double> oracle_lengths);

}  // namespace cqr
