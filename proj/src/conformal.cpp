#include "cqr/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cqr/errors.hpp"

namespace cqr {

CqrModelPair::CqrModelPair(Vector lower_theta, Vector upper_theta, double a)
    : lower{std::move(lower_theta), a / 2.0}, upper{std::move(upper_theta), 1.0 - a / 2.0}, alpha(a) {
  validate();
}

void CqrModelPair::validate() const {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw InvalidArgument("CqrModelPair: alpha must lie in (0, 1/2]");
  if (lower.gamma != alpha / 2.0 || upper.gamma != 1.0 - alpha / 2.0) {
    throw InvalidArgument("CqrModelPair: model levels must be alpha/2 and 1 - alpha/2");
  }
  if (lower.theta.size() != upper.theta.size()) {
    throw InvalidArgument("CqrModelPair: dimension mismatch between models");
  }
}

PredictionInterval PredictionInterval::closed(double lo, double hi) {
  if (!(lo <= hi)) throw InvalidArgument("PredictionInterval: lo must not exceed hi");
  PredictionInterval p;
  p.lo_ = lo;
  p.hi_ = hi;
  p.empty_ = false;
  return p;
}

double cqr_score(const CqrModelPair& pair, std::span<const double> x, double y) {
  const double lo = pair.lower.predict(x);
  const double hi = pair.upper.predict(x);
  return std::max(lo - y, y - hi);
}

double cmr_score(const LinearQuantileModel& median, std::span<const double> x, double y) {
  return std::abs(median.predict(x) - y);
}

std::size_t conformal_quantile_index(std::size_t m, double alpha) {
  if (m == 0) throw InvalidArgument("conformal_quantile_index: m must be >= 1");
  require_level(alpha, "alpha");
  const double raw = (1.0 - alpha) * static_cast<double>(m + 1);
  // Snap products that are integers up to rounding, e.g. 0.9 * 100.
  const double nearest = std::round(raw);
  const double k_real = std::abs(raw - nearest) <= 1e-9 * std::max(1.0, raw) ? nearest : std::ceil(raw);
  const auto k = static_cast<std::size_t>(std::max(1.0, k_real));
  if (k > m) {
    throw CalibrationInfeasible("calibration infeasible: ceil((1-alpha)(m+1)) = " +
                                std::to_string(k) + " exceeds m = " + std::to_string(m));
  }
  return k;
}

CalibrationResult calibrate(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw InvalidArgument("calibrate: no scores");
  for (double s : scores) {
    if (std::isnan(s)) throw InvalidArgument("calibrate: NaN score");
  }
  CalibrationResult r;
  r.alpha = alpha;
  r.m = scores.size();
  r.k = conformal_quantile_index(r.m, alpha);
  r.scores.assign(scores.begin(), scores.end());
  std::stable_sort(r.scores.begin(), r.scores.end());
  r.q_hat = r.scores[r.k - 1];
  return r;
}

PredictionInterval cqr_interval(const CqrModelPair& pair, double q_hat, std::span<const double> x) {
  const double lo = pair.lower.predict(x);
  const double hi = pair.upper.predict(x);
  if (hi - lo + 2.0 * q_hat >= 0.0) {
    const double a = lo - q_hat;
    const double b = hi + q_hat;
    // hi - lo + 2q >= 0 can round to b < a by one ulp.
    return PredictionInterval::closed(std::min(a, b), std::max(a, b));
  }
  return PredictionInterval::empty_set();
}

PredictionInterval cmr_interval(const LinearQuantileModel& median, double q_hat,
                                std::span<const double> x) {
  if (!(q_hat >= 0.0)) throw InvalidArgument("cmr_interval: q_hat must be >= 0");
  const double t = median.predict(x);
  return PredictionInterval::closed(t - q_hat, t + q_hat);
}

double coverage(std::span<const PredictionInterval> intervals, std::span<const double> ys) {
  if (intervals.size() != ys.size()) throw InvalidArgument("coverage: length mismatch");
  if (intervals.empty()) throw InvalidArgument("coverage: no points");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) hit += intervals[i].contains(ys[i]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(ys.size());
}

double length_deviation(std::span<const PredictionInterval> intervals,
                        std::span<const double> oracle_lengths) {
  if (intervals.size() != oracle_lengths.size()) {
    throw InvalidArgument("length_deviation: length mismatch");
  }
  if (intervals.empty()) throw InvalidArgument("length_deviation: no points");
  double s = 0.0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (!(oracle_lengths[i] >= 0.0)) throw InvalidArgument("length_deviation: negative oracle length");
    s += std::abs(intervals[i].length() - oracle_lengths[i]);
  }
  return s / static_cast<double>(intervals.size());
}

}  // namespace cqr
