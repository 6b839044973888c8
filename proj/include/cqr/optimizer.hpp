#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cqr/core.hpp"

namespace cqr {

// eta_k = c / k (k is the 1-based step counter).
struct InverseTimeSchedule {
  double c = 1.0;
};

// eta_k = c.
struct ConstantSchedule {
  double c = 1.0;
};

using StepSchedule = std::variant<InverseTimeSchedule, ConstantSchedule>;

double step_size(const StepSchedule& schedule, std::size_t k);
double schedule_rate(const StepSchedule& schedule);
StepSchedule with_rate(const StepSchedule& schedule, double c);

struct SgdConfig {
  StepSchedule schedule = InverseTimeSchedule{1.0};
  std::size_t batch_size = 64;
  std::size_t epochs = 1;
  std::optional<double> projection_radius;  // no projection when absent
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  Vector final_theta;
  std::size_t steps = 0;
  std::vector<double> mean_batch_loss_trace;
};

// Called after every update with the 1-based step index and the new iterate.
using IterateObserver = std::function<void(std::size_t, std::span<const double>)>;

Vector project_ball(std::span<const double> theta, double radius);

// Projected mini-batch SGD on the empirical pinball objective, starting at 0.
TrainReport sgd_train(const Dataset& data, double gamma, const SgdConfig& config,
                      const IterateObserver& observer = {});

// Successive halving over a sorted grid of rates. A fifth of the (shuffled)
// data is held out; each round trains every surviving arm on budget * 2^r
// samples (capped at the remaining pool), ranks arms by held-out mean pinball
// loss and keeps the better half (ties go to the smaller rate).
double successive_halving_tune(const Dataset& data, double gamma, std::span<const double> grid,
                               std::size_t budget, std::uint64_t seed,
                               const SgdConfig& base = {});

// n log-spaced rates covering [lo, hi].
std::vector<double> log_spaced(double lo, double hi, std::size_t n);

}  // namespace cqr
