#include "cqr/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cqr/errors.hpp"
#include "cqr/rng.hpp"

namespace cqr {

double step_size(const StepSchedule& schedule, std::size_t k) {
  return std::visit(
      [k](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, InverseTimeSchedule>) {
          return s.c / static_cast<double>(k);
        } else {
          return s.c;
        }
      },
      schedule);
}

double schedule_rate(const StepSchedule& schedule) {
  return std::visit([](const auto& s) { return s.c; }, schedule);
}

StepSchedule with_rate(const StepSchedule& schedule, double c) {
  return std::visit(
      [c](auto s) -> StepSchedule {
        s.c = c;
        return s;
      },
      schedule);
}

void SgdConfig::validate() const {
  const double c = schedule_rate(schedule);
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("SgdConfig: learning rate must be > 0");
  if (batch_size == 0) throw InvalidArgument("SgdConfig: batch_size must be >= 1");
  if (epochs == 0) throw InvalidArgument("SgdConfig: epochs must be >= 1");
  if (projection_radius && !(*projection_radius > 0.0)) {
    throw InvalidArgument("SgdConfig: projection radius must be > 0");
  }
}

Vector project_ball(std::span<const double> theta, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("project_ball: radius must be > 0");
  Vector out(theta.begin(), theta.end());
  const double n = norm2(theta);
  if (n > radius) {
    double scale = radius / n;
    for (double& v : out) v *= scale;
    // rounding can leave the norm one ulp outside; keep projection idempotent
    while (norm2(out) > radius) {
      scale = std::nextafter(scale, 0.0);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta[i] * scale;
    }
  }
  return out;
}

TrainReport sgd_train(const Dataset& data, double gamma, const SgdConfig& config,
                      const IterateObserver& observer) {
  if (data.empty()) throw InvalidArgument("sgd_train: empty dataset");
  require_level(gamma);
  config.validate();

  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);

  TrainReport report;
  report.final_theta.assign(d, 0.0);
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  report.mean_batch_loss_trace.reserve(batches * config.epochs);

  Vector& theta = report.final_theta;
  Vector grad(d);
  std::size_t k = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(n, lo + config.batch_size);
      // A short final batch takes a proportionally shorter step.
      const double inv = 1.0 / static_cast<double>(config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto x = data.x(order[i]);
        const double y = data.y(order[i]);
        loss += pinball_loss(dot(theta, x), y, gamma);
        accumulate_pinball_subgradient(theta, x, y, gamma, inv, grad);
      }
      report.mean_batch_loss_trace.push_back(loss / static_cast<double>(hi - lo));

      const double eta = step_size(config.schedule, ++k);
      for (std::size_t j = 0; j < d; ++j) theta[j] -= eta * grad[j];
      if (config.projection_radius) {
        const double norm = norm2(theta);
        if (norm > *config.projection_radius) {
          const double scale = *config.projection_radius / norm;
          for (double& v : theta) v *= scale;
        }
      }
      if (observer) observer(k, theta);
    }
  }
  report.steps = k;
  return report;
}

double successive_halving_tune(const Dataset& data, double gamma, std::span<const double> grid,
                               std::size_t budget, std::uint64_t seed, const SgdConfig& base) {
  if (grid.empty()) throw InvalidArgument("successive_halving_tune: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw InvalidArgument("successive_halving_tune: grid must be sorted ascending");
  }
  if (budget == 0) throw InvalidArgument("successive_halving_tune: budget must be >= 1");
  require_level(gamma);
  if (grid.size() == 1) return grid.front();
  if (data.size() < 2) throw InvalidArgument("successive_halving_tune: need at least 2 samples");

  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0}));
  rng.shuffle(std::span<std::size_t>(rows));
  const std::size_t held_out = std::max<std::size_t>(1, data.size() / 5);
  const std::size_t pool_size = data.size() - held_out;
  const Dataset shuffled = data.subset(rows);
  const Dataset pool = shuffled.slice(0, pool_size);
  const Dataset validation = shuffled.slice(pool_size, data.size());

  struct Arm {
    std::size_t index;
    double rate;
    double loss;
  };
  std::vector<Arm> arms;
  for (std::size_t i = 0; i < grid.size(); ++i) arms.push_back({i, grid[i], 0.0});

  std::size_t round_budget = budget;
  for (std::uint64_t round = 0; arms.size() > 1; ++round) {
    const Dataset train = pool.slice(0, std::min(pool_size, round_budget));
    SgdConfig cfg = base;
    cfg.seed = derive_seed(seed, {1, round});
    for (auto& arm : arms) {
      cfg.schedule = with_rate(base.schedule, arm.rate);
      const auto report = sgd_train(train, gamma, cfg);
      const double loss = mean_pinball_loss(validation, report.final_theta, gamma);
      arm.loss = std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
    }
    std::sort(arms.begin(), arms.end(), [](const Arm& a, const Arm& b) {
      if (a.loss != b.loss) return a.loss < b.loss;
      if (a.rate != b.rate) return a.rate < b.rate;
      return a.index < b.index;
    });
    arms.resize((arms.size() + 1) / 2);
    if (round_budget < pool_size) round_budget = std::min(pool_size, round_budget * 2);
  }
  return arms.front().rate;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (n == 0 || !(lo > 0.0) || !(hi >= lo)) throw InvalidArgument("log_spaced: bad range");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double step = (std::log(hi) - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + step * static_cast<double>(i));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace cqr
