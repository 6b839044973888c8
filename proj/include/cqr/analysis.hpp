#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cqr/bounds.hpp"
#include "cqr/conformal.hpp"
#include "cqr/core.hpp"
#include "cqr/optimizer.hpp"
#include "cqr/synthdata.hpp"

namespace cqr {

enum class Method { cqr, cmr };
enum class OracleMode { trained, oracle_theta };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
std::string_view oracle_mode_name(OracleMode m);
OracleMode parse_oracle_mode(std::string_view name);

// Batch 64, one epoch, constant rate (the tuner overwrites the rate).
inline SgdConfig constant_rate_sgd() {
  SgdConfig c;
  c.schedule = ConstantSchedule{1.0};
  return c;
}

struct TrainingOptions {
  SgdConfig sgd = constant_rate_sgd();
  bool tune = true;
  std::vector<double> tune_grid = log_spaced(1e-5, 1.0, 33);
  std::size_t tune_budget = 0;  // 0: chosen so the last round sees the whole pool
};

struct SweepPlan {
  Method method = Method::cqr;
  std::vector<std::size_t> n_grid;
  std::vector<std::size_t> m_grid;
  std::vector<double> alpha_grid;
  std::size_t trials = 20;
  std::size_t test_size = 2000;
  std::uint64_t master_seed = 0;
  OracleMode oracle_mode = OracleMode::trained;
  TrainingOptions training{};
  double regime_c = 1.0;

  void validate() const;
  std::size_t cell_count() const;
};

// One (method, n, m, alpha, trial) cell of a sweep.
struct Cell {
  Method method = Method::cqr;
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 0.1;
  std::size_t alpha_index = 0;
  std::size_t trial = 0;
};

struct ExperimentRecord {
  Method method = Method::cqr;
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 0.1;
  std::size_t trial = 0;
  double delta = 0.0;
  double coverage = 0.0;
  double mean_length = 0.0;
  double q_hat = 0.0;
  Regime regime = Regime::balanced;
  std::uint64_t seed = 0;
  double crossing_rate = 0.0;  // fraction of test x with crossed quantile estimates
  bool skipped = false;
  std::string skip_reason;
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t point_count = 0;
};

std::uint64_t cell_seed(std::uint64_t master_seed, const Cell& cell);

// Tunes (when enabled) and trains one quantile model; the rate used is
// written to rate_out when given.
LinearQuantileModel train_quantile(const Dataset& train, double gamma,
                                   const TrainingOptions& options, std::uint64_t seed,
                                   double* rate_out = nullptr);

// The trained (or oracle) models of one cell; CMR uses `median` only.
struct FittedModels {
  CqrModelPair pair;
  LinearQuantileModel median;
};

// Tunes (when enabled) and trains the quantile models for `method` at level alpha.
FittedModels fit_models(Method method, const Dataset& train, double alpha,
                        const TrainingOptions& options, std::uint64_t seed);

// Full split-conformal pipeline on fresh synthetic draws.
ExperimentRecord run_cell(const Cell& cell, const SyntheticSpec& spec,
                          const TrainingOptions& options, OracleMode mode,
                          std::size_t test_size, std::uint64_t master_seed,
                          double regime_c = 1.0);

std::vector<Cell> enumerate_cells(const SweepPlan& plan);

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

// Runs every cell; output order follows enumerate_cells regardless of workers.
std::vector<ExperimentRecord> run_sweep(const SweepPlan& plan, const SyntheticSpec& spec,
                                        std::size_t workers = 1,
                                        const ProgressCallback& progress = {});

// Ordinary least squares of ys on xs.
FitResult fit_linear(std::span<const double> xs, std::span<const double> ys);
// Ordinary least squares of log v on log u.
FitResult fit_loglog(std::span<const std::pair<double, double>> points);

// Trial-averaged delta per n at (alpha, m_fixed), fitted on log-log axes.
FitResult slope_vs_n(std::span<const ExperimentRecord> records, double alpha, std::size_t m_fixed);

struct AlphaFit {
  double alpha = 0.0;
  FitResult fit;
};

// Regresses the per-alpha intercepts on log alpha.
FitResult intercepts_vs_alpha(std::span<const AlphaFit> fits);

// Trial-averaged delta per (n, m, alpha) against u = 1 / (n alpha^2), pooled
// over the given alpha set.
FitResult slope_vs_inv_nalpha2(std::span<const ExperimentRecord> records,
                               std::span<const double> alpha_set);

// Trial-averaged delta per m at alpha (calibration-size scaling).
FitResult slope_vs_m(std::span<const ExperimentRecord> records, double alpha);

// Per-cell means over trials, skipping skipped records.
struct CellSummary {
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 0.0;
  std::size_t trials = 0;
  double mean_delta = 0.0;
  double mean_coverage = 0.0;
  double mean_crossing = 0.0;
};
std::vector<CellSummary> summarize(std::span<const ExperimentRecord> records);

// Real-data protocol: the oracle length is unknown, so each interval length is
// compared with the one produced by a reference configuration (largest n and
// m) on the same test points.
struct RealDataPlan {
  Method method = Method::cqr;
  std::vector<double> alpha_grid{0.01, 0.05, 0.1, 0.2};
  std::vector<double> train_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<double> calibration_fractions{0.05, 0.1, 0.15, 0.2};
  double test_fraction = 0.2;
  std::size_t trials = 1;
  std::uint64_t master_seed = 0;
  TrainingOptions training{};
  bool standardize_features = true;
};

std::vector<ExperimentRecord> run_real_data(const Dataset& data, const RealDataPlan& plan);

}  // namespace cqr
