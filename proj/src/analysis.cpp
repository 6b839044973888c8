#include "cqr/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "cqr/dataio.hpp"
#include "cqr/errors.hpp"
#include "cqr/rng.hpp"

namespace cqr {

namespace {

bool same_level(double a, double b) { return std::abs(a - b) <= 1e-12; }

std::size_t tune_budget_for(std::size_t n, const TrainingOptions& options) {
  if (options.tune_budget > 0) return options.tune_budget;
  const std::size_t pool = n - std::max<std::size_t>(1, n / 5);
  std::size_t rounds = 0;
  for (std::size_t arms = options.tune_grid.size(); arms > 1; arms = (arms + 1) / 2) ++rounds;
  const std::size_t div = std::size_t{1} << (rounds > 0 ? rounds - 1 : 0);
  return std::max<std::size_t>(1, (pool + div - 1) / div);
}

struct Evaluation {
  double delta = 0.0;
  double coverage = 0.0;
  double mean_length = 0.0;
  double crossing = 0.0;
  double q_hat = 0.0;
  std::vector<double> lengths;
};

// Calibrates on `cal` and evaluates against per-point reference lengths
// (delta is left at 0 when no reference is given).
Evaluation evaluate(Method method, const FittedModels& models, const Dataset& cal,
                    const Dataset& test, double alpha, std::span<const double> reference) {
  std::vector<double> scores(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    scores[i] = method == Method::cqr ? cqr_score(models.pair, cal.x(i), cal.y(i))
                                      : cmr_score(models.median, cal.x(i), cal.y(i));
  }
  const double q_hat = calibrate(scores, alpha).q_hat;

  Evaluation e;
  std::vector<PredictionInterval> intervals;
  intervals.reserve(test.size());
  e.lengths.reserve(test.size());
  std::size_t crossed = 0;
  double total_length = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto x = test.x(i);
    if (method == Method::cqr) {
      if (models.pair.upper.predict(x) < models.pair.lower.predict(x)) ++crossed;
      intervals.push_back(cqr_interval(models.pair, q_hat, x));
    } else {
      intervals.push_back(cmr_interval(models.median, q_hat, x));
    }
    e.lengths.push_back(intervals.back().length());
    total_length += e.lengths.back();
  }
  e.q_hat = q_hat;
  if (!reference.empty()) e.delta = length_deviation(intervals, reference);
  e.coverage = coverage(intervals, test.labels());
  e.mean_length = total_length / static_cast<double>(test.size());
  e.crossing = static_cast<double>(crossed) / static_cast<double>(test.size());
  return e;
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view method_name(Method m) { return m == Method::cqr ? "CQR" : "CMR"; }

Method parse_method(std::string_view name) {
  if (name == "CQR" || name == "cqr") return Method::cqr;
  if (name == "CMR" || name == "cmr") return Method::cmr;
  throw InvalidArgument("unknown method: " + std::string(name));
}

std::string_view oracle_mode_name(OracleMode m) {
  return m == OracleMode::trained ? "trained" : "oracle-theta";
}

OracleMode parse_oracle_mode(std::string_view name) {
  if (name == "trained") return OracleMode::trained;
  if (name == "oracle-theta" || name == "oracle") return OracleMode::oracle_theta;
  throw InvalidArgument("unknown oracle mode: " + std::string(name));
}

void SweepPlan::validate() const {
  if (n_grid.empty() || m_grid.empty() || alpha_grid.empty()) {
    throw InvalidArgument("SweepPlan: grids must be nonempty");
  }
  if (trials == 0 || test_size == 0) throw InvalidArgument("SweepPlan: trials and test_size must be >= 1");
  for (auto n : n_grid) {
    if (n == 0) throw InvalidArgument("SweepPlan: n must be >= 1");
  }
  for (auto m : m_grid) {
    if (m == 0) throw InvalidArgument("SweepPlan: m must be >= 1");
  }
  for (double a : alpha_grid) {
    if (!(a > 0.0 && a <= 0.5)) throw InvalidArgument("SweepPlan: alpha must lie in (0, 1/2]");
  }
  training.sgd.validate();
}

std::size_t SweepPlan::cell_count() const {
  return n_grid.size() * m_grid.size() * alpha_grid.size() * trials;
}

LinearQuantileModel train_quantile(const Dataset& train, double gamma,
                                   const TrainingOptions& options, std::uint64_t seed,
                                   double* rate_out) {
  SgdConfig cfg = options.sgd;
  if (options.tune && train.size() >= 2) {
    const double rate = successive_halving_tune(train, gamma, options.tune_grid,
                                                tune_budget_for(train.size(), options),
                                                derive_seed(seed, {1}), cfg);
    cfg.schedule = with_rate(cfg.schedule, rate);
  }
  if (rate_out) *rate_out = schedule_rate(cfg.schedule);
  cfg.seed = derive_seed(seed, {2});
  return {sgd_train(train, gamma, cfg).final_theta, gamma};
}

std::uint64_t cell_seed(std::uint64_t master_seed, const Cell& cell) {
  return derive_seed(master_seed, {static_cast<std::uint64_t>(cell.method), cell.n, cell.m,
                                   cell.alpha_index, cell.trial});
}

FittedModels fit_models(Method method, const Dataset& train, double alpha,
                        const TrainingOptions& options, std::uint64_t seed) {
  FittedModels out;
  if (method == Method::cqr) {
    auto lower = train_quantile(train, alpha / 2.0, options, derive_seed(seed, {10}));
    auto upper = train_quantile(train, 1.0 - alpha / 2.0, options, derive_seed(seed, {11}));
    out.pair = CqrModelPair(std::move(lower.theta), std::move(upper.theta), alpha);
  } else {
    out.median = train_quantile(train, 0.5, options, derive_seed(seed, {12}));
  }
  return out;
}

ExperimentRecord run_cell(const Cell& cell, const SyntheticSpec& spec,
                          const TrainingOptions& options, OracleMode mode,
                          std::size_t test_size, std::uint64_t master_seed, double regime_c) {
  ExperimentRecord rec;
  rec.method = cell.method;
  rec.n = cell.n;
  rec.m = cell.m;
  rec.alpha = cell.alpha;
  rec.trial = cell.trial;
  rec.seed = cell_seed(master_seed, cell);
  rec.regime = classify_regime(cell.n, cell.m, cell.alpha, regime_c);

  try {
    conformal_quantile_index(cell.m, cell.alpha);
  } catch (const CalibrationInfeasible& e) {
    rec.skipped = true;
    rec.skip_reason = e.what();
    return rec;
  }

  FittedModels models;
  if (mode == OracleMode::oracle_theta) {
    if (cell.method == Method::cqr) {
      models.pair = CqrModelPair(oracle_theta(spec, cell.alpha / 2.0),
                                 oracle_theta(spec, 1.0 - cell.alpha / 2.0), cell.alpha);
    } else {
      models.median = {oracle_theta(spec, 0.5), 0.5};
    }
  } else {
    const Dataset train = sample(spec, cell.n, derive_seed(rec.seed, {1}));
    models = fit_models(cell.method, train, cell.alpha, options, derive_seed(rec.seed, {4}));
  }
  const Dataset cal = sample(spec, cell.m, derive_seed(rec.seed, {2}));
  const Dataset test = sample(spec, test_size, derive_seed(rec.seed, {3}));

  std::vector<double> oracle(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    oracle[i] = oracle_interval_length(spec, test.x(i), cell.alpha);
  }
  const Evaluation e = evaluate(cell.method, models, cal, test, cell.alpha, oracle);
  rec.delta = e.delta;
  rec.coverage = e.coverage;
  rec.mean_length = e.mean_length;
  rec.q_hat = e.q_hat;
  rec.crossing_rate = e.crossing;
  return rec;
}

std::vector<Cell> enumerate_cells(const SweepPlan& plan) {
  std::vector<Cell> cells;
  cells.reserve(plan.cell_count());
  for (std::size_t a = 0; a < plan.alpha_grid.size(); ++a) {
    for (auto n : plan.n_grid) {
      for (auto m : plan.m_grid) {
        for (std::size_t t = 0; t < plan.trials; ++t) {
          cells.push_back({plan.method, n, m, plan.alpha_grid[a], a, t});
        }
      }
    }
  }
  return cells;
}

std::vector<ExperimentRecord> run_sweep(const SweepPlan& plan, const SyntheticSpec& spec,
                                        std::size_t workers, const ProgressCallback& progress) {
  plan.validate();
  spec.validate();
  const auto cells = enumerate_cells(plan);
  std::vector<ExperimentRecord> out(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        out[i] = run_cell(cells[i], spec, plan.training, plan.oracle_mode, plan.test_size,
                          plan.master_seed, plan.regime_c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
        return;
      }
      const std::size_t finished = ++done;
      if (progress) {
        std::lock_guard lock(failure_mutex);
        progress(finished, cells.size());
      }
    }
  };
  workers = std::max<std::size_t>(1, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

FitResult fit_linear(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("fit_linear: length mismatch");
  if (xs.size() < 2) throw InvalidArgument("fit_linear: need at least 2 points");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw InvalidArgument("fit_linear: all abscissae are equal");
  FitResult r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.point_count = xs.size();
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double e = ys[i] - (r.intercept + r.slope * xs[i]);
      ss_res += e * e;
    }
    r.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  } else {
    r.r_squared = 1.0;
  }
  return r;
}

FitResult fit_loglog(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw InvalidArgument("fit_loglog: need at least 2 points");
  std::vector<double> lu;
  std::vector<double> lv;
  for (const auto& [u, v] : points) {
    if (!(u > 0.0) || !(v > 0.0) || !std::isfinite(u) || !std::isfinite(v)) {
      throw InvalidArgument("fit_loglog: coordinates must be positive and finite");
    }
    lu.push_back(std::log(u));
    lv.push_back(std::log(v));
  }
  return fit_linear(lu, lv);
}

std::vector<CellSummary> summarize(std::span<const ExperimentRecord> records) {
  std::map<std::tuple<double, std::size_t, std::size_t>, CellSummary> cells;
  for (const auto& r : records) {
    if (r.skipped) continue;
    auto& c = cells[{r.alpha, r.n, r.m}];
    c.n = r.n;
    c.m = r.m;
    c.alpha = r.alpha;
    ++c.trials;
    c.mean_delta += r.delta;
    c.mean_coverage += r.coverage;
    c.mean_crossing += r.crossing_rate;
  }
  std::vector<CellSummary> out;
  for (auto& [key, c] : cells) {
    const double t = static_cast<double>(c.trials);
    c.mean_delta /= t;
    c.mean_coverage /= t;
    c.mean_crossing /= t;
    out.push_back(c);
  }
  return out;
}

FitResult slope_vs_n(std::span<const ExperimentRecord> records, double alpha, std::size_t m_fixed) {
  std::vector<std::pair<double, double>> points;
  for (const auto& c : summarize(records)) {
    if (same_level(c.alpha, alpha) && c.m == m_fixed) {
      points.emplace_back(static_cast<double>(c.n), c.mean_delta);
    }
  }
  if (points.empty()) throw InvalidArgument("slope_vs_n: no matching records");
  return fit_loglog(points);
}

FitResult slope_vs_m(std::span<const ExperimentRecord> records, double alpha) {
  std::map<std::size_t, std::pair<double, std::size_t>> by_m;
  for (const auto& c : summarize(records)) {
    if (!same_level(c.alpha, alpha)) continue;
    auto& slot = by_m[c.m];
    slot.first += c.mean_delta * static_cast<double>(c.trials);
    slot.second += c.trials;
  }
  if (by_m.empty()) throw InvalidArgument("slope_vs_m: no matching records");
  std::vector<std::pair<double, double>> points;
  for (const auto& [m, acc] : by_m) {
    points.emplace_back(static_cast<double>(m), acc.first / static_cast<double>(acc.second));
  }
  return fit_loglog(points);
}

FitResult intercepts_vs_alpha(std::span<const AlphaFit> fits) {
  if (fits.empty()) throw InvalidArgument("intercepts_vs_alpha: no fits");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& f : fits) {
    if (!(f.alpha > 0.0)) throw InvalidArgument("intercepts_vs_alpha: alpha must be positive");
    xs.push_back(std::log(f.alpha));
    ys.push_back(f.fit.intercept);
  }
  return fit_linear(xs, ys);
}

FitResult slope_vs_inv_nalpha2(std::span<const ExperimentRecord> records,
                               std::span<const double> alpha_set) {
  std::vector<std::pair<double, double>> points;
  for (const auto& c : summarize(records)) {
    const bool wanted = std::any_of(alpha_set.begin(), alpha_set.end(),
                                    [&](double a) { return same_level(a, c.alpha); });
    if (!wanted) continue;
    points.emplace_back(1.0 / (static_cast<double>(c.n) * c.alpha * c.alpha), c.mean_delta);
  }
  if (points.empty()) throw InvalidArgument("slope_vs_inv_nalpha2: no matching records");
  return fit_loglog(points);
}

std::vector<ExperimentRecord> run_real_data(const Dataset& data, const RealDataPlan& plan) {
  if (data.empty()) throw InvalidArgument("run_real_data: empty dataset");
  if (plan.train_fractions.empty() || plan.calibration_fractions.empty() || plan.alpha_grid.empty()) {
    throw InvalidArgument("run_real_data: grids must be nonempty");
  }
  const double max_train = *std::max_element(plan.train_fractions.begin(), plan.train_fractions.end());
  const double max_cal =
      *std::max_element(plan.calibration_fractions.begin(), plan.calibration_fractions.end());

  std::vector<ExperimentRecord> out;
  for (std::size_t trial = 0; trial < plan.trials; ++trial) {
    const std::uint64_t seed = derive_seed(plan.master_seed, {trial});
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(rows));
    const Dataset shuffled = data.subset(rows);
    const auto test_count = static_cast<std::size_t>(std::floor(plan.test_fraction * data.size()));
    if (test_count == 0 || test_count >= data.size()) {
      throw InvalidArgument("run_real_data: test fraction leaves no test or no fit data");
    }
    const Dataset test_raw = shuffled.slice(0, test_count);
    const Dataset rest = shuffled.slice(test_count, data.size());

    struct Config {
      double train_fraction;
      double cal_fraction;
    };
    auto run_config = [&](Config cfg, double alpha, ExperimentRecord& rec) {
      rec.n = static_cast<std::size_t>(std::floor(cfg.train_fraction * rest.size()));
      rec.m = static_cast<std::size_t>(std::floor(cfg.cal_fraction * (rest.size() - rec.n)));
      if (rec.n == 0 || rec.m == 0) {
        throw InvalidArgument("run_real_data: empty training or calibration part");
      }
      Dataset train = rest.slice(0, rec.n);
      Dataset cal = rest.slice(rec.n, rec.n + rec.m);
      Dataset test = test_raw;
      if (plan.standardize_features) {
        const auto scaler = Scaler::fit(train);
        train = scaler.apply(train);
        cal = scaler.apply(cal);
        test = scaler.apply(test);
      }
      const auto models = fit_models(plan.method, train, alpha, plan.training,
                                     derive_seed(seed, {1, rec.n, rec.m}));
      Evaluation e = evaluate(plan.method, models, cal, test, alpha, {});
      rec.coverage = e.coverage;
      rec.q_hat = e.q_hat;
      rec.mean_length = e.mean_length;
      rec.crossing_rate = e.crossing;
      return std::move(e.lengths);
    };

    for (double alpha : plan.alpha_grid) {
      ExperimentRecord ref;
      const auto reference = run_config({max_train, max_cal}, alpha, ref);
      for (double tf : plan.train_fractions) {
        for (double cf : plan.calibration_fractions) {
          ExperimentRecord rec;
          rec.method = plan.method;
          rec.alpha = alpha;
          rec.trial = trial;
          rec.seed = seed;
          std::vector<double> lengths;
          try {
            lengths = run_config({tf, cf}, alpha, rec);
          } catch (const CalibrationInfeasible& e) {
            rec.skipped = true;
            rec.skip_reason = e.what();
            out.push_back(rec);
            continue;
          }
          double dev = 0.0;
          for (std::size_t i = 0; i < lengths.size(); ++i) dev += std::abs(lengths[i] - reference[i]);
          rec.delta = dev / static_cast<double>(lengths.size());
          rec.regime = classify_regime(rec.n, rec.m, std::min(alpha, 0.5));
          out.push_back(rec);
        }
      }
    }
  }
  return out;
}

}  // namespace cqr
