#pragma once

#include <cstddef>
#include <string_view>
#include <utility>

#include "cqr/core.hpp"
#include "cqr/synthdata.hpp"

namespace cqr {

struct TheoryConstants {
  double H = 1.0;      // f_max / f_min
  double R = 1.0;      // 2 B K + 1 / f_min, bound on |score|
  double beta = 1.0;   // min(alpha, 1 - alpha) / (2 f_max)
  double A = 1.0;      // 4 lambda_max^2 f_max d / (lambda_min^4 f_min^2)
  double eps_n = 1.0;  // B sqrt(2 A / (n delta))
  double delta = 0.1;
};

TheoryConstants constants(const DistributionSpec& spec, double alpha, std::size_t n, double delta);

// m > 8 H / min(alpha, 1 - alpha).
bool check_m_condition(double H, double alpha, std::size_t m);

enum class MCondition { enforce, ignore };

// Explicit finite-sample upper bounds on the expected length deviation. With
// MCondition::enforce a violated calibration-size condition throws
// PreconditionFailed; MCondition::ignore evaluates the expression regardless.
double cqr_bound(const DistributionSpec& spec, double alpha, std::size_t n, std::size_t m,
                 MCondition policy = MCondition::enforce);
double cmr_bound(const DistributionSpec& spec, double alpha, std::size_t n, std::size_t m,
                 MCondition policy = MCondition::enforce);

// Expected squared parameter error of SGD after n samples: A / n.
double sgd_parameter_error_rate(const DistributionSpec& spec, std::size_t n);
// Expected squared prediction error: 4 lambda_max^2 f_max d / (lambda_min^3 f_min^2 n).
double sgd_prediction_error_rate(const DistributionSpec& spec, std::size_t n);

enum class Regime { vacuous, alpha_squared_n, exp_m, balanced };

std::string_view regime_name(Regime r);
Regime parse_regime(std::string_view name);

// Dominant-term classification of the CQR bound. Thresholds are the big-O
// boundaries scaled by c.
Regime classify_regime(std::size_t n, std::size_t m, double alpha, double c = 1.0);

// Split n_total into (train, calibration) sizes.
std::pair<std::size_t, std::size_t> allocation_advice(double alpha, std::size_t n_total);

// Regularity constants of a synthetic family: B and K from the box and theta0,
// lambda from the exact second moment, f_min / f_max over a grid of cell
// centres (grid points per axis).
DistributionSpec measure_distribution_spec(const SyntheticSpec& spec, std::size_t grid = 64);

}  // namespace cqr
