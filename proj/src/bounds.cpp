#include "cqr/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "cqr/errors.hpp"

namespace cqr {

namespace {

double min_level_sq(double alpha) {
  const double a = std::min(alpha, 1.0 - alpha);
  return a * a;
}

void check_args(const DistributionSpec& spec, double alpha, std::size_t n, std::size_t m) {
  spec.validate();
  require_level(alpha, "alpha");
  if (n == 0 || m == 0) throw InvalidArgument("bound: n and m must be >= 1");
}

void enforce(const DistributionSpec& spec, double alpha, std::size_t m, MCondition policy) {
  if (policy == MCondition::ignore) return;
  const double H = spec.f_max / spec.f_min;
  if (!check_m_condition(H, alpha, m)) {
    throw PreconditionFailed("bound: m = " + std::to_string(m) +
                             " does not exceed 8H/min(alpha, 1-alpha) = " +
                             std::to_string(8.0 * H / std::min(alpha, 1.0 - alpha)));
  }
}

}  // namespace

TheoryConstants constants(const DistributionSpec& spec, double alpha, std::size_t n, double delta) {
  spec.validate();
  require_level(alpha, "alpha");
  require_level(delta, "delta");
  if (n == 0) throw InvalidArgument("constants: n must be >= 1");
  TheoryConstants c;
  const double d = static_cast<double>(spec.d);
  c.delta = delta;
  c.H = spec.f_max / spec.f_min;
  c.R = 2.0 * spec.B * spec.K + 1.0 / spec.f_min;
  c.beta = std::min(alpha, 1.0 - alpha) / (2.0 * spec.f_max);
  c.A = 4.0 * spec.lambda_max * spec.lambda_max * spec.f_max * d /
        (std::pow(spec.lambda_min, 4) * spec.f_min * spec.f_min);
  c.eps_n = spec.B * std::sqrt(2.0 * c.A / (static_cast<double>(n) * delta));
  return c;
}

bool check_m_condition(double H, double alpha, std::size_t m) {
  return static_cast<double>(m) > 8.0 * H / std::min(alpha, 1.0 - alpha);
}

double cqr_bound(const DistributionSpec& spec, double alpha, std::size_t n, std::size_t m,
                 MCondition policy) {
  check_args(spec, alpha, n, m);
  enforce(spec, alpha, m, policy);
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  const double d = static_cast<double>(spec.d);
  const double lmin = spec.lambda_min;
  const double lmax = spec.lambda_max;
  const double fmin = spec.f_min;
  const double fmax = spec.f_max;
  const double B = spec.B;
  const double R = 2.0 * B * spec.K + 1.0 / fmin;
  const double a2 = min_level_sq(alpha);

  const double root_n_coef = 4.0 * lmax * std::sqrt(fmax * d) / (lmin * fmin * std::sqrt(lmin)) +
                             2.0 * B * lmax * std::sqrt(2.0 * fmax * d) / (lmin * lmin * fmin);
  return root_n_coef * std::sqrt(1.0 / nn) +
         std::sqrt(std::numbers::pi) / (2.0 * fmin * std::numbers::sqrt2) * std::sqrt(1.0 / mm) +
         1.0 / (fmin * mm) + 4.0 * R * std::exp(-a2 * fmin * fmin * mm / (8.0 * fmax * fmax)) +
         1056.0 * lmax * lmax * fmax * fmax * fmax * B * B * R /
             (a2 * std::pow(lmin, 4) * fmin * fmin * nn);
}

double cmr_bound(const DistributionSpec& spec, double alpha, std::size_t n, std::size_t m,
                 MCondition policy) {
  check_args(spec, alpha, n, m);
  enforce(spec, alpha, m, policy);
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  const double d = static_cast<double>(spec.d);
  const double lmin = spec.lambda_min;
  const double lmax = spec.lambda_max;
  const double fmin = spec.f_min;
  const double fmax = spec.f_max;
  const double B = spec.B;
  const double R = 2.0 * B * spec.K + 1.0 / fmin;
  const double a2 = min_level_sq(alpha);

  return std::sqrt(std::numbers::pi) / (fmin * std::sqrt(2.0 * mm)) +
         8.0 * R * std::exp(-fmin * fmin * a2 * mm / (8.0 * fmax * fmax)) +
         2056.0 * R * lmax * lmax * fmax * fmax * fmax * B * B * d /
             (std::pow(lmin, 4) * fmin * fmin * a2 * nn) +
         2.0 / (fmin * mm) +
         4.0 * B * lmax * std::sqrt(fmax * d) / (lmin * lmin * fmin) * std::sqrt(1.0 / nn);
}

double sgd_parameter_error_rate(const DistributionSpec& spec, std::size_t n) {
  spec.validate();
  if (n == 0) throw InvalidArgument("sgd_parameter_error_rate: n must be >= 1");
  return 4.0 * spec.lambda_max * spec.lambda_max * spec.f_max * static_cast<double>(spec.d) /
         (std::pow(spec.lambda_min, 4) * spec.f_min * spec.f_min * static_cast<double>(n));
}

double sgd_prediction_error_rate(const DistributionSpec& spec, std::size_t n) {
  return sgd_parameter_error_rate(spec, n) * spec.lambda_min;
}

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::vacuous: return "vacuous";
    case Regime::alpha_squared_n: return "alpha-squared-n";
    case Regime::exp_m: return "exp-m";
    case Regime::balanced: return "balanced";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::vacuous, Regime::alpha_squared_n, Regime::exp_m, Regime::balanced}) {
    if (regime_name(r) == name) return r;
  }
  throw InvalidArgument("unknown regime label: " + std::string(name));
}

Regime classify_regime(std::size_t n, std::size_t m, double alpha, double c) {
  if (n == 0 || m == 0) throw InvalidArgument("classify_regime: n and m must be >= 1");
  if (!(alpha > 0.0 && alpha <= 0.5)) throw InvalidArgument("classify_regime: alpha must lie in (0, 1/2]");
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  if (alpha <= c * std::max(1.0 / std::sqrt(nn), 1.0 / std::sqrt(mm))) return Regime::vacuous;
  if (alpha < c * std::pow(nn, -0.25)) return Regime::alpha_squared_n;
  if (alpha < c * std::sqrt(std::log(mm) / mm)) return Regime::exp_m;
  return Regime::balanced;
}

std::pair<std::size_t, std::size_t> allocation_advice(double alpha, std::size_t n_total) {
  if (n_total < 2) throw InvalidArgument("allocation_advice: n_total must be >= 2");
  require_level(alpha, "alpha");
  const std::size_t half = n_total / 2;
  if (alpha >= std::pow(static_cast<double>(half), -0.25)) return {n_total - half, half};
  // Smallest n whose balanced calibration size ceil(alpha^4 n^4) fills the rest.
  const double a4 = std::pow(alpha, 4);
  std::size_t lo = 1;
  std::size_t hi = n_total - 1;
  auto fills = [&](std::size_t n) {
    const double want = std::ceil(a4 * std::pow(static_cast<double>(n), 4));
    return static_cast<double>(n) + want >= static_cast<double>(n_total);
  };
  if (!fills(hi)) return {n_total - 1, 1};
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (fills(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return {lo, n_total - lo};
}

DistributionSpec measure_distribution_spec(const SyntheticSpec& spec, std::size_t grid) {
  spec.validate();
  if (grid == 0) throw InvalidArgument("measure_distribution_spec: grid must be >= 1");
  const std::size_t d = spec.dim();
  DistributionSpec out;
  out.d = d;
  out.B = spec.x_high * std::sqrt(static_cast<double>(d));
  out.K = norm2(spec.theta0);
  out.y_max = spec.y_max();
  out.y_min = spec.y_min();

  const auto moment = covariate_second_moment(spec);
  Eigen::MatrixXd sigma(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) sigma(i, j) = moment[i * d + j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  out.lambda_min = eig.eigenvalues().minCoeff();
  out.lambda_max = eig.eigenvalues().maxCoeff();

  // Per x the density is piecewise affine, so its extremes sit at the knots.
  double fmin = std::numeric_limits<double>::infinity();
  double fmax = 0.0;
  auto visit = [&](std::span<const double> x) {
    const ConditionalDensity density(spec, x);
    fmin = std::min(fmin, density.min_density());
    fmax = std::max(fmax, density.max_density());
  };
  const double step = (spec.x_high - spec.x_low) / static_cast<double>(grid);
  auto centre = [&](std::size_t i) { return spec.x_low + (static_cast<double>(i) + 0.5) * step; };
  if (spec.layout == CovariateLayout::level_set) {
    for (std::size_t i = 0; i < grid; ++i) {
      Vector x{centre(i), 0.0};
      x[1] = (spec.level() - spec.theta0[0] * x[0]) / spec.theta0[1];
      if (spec.in_box(x)) visit(x);
    }
    if (!std::isfinite(fmin)) visit(Vector(d, 0.5 * (spec.x_low + spec.x_high)));
  } else {
    std::vector<std::size_t> idx(d, 0);
    Vector x(d);
    for (;;) {
      for (std::size_t k = 0; k < d; ++k) x[k] = centre(idx[k]);
      visit(x);
      std::size_t k = 0;
      while (k < d && ++idx[k] == grid) idx[k++] = 0;
      if (k == d) break;
    }
  }
  out.f_min = fmin;
  out.f_max = fmax;
  return out;
}

}  // namespace cqr
