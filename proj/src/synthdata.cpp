#include "cqr/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "cqr/errors.hpp"

namespace cqr {

namespace {

// Position t in [0, len] where the integral of an affine density going from
// a to b over [0, len] reaches p; p in [0, (a + b) len / 2].
double affine_inverse(double a, double b, double len, double p) {
  if (p <= 0.0) return 0.0;
  const double slope = (b - a) / len;
  const double disc = a * a + 2.0 * slope * p;
  double t;
  if (disc >= 0.0 && a + std::sqrt(disc) > 0.0) {
    t = 2.0 * p / (a + std::sqrt(disc));
  } else {
    // Bisection on the monotone mass function.
    double lo = 0.0;
    double hi = len;
    while (hi - lo > 1e-12 * std::max(1.0, len)) {
      const double mid = 0.5 * (lo + hi);
      (a * mid + 0.5 * slope * mid * mid < p ? lo : hi) = mid;
    }
    t = 0.5 * (lo + hi);
  }
  return std::clamp(t, 0.0, len);
}

std::pair<double, double> level_set_x1_range(const SyntheticSpec& spec) {
  const double c = spec.level();
  const double a = spec.theta0[0];
  const double b = spec.theta0[1];
  const double lo = std::max(spec.x_low, (c - b * spec.x_high) / a);
  const double hi = std::min(spec.x_high, (c - b * spec.x_low) / a);
  return {lo, hi};
}

}  // namespace

SyntheticSpec SyntheticSpec::draw(std::uint64_t seed, CovariateLayout layout) {
  Rng rng(derive_seed(seed, {0x7e7a0}));
  SyntheticSpec spec;
  spec.theta0 = {rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0)};
  spec.layout = layout;
  return spec;
}

double SyntheticSpec::y_max() const {
  double s = 0.0;
  for (double t : theta0) s += x_high * t;
  return s;
}

double SyntheticSpec::level() const {
  const double mid = 0.5 * (x_low + x_high);
  double s = 0.0;
  for (double t : theta0) s += mid * t;
  return s;
}

bool SyntheticSpec::in_box(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  const double tol = 1e-12 * std::max(1.0, std::abs(x_high));
  return std::all_of(x.begin(), x.end(),
                     [&](double v) { return v >= x_low - tol && v <= x_high + tol; });
}

void SyntheticSpec::validate() const {
  if (theta0.empty()) throw InvalidArgument("SyntheticSpec: empty theta0");
  for (double t : theta0) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("SyntheticSpec: theta0 must be positive");
  }
  if (!(alpha0 > 0.0 && alpha0 < 0.5)) throw InvalidArgument("SyntheticSpec: alpha0 must lie in (0, 1/2)");
  if (!(x_low > 0.0 && x_low < x_high)) throw InvalidArgument("SyntheticSpec: need 0 < x_low < x_high");
  if (layout == CovariateLayout::level_set && dim() != 2) {
    throw InvalidArgument("SyntheticSpec: level_set layout requires d = 2");
  }
}

ConditionalDensity::ConditionalDensity(const SyntheticSpec& spec, std::span<const double> x)
    : alpha0_(spec.alpha0), y_max_(spec.y_max()) {
  if (!spec.in_box(x)) throw InvalidArgument("ConditionalDensity: x outside the covariate box");
  half_ = dot(spec.theta0, x);
  plateau_ = (1.0 - alpha0_) / (2.0 * half_);
  // The tails collapse at the far corner of the box; keep them non-degenerate.
  const double width = std::max(y_max_ - half_, 1e-9 * y_max_);
  y_max_ = half_ + width;
  // Each tail piece has mass alpha0/4. The outer piece ends at floor q/4 with
  // q = alpha0 / (2 width); the knot density k and split fraction rho solve
  //   (plateau + k) rho = q,  (k + q/4)(1 - rho) = q.
  const double q = alpha0_ / (2.0 * width);
  floor_ = 0.25 * q;
  const double b = plateau_ - 1.75 * q;
  const double c = 0.75 * q * plateau_ + 0.25 * q * q;
  const double root = std::sqrt(b * b + 4.0 * c);
  knot_ = b > 0.0 ? 2.0 * c / (b + root) : 0.5 * (root - b);
  const double rho = q / (plateau_ + knot_);
  len1_ = rho * width;
  len2_ = width - len1_;
}

double ConditionalDensity::pdf(double y) const {
  const double a = std::abs(y);
  if (a > y_max_) return 0.0;
  if (a <= half_) return plateau_;
  const double t = a - half_;
  if (t <= len1_) return plateau_ + (knot_ - plateau_) * t / len1_;
  return knot_ + (floor_ - knot_) * (t - len1_) / len2_;
}

double ConditionalDensity::upper_half_cdf(double y) const {
  if (y <= half_) return plateau_ * y;
  double mass = plateau_ * half_;
  const double t = std::min(y - half_, len1_);
  mass += plateau_ * t + 0.5 * (knot_ - plateau_) * t * t / len1_;
  if (y - half_ <= len1_) return mass;
  const double u = std::min(y - half_ - len1_, len2_);
  mass += knot_ * u + 0.5 * (floor_ - knot_) * u * u / len2_;
  return mass;
}

double ConditionalDensity::cdf(double y) const {
  if (y <= -y_max_) return 0.0;
  if (y >= y_max_) return 1.0;
  return y >= 0.0 ? 0.5 + upper_half_cdf(y) : 0.5 - upper_half_cdf(-y);
}

double ConditionalDensity::upper_half_quantile(double p) const {
  const double central = plateau_ * half_;
  if (p <= central) return p / plateau_;
  p -= central;
  const double piece = 0.25 * alpha0_;
  if (p <= piece) return half_ + affine_inverse(plateau_, knot_, len1_, p);
  p -= piece;
  if (p < piece) return half_ + len1_ + affine_inverse(knot_, floor_, len2_, p);
  return y_max_;
}

double ConditionalDensity::quantile(double gamma) const {
  require_level(gamma);
  if (gamma == 0.5) return 0.0;
  return gamma > 0.5 ? upper_half_quantile(gamma - 0.5) : -upper_half_quantile(0.5 - gamma);
}

double ConditionalDensity::sample(Rng& rng, std::size_t* proposals) const {
  const double envelope = max_density();
  for (;;) {
    const double y = rng.uniform(-y_max_, y_max_);
    const double u = rng.uniform();
    if (proposals) ++*proposals;
    if (u * envelope <= pdf(y)) return y;
  }
}

Vector oracle_theta(const SyntheticSpec& spec, double gamma) {
  if (!(gamma >= spec.alpha0 / 2.0 && gamma <= 1.0 - spec.alpha0 / 2.0)) {
    throw InvalidArgument("oracle_theta: gamma outside [alpha0/2, 1 - alpha0/2]");
  }
  const double scale = (2.0 * gamma - 1.0) / (1.0 - spec.alpha0);
  Vector out(spec.theta0);
  for (double& v : out) v *= scale;
  return out;
}

double oracle_interval_length(const SyntheticSpec& spec, std::span<const double> x, double alpha) {
  if (!(alpha > spec.alpha0 && alpha <= 0.5)) {
    throw InvalidArgument("oracle_interval_length: alpha must lie in (alpha0, 1/2]");
  }
  if (!spec.in_box(x)) throw InvalidArgument("oracle_interval_length: x outside the covariate box");
  return 2.0 * (1.0 - alpha) / (1.0 - spec.alpha0) * dot(spec.theta0, x);
}

double conditional_pdf(const SyntheticSpec& spec, std::span<const double> x, double y) {
  return ConditionalDensity(spec, x).pdf(y);
}

double conditional_cdf(const SyntheticSpec& spec, std::span<const double> x, double y) {
  return ConditionalDensity(spec, x).cdf(y);
}

double conditional_quantile(const SyntheticSpec& spec, std::span<const double> x, double gamma) {
  return ConditionalDensity(spec, x).quantile(gamma);
}

Vector sample_covariate(const SyntheticSpec& spec, Rng& rng) {
  Vector x(spec.dim());
  if (spec.layout == CovariateLayout::level_set) {
    const auto [lo, hi] = level_set_x1_range(spec);
    x[0] = rng.uniform(lo, hi);
    x[1] = std::clamp((spec.level() - spec.theta0[0] * x[0]) / spec.theta0[1], spec.x_low,
                      spec.x_high);
    return x;
  }
  for (double& v : x) v = rng.uniform(spec.x_low, spec.x_high);
  return x;
}

Dataset sample(const SyntheticSpec& spec, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("sample: count must be >= 1");
  spec.validate();
  Rng rng(seed);
  const std::size_t d = spec.dim();
  std::vector<double> features;
  std::vector<double> labels;
  features.reserve(count * d);
  labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Vector x = sample_covariate(spec, rng);
    labels.push_back(ConditionalDensity(spec, x).sample(rng));
    features.insert(features.end(), x.begin(), x.end());
  }
  return Dataset(d, std::move(features), std::move(labels));
}

ConditionalDraws sample_conditional(const SyntheticSpec& spec, std::span<const double> x,
                                    std::size_t count, std::uint64_t seed) {
  const ConditionalDensity density(spec, x);
  Rng rng(seed);
  ConditionalDraws out;
  out.ys.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.ys.push_back(density.sample(rng, &out.proposals));
  return out;
}

std::vector<double> covariate_second_moment(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.dim();
  std::vector<double> m(d * d);
  // Moments of U ~ Uniform[lo, hi].
  auto mean = [](double lo, double hi) { return 0.5 * (lo + hi); };
  auto second = [](double lo, double hi) { return (lo * lo + lo * hi + hi * hi) / 3.0; };
  if (spec.layout == CovariateLayout::level_set) {
    // x1 = U, x2 = (c - a U) / b.
    const auto [lo, hi] = level_set_x1_range(spec);
    const double a = spec.theta0[0];
    const double b = spec.theta0[1];
    const double c = spec.level();
    const double e1 = mean(lo, hi);
    const double e11 = second(lo, hi);
    const double e12 = (c * e1 - a * e11) / b;
    const double e22 = (c * c - 2.0 * a * c * e1 + a * a * e11) / (b * b);
    m = {e11, e12, e12, e22};
    return m;
  }
  const double mu = mean(spec.x_low, spec.x_high);
  const double s2 = second(spec.x_low, spec.x_high);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) m[i * d + j] = (i == j) ? s2 : mu * mu;
  }
  return m;
}

}  // namespace cqr
