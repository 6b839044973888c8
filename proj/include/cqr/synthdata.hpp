#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cqr/core.hpp"
#include "cqr/rng.hpp"

namespace cqr {

enum class CovariateLayout {
  box,        // X ~ Uniform([x_low, x_high]^d)
  level_set,  // X uniform on {x in box : theta0^T x = theta0^T center}; d = 2
};

// Synthetic regression family with a symmetric five-piece affine conditional
// density. On X = x the central plateau [-theta0^T x, theta0^T x] holds mass
// 1 - alpha0; each of the four tail pieces holds alpha0 / 4. Conditional
// gamma-quantiles for gamma in [alpha0/2, 1 - alpha0/2] are linear in x.
struct SyntheticSpec {
  Vector theta0{1.5, 1.5};
  double alpha0 = 0.005;
  double x_low = 1.0;
  double x_high = 20.0;
  CovariateLayout layout = CovariateLayout::box;

  // theta0 ~ Uniform([1, 2]^2).
  static SyntheticSpec draw(std::uint64_t seed, CovariateLayout layout = CovariateLayout::box);

  std::size_t dim() const noexcept { return theta0.size(); }
  double y_max() const;
  double y_min() const { return -y_max(); }
  // theta0^T x on the level set (only meaningful for the level_set layout).
  double level() const;
  bool in_box(std::span<const double> x) const;

  void validate() const;
};

// The conditional law of Y given X = x, precomputed for one x.
class ConditionalDensity {
 public:
  ConditionalDensity(const SyntheticSpec& spec, std::span<const double> x);

  double pdf(double y) const;
  double cdf(double y) const;
  double quantile(double gamma) const;
  double max_density() const noexcept { return std::max(plateau_, knot_); }
  double min_density() const noexcept { return floor_; }
  double support_max() const noexcept { return y_max_; }

  // One draw by rejection against the uniform proposal on [y_min, y_max].
  double sample(Rng& rng, std::size_t* proposals = nullptr) const;

  double plateau_halfwidth() const noexcept { return half_; }
  double plateau_density() const noexcept { return plateau_; }
  double knot_density() const noexcept { return knot_; }
  double first_tail_length() const noexcept { return len1_; }
  double second_tail_length() const noexcept { return len2_; }

 private:
  double upper_half_cdf(double y) const;   // P(0 <= Y <= y) for y >= 0
  double upper_half_quantile(double p) const;

  double alpha0_;
  double y_max_;
  double half_;     // theta0^T x
  double plateau_;  // (1 - alpha0) / (2 theta0^T x)
  double knot_;
  double floor_;
  double len1_;
  double len2_;
};

Vector oracle_theta(const SyntheticSpec& spec, double gamma);
double oracle_interval_length(const SyntheticSpec& spec, std::span<const double> x, double alpha);

double conditional_pdf(const SyntheticSpec& spec, std::span<const double> x, double y);
double conditional_cdf(const SyntheticSpec& spec, std::span<const double> x, double y);
double conditional_quantile(const SyntheticSpec& spec, std::span<const double> x, double gamma);

Vector sample_covariate(const SyntheticSpec& spec, Rng& rng);
Dataset sample(const SyntheticSpec& spec, std::size_t count, std::uint64_t seed);

struct ConditionalDraws {
  std::vector<double> ys;
  std::size_t proposals = 0;
};
ConditionalDraws sample_conditional(const SyntheticSpec& spec, std::span<const double> x,
                                    std::size_t count, std::uint64_t seed);

// E[X X^T] under the covariate law, row-major d x d (exact).
std::vector<double> covariate_second_moment(const SyntheticSpec& spec);

}  // namespace cqr
