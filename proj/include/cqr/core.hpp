#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cqr {

using Vector = std::vector<double>;

struct Sample {
  Vector x;
  double y = 0.0;
};

// Immutable collection of samples with a uniform covariate dimension.
// Features are stored row-major so a row can be viewed as a span.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t dim);
  explicit Dataset(const std::vector<Sample>& samples);
  Dataset(std::size_t dim, std::vector<double> features, std::vector<double> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> x(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  double y(std::size_t i) const { return labels_[i]; }

  const std::vector<double>& features() const noexcept { return features_; }
  const std::vector<double>& labels() const noexcept { return labels_; }

  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset slice(std::size_t begin, std::size_t end) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<double> labels_;
};

// t_gamma(x; theta) = theta^T x.
struct LinearQuantileModel {
  Vector theta;
  double gamma = 0.5;

  double predict(std::span<const double> x) const;
};

// Regularity constants of a data distribution: ||x|| <= B, ||theta|| <= K,
// lambda_min I <= E[X X^T] <= lambda_max I, f_min <= f(y|x) <= f_max on
// [y_min, y_max].
struct DistributionSpec {
  double B = 1.0;
  double K = 1.0;
  std::size_t d = 1;
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  double f_min = 1.0;
  double f_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;

  void validate() const;
};

void require_level(double gamma, const char* what = "gamma");

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

double pinball_loss(double t, double y, double gamma);
double predict(const LinearQuantileModel& model, std::span<const double> x);

// (1{y < theta^T x} - gamma) x; the kink y == theta^T x takes indicator 0.
Vector pinball_subgradient(std::span<const double> theta, std::span<const double> x, double y,
                           double gamma);

// out += scale * pinball_subgradient(theta, x, y, gamma), without allocating.
void accumulate_pinball_subgradient(std::span<const double> theta, std::span<const double> x,
                                    double y, double gamma, double scale, std::span<double> out);

double mean_pinball_loss(const Dataset& data, std::span<const double> theta, double gamma);

}  // namespace cqr
