#include "cqr/core.hpp"

#include <cmath>
#include <string>

#include "cqr/errors.hpp"

namespace cqr {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

Dataset::Dataset(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidArgument("Dataset: dimension must be >= 1");
}

Dataset::Dataset(const std::vector<Sample>& samples) {
  if (samples.empty()) return;
  dim_ = samples.front().x.size();
  if (dim_ == 0) throw InvalidArgument("Dataset: dimension must be >= 1");
  features_.reserve(samples.size() * dim_);
  labels_.reserve(samples.size());
  for (const auto& s : samples) {
    require_same_dim(s.x.size(), dim_, "Dataset");
    for (double v : s.x) {
      if (!std::isfinite(v)) throw InvalidArgument("Dataset: non-finite covariate");
    }
    if (!std::isfinite(s.y)) throw InvalidArgument("Dataset: non-finite label");
    features_.insert(features_.end(), s.x.begin(), s.x.end());
    labels_.push_back(s.y);
  }
}

Dataset::Dataset(std::size_t dim, std::vector<double> features, std::vector<double> labels)
    : dim_(dim), features_(std::move(features)), labels_(std::move(labels)) {
  if (dim_ == 0) throw InvalidArgument("Dataset: dimension must be >= 1");
  if (features_.size() != labels_.size() * dim_) {
    throw InvalidArgument("Dataset: feature buffer does not match label count");
  }
  for (double v : features_) {
    if (!std::isfinite(v)) throw InvalidArgument("Dataset: non-finite covariate");
  }
  for (double v : labels_) {
    if (!std::isfinite(v)) throw InvalidArgument("Dataset: non-finite label");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.dim_ = dim_;
  out.features_.reserve(rows.size() * dim_);
  out.labels_.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw InvalidArgument("Dataset::subset: row out of range");
    auto row = x(r);
    out.features_.insert(out.features_.end(), row.begin(), row.end());
    out.labels_.push_back(labels_[r]);
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw InvalidArgument("Dataset::slice: bad range");
  Dataset out;
  out.dim_ = dim_;
  out.features_.assign(features_.begin() + static_cast<std::ptrdiff_t>(begin * dim_),
                       features_.begin() + static_cast<std::ptrdiff_t>(end * dim_));
  out.labels_.assign(labels_.begin() + static_cast<std::ptrdiff_t>(begin),
                     labels_.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

double LinearQuantileModel::predict(std::span<const double> x) const {
  require_same_dim(theta.size(), x.size(), "predict");
  return dot(theta, x);
}

void DistributionSpec::validate() const {
  if (!(B > 0.0) || !(K > 0.0) || d == 0) {
    throw InvalidArgument("DistributionSpec: B, K and d must be positive");
  }
  if (!(lambda_min > 0.0) || lambda_min > lambda_max || lambda_max > B * B * (1.0 + 1e-12)) {
    throw InvalidArgument("DistributionSpec: need 0 < lambda_min <= lambda_max <= B^2");
  }
  if (!(f_min > 0.0) || f_min > f_max || !std::isfinite(f_max)) {
    throw InvalidArgument("DistributionSpec: need 0 < f_min <= f_max < inf");
  }
  if (!(y_min < y_max)) throw InvalidArgument("DistributionSpec: need y_min < y_max");
}

void require_level(double gamma, const char* what) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidArgument(std::string(what) + " must lie in (0, 1), got " + std::to_string(gamma));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

double pinball_loss(double t, double y, double gamma) {
  require_level(gamma);
  return y >= t ? gamma * (y - t) : (1.0 - gamma) * (t - y);
}

double predict(const LinearQuantileModel& model, std::span<const double> x) {
  return model.predict(x);
}

Vector pinball_subgradient(std::span<const double> theta, std::span<const double> x, double y,
                           double gamma) {
  Vector g(x.size(), 0.0);
  accumulate_pinball_subgradient(theta, x, y, gamma, 1.0, g);
  return g;
}

void accumulate_pinball_subgradient(std::span<const double> theta, std::span<const double> x,
                                    double y, double gamma, double scale, std::span<double> out) {
  require_level(gamma);
  require_same_dim(theta.size(), x.size(), "pinball_subgradient");
  require_same_dim(out.size(), x.size(), "pinball_subgradient");
  const double t = dot(theta, x);
  const double coef = ((y < t) ? 1.0 : 0.0) - gamma;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += scale * coef * x[i];
}

double mean_pinball_loss(const Dataset& data, std::span<const double> theta, double gamma) {
  if (data.empty()) throw InvalidArgument("mean_pinball_loss: empty dataset");
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    s += pinball_loss(dot(theta, data.x(i)), data.y(i), gamma);
  }
  return s / static_cast<double>(data.size());
}

}  // namespace cqr
