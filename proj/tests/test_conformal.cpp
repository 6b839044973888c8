#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cqr/conformal.hpp"
#include "cqr/errors.hpp"
#include "cqr/rng.hpp"

using namespace cqr;

namespace {

// Models with theta = (t, 0) so predictions at x = (1, 0) are t.
CqrModelPair band(double lo, double hi, double alpha = 0.1) {
  return CqrModelPair({lo, 0.0}, {hi, 0.0}, alpha);
}
const Vector kX{1.0, 0.0};

}  // namespace

TEST_CASE("cqr score") {
  CHECK(cqr_score(band(1, 3), kX, 2) == -1.0);
  CHECK(cqr_score(band(1, 3), kX, 4) == 1.0);
  CHECK(cqr_score(band(1, 3), kX, 1) == 0.0);
  CHECK_THROWS_AS(cqr_score(band(1, 3), Vector{1.0}, 1), InvalidArgument);
}

TEST_CASE("cmr score") {
  const LinearQuantileModel med{{2.0, 0.0}, 0.5};
  CHECK(cmr_score(med, kX, 5) == 3.0);
  CHECK(cmr_score(med, kX, 2) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double d = std::floor(rng.uniform(0, 10) * 1024) / 1024;  // exact sums
    CHECK(cmr_score(med, kX, 2 + d) == cmr_score(med, kX, 2 - d));
  }
}

TEST_CASE("model pair validation") {
  CHECK_THROWS_AS(CqrModelPair({1.0}, {2.0}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(CqrModelPair({1.0}, {2.0}, 0.6), InvalidArgument);
  CHECK_THROWS_AS(CqrModelPair({1.0}, {2.0, 1.0}, 0.1), InvalidArgument);
  const auto p = band(0, 1, 0.2);
  CHECK(p.lower.gamma == doctest::Approx(0.1));
  CHECK(p.upper.gamma == doctest::Approx(0.9));
}

TEST_CASE("conformal quantile index") {
  CHECK(conformal_quantile_index(99, 0.1) == 90);
  CHECK(conformal_quantile_index(10, 0.5) == 6);
  CHECK_THROWS_AS(conformal_quantile_index(9, 0.05), CalibrationInfeasible);
  CHECK_THROWS_AS(conformal_quantile_index(0, 0.1), InvalidArgument);
  CHECK(conformal_quantile_index(19, 0.05) == 19);
}

TEST_CASE("calibrate") {
  std::vector<double> s(99);
  std::iota(s.begin(), s.end(), 1.0);
  Rng rng(4);
  rng.shuffle(std::span<double>(s));
  const auto c = calibrate(s, 0.1);
  CHECK(c.q_hat == 90.0);
  CHECK(c.k == 90);
  CHECK(c.m == 99);
  CHECK(std::is_sorted(c.scores.begin(), c.scores.end()));
  CHECK_THROWS_AS(calibrate(std::vector<double>{7.0}, 0.4), CalibrationInfeasible);
  CHECK(calibrate(std::vector<double>(50, 2.5), 0.2).q_hat == 2.5);
  CHECK_THROWS_AS(calibrate(std::vector<double>{1.0, std::nan(""), 2.0}, 0.4), InvalidArgument);
  CHECK_THROWS_AS(calibrate(std::vector<double>{}, 0.4), InvalidArgument);
}

TEST_CASE("cqr interval") {
  const auto iv = cqr_interval(band(1, 3), 0.5, kX);
  CHECK_FALSE(iv.empty());
  CHECK(iv.lo() == 0.5);
  CHECK(iv.hi() == 3.5);
  CHECK(iv.length() == 3.0);
  const auto crossed = cqr_interval(band(3, 1), 0.5, kX);
  CHECK(crossed.empty());
  CHECK(crossed.length() == 0.0);
  CHECK_FALSE(crossed.contains(2.0));
  // hi - lo + 2q = 0 is still a (degenerate) interval
  const auto point = cqr_interval(band(3, 1), 1.0, kX);
  CHECK_FALSE(point.empty());
  CHECK(point.length() == 0.0);
  CHECK(point.contains(2.0));
  // negative q shrinks the band
  const auto shrunk = cqr_interval(band(1, 3), -0.5, kX);
  CHECK(shrunk.lo() == 1.5);
  CHECK(shrunk.hi() == 2.5);
}

TEST_CASE("cmr interval") {
  const LinearQuantileModel med{{2.0, 0.0}, 0.5};
  const auto iv = cmr_interval(med, 1.0, kX);
  CHECK(iv.lo() == 1.0);
  CHECK(iv.hi() == 3.0);
  const auto pt = cmr_interval(med, 0.0, kX);
  CHECK(pt.length() == 0.0);
  CHECK(pt.contains(2.0));
  CHECK_THROWS_AS(cmr_interval(med, -1.0, kX), InvalidArgument);
  Rng rng(8);
  const LinearQuantileModel m2{{0.3, -1.2}, 0.5};
  for (int i = 0; i < 100; ++i) {
    const Vector x{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    CHECK(cmr_interval(m2, 1.75, x).length() == doctest::Approx(3.5).epsilon(1e-12));
  }
}

TEST_CASE("coverage") {
  std::vector<PredictionInterval> full(3, PredictionInterval::closed(-101, 101));
  const std::vector<double> ys{-100, 0, 100};
  CHECK(coverage(full, ys) == 1.0);
  std::vector<PredictionInterval> none(3, PredictionInterval::empty_set());
  CHECK(coverage(none, ys) == 0.0);
  std::vector<PredictionInterval> edge{PredictionInterval::closed(0, 1), PredictionInterval::closed(0, 1)};
  CHECK(coverage(edge, std::vector<double>{0.0, 1.0000001}) == 0.5);
  CHECK_THROWS_AS(coverage(full, std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("length deviation") {
  std::vector<PredictionInterval> iv{PredictionInterval::closed(0, 2), PredictionInterval::closed(0, 4)};
  CHECK(length_deviation(iv, std::vector<double>{3, 3}) == 1.0);
  CHECK(length_deviation(iv, std::vector<double>{2, 4}) == 0.0);
  std::vector<PredictionInterval> e{PredictionInterval::empty_set()};
  CHECK(length_deviation(e, std::vector<double>{5}) == 5.0);
  CHECK_THROWS_AS(length_deviation(iv, std::vector<double>{1}), InvalidArgument);
  CHECK_THROWS_AS(length_deviation(iv, std::vector<double>{1, -1}), InvalidArgument);
  CHECK_THROWS_AS(PredictionInterval::closed(2, 1), InvalidArgument);
}
