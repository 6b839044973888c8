#include <doctest.h>

#include <cmath>

#include "cqr/bounds.hpp"
#include "cqr/errors.hpp"

using namespace cqr;

namespace {

DistributionSpec toy() {
  DistributionSpec s;
  s.B = 10;
  s.K = 1;
  s.d = 2;
  s.lambda_min = 1;
  s.lambda_max = 2;
  s.f_min = 0.5;
  s.f_max = 2;
  s.y_min = -5;
  s.y_max = 5;
  return s;
}

}  // namespace

TEST_CASE("theory constants") {
  DistributionSpec s = toy();
  s.B = 1;
  s.lambda_max = 1;
  const auto c = constants(s, 0.1, 100, 0.1);
  CHECK(c.H == 4.0);
  CHECK(c.R == 4.0);
  CHECK(c.beta == doctest::Approx(0.025));
  CHECK(c.A == doctest::Approx(4.0 * 1 * 2 * 2 / (1 * 0.25)));
  CHECK(c.eps_n == doctest::Approx(std::sqrt(2 * c.A / (100 * 0.1))));
  CHECK(constants(s, 0.9, 100, 0.1).beta == doctest::Approx(0.025));
  CHECK_THROWS_AS(constants(s, 0.1, 0, 0.1), InvalidArgument);
  CHECK_THROWS_AS(constants(s, 0.1, 10, 1.0), InvalidArgument);
  s.f_min = 0;
  CHECK_THROWS_AS(constants(s, 0.1, 10, 0.1), InvalidArgument);
}

TEST_CASE("m condition") {
  CHECK(check_m_condition(4, 0.1, 321));
  CHECK_FALSE(check_m_condition(4, 0.1, 320));
  CHECK(check_m_condition(4, 0.5, 65));
  CHECK_FALSE(check_m_condition(4, 0.5, 64));
  CHECK(check_m_condition(4, 0.9, 321) == check_m_condition(4, 0.1, 321));
}

TEST_CASE("bounds enforce the m condition unless told otherwise") {
  const auto s = toy();
  CHECK_THROWS_AS(cqr_bound(s, 0.1, 1000, 320), PreconditionFailed);
  CHECK_THROWS_AS(cmr_bound(s, 0.1, 1000, 320), PreconditionFailed);
  CHECK(std::isfinite(cqr_bound(s, 0.1, 1000, 320, MCondition::ignore)));
  CHECK_NOTHROW(cqr_bound(s, 0.1, 1000, 321));
  CHECK_THROWS_AS(cqr_bound(s, 0.1, 0, 500), InvalidArgument);
}

TEST_CASE("cqr bound matches its five terms") {
  const auto s = toy();
  const double n = 5000;
  const double m = 4000;
  const double a2 = 0.01;
  const double R = 2 * 10 * 1 + 1 / 0.5;
  const double expected =
      (4 * 2 * std::sqrt(2 * 2) / (1 * 0.5 * 1) + 2 * 10 * 2 * std::sqrt(2 * 2 * 2) / (1 * 0.5)) / std::sqrt(n) +
      std::sqrt(M_PI) / (2 * 0.5 * std::sqrt(2)) / std::sqrt(m) + 1 / (0.5 * m) +
      4 * R * std::exp(-a2 * 0.25 * m / (8 * 4)) + 1056 * 4 * 8 * 100 * R / (a2 * 1 * 0.25 * n);
  CHECK(cqr_bound(s, 0.1, 5000, 4000) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("cmr bound matches its five terms") {
  const auto s = toy();
  const double n = 5000;
  const double m = 4000;
  const double a2 = 0.01;
  const double R = 22;
  const double expected = std::sqrt(M_PI) / (0.5 * std::sqrt(2 * m)) + 8 * R * std::exp(-0.25 * a2 * m / 32) +
                          2056 * R * 4 * 8 * 100 * 2 / (1 * 0.25 * a2 * n) + 2 / (0.5 * m) +
                          4 * 10 * 2 * std::sqrt(4) / (1 * 0.5) / std::sqrt(n);
  CHECK(cmr_bound(s, 0.1, 5000, 4000) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bounds decrease in n and m and grow as alpha shrinks") {
  const auto s = toy();
  for (auto bound : {cqr_bound, cmr_bound}) {
    double prev = INFINITY;
    for (double n = 1e3; n <= 1e6; n *= 1.5) {
      const double v = bound(s, 0.1, static_cast<std::size_t>(n), 5000, MCondition::enforce);
      CHECK(v < prev);
      prev = v;
    }
    prev = INFINITY;
    for (double m = 400; m <= 1e6; m *= 1.5) {
      const double v = bound(s, 0.1, 5000, static_cast<std::size_t>(m), MCondition::ignore);
      CHECK(v < prev);
      prev = v;
    }
    CHECK(bound(s, 0.01, 5000, 5000, MCondition::ignore) > bound(s, 0.2, 5000, 5000, MCondition::ignore));
  }
}

TEST_CASE("sgd rates") {
  const auto s = toy();
  CHECK(sgd_parameter_error_rate(s, 100) == doctest::Approx(4 * 4 * 2 * 2 / (1 * 0.25 * 100)));
  CHECK(sgd_prediction_error_rate(s, 100) == doctest::Approx(sgd_parameter_error_rate(s, 100) * 1));
  CHECK(sgd_parameter_error_rate(s, 200) == doctest::Approx(sgd_parameter_error_rate(s, 100) / 2));
}

TEST_CASE("regime classification") {
  CHECK(classify_regime(10000, 10000, 0.2) == Regime::balanced);
  CHECK(classify_regime(10000, 10000, 0.05) == Regime::alpha_squared_n);
  CHECK(classify_regime(10000, 10000, 0.005) == Regime::vacuous);
  CHECK(classify_regime(1000000, 100, 0.2) == Regime::exp_m);
  CHECK(classify_regime(10000, 10000, 0.05, 0.1) == Regime::balanced);
  for (auto r : {Regime::vacuous, Regime::alpha_squared_n, Regime::exp_m, Regime::balanced}) {
    CHECK(parse_regime(regime_name(r)) == r);
  }
  CHECK_THROWS_AS(parse_regime("nope"), InvalidArgument);
  CHECK_THROWS_AS(classify_regime(10, 10, 0.7), InvalidArgument);
}

TEST_CASE("regime labels are ordered in alpha at n = m") {
  for (std::size_t n : {100, 1000, 10000, 100000}) {
    int prev = 0;
    for (double a = 0.001; a <= 0.5; a += 0.001) {
      const int r = static_cast<int>(classify_regime(n, n, a));
      CHECK(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("allocation advice") {
  CHECK(allocation_advice(0.2, 10000) == std::pair<std::size_t, std::size_t>{5000, 5000});
  for (double a : {0.001, 0.01, 0.05, 0.1, 0.3, 0.5}) {
    for (std::size_t total : {2, 3, 10, 999, 10000, 1000000}) {
      const auto [n, m] = allocation_advice(a, total);
      CHECK(n + m == total);
      CHECK(n >= 1);
      CHECK(m >= 1);
    }
  }
  // below the threshold, m follows ceil(alpha^4 n^4) at the smallest n that fills the budget
  const auto [n, m] = allocation_advice(0.02, 10000);
  CHECK(n < 5000);
  CHECK(static_cast<double>(m) <= std::ceil(std::pow(0.02, 4) * std::pow(n, 4.0)));
  CHECK(static_cast<double>(m + 1) > std::ceil(std::pow(0.02, 4) * std::pow(n - 1, 4.0)));
  CHECK_THROWS_AS(allocation_advice(0.1, 1), InvalidArgument);
}

TEST_CASE("measured synthetic constants") {
  const auto spec = SyntheticSpec::draw(3);
  const auto ds = measure_distribution_spec(spec, 32);
  CHECK_NOTHROW(ds.validate());
  CHECK(ds.B == doctest::Approx(20 * std::sqrt(2.0)));
  CHECK(ds.K == doctest::Approx(norm2(spec.theta0)));
  // uniform box: variance (19^2/12) along (1,-1)
  CHECK(ds.lambda_min == doctest::Approx(19.0 * 19.0 / 12.0).epsilon(1e-9));
  CHECK(ds.f_min > 0.0);
  CHECK(ds.f_max / ds.f_min >= 1.0);
  CHECK(std::isfinite(ds.f_max));
}
