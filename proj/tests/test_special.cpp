#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fhmm/special.hpp"

using namespace fhmm;

TEST_CASE("norm_cdf known values") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(norm_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-12));
  CHECK(norm_cdf(8.0) > 1.0 - 1e-14);
  CHECK(norm_cdf(-8.0) < 1e-14);
}

TEST_CASE("norm_ppf inverts norm_cdf") {
  // round-trip conditioning degrades by 1/phi(x) toward the tails
  for (double x = -6.0; x <= 6.0; x += 0.0625) {
    const double p = norm_cdf(x);
    const double slack = std::max(1e-12, 1e-15 / std::exp(-0.5 * x * x));
    CHECK(norm_ppf(p) == doctest::Approx(x).epsilon(slack));
  }
  CHECK(norm_ppf(0.5) == doctest::Approx(0.0));
  CHECK(norm_ppf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  // deep tails stay finite and monotone
  CHECK(norm_ppf(1e-12) < norm_ppf(1e-10));
  CHECK(std::isfinite(norm_ppf(1e-300)));
}

TEST_CASE("digamma values and recurrence") {
  const double gamma_e = 0.5772156649015329;
  CHECK(digamma(1.0) == doctest::Approx(-gamma_e).epsilon(1e-12));
  CHECK(digamma(0.5) ==
        doctest::Approx(-gamma_e - 2.0 * std::log(2.0)).epsilon(1e-12));
  for (double x = 0.1; x < 20.0; x += 0.3)
    CHECK(digamma(x + 1.0) == doctest::Approx(digamma(x) + 1.0 / x).epsilon(1e-11));
  // large-argument asymptotics: psi(x) ~ ln x - 1/(2x) + O(x^-2)
  CHECK(digamma(1000.0) ==
        doctest::Approx(std::log(1000.0) - 0.0005).epsilon(1e-7));
}

TEST_CASE("logsumexp stability and exactness") {
  {
    double s[] = {std::log(1.0), std::log(2.0), std::log(3.0)};
    CHECK(logsumexp(s) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  }
  {
    double s[] = {-1000.0, -1000.0};
    CHECK(logsumexp(s) ==
          doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-14));
  }
  {
    double s[] = {700.0, 0.0};
    CHECK(logsumexp(s) == doctest::Approx(700.0).epsilon(1e-14));
  }
}
