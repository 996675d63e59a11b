#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "pacgp/binary_kl.hpp"
#include "pacgp/errors.hpp"

using namespace pacgp;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

Big kl50(const Big& q, const Big& p) {
  using boost::multiprecision::log;
  Big out = 0;
  if (q > 0) out += q * log(q / p);
  if (q < 1) out += (1 - q) * log((1 - q) / (1 - p));
  return out;
}

// Same divergence parametrized by s = 1 - p, so tiny s keeps all its digits.
Big kl50_complement(const Big& q, const Big& s) {
  using boost::multiprecision::log;
  using boost::multiprecision::log1p;
  Big out = 0;
  if (q > 0) out += q * (log(q) - log1p(-s));
  if (q < 1) out += (1 - q) * (log(1 - q) - log(s));
  return out;
}

}  // namespace

TEST_CASE("binary_kl conventions and arbitrary-precision oracle") {
  CHECK(binary_kl(0.3, 0.3) == 0.0);
  CHECK(binary_kl(0.0, 0.4) == doctest::Approx(-std::log(0.6)).epsilon(1e-15));
  CHECK(binary_kl(1.0, 1.0) == 0.0);
  CHECK(std::isinf(binary_kl(0.2, 1.0)));
  CHECK(std::isinf(binary_kl(0.2, 0.0)));

  const double v = binary_kl(0.1, 0.5);
  const double oracle = static_cast<double>(kl50(Big("0.1"), Big("0.5")));
  CHECK(std::abs(v - oracle) <= 1e-12);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1e-4, 1.0 - 1e-4);
  for (int i = 0; i < 200; ++i) {
    const double q = u(rng), p = u(rng);
    const double ref = static_cast<double>(kl50(Big(q), Big(p)));
    CHECK(std::abs(binary_kl(q, p) - ref) <= 1e-12 * std::max(1.0, ref));
  }
}

TEST_CASE("binary_kl rejects arguments outside [0,1]") {
  CHECK_THROWS_AS(binary_kl(-0.1, 0.5), DomainError);
  CHECK_THROWS_AS(binary_kl(0.5, 1.01), DomainError);
  CHECK_NOTHROW(binary_kl(1.0 + 1e-13, 0.5));
}

TEST_CASE("binary_kl is increasing in p above q") {
  double prev = 0.0;
  for (double p = 0.31; p < 1.0; p += 0.01) {
    const double v = binary_kl(0.3, p);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("klinv special values") {
  for (double q : {0.0, 0.25, 0.7}) CHECK(klinv(q, 0.0) == doctest::Approx(q).epsilon(1e-12));
  for (double eps : {1e-6, 0.01, 0.5, 3.0}) {
    CHECK(std::abs(klinv(0.0, eps) - (-std::expm1(-eps))) <= 1e-12);
    CHECK(klinv(1.0, eps) == 1.0);
  }
  CHECK(klinv(0.3, std::numeric_limits<double>::infinity()) == 1.0);
  CHECK(std::abs(klinv(0.1, binary_kl(0.1, 0.5)) - 0.5) <= 1e-9);
  CHECK_THROWS_AS(klinv(1.5, 0.1), DomainError);
  CHECK_THROWS_AS(klinv(0.5, -0.1), DomainError);
}

TEST_CASE("klinv round trip on the grid and against the 50-digit kl") {
  double worst = 0.0;
  for (int i = 1; i <= 99; ++i) {
    const double q = i / 100.0;
    for (int k = 0; k < 20; ++k) {
      const double eps = 1e-4 * std::pow(5e4, k / 19.0);
      const double s = klinv_complement(q, eps);
      // s is passed as is, so saturation near p = 1 does not hide errors
      const double err = std::abs(static_cast<double>(kl50_complement(Big(q), Big(s))) - eps);
      worst = std::max(worst, err);
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("klinv is monotone and below the Pinsker cap") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double q = u(rng);
    const double eps = std::pow(10.0, -6.0 + 7.0 * u(rng));
    const double p = klinv(q, eps);
    CHECK(p >= q);
    CHECK(p <= std::min(1.0, q + std::sqrt(eps / 2.0)) + 1e-15);
    CHECK(klinv(q, eps * 1.1) >= p);
    CHECK(klinv(std::min(1.0, q + 0.01), eps) >= p);
  }
}

TEST_CASE("klinv partials") {
  SUBCASE("finite differences at (0.2, 0.1)") {
    const KlInvPartials d = klinv_partials(0.2, 0.1);
    const double h = 1e-6;
    const double fq = (klinv(0.2 + h, 0.1) - klinv(0.2 - h, 0.1)) / (2 * h);
    const double fe = (klinv(0.2, 0.1 + h) - klinv(0.2, 0.1 - h)) / (2 * h);
    CHECK(std::abs(d.d_dq - fq) / std::abs(fq) <= 1e-5);
    CHECK(std::abs(d.d_deps - fe) / std::abs(fe) <= 1e-5);
    CHECK(d.d_deps > 0.0);
  }
  SUBCASE("q -> 0 limit of d/deps") {
    for (double eps : {0.05, 0.5, 2.0}) {
      CHECK(klinv_partials(1e-9, eps).d_deps == doctest::Approx(std::exp(-eps)).epsilon(1e-5));
    }
  }
  SUBCASE("denominator positive at (0.5, 0.5)") {
    const double p = klinv(0.5, 0.5);
    CHECK((1 - 0.5) / (1 - p) - 0.5 / p > 0.0);
    const KlInvPartials d = klinv_partials(0.5, 0.5);
    CHECK(std::isfinite(d.d_dq));
    CHECK(std::isfinite(d.d_deps));
  }
  SUBCASE("boundary where p coincides with q") {
    CHECK_THROWS_AS(klinv_partials(0.3, 1e-300), BoundaryError);
    CHECK_THROWS_AS(klinv_partials(0.0, 0.1), DomainError);
  }
}

TEST_CASE("gradient clamping keeps the partials finite") {
  const KlPoint c = clamp_for_gradient({0.0, 0.0});
  CHECK(c.q > 0.0);
  CHECK(c.eps > 0.0);
  const KlInvPartials d = klinv_partials(c.q, c.eps);
  CHECK(std::isfinite(d.d_dq));
  CHECK(std::isfinite(d.d_deps));
}
