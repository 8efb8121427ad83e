#include "specdecay/dilog.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <chrono>
#include <random>

#include "oracles.hpp"

using specdecay::kernel_k;
using specdecay::partial_dilog;

namespace {
constexpr double kPi2Over6 = 1.6449340668482264;
// partial Basel sum at j_max = 20000, frozen from a 30-digit evaluation
constexpr double kBasel20000 = 1.6448840680982056;
}  // namespace

TEST_CASE("partial_dilog basics") {
  SECTION("x = 0 gives 0") {
    REQUIRE(partial_dilog(0.0, 10) == 0.0);
    REQUIRE(partial_dilog(0.0, 1000000) == 0.0);
  }
  SECTION("x = 1 is the partial Basel sum") {
    REQUIRE_THAT(partial_dilog(1.0, 20000),
                 Catch::Matchers::WithinAbs(kBasel20000, 1e-14));
    // tail of the Basel series after J terms lies in (1/(J+1), 1/J)
    const double s = partial_dilog(1.0, 2000000);
    REQUIRE(s < kPi2Over6);
    REQUIRE(kPi2Over6 - s < 1.0 / 2000000.0 + 1e-12);
    REQUIRE(kPi2Over6 - s > 1.0 / 2000001.0 - 1e-12);
  }
  SECTION("x = 0.5, 50 terms matches direct summation") {
    const double direct =
        static_cast<double>(oracles::dilog_direct(0.5L, 50));
    REQUIRE_THAT(partial_dilog(0.5, 50),
                 Catch::Matchers::WithinAbs(direct, 1e-15));
  }
}

TEST_CASE("partial_dilog terminates early via the geometric tail bound") {
  // j_max of 10^15 would be unreachable by direct iteration
  const auto t0 = std::chrono::steady_clock::now();
  const double s = partial_dilog(0.3, 1000000000000000LL);
  const auto ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  REQUIRE(ms < 1000.0);
  const double direct = static_cast<double>(oracles::dilog_direct(0.3L, 200));
  REQUIRE_THAT(s, Catch::Matchers::WithinAbs(direct, 1e-13));
}

TEST_CASE("partial_dilog is monotone non-decreasing in j_max") {
  std::mt19937_64 rng(7u);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const double x = dist(rng);
    const double a = partial_dilog(x, 10);
    const double b = partial_dilog(x, 100);
    const double c = partial_dilog(x, 10000);
    const double d = partial_dilog(x, 20000);
    REQUIRE(a <= b);
    REQUIRE(b <= c);
    REQUIRE(c <= d);
  }
}

TEST_CASE("partial_dilog argument validation") {
  REQUIRE_THROWS_AS(partial_dilog(-0.1, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(partial_dilog(1.1, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(partial_dilog(0.5, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(partial_dilog(0.5, 10, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(partial_dilog(0.5, 10, -1e-9), std::invalid_argument);
}

TEST_CASE("kernel_k vanishes when either argument is 1") {
  for (double other : {0.0, 0.3, 0.77, 1.0}) {
    REQUIRE_THAT(kernel_k(1.0, other, 5000),
                 Catch::Matchers::WithinAbs(0.0, 1e-13));
    REQUIRE_THAT(kernel_k(other, 1.0, 5000),
                 Catch::Matchers::WithinAbs(0.0, 1e-13));
  }
}

TEST_CASE("kernel_k at the origin approaches pi^2/6") {
  const double v = kernel_k(0.0, 0.0, 100000);
  REQUIRE(v < kPi2Over6);
  REQUIRE_THAT(v, Catch::Matchers::WithinAbs(kPi2Over6, 1.0 / 100000.0 + 1e-12));
}

TEST_CASE("kernel_k equals direct double-product summation") {
  SECTION("s = t = 0.5, 100 terms") {
    const double direct =
        static_cast<double>(oracles::kernel_direct(0.5L, 0.5L, 100));
    REQUIRE_THAT(kernel_k(0.5, 0.5, 100),
                 Catch::Matchers::WithinAbs(direct, 1e-12));
  }
  SECTION("random pairs across truncations") {
    std::mt19937_64 rng(13u);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
      const double s = dist(rng);
      const double t = dist(rng);
      for (std::int64_t jmax : {10, 100, 1000}) {
        const double direct = static_cast<double>(
            oracles::kernel_direct(static_cast<long double>(s),
                                   static_cast<long double>(t), jmax));
        REQUIRE_THAT(kernel_k(s, t, jmax),
                     Catch::Matchers::WithinAbs(direct, 1e-12));
      }
    }
  }
}

TEST_CASE("kernel_k argument validation propagates") {
  REQUIRE_THROWS_AS(kernel_k(-0.2, 0.5, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(kernel_k(0.2, 1.5, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(kernel_k(0.2, 0.5, 0), std::invalid_argument);
}
