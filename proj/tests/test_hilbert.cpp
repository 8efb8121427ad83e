#include "specdecay/hilbert.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "specdecay/spectra.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using specdecay::CholeskyFactor;
using specdecay::full_svd;
using specdecay::hilbert_cholesky;
using specdecay::hilbert_entry_exact;
using specdecay::hilbert_matrix;
using specdecay::HilbertTruncation;
using specdecay::Rational;
using specdecay::Spectrum;

namespace {

using BigInt = boost::multiprecision::cpp_int;

BigInt factorial(int n) {
  BigInt f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// Closed-form factorial quotient, evaluated with explicit big-integer
// factorials; independent of the library's recurrence.
Rational factor_quotient_exact(int i, int j) {
  const BigInt num = factorial(i - 1) * factorial(i - 1);
  const BigInt den = factorial(i - j) * factorial(i + j - 1);
  return Rational(num, den);
}

}  // namespace

TEST_CASE("hilbert_matrix builds the reciprocal-sum truncation") {
  SECTION("order one") {
    HilbertTruncation h = hilbert_matrix(1);
    REQUIRE(h.entries.rows() == 1);
    REQUIRE(h.entries(0, 0) == 1.0);
  }

  SECTION("order two") {
    HilbertTruncation h = hilbert_matrix(2);
    REQUIRE(h.entries(0, 0) == 1.0);
    REQUIRE(h.entries(0, 1) == 0.5);
    REQUIRE(h.entries(1, 0) == 0.5);
    REQUIRE(h.entries(1, 1) == 1.0 / 3.0);
  }

  SECTION("entries round the exact rationals") {
    HilbertTruncation h = hilbert_matrix(7);
    for (int i = 1; i <= 7; ++i) {
      for (int j = 1; j <= 7; ++j) {
        REQUIRE(h.entries(i - 1, j - 1) ==
                static_cast<double>(hilbert_entry_exact(i, j)));
      }
    }
    REQUIRE(hilbert_entry_exact(2, 3) == Rational(1, 4));
  }

  SECTION("invalid order") {
    REQUIRE_THROWS_AS(hilbert_matrix(0), std::invalid_argument);
    REQUIRE_THROWS_AS(hilbert_entry_exact(0, 1), std::invalid_argument);
  }

  SECTION("order-three eigenvalues against the characteristic polynomial") {
    // Oracle: roots of x^3 - (23/15) x^2 + (127/720) x - 1/2160.
    const auto roots =
        oracles::cubic_roots_real(-23.0 / 15.0, 127.0 / 720.0, -1.0 / 2160.0);
    Spectrum s = full_svd(hilbert_matrix(3).to_operator());
    for (int i = 0; i < 3; ++i) {
      REQUIRE_THAT(s.values[i], WithinRel(roots[i], 1e-12));
    }
  }

  SECTION("order-two eigenvalues against the closed-form quadratic") {
    // Oracle: eigenvalues of [[a,b],[b,c]] are ((a+c) +- sqrt((a-c)^2+4b^2))/2.
    const double a = 1.0, b = 0.5, c = 1.0 / 3.0;
    const double disc = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
    Spectrum s = full_svd(hilbert_matrix(2).to_operator());
    REQUIRE_THAT(s.values[0], WithinRel((a + c + disc) / 2.0, 1e-14));
    REQUIRE_THAT(s.values[1], WithinRel((a + c - disc) / 2.0, 1e-13));
    REQUIRE_THAT(s.values[0], WithinRel(1.2675918792439982155, 1e-14));
    REQUIRE_THAT(s.values[1], WithinRel(0.065741454089335117813, 1e-13));
  }
}

TEST_CASE("hilbert_cholesky reproduces the exact factorization") {
  SECTION("order two in closed form") {
    // Oracle: eliminating H_2 by hand gives L = [[1, 0], [1/2, sqrt(3)/6]].
    CholeskyFactor f = hilbert_cholesky(2);
    REQUIRE(f.exact_checked);
    REQUIRE(f.L(0, 0) == 1.0);
    REQUIRE(f.L(0, 1) == 0.0);
    REQUIRE(f.L(1, 0) == 0.5);
    REQUIRE_THAT(f.L(1, 1), WithinRel(0.28867513459481288225, 1e-15));
  }

  SECTION("the closed form matches rational elimination exactly at n=12") {
    // Oracle: exact LDL^T of the rational Hilbert matrix. The Cholesky
    // factor relates through L(i,j)^2 = Lunit(i,j)^2 * D(j), which stays
    // rational even though L itself is not.
    const int n = 12;
    std::vector<std::vector<Rational>> h(n, std::vector<Rational>(n));
    for (int i = 1; i <= n; ++i) {
      for (int j = 1; j <= n; ++j) h[i - 1][j - 1] = hilbert_entry_exact(i, j);
    }
    const auto ldlt = oracles::rational_ldlt(h);
    CholeskyFactor f = hilbert_cholesky(n);
    REQUIRE(f.exact_checked);
    for (int i = 1; i <= n; ++i) {
      for (int j = 1; j <= i; ++j) {
        const Rational closed =
            Rational(2 * j - 1) * factor_quotient_exact(i, j) *
            factor_quotient_exact(i, j);
        const Rational eliminated = ldlt.L[i - 1][j - 1] *
                                    ldlt.L[i - 1][j - 1] * ldlt.D[j - 1];
        REQUIRE(closed == eliminated);
        // and the float entries round those exact squares
        const double expect = std::sqrt(static_cast<double>(closed));
        REQUIRE_THAT(f.L(i - 1, j - 1), WithinRel(expect, 1e-12));
      }
    }
  }

  SECTION("float product recovers the Hilbert matrix at n=12") {
    CholeskyFactor f = hilbert_cholesky(12);
    Eigen::MatrixXd h = hilbert_matrix(12).entries;
    REQUIRE((f.L * f.L.transpose() - h).norm() <= 1e-12 * h.norm());
  }

  SECTION("large orders stay finite through the recurrence") {
    CholeskyFactor f = hilbert_cholesky(120);
    REQUIRE_FALSE(f.exact_checked);
    REQUIRE(f.L.allFinite());
    REQUIRE(f.L(0, 0) == 1.0);
    REQUIRE(f.L(119, 0) == 1.0 / 120.0);
    for (int i = 0; i < 120; ++i) {
      REQUIRE(f.L(i, i) >= 0.0);
      for (int j = i + 1; j < 120; ++j) REQUIRE(f.L(i, j) == 0.0);
    }
  }

  SECTION("invalid order") {
    REQUIRE_THROWS_AS(hilbert_cholesky(0), std::invalid_argument);
  }
}

TEST_CASE("squared Cholesky singular values are Hilbert eigenvalues") {
  // Oracle: cyclic Jacobi on H_10 in 50-digit floats pins the true
  // eigenvalues far below double precision.
  const int n = 10;
  std::vector<std::vector<oracles::BigFloat>> h(
      n, std::vector<oracles::BigFloat>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      h[i][j] = oracles::BigFloat(1) / oracles::BigFloat(i + j + 1);
    }
  }
  const auto lam = oracles::jacobi_eigenvalues(h);

  Spectrum sl = full_svd(hilbert_cholesky(n).to_operator());
  Spectrum sh = full_svd(hilbert_matrix(n).to_operator());
  const double lam1 = static_cast<double>(lam[0]);

  for (int i = 0; i < n; ++i) {
    const double truth = static_cast<double>(lam[static_cast<std::size_t>(i)]);
    // triangular-factor route: high relative accuracy all the way down to
    // the stated floor
    if (truth >= 1e-8) {
      const double squared = sl.values[i] * sl.values[i];
      REQUIRE_THAT(squared, WithinRel(truth, 1e-10));
    }
    // direct route: normwise stability only
    REQUIRE_THAT(sh.values[i], WithinAbs(truth, 1e-13 * lam1));
  }
}
