#pragma once

// Finite sections of the Hilbert matrix (entries 1/(i+j-1)) and their lower
// Cholesky factors from the closed form
//   L(i,j) = sqrt(2j-1) * ((i-1)!)^2 / ((i-j)! (i+j-1)!),   j <= i.
// The factorial quotient is evaluated by a multiplicative recurrence whose
// factors never exceed one, so the entries stay representable at any order
// (they underflow to zero long before anything overflows). For small orders
// the construction is verified against exact rational arithmetic.

#include <Eigen/Core>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "specdecay/operators.hpp"

namespace specdecay {

using Rational = boost::multiprecision::cpp_rational;

// Exact entry H(i,j) = 1/(i+j-1), indices 1-based.
inline Rational hilbert_entry_exact(int i, int j) {
  if (i < 1 || j < 1) {
    throw std::invalid_argument("hilbert_entry_exact: indices are 1-based");
  }
  return Rational(1, i + j - 1);
}

struct HilbertTruncation {
  int n = 0;
  Eigen::MatrixXd entries;

  DiscreteOperator to_operator() const {
    return make_dense(entries, "H[n=" + std::to_string(n) + "]");
  }
};

inline HilbertTruncation hilbert_matrix(int n) {
  if (n < 1) throw std::invalid_argument("hilbert_matrix: n must be >= 1");
  HilbertTruncation h;
  h.n = n;
  h.entries.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      h.entries(i, j) = 1.0 / (i + j + 1);
    }
  }
  return h;
}

struct CholeskyFactor {
  int n = 0;
  Eigen::MatrixXd L;          // lower triangular
  bool exact_checked = false; // rational identity L L^T = H verified

  DiscreteOperator to_operator() const {
    return make_dense(L, "L[n=" + std::to_string(n) + "]");
  }
};

namespace detail {

// Factorial quotient r(i,j) = ((i-1)!)^2 / ((i-j)! (i+j-1)!) for j <= i via
//   r(i,1) = 1/i,   r(i,j+1) = r(i,j) * (i-j)/(i+j).
template <typename Scalar>
std::vector<std::vector<Scalar>> hilbert_factor_quotients(int n) {
  std::vector<std::vector<Scalar>> r(n);
  for (int i = 1; i <= n; ++i) {
    r[i - 1].resize(i);
    Scalar v = Scalar(1) / Scalar(i);
    r[i - 1][0] = v;
    for (int j = 1; j < i; ++j) {
      v = v * Scalar(i - j) / Scalar(i + j);
      r[i - 1][j] = v;
    }
  }
  return r;
}

// (L L^T)(i,k) = sum_j (2j-1) r(i,j) r(k,j) must reproduce 1/(i+k-1)
// exactly in rational arithmetic; cheap enough up to order twelve.
inline bool hilbert_cholesky_identity_exact(int n) {
  const auto r = hilbert_factor_quotients<Rational>(n);
  for (int i = 1; i <= n; ++i) {
    for (int k = 1; k <= i; ++k) {
      Rational acc(0);
      for (int j = 1; j <= k; ++j) {
        acc += Rational(2 * j - 1) * r[i - 1][j - 1] * r[k - 1][j - 1];
      }
      if (acc != hilbert_entry_exact(i, k)) return false;
    }
  }
  return true;
}

}  // namespace detail

inline CholeskyFactor hilbert_cholesky(int n) {
  if (n < 1) throw std::invalid_argument("hilbert_cholesky: n must be >= 1");
  CholeskyFactor f;
  f.n = n;
  f.L = Eigen::MatrixXd::Zero(n, n);
  const auto r = detail::hilbert_factor_quotients<double>(n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= i; ++j) {
      f.L(i - 1, j - 1) = std::sqrt(2.0 * j - 1.0) * r[i - 1][j - 1];
    }
  }
  if (n <= 12) {
    if (!detail::hilbert_cholesky_identity_exact(n)) {
      throw std::logic_error(
          "hilbert_cholesky: closed form failed the exact rational check");
    }
    f.exact_checked = true;
  }
  return f;
}

}  // namespace specdecay
