#pragma once

// Truncated dilogarithm sums and the smooth kernel
//   k(s,t) = sum_{j=1..j_max} (1-s^j)(1-t^j)/j^2
// evaluated through the split k = S(1) - S(s) - S(t) + S(st) with
// S_J(x) = sum_{j<=J} x^j/j^2.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "specdecay/common.hpp"

namespace specdecay {

// Partial dilogarithm S_{j_max}(x) = sum_{j=1..j_max} x^j / j^2 for x in
// [0,1], absolute error <= tol.
//
// For x < 1 the loop stops at the smallest J whose geometric tail bound
// x^(J+1) / ((J+1)^2 (1-x)) falls below tol; J depends only on (x, tol), so
// for fixed x the value at a larger j_max extends the smaller-j_max sum by
// nonnegative terms. Terms are added in ascending j with Kahan compensation,
// which keeps that extension property bitwise and the rounding error at the
// eps level. x = 1 sums the partial Basel series in full.
inline double partial_dilog(double x, std::int64_t j_max, double tol = 1e-12) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument("partial_dilog: x must lie in [0,1], got " +
                                std::to_string(x));
  }
  if (j_max < 1) {
    throw std::invalid_argument("partial_dilog: j_max must be >= 1, got " +
                                std::to_string(j_max));
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("partial_dilog: tol must be > 0");
  }
  if (x == 0.0) return 0.0;

  std::int64_t J = j_max;
  if (x < 1.0) {
    // Smallest J with x^(J+1)/(1-x) < tol; dropping the (J+1)^2 factor of the
    // true tail bound only makes the stop later, never earlier.
    const double lx = std::log(x);
    const double bound = (std::log(tol) + std::log1p(-x)) / lx;
    if (bound < static_cast<double>(j_max)) {
      const std::int64_t j_stop = static_cast<std::int64_t>(std::ceil(bound));
      J = j_stop < 1 ? 1 : j_stop;
    }
  }

  double sum = 0.0;
  double comp = 0.0;
  double p = 1.0;
  for (std::int64_t j = 1; j <= J; ++j) {
    p *= x;
    const double term = p / (static_cast<double>(j) * static_cast<double>(j));
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// Kernel value sum_{j<=j_max} (1-s^j)(1-t^j)/j^2 via the four-term
// dilogarithm split with matched truncation on every term.
inline double kernel_k(double s, double t, std::int64_t j_max,
                       double tol = 1e-12) {
  if (!(s >= 0.0 && s <= 1.0) || !(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("kernel_k: s and t must lie in [0,1]");
  }
  // Either factor (1-s^j) or (1-t^j) vanishes identically at the endpoint;
  // the split would leave cancellation residue there instead of a hard zero.
  if (s == 1.0 || t == 1.0) return 0.0;
  const double quarter = tol * 0.25;
  const double s1 = partial_dilog(1.0, j_max, quarter);
  const double ss = partial_dilog(s, j_max, quarter);
  const double st = partial_dilog(t, j_max, quarter);
  const double sst = partial_dilog(s * t, j_max, quarter);
  return s1 - ss - st + sst;
}

}  // namespace specdecay
