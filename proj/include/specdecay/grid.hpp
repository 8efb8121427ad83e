#pragma once

// Uniform grids on [0,1] and trapezoid quadrature weights.

#include <Eigen/Core>
#include <stdexcept>
#include <string>

#include "specdecay/common.hpp"

namespace specdecay {

// How quadrature weights enter a discretized operator.
//
// PaperFaithful: full trapezoid weights multiply the columns and the output
// rows stay unweighted. This is the plain collocation convention and is the
// default for figure reproduction.
//
// L2Consistent: square-root weights on the input columns, and on the output
// rows too when the target is a function space. The resulting matrix acts
// between plain Euclidean spaces with the same singular values as the
// weighted-space operator, which makes singular values comparable against
// continuum limits such as sqrt(pi).
enum class WeightingMode { PaperFaithful, L2Consistent };

inline const char* to_string(WeightingMode m) {
  return m == WeightingMode::PaperFaithful ? "paper" : "l2";
}

// Uniform grid t_i = (i-1)/(n-1), i = 1..n. Endpoints are exactly 0 and 1.
struct Grid {
  int n = 0;
  Eigen::VectorXd points;
};

// Trapezoid rule weights aligned with a Grid: h/2 at both ends, h inside,
// h = 1/(n-1). They sum to one.
struct QuadratureWeights {
  int n = 0;
  Eigen::VectorXd w;
};

inline Grid make_grid(int n) {
  if (n < 2) {
    throw std::invalid_argument("make_grid: need n >= 2, got " +
                                std::to_string(n));
  }
  Grid g;
  g.n = n;
  g.points.resize(n);
  const double d = static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) g.points[i] = static_cast<double>(i) / d;
  return g;
}

inline QuadratureWeights trapezoid_weights(const Grid& g) {
  if (g.n < 2 || g.points.size() != g.n) {
    throw std::invalid_argument("trapezoid_weights: invalid grid");
  }
  QuadratureWeights q;
  q.n = g.n;
  q.w.setConstant(g.n, 1.0 / static_cast<double>(g.n - 1));
  q.w[0] *= 0.5;
  q.w[g.n - 1] *= 0.5;
  return q;
}

}  // namespace specdecay
