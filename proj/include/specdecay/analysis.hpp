#pragma once

// Decay-law fitting, singular value inequalities, and convergence studies
// over families of spectra.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "specdecay/common.hpp"
#include "specdecay/spectra.hpp"

namespace specdecay {

enum class DecayModel { Polynomial, Exponential };
enum class PreferredModel { Polynomial, Exponential, Tie };

inline const char* to_string(DecayModel m) {
  return m == DecayModel::Polynomial ? "polynomial" : "exponential";
}

inline const char* to_string(PreferredModel m) {
  switch (m) {
    case PreferredModel::Polynomial: return "polynomial";
    case PreferredModel::Exponential: return "exponential";
    case PreferredModel::Tie: return "tie";
  }
  return "?";
}

// Least-squares fit of one decay family in the log domain:
//   Polynomial   sigma_i = C i^-p        (log sigma regressed on log i)
//   Exponential  sigma_i = C exp(-c i)   (log sigma regressed on i)
// rate is p or c; it comes out positive for decaying data.
struct DecayFit {
  DecayModel model = DecayModel::Polynomial;
  double amplitude = 0.0;
  double rate = 0.0;
  double residual_sum_squares = 0.0;  // in the log domain
  double r_squared = 0.0;
  int i_lo = 0;
  int i_hi = 0;
};

struct FitComparison {
  DecayFit polynomial;
  DecayFit exponential;
  PreferredModel preferred = PreferredModel::Tie;
};

// One row of a bound verification; lhs <= rhs is the claim.
struct BoundRecord {
  int index = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

struct BoundReport {
  std::string bound_name;
  std::vector<BoundRecord> records;
  bool overall_satisfied = true;
  std::map<std::string, std::string> parameters;
};

struct ConvergenceStudy {
  std::vector<double> levels;
  std::vector<int> tracked_indices;
  std::vector<std::vector<double>> values;  // [tracked index][level]
  std::vector<bool> monotone;               // non-decreasing within slack
  std::vector<double> limit_candidate;      // value at the finest level
  std::vector<double> relative_last_step;
};

struct RatioTable {
  std::vector<int> indices;
  std::vector<double> ratios;
  std::vector<int> excluded_indices;  // zero denominators
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double geometric_mean = 0.0;
};

namespace detail {

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double rss = 0.0;
  double r_squared = 1.0;
};

inline LineFit least_squares_line(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  const std::size_t n = x.size();
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
    tss += (y[i] - ym) * (y[i] - ym);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.rss += r * r;
  }
  // Flat data fits exactly; otherwise clamp roundoff excursions into [0,1].
  f.r_squared = tss == 0.0 ? 1.0 : std::clamp(1.0 - f.rss / tss, 0.0, 1.0);
  return f;
}

}  // namespace detail

// Fits both decay families to sigma_{i_lo..i_hi} (1-based, inclusive) and
// prefers the higher log-domain r^2; differences within 1e-6 tie.
inline FitComparison fit_decay(const Spectrum& s, int i_lo, int i_hi) {
  if (i_lo < 1 || i_hi > s.length() || i_hi - i_lo + 1 < 5) {
    throw std::invalid_argument(
        "fit_decay: need at least 5 spectrum indices, got [" +
        std::to_string(i_lo) + "," + std::to_string(i_hi) +
        "] in a spectrum of length " + std::to_string(s.length()));
  }
  std::vector<double> idx, log_idx, log_sigma;
  for (int i = i_lo; i <= i_hi; ++i) {
    const double v = s.values[i - 1];
    if (!(v > 0.0)) {
      throw std::range_error("fit_decay: nonpositive value at index " +
                             std::to_string(i) +
                             "; shrink the range above the rank floor");
    }
    idx.push_back(static_cast<double>(i));
    log_idx.push_back(std::log(static_cast<double>(i)));
    log_sigma.push_back(std::log(v));
  }

  const auto poly = detail::least_squares_line(log_idx, log_sigma);
  const auto expo = detail::least_squares_line(idx, log_sigma);

  FitComparison out;
  out.polynomial = {DecayModel::Polynomial, std::exp(poly.intercept),
                    -poly.slope,            poly.rss,
                    poly.r_squared,         i_lo,
                    i_hi};
  out.exponential = {DecayModel::Exponential, std::exp(expo.intercept),
                     -expo.slope,             expo.rss,
                     expo.r_squared,          i_lo,
                     i_hi};
  const double diff = out.exponential.r_squared - out.polynomial.r_squared;
  if (std::abs(diff) <= 1e-6) {
    out.preferred = PreferredModel::Tie;
  } else {
    out.preferred =
        diff > 0 ? PreferredModel::Exponential : PreferredModel::Polynomial;
  }
  return out;
}

// exp(pi^2 / (2 ln(8n-4))): the decay base of the Hilbert singular value
// bound. Decreases strictly toward 1 as n grows; still only 1.072 at n=1e30.
// n is a real argument precisely so such astronomically large orders remain
// representable.
inline double beckermann_rho(double n) {
  if (!(n >= 1.0)) {
    throw std::invalid_argument("beckermann_rho: n must be >= 1, got " +
                                fmt_g17(n));
  }
  constexpr double pi = std::numbers::pi;
  return std::exp(pi * pi / (2.0 * std::log(8.0 * n - 4.0)));
}

// Verifies sigma_{i+1}(H_n) <= 4 rho(n)^{-2i} sigma_1(H_n) for
// 1 <= i <= n-1, skipping indices whose sigma_{i+1} sits below the spectrum's
// numerical-rank floor (sub-eps values are factorization noise, not data).
inline BoundReport check_beckermann(const Spectrum& s, int n) {
  if (s.rows != n || s.cols != n || s.length() != n) {
    throw std::invalid_argument(
        "check_beckermann: spectrum shape does not match order " +
        std::to_string(n));
  }
  BoundReport rep;
  rep.bound_name = "hilbert-exponential-bound";
  rep.parameters["n"] = std::to_string(n);
  const double rho = beckermann_rho(static_cast<double>(n));
  const double sigma1 = s.values[0];
  int checked = 0;
  for (int i = 1; i <= n - 1; ++i) {
    if (i + 1 > s.numerical_rank) break;
    BoundRecord r;
    r.index = i;
    r.lhs = s.values[i];
    r.rhs = 4.0 * std::pow(rho, -2.0 * i) * sigma1;
    r.satisfied = r.lhs <= r.rhs;
    rep.overall_satisfied = rep.overall_satisfied && r.satisfied;
    rep.records.push_back(r);
    ++checked;
  }
  rep.parameters["indices_checked"] = std::to_string(checked);
  rep.parameters["rho"] = fmt_g17(rho);
  return rep;
}

// Verifies sigma_{2i}(AB) <= sigma_i(A) sigma_i(B) for every index where all
// three spectra reach.
inline BoundReport check_product_inequality(const Spectrum& a,
                                            const Spectrum& b,
                                            const Spectrum& ab) {
  if (a.cols != b.rows || ab.rows != a.rows || ab.cols != b.cols) {
    throw std::invalid_argument(
        "check_product_inequality: dimensions do not compose (A is " +
        std::to_string(a.rows) + "x" + std::to_string(a.cols) + ", B is " +
        std::to_string(b.rows) + "x" + std::to_string(b.cols) + ", AB is " +
        std::to_string(ab.rows) + "x" + std::to_string(ab.cols) + ")");
  }
  BoundReport rep;
  rep.bound_name = "product-inequality";
  for (int i = 1; 2 * i <= ab.length() && i <= a.length() && i <= b.length();
       ++i) {
    BoundRecord r;
    r.index = i;
    r.lhs = ab.values[2 * i - 1];
    r.rhs = a.values[i - 1] * b.values[i - 1];
    r.satisfied = r.lhs <= r.rhs;
    rep.overall_satisfied = rep.overall_satisfied && r.satisfied;
    rep.records.push_back(r);
  }
  rep.parameters["indices_checked"] = std::to_string(rep.records.size());
  return rep;
}

// Tracks sigma_i across ascending discretization levels and reports
// per-index monotonicity (non-decreasing within `slack`), the finest-level
// value, and the relative size of the last refinement step.
inline ConvergenceStudy convergence_study(
    const std::vector<double>& levels, const std::vector<Spectrum>& spectra,
    const std::vector<int>& tracked_indices, double slack = 1e-12) {
  if (levels.size() < 2 || levels.size() != spectra.size()) {
    throw std::invalid_argument(
        "convergence_study: need >= 2 levels with one spectrum each");
  }
  for (std::size_t l = 1; l < levels.size(); ++l) {
    if (!(levels[l] > levels[l - 1])) {
      throw std::invalid_argument(
          "convergence_study: levels must be strictly ascending");
    }
  }
  ConvergenceStudy st;
  st.levels = levels;
  st.tracked_indices = tracked_indices;
  for (int idx : tracked_indices) {
    if (idx < 1) {
      throw std::invalid_argument("convergence_study: indices are 1-based");
    }
    std::vector<double> seq;
    for (std::size_t l = 0; l < spectra.size(); ++l) {
      if (idx > spectra[l].length()) {
        throw std::invalid_argument(
            "convergence_study: index " + std::to_string(idx) +
            " not covered at level " + fmt_g17(levels[l]));
      }
      seq.push_back(spectra[l].values[idx - 1]);
    }
    bool mono = true;
    for (std::size_t l = 1; l < seq.size(); ++l) {
      if (seq[l] < seq[l - 1] - slack) mono = false;
    }
    const double last = seq.back();
    const double prev = seq[seq.size() - 2];
    st.values.push_back(seq);
    st.monotone.push_back(mono);
    st.limit_candidate.push_back(last);
    st.relative_last_step.push_back(
        last == 0.0 ? 0.0 : std::abs(last - prev) / std::abs(last));
  }
  return st;
}

// Closed-form singular values of the discrete multiplication operator by
// s^kappa on a K-point grid: the decreasing rearrangement of the samples.
inline double multiplication_sigma(double kappa, int K, int i) {
  if (K < 2) {
    throw std::invalid_argument("multiplication_sigma: K must be >= 2");
  }
  if (i < 1 || i > K) {
    throw std::invalid_argument("multiplication_sigma: need 1 <= i <= K");
  }
  if (!(kappa > 0.0)) {
    throw std::invalid_argument("multiplication_sigma: kappa must be > 0");
  }
  return std::pow(static_cast<double>(K - i) / static_cast<double>(K - 1),
                  kappa);
}

// True when sigma_i(M_K) has climbed within epsilon of the supremum of the
// multiplicator (which is 1 for s^kappa on [0,1]).
inline bool multiplication_limit_check(double kappa, int K, int i,
                                       double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument(
        "multiplication_limit_check: epsilon must be > 0");
  }
  return multiplication_sigma(kappa, K, i) > 1.0 - epsilon;
}

// Ratio table r_i = sigma_i(composite) / (sigma_i(f1) sigma_i(f2)) over a
// 1-based inclusive range. Diagnostic only: the proportionality observation
// has no stated tolerance, so nothing passes or fails here.
inline RatioTable proportionality_diagnostic(const Spectrum& composite,
                                             const Spectrum& f1,
                                             const Spectrum& f2, int i_lo,
                                             int i_hi) {
  const int limit =
      std::min({composite.length(), f1.length(), f2.length()});
  if (i_lo < 1 || i_hi > limit || i_lo > i_hi) {
    throw std::invalid_argument(
        "proportionality_diagnostic: empty or uncovered range [" +
        std::to_string(i_lo) + "," + std::to_string(i_hi) + "] with spectra " +
        "of joint length " + std::to_string(limit));
  }
  RatioTable t;
  double log_sum = 0.0;
  for (int i = i_lo; i <= i_hi; ++i) {
    const double denom = f1.values[i - 1] * f2.values[i - 1];
    if (denom == 0.0) {
      t.excluded_indices.push_back(i);
      continue;
    }
    const double r = composite.values[i - 1] / denom;
    t.indices.push_back(i);
    t.ratios.push_back(r);
    log_sum += std::log(r);
  }
  if (!t.ratios.empty()) {
    t.min_ratio = *std::min_element(t.ratios.begin(), t.ratios.end());
    t.max_ratio = *std::max_element(t.ratios.begin(), t.ratios.end());
    t.geometric_mean =
        std::exp(log_sum / static_cast<double>(t.ratios.size()));
  }
  return t;
}

}  // namespace specdecay
