#pragma once

// Singular value spectra: dense SVD, symmetric eigendecomposition, and a
// seeded Golub-Kahan-Lanczos iteration for the leading part of the spectrum.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "specdecay/common.hpp"
#include "specdecay/operators.hpp"

namespace specdecay {

enum class SpectrumMethod { DenseSVD, SymmetricEig, LanczosPartial };

inline const char* to_string(SpectrumMethod m) {
  switch (m) {
    case SpectrumMethod::DenseSVD: return "DenseSVD";
    case SpectrumMethod::SymmetricEig: return "SymmetricEig";
    case SpectrumMethod::LanczosPartial: return "LanczosPartial";
  }
  return "?";
}

// Descending non-negative spectrum with provenance. `tolerance` is the
// relative floor used for the stored numerical_rank (solver tolerances live
// in metadata). length() = min(requested_k, min(rows, cols)).
struct Spectrum {
  std::vector<double> values;
  SpectrumMethod method = SpectrumMethod::DenseSVD;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  int requested_k = 0;
  double tolerance = 0.0;
  int numerical_rank = 0;
  std::map<std::string, std::string> metadata;

  int length() const { return static_cast<int>(values.size()); }

  // Leading-k copy; rank and floor are recomputed on the prefix.
  Spectrum topk(int k) const;
};

struct LanczosConfig {
  int k = 6;
  int max_iterations = 0;  // 0 = automatic
  double tol = 1e-10;      // residual tolerance, relative to sigma_1
  bool full_reorthogonalization = true;
  std::uint64_t seed = 20260814ull;
};

namespace detail {

inline double default_rank_rel_tol(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<double>(std::max(rows, cols)) * kEps;
}

inline int count_above_floor(const std::vector<double>& values,
                             double rel_tol) {
  if (values.empty() || values.front() <= 0.0) return 0;
  const double floor = rel_tol * values.front();
  int rank = 0;
  for (double v : values) {
    if (v > floor) ++rank;
  }
  return rank;
}

inline void finalize_spectrum(Spectrum& s) {
  for (double& v : s.values) {
    if (v < 0.0) v = 0.0;
  }
  std::sort(s.values.begin(), s.values.end(), std::greater<>());
  s.tolerance = default_rank_rel_tol(s.rows, s.cols);
  s.numerical_rank = count_above_floor(s.values, s.tolerance);
}

}  // namespace detail

inline Spectrum Spectrum::topk(int k) const {
  if (k < 0) throw std::invalid_argument("Spectrum::topk: k must be >= 0");
  Spectrum s = *this;
  s.requested_k = k;
  if (static_cast<int>(s.values.size()) > k) s.values.resize(k);
  s.numerical_rank = detail::count_above_floor(s.values, s.tolerance);
  return s;
}

// All min(M,N) singular values, descending. Diagonal operators short-circuit
// to the decreasing rearrangement of |d_i|, which is their exact SVD.
inline Spectrum full_svd(const DiscreteOperator& op) {
  Spectrum s;
  s.method = SpectrumMethod::DenseSVD;
  s.rows = op.rows();
  s.cols = op.cols();
  s.requested_k = static_cast<int>(std::min(op.rows(), op.cols()));
  s.metadata = op.describe();
  if (const auto* diag =
          dynamic_cast<const detail::DiagonalImpl*>(&op.impl())) {
    const auto& d = diag->diagonal();
    s.values.assign(d.data(), d.data() + d.size());
    for (double& v : s.values) v = std::abs(v);
    s.metadata["engine"] = "diagonal-rearrangement";
  } else {
    Eigen::MatrixXd a = op.dense();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    s.values.assign(sv.data(), sv.data() + sv.size());
    s.metadata["engine"] = "BDCSVD";
  }
  detail::finalize_spectrum(s);
  return s;
}

// Eigenvalues of a symmetric operator, descending, with tiny negative
// roundoff clamped to zero (the intended inputs are positive semidefinite
// Gram matrices). Gram-kernel operators contribute their symmetric core,
// whose eigenvalues equal those of the collocation matrix in either
// weighting mode.
inline Spectrum sym_eigs(const DiscreteOperator& op) {
  Spectrum s;
  s.method = SpectrumMethod::SymmetricEig;
  s.rows = op.rows();
  s.cols = op.cols();
  s.requested_k = static_cast<int>(std::min(op.rows(), op.cols()));
  s.metadata = op.describe();

  Eigen::MatrixXd a;
  if (const auto* gram =
          dynamic_cast<const detail::GramKernelImpl*>(&op.impl())) {
    a = gram->symmetric_core();
    s.metadata["engine"] = "SelfAdjointEigenSolver(core)";
  } else {
    a = op.dense();
    double max_asym = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
        const double denom = std::max(std::abs(a(i, j)), std::abs(a(j, i)));
        if (denom == 0.0) continue;
        max_asym = std::max(max_asym, std::abs(a(i, j) - a(j, i)) / denom);
      }
    }
    if (a.rows() != a.cols() || max_asym > 1e-12) {
      throw std::invalid_argument(
          "sym_eigs: operator " + op.name() +
          " is not symmetric (max componentwise relative asymmetry " +
          fmt_g17(max_asym) + ")");
    }
    s.metadata["engine"] = "SelfAdjointEigenSolver";
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sym_eigs: eigensolver failed on " + op.name());
  }
  const auto& ev = es.eigenvalues();  // ascending
  s.values.assign(ev.data(), ev.data() + ev.size());
  std::reverse(s.values.begin(), s.values.end());
  int clamped = 0;
  for (double v : s.values) {
    if (v < 0.0) ++clamped;
  }
  s.metadata["clamped_negative"] = std::to_string(clamped);
  detail::finalize_spectrum(s);
  return s;
}

// Top-k singular values by Golub-Kahan bidiagonalization with full
// reorthogonalization and a seeded start vector. Residual convergence
// ||A^T u - sigma v|| <= tol * sigma_1 per triplet; unconverged values are
// flagged in metadata. Deterministic for a fixed seed.
inline Spectrum lanczos_topk(const DiscreteOperator& op,
                             const LanczosConfig& cfg) {
  const Eigen::Index m_rows = op.rows();
  const Eigen::Index n_cols = op.cols();
  const int min_mn = static_cast<int>(std::min(m_rows, n_cols));
  if (cfg.k < 1 || cfg.k > min_mn) {
    throw std::invalid_argument(
        "lanczos_topk: k must lie in [1, min(rows, cols)] = [1, " +
        std::to_string(min_mn) + "], got " + std::to_string(cfg.k));
  }
  if (!(cfg.tol > 0.0)) {
    throw std::invalid_argument("lanczos_topk: tol must be > 0");
  }
  const int m_max =
      cfg.max_iterations > 0
          ? std::min(cfg.max_iterations, min_mn)
          : std::min(min_mn, std::max(10 * cfg.k, 150));

  // Seeded Gaussian start vector on the right side.
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(
      n_cols, [&](Eigen::Index) { return gauss(rng); });
  v.normalize();

  std::vector<Eigen::VectorXd> vs{v};
  std::vector<Eigen::VectorXd> us;
  std::vector<double> alpha, beta;
  const double breakdown = 1e2 * kEps;
  double scale = 0.0;  // running estimate of sigma_1
  bool exhausted = false;

  Eigen::VectorXd ritz;
  Eigen::VectorXd residuals;

  // Ritz values from the bidiagonal restriction. While iterating, the m-th
  // beta couples to the next (not yet accepted) basis vector and yields the
  // residuals. On a u-side breakdown that beta instead closes the
  // factorization exactly, so it joins the matrix as a trailing column.
  auto ritz_from_bidiagonal = [&](bool want_residuals, bool trailing_beta) {
    const int m = static_cast<int>(alpha.size());
    const int bc = trailing_beta ? m + 1 : m;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, bc);
    for (int i = 0; i < m; ++i) {
      b(i, i) = alpha[i];
      if (i + 1 < bc && i < static_cast<int>(beta.size())) {
        b(i, i + 1) = beta[i];
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        b, want_residuals ? Eigen::ComputeThinU : 0);
    ritz = svd.singularValues();
    if (want_residuals) {
      residuals.resize(m);
      const double beta_last =
          (trailing_beta || beta.size() < alpha.size()) ? 0.0 : beta.back();
      for (int i = 0; i < m; ++i) {
        residuals[i] = std::abs(beta_last * svd.matrixU()(m - 1, i));
      }
    }
  };

  int iterations = 0;
  bool converged_all = false;
  for (int step = 0; step < m_max; ++step) {
    // u = A v - beta_prev u_prev, reorthogonalized against all previous u
    Eigen::VectorXd u = op.apply(vs.back());
    if (!us.empty()) u -= beta.back() * us.back();
    if (cfg.full_reorthogonalization) {
      for (const auto& q : us) u -= q.dot(u) * q;
      for (const auto& q : us) u -= q.dot(u) * q;
    }
    const double a = u.norm();
    if (a <= breakdown * std::max(scale, 1.0)) {
      exhausted = true;
      break;
    }
    alpha.push_back(a);
    u /= a;
    us.push_back(u);
    scale = std::max(scale, a);

    // w = A^T u - alpha v, reorthogonalized against all previous v
    Eigen::VectorXd w = op.apply_adjoint(u) - a * vs.back();
    if (cfg.full_reorthogonalization) {
      for (const auto& q : vs) w -= q.dot(w) * q;
      for (const auto& q : vs) w -= q.dot(w) * q;
    }
    const double bnorm = w.norm();
    iterations = step + 1;

    if (bnorm <= breakdown * std::max(scale, 1.0)) {
      exhausted = true;
      break;
    }
    beta.push_back(bnorm);
    vs.push_back(w / bnorm);

    if (static_cast<int>(alpha.size()) >= cfg.k) {
      ritz_from_bidiagonal(true, false);
      const double sigma1 = ritz.size() > 0 ? ritz[0] : 0.0;
      bool ok = sigma1 > 0.0;
      for (int i = 0; i < cfg.k && ok; ++i) {
        ok = residuals[i] <= cfg.tol * sigma1;
      }
      if (ok) {
        converged_all = true;
        break;
      }
    }
  }

  if (alpha.empty()) {
    // A annihilates the start vector; report an exact zero spectrum.
    Spectrum s;
    s.method = SpectrumMethod::LanczosPartial;
    s.rows = m_rows;
    s.cols = n_cols;
    s.requested_k = cfg.k;
    s.values.assign(cfg.k, 0.0);
    s.metadata = op.describe();
    s.metadata["engine"] = "golub-kahan-lanczos";
    s.metadata["iterations"] = "0";
    s.metadata["converged"] = "true";
    s.metadata["seed"] = std::to_string(cfg.seed);
    detail::finalize_spectrum(s);
    return s;
  }

  ritz_from_bidiagonal(true, exhausted && beta.size() == alpha.size());
  if (exhausted) {
    // Krylov space exhausted: the bidiagonal factorization is exact, all
    // Ritz values are converged singular values.
    converged_all = true;
  }

  Spectrum s;
  s.method = SpectrumMethod::LanczosPartial;
  s.rows = m_rows;
  s.cols = n_cols;
  s.requested_k = cfg.k;
  const int avail = static_cast<int>(ritz.size());
  double max_residual = 0.0;
  int converged_count = 0;
  const double sigma1 = avail > 0 ? ritz[0] : 0.0;
  for (int i = 0; i < std::min(cfg.k, avail); ++i) {
    s.values.push_back(ritz[i]);
    const double r = exhausted ? 0.0 : residuals[i];
    max_residual = std::max(max_residual, r);
    if (r <= cfg.tol * std::max(sigma1, kEps)) ++converged_count;
  }
  // A rank-deficient operator can exhaust its Krylov space early; the
  // remaining singular values are exact zeros.
  while (static_cast<int>(s.values.size()) < cfg.k) {
    s.values.push_back(0.0);
    ++converged_count;
  }
  s.metadata = op.describe();
  s.metadata["engine"] = "golub-kahan-lanczos";
  s.metadata["iterations"] = std::to_string(iterations);
  s.metadata["seed"] = std::to_string(cfg.seed);
  s.metadata["converged"] =
      (converged_all || converged_count == cfg.k) ? "true" : "false";
  s.metadata["converged_count"] = std::to_string(converged_count);
  s.metadata["max_residual"] = fmt_g17(max_residual);
  s.metadata["lanczos_tol"] = fmt_g17(cfg.tol);
  detail::finalize_spectrum(s);
  return s;
}

// Count of values above rel_tol * sigma_1. Negative rel_tol selects the
// default max(rows, cols) * eps.
inline int numerical_rank(const Spectrum& s, double rel_tol = -1.0) {
  if (s.values.empty()) {
    throw std::invalid_argument("numerical_rank: empty spectrum");
  }
  const double tol =
      rel_tol < 0.0 ? detail::default_rank_rel_tol(s.rows, s.cols) : rel_tol;
  return detail::count_above_floor(s.values, tol);
}

}  // namespace specdecay
