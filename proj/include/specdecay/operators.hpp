#pragma once

// Discrete operators over uniform grids: the integration operator J, the
// power-moment operator B^H, the multiplication operator B^M, the composite
// moment-of-integral operator A, matrix products, and the Gram operator of A
// (the integral operator with kernel sum_j (1-s^j)(1-t^j)/j^2).
//
// Every operator is an immutable value type wrapping a structured
// representation. Matvec and adjoint matvec are always available; a dense
// matrix is available only while rows*cols stays within kMaxDenseEntries.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "specdecay/common.hpp"
#include "specdecay/dilog.hpp"
#include "specdecay/grid.hpp"

namespace specdecay {

enum class OperatorKind {
  Dense,
  TriangularPrefix,
  MomentRows,
  Diagonal,
  Product,
  GramKernel
};

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Dense: return "Dense";
    case OperatorKind::TriangularPrefix: return "TriangularPrefix";
    case OperatorKind::MomentRows: return "MomentRows";
    case OperatorKind::Diagonal: return "Diagonal";
    case OperatorKind::Product: return "Product";
    case OperatorKind::GramKernel: return "GramKernel";
  }
  return "?";
}

namespace detail {

inline void check_dense_budget(Eigen::Index rows, Eigen::Index cols,
                               const std::string& who) {
  const std::int64_t entries =
      static_cast<std::int64_t>(rows) * static_cast<std::int64_t>(cols);
  if (entries > kMaxDenseEntries) {
    throw SizeLimitError(
        who + ": dense path needs " + std::to_string(entries) +
        " entries, above the " + std::to_string(kMaxDenseEntries) +
        " budget; use the matvec interface or lanczos_topk instead");
  }
}

class OperatorImpl {
 public:
  virtual ~OperatorImpl() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const = 0;
  virtual Eigen::MatrixXd dense() const = 0;
  virtual OperatorKind kind() const = 0;
  virtual std::string name() const = 0;
  virtual std::map<std::string, std::string> describe() const {
    return {{"operator", name()},
            {"kind", to_string(kind())},
            {"rows", std::to_string(rows())},
            {"cols", std::to_string(cols())}};
  }
  void check_apply_dim(const Eigen::VectorXd& x) const {
    if (x.size() != cols()) {
      throw std::invalid_argument(name() + ": apply expects size " +
                                  std::to_string(cols()) + ", got " +
                                  std::to_string(x.size()));
    }
  }
  void check_adjoint_dim(const Eigen::VectorXd& y) const {
    if (y.size() != rows()) {
      throw std::invalid_argument(name() + ": apply_adjoint expects size " +
                                  std::to_string(rows()) + ", got " +
                                  std::to_string(y.size()));
    }
  }
};

class DenseImpl final : public OperatorImpl {
 public:
  DenseImpl(Eigen::MatrixXd a, std::string name)
      : a_(std::move(a)), name_(std::move(name)) {}
  Eigen::Index rows() const override { return a_.rows(); }
  Eigen::Index cols() const override { return a_.cols(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_apply_dim(x);
    return a_ * x;
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const override {
    check_adjoint_dim(y);
    return a_.transpose() * y;
  }
  Eigen::MatrixXd dense() const override { return a_; }
  OperatorKind kind() const override { return OperatorKind::Dense; }
  std::string name() const override { return name_; }

 private:
  Eigen::MatrixXd a_;
  std::string name_;
};

// Row j is rowscale_j * colw_i * [t_i <= s_j]. With both grids ascending the
// indicator is a prefix, so matvecs are cumulative sums.
class TriangularPrefixImpl final : public OperatorImpl {
 public:
  TriangularPrefixImpl(Grid in, Grid out, Eigen::VectorXd colw,
                       Eigen::VectorXd rowscale, WeightingMode mode)
      : in_(std::move(in)),
        out_(std::move(out)),
        colw_(std::move(colw)),
        rowscale_(std::move(rowscale)),
        mode_(mode) {
    cut_.resize(out_.n);
    int c = 0;
    for (int j = 0; j < out_.n; ++j) {
      while (c < in_.n && in_.points[c] <= out_.points[j]) ++c;
      cut_[j] = c;  // count of i with t_i <= s_j
    }
  }
  Eigen::Index rows() const override { return out_.n; }
  Eigen::Index cols() const override { return in_.n; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_apply_dim(x);
    Eigen::VectorXd prefix(in_.n + 1);
    prefix[0] = 0.0;
    for (int i = 0; i < in_.n; ++i) {
      prefix[i + 1] = prefix[i] + colw_[i] * x[i];
    }
    Eigen::VectorXd y(out_.n);
    for (int j = 0; j < out_.n; ++j) y[j] = rowscale_[j] * prefix[cut_[j]];
    return y;
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const override {
    check_adjoint_dim(y);
    Eigen::VectorXd suffix(out_.n + 1);
    suffix[out_.n] = 0.0;
    for (int j = out_.n - 1; j >= 0; --j) {
      suffix[j] = suffix[j + 1] + rowscale_[j] * y[j];
    }
    Eigen::VectorXd x(in_.n);
    int jptr = 0;
    for (int i = 0; i < in_.n; ++i) {
      while (jptr < out_.n && cut_[jptr] < i + 1) ++jptr;
      x[i] = colw_[i] * (jptr < out_.n ? suffix[jptr] : 0.0);
    }
    return x;
  }
  Eigen::MatrixXd dense() const override {
    check_dense_budget(rows(), cols(), name());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(out_.n, in_.n);
    for (int j = 0; j < out_.n; ++j) {
      for (int i = 0; i < cut_[j]; ++i) a(j, i) = rowscale_[j] * colw_[i];
    }
    return a;
  }
  OperatorKind kind() const override { return OperatorKind::TriangularPrefix; }
  std::string name() const override {
    return "J[n=" + std::to_string(in_.n) + ",m=" + std::to_string(out_.n) +
           "," + to_string(mode_) + "]";
  }
  std::map<std::string, std::string> describe() const override {
    auto d = OperatorImpl::describe();
    d["weighting"] = to_string(mode_);
    return d;
  }

 private:
  Grid in_, out_;
  Eigen::VectorXd colw_, rowscale_;
  WeightingMode mode_;
  std::vector<int> cut_;
};

// Rows indexed by moment order j = 1..M over a single input grid. Two row
// kernels share the machinery:
//   Power:     k(j, t) = t^(j-1)          (with 0^0 = 1)
//   Composite: k(j, t) = (1 - t^j) / j
// Entry (j, i) = colw_i * k(j, t_i). Matvecs run in O(M N) with incremental
// power updates instead of per-entry pow calls.
class MomentRowsImpl final : public OperatorImpl {
 public:
  enum class RowKernel { Power, Composite };

  MomentRowsImpl(int num_moments, Grid g, Eigen::VectorXd colw,
                 RowKernel kernel, WeightingMode mode)
      : m_(num_moments),
        g_(std::move(g)),
        colw_(std::move(colw)),
        kernel_(kernel),
        mode_(mode) {}
  Eigen::Index rows() const override { return m_; }
  Eigen::Index cols() const override { return g_.n; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_apply_dim(x);
    Eigen::VectorXd z = colw_.cwiseProduct(x);
    Eigen::VectorXd y(m_);
    if (kernel_ == RowKernel::Power) {
      Eigen::VectorXd tp = z;  // z * t^(j-1), starting at j = 1
      for (int j = 1; j <= m_; ++j) {
        y[j - 1] = tp.sum();
        if (j < m_) tp.array() *= g_.points.array();
      }
    } else {
      const double s0 = z.sum();
      Eigen::VectorXd tp = z.cwiseProduct(g_.points);  // z * t^j
      for (int j = 1; j <= m_; ++j) {
        y[j - 1] = (s0 - tp.sum()) / static_cast<double>(j);
        if (j < m_) tp.array() *= g_.points.array();
      }
    }
    return y;
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const override {
    check_adjoint_dim(y);
    if (kernel_ == RowKernel::Power) {
      // sum_j y_j t^(j-1) via Horner
      Eigen::VectorXd acc = Eigen::VectorXd::Constant(g_.n, y[m_ - 1]);
      for (int j = m_ - 1; j >= 1; --j) {
        acc = acc.cwiseProduct(g_.points);
        acc.array() += y[j - 1];
      }
      return colw_.cwiseProduct(acc);
    }
    // sum_j (y_j/j) (1 - t^j) = D0 - t * Horner(y_j/j)
    Eigen::VectorXd d(m_);
    double d0 = 0.0;
    for (int j = 1; j <= m_; ++j) {
      d[j - 1] = y[j - 1] / static_cast<double>(j);
      d0 += d[j - 1];
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Constant(g_.n, d[m_ - 1]);
    for (int j = m_ - 1; j >= 1; --j) {
      acc = acc.cwiseProduct(g_.points);
      acc.array() += d[j - 1];
    }
    Eigen::VectorXd poly = acc.cwiseProduct(g_.points);
    return colw_.cwiseProduct((d0 - poly.array()).matrix());
  }
  Eigen::MatrixXd dense() const override {
    check_dense_budget(rows(), cols(), name());
    Eigen::MatrixXd a(m_, g_.n);
    if (kernel_ == RowKernel::Power) {
      Eigen::VectorXd tp = Eigen::VectorXd::Ones(g_.n);
      for (int j = 1; j <= m_; ++j) {
        a.row(j - 1) = colw_.cwiseProduct(tp).transpose();
        if (j < m_) tp.array() *= g_.points.array();
      }
    } else {
      Eigen::VectorXd tp = g_.points;
      for (int j = 1; j <= m_; ++j) {
        a.row(j - 1) =
            (colw_.array() * (1.0 - tp.array()) / static_cast<double>(j))
                .transpose();
        if (j < m_) tp.array() *= g_.points.array();
      }
    }
    return a;
  }
  OperatorKind kind() const override { return OperatorKind::MomentRows; }
  std::string name() const override {
    return std::string(kernel_ == RowKernel::Power ? "BH" : "A") +
           "[m=" + std::to_string(m_) + ",n=" + std::to_string(g_.n) + "," +
           to_string(mode_) + "]";
  }
  std::map<std::string, std::string> describe() const override {
    auto d = OperatorImpl::describe();
    d["weighting"] = to_string(mode_);
    d["num_moments"] = std::to_string(m_);
    return d;
  }

 private:
  int m_;
  Grid g_;
  Eigen::VectorXd colw_;
  RowKernel kernel_;
  WeightingMode mode_;
};

class DiagonalImpl final : public OperatorImpl {
 public:
  DiagonalImpl(Eigen::VectorXd d, std::string name,
               std::map<std::string, std::string> extras = {})
      : d_(std::move(d)), name_(std::move(name)), extras_(std::move(extras)) {}
  Eigen::Index rows() const override { return d_.size(); }
  Eigen::Index cols() const override { return d_.size(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_apply_dim(x);
    return d_.cwiseProduct(x);
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const override {
    check_adjoint_dim(y);
    return d_.cwiseProduct(y);
  }
  Eigen::MatrixXd dense() const override {
    check_dense_budget(rows(), cols(), name());
    return Eigen::MatrixXd(d_.asDiagonal());
  }
  OperatorKind kind() const override { return OperatorKind::Diagonal; }
  std::string name() const override { return name_; }
  std::map<std::string, std::string> describe() const override {
    auto d = OperatorImpl::describe();
    for (const auto& [k, v] : extras_) d[k] = v;
    return d;
  }
  const Eigen::VectorXd& diagonal() const { return d_; }

 private:
  Eigen::VectorXd d_;
  std::string name_;
  std::map<std::string, std::string> extras_;
};

}  // namespace detail

// Immutable handle to a discrete operator. Cheap to copy; safe for shared
// concurrent reads.
class DiscreteOperator {
 public:
  explicit DiscreteOperator(std::shared_ptr<const detail::OperatorImpl> impl)
      : impl_(std::move(impl)) {
    if (!impl_) throw std::invalid_argument("DiscreteOperator: null impl");
  }
  Eigen::Index rows() const { return impl_->rows(); }
  Eigen::Index cols() const { return impl_->cols(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return impl_->apply(x);
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const {
    return impl_->apply_adjoint(y);
  }
  // Dense matrix of the operator; throws SizeLimitError above the entry
  // budget.
  Eigen::MatrixXd dense() const { return impl_->dense(); }
  OperatorKind kind() const { return impl_->kind(); }
  std::string name() const { return impl_->name(); }
  std::map<std::string, std::string> describe() const {
    return impl_->describe();
  }
  const detail::OperatorImpl& impl() const { return *impl_; }
  std::shared_ptr<const detail::OperatorImpl> impl_ptr() const {
    return impl_;
  }

 private:
  std::shared_ptr<const detail::OperatorImpl> impl_;
};

namespace detail {

class ProductImpl final : public OperatorImpl {
 public:
  explicit ProductImpl(std::vector<DiscreteOperator> factors)
      : factors_(std::move(factors)) {
    if (factors_.empty()) {
      throw std::invalid_argument("make_product: need at least one factor");
    }
    for (std::size_t i = 0; i + 1 < factors_.size(); ++i) {
      if (factors_[i].cols() != factors_[i + 1].rows()) {
        throw std::invalid_argument(
            "make_product: factor " + std::to_string(i) + " has " +
            std::to_string(factors_[i].cols()) + " cols but factor " +
            std::to_string(i + 1) + " has " +
            std::to_string(factors_[i + 1].rows()) + " rows");
      }
    }
  }
  Eigen::Index rows() const override { return factors_.front().rows(); }
  Eigen::Index cols() const override { return factors_.back().cols(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_apply_dim(x);
    Eigen::VectorXd v = x;
    for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) {
      v = it->apply(v);
    }
    return v;
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const override {
    check_adjoint_dim(y);
    Eigen::VectorXd v = y;
    for (const auto& f : factors_) v = f.apply_adjoint(v);
    return v;
  }
  Eigen::MatrixXd dense() const override {
    check_dense_budget(rows(), cols(), name());
    Eigen::MatrixXd acc = factors_.back().dense();
    for (auto it = std::next(factors_.rbegin()); it != factors_.rend(); ++it) {
      check_dense_budget(it->rows(), acc.cols(), name());
      acc = it->dense() * acc;
    }
    return acc;
  }
  OperatorKind kind() const override { return OperatorKind::Product; }
  std::string name() const override {
    std::string s = "product(";
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (i) s += ",";
      s += factors_[i].name();
    }
    return s + ")";
  }
  const std::vector<DiscreteOperator>& factors() const { return factors_; }

 private:
  std::vector<DiscreteOperator> factors_;
};

// Gram operator of the composite moment-of-integral operator: the integral
// operator with kernel k(s,t) = sum_{j<=jmax} (1-s^j)(1-t^j)/j^2 on the grid.
//
// The unweighted kernel matrix K(a,b) = k(t_a, t_b) is stored when the dense
// budget allows it; otherwise matvecs run matrix-free through the separable
// structure of the kernel. The discretization applies quadrature weights W:
//   PaperFaithful apply:  y = K (w . x)           (collocation convention)
//   L2Consistent apply:   y = sqrt(w) . K (sqrt(w) . x)
// Both share the symmetric core S = sqrt(W) K sqrt(W), which is similar to
// K W, so its eigenvalues equal those of the collocation matrix while being
// symmetric by construction. sym_eigs consumes that core.
class GramKernelImpl final : public OperatorImpl {
 public:
  GramKernelImpl(Grid g, std::int64_t j_max, WeightingMode mode, double tol)
      : g_(std::move(g)), jmax_(j_max), mode_(mode), tol_(tol) {
    if (jmax_ < 1) {
      throw std::invalid_argument("build_AstarA: j_max must be >= 1");
    }
    if (!(tol_ > 0.0)) {
      throw std::invalid_argument("build_AstarA: tol must be > 0");
    }
    w_ = trapezoid_weights(g_).w;
    sqrtw_ = w_.cwiseSqrt();
    const std::int64_t entries =
        static_cast<std::int64_t>(g_.n) * static_cast<std::int64_t>(g_.n);
    if (entries <= kMaxDenseEntries) {
      assemble_kernel();
    }
  }

  Eigen::Index rows() const override { return g_.n; }
  Eigen::Index cols() const override { return g_.n; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    check_apply_dim(x);
    if (mode_ == WeightingMode::PaperFaithful) {
      return kernel_times(w_.cwiseProduct(x));
    }
    return sqrtw_.cwiseProduct(kernel_times(sqrtw_.cwiseProduct(x)));
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const override {
    check_adjoint_dim(y);
    if (mode_ == WeightingMode::PaperFaithful) {
      // adjoint of K W is W K (K itself is symmetric)
      return w_.cwiseProduct(kernel_times(y));
    }
    return sqrtw_.cwiseProduct(kernel_times(sqrtw_.cwiseProduct(y)));
  }
  Eigen::MatrixXd dense() const override {
    check_dense_budget(rows(), cols(), name());
    if (mode_ == WeightingMode::PaperFaithful) {
      return k_ * w_.asDiagonal();
    }
    return symmetric_core();
  }
  // sqrt(W) K sqrt(W); symmetric, and similar to the collocation matrix K W.
  // The weight product commutes, so entries (a,b) and (b,a) round identically
  // and the result is symmetric bitwise, not just to rounding.
  Eigen::MatrixXd symmetric_core() const {
    check_dense_budget(rows(), cols(), name() + " symmetric core");
    const int n = g_.n;
    Eigen::MatrixXd core(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        const double v = (sqrtw_[a] * sqrtw_[b]) * k_(a, b);
        core(a, b) = v;
        core(b, a) = v;
      }
    }
    return core;
  }
  Eigen::VectorXd symmetric_core_apply(const Eigen::VectorXd& x) const {
    check_apply_dim(x);
    return sqrtw_.cwiseProduct(kernel_times(sqrtw_.cwiseProduct(x)));
  }
  OperatorKind kind() const override { return OperatorKind::GramKernel; }
  std::string name() const override {
    return "AstarA[n=" + std::to_string(g_.n) +
           ",jmax=" + std::to_string(jmax_) + "," + to_string(mode_) + "]";
  }
  std::map<std::string, std::string> describe() const override {
    auto d = OperatorImpl::describe();
    d["weighting"] = to_string(mode_);
    d["j_max"] = std::to_string(jmax_);
    d["assembly"] = k_.size() > 0
                        ? (jmax_ <= kRankOneJmax ? "rank-one" : "dilog-split")
                        : "matrix-free";
    return d;
  }
  std::int64_t j_max() const { return jmax_; }
  const Grid& grid() const { return g_; }
  // Unweighted kernel matrix K(a,b) = k(t_a, t_b); empty above the dense
  // budget (matrix-free operation).
  const Eigen::MatrixXd& kernel() const { return k_; }
  const Eigen::VectorXd& weights() const { return w_; }

 private:
  // Unweighted kernel action z -> K z, dense or matrix-free.
  Eigen::VectorXd kernel_times(const Eigen::VectorXd& z) const {
    if (k_.size() > 0) return k_ * z;
    // Separable form: (K z)_a = sum_j c_j (1 - t_a^j)/j with
    // c_j = (sum_b z_b - sum_b t_b^j z_b)/j, accumulated in one sweep over j.
    const double zsum = z.sum();
    Eigen::VectorXd tp = g_.points;  // t^j
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(g_.n);
    double c0 = 0.0;
    for (std::int64_t j = 1; j <= jmax_; ++j) {
      const double cj = (zsum - tp.dot(z)) / static_cast<double>(j);
      const double cjj = cj / static_cast<double>(j);
      c0 += cjj;
      acc += cjj * tp;
      if (j < jmax_) tp.array() *= g_.points.array();
    }
    return Eigen::VectorXd::Constant(g_.n, c0) - acc;
  }

  static constexpr std::int64_t kRankOneJmax = 2048;

  void assemble_kernel() {
    const int n = g_.n;
    k_.setZero(n, n);
    if (jmax_ <= kRankOneJmax) {
      // Sequential rank-one accumulation K += g_j g_j^T in ascending j. Each
      // added entry is nonnegative, so entries are monotone in j_max down to
      // the rounding of individual additions.
      Eigen::VectorXd tp = g_.points;  // t^j
      Eigen::VectorXd gj(n);
      for (std::int64_t j = 1; j <= jmax_; ++j) {
        gj = (1.0 - tp.array()) / static_cast<double>(j);
        k_.selfadjointView<Eigen::Lower>().rankUpdate(gj, 1.0);
        if (j < jmax_) tp.array() *= g_.points.array();
      }
      for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) k_(a, b) = k_(b, a);
      }
    } else {
      // Four-term dilogarithm split; the one-argument sums are shared per
      // row/column. partial_dilog keeps larger-j_max sums bitwise extensions
      // of smaller ones, so entries stay monotone across truncations here
      // too.
      const double quarter = tol_ * 0.25;
      const double s1 = partial_dilog(1.0, jmax_, quarter);
      Eigen::VectorXd st(n);
      for (int a = 0; a < n; ++a) {
        st[a] = partial_dilog(g_.points[a], jmax_, quarter);
      }
      for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) {
          // Exact zero where either kernel factor vanishes, matching kernel_k.
          const double v =
              (g_.points[a] == 1.0 || g_.points[b] == 1.0)
                  ? 0.0
                  : s1 - st[a] - st[b] +
                        partial_dilog(g_.points[a] * g_.points[b], jmax_,
                                      quarter);
          k_(a, b) = v;
          k_(b, a) = v;
        }
      }
    }
  }

  Grid g_;
  std::int64_t jmax_;
  WeightingMode mode_;
  double tol_;
  Eigen::VectorXd w_, sqrtw_;
  Eigen::MatrixXd k_;  // empty when over the dense budget
};

// Exposes the symmetric core sqrt(W) K sqrt(W) of a Gram operator as an
// operator of its own, so iterative solvers can consume it matrix-free.
class GramCoreImpl final : public OperatorImpl {
 public:
  explicit GramCoreImpl(std::shared_ptr<const GramKernelImpl> gram)
      : gram_(std::move(gram)) {}
  Eigen::Index rows() const override { return gram_->rows(); }
  Eigen::Index cols() const override { return gram_->cols(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const override {
    return gram_->symmetric_core_apply(x);
  }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const override {
    return gram_->symmetric_core_apply(y);
  }
  Eigen::MatrixXd dense() const override { return gram_->symmetric_core(); }
  OperatorKind kind() const override { return OperatorKind::GramKernel; }
  std::string name() const override { return gram_->name() + ".core"; }
  std::map<std::string, std::string> describe() const override {
    auto d = gram_->describe();
    d["operator"] = name();
    return d;
  }

 private:
  std::shared_ptr<const GramKernelImpl> gram_;
};

}  // namespace detail

// ---- builders -------------------------------------------------------------

inline DiscreteOperator make_dense(Eigen::MatrixXd a,
                                   std::string name = "dense") {
  detail::check_dense_budget(a.rows(), a.cols(), name);
  return DiscreteOperator(
      std::make_shared<detail::DenseImpl>(std::move(a), std::move(name)));
}

inline DiscreteOperator make_diagonal(Eigen::VectorXd d,
                                      std::string name = "diag") {
  return DiscreteOperator(
      std::make_shared<detail::DiagonalImpl>(std::move(d), std::move(name)));
}

inline DiscreteOperator make_product(std::vector<DiscreteOperator> factors) {
  return DiscreteOperator(
      std::make_shared<detail::ProductImpl>(std::move(factors)));
}

// Integration operator: (J x)(s_j) = integral of x from 0 to s_j,
// discretized with trapezoid weights and the indicator kernel [t <= s].
inline DiscreteOperator build_J(const Grid& g_in, const Grid& g_out,
                                WeightingMode mode) {
  const auto w = trapezoid_weights(g_in);
  const auto v = trapezoid_weights(g_out);
  Eigen::VectorXd colw, rowscale;
  if (mode == WeightingMode::PaperFaithful) {
    colw = w.w;
    rowscale = Eigen::VectorXd::Ones(g_out.n);
  } else {
    colw = w.w.cwiseSqrt();
    rowscale = v.w.cwiseSqrt();
  }
  return DiscreteOperator(std::make_shared<detail::TriangularPrefixImpl>(
      g_in, g_out, std::move(colw), std::move(rowscale), mode));
}

inline DiscreteOperator build_J(const Grid& g,
                                WeightingMode mode = WeightingMode::PaperFaithful) {
  return build_J(g, g, mode);
}

// Power-moment operator: (B^H x)_j = integral of t^(j-1) x(t), j = 1..M.
// The target is a plain sequence space, so L2Consistent scales columns only.
inline DiscreteOperator build_BH(int num_moments, const Grid& g,
                                 WeightingMode mode) {
  if (num_moments < 1) {
    throw std::invalid_argument("build_BH: num_moments must be >= 1");
  }
  const auto w = trapezoid_weights(g);
  Eigen::VectorXd colw =
      mode == WeightingMode::PaperFaithful ? w.w : w.w.cwiseSqrt();
  return DiscreteOperator(std::make_shared<detail::MomentRowsImpl>(
      num_moments, g, std::move(colw), detail::MomentRowsImpl::RowKernel::Power,
      mode));
}

// Multiplication operator by m(t) = t^kappa, sampled pointwise on the grid.
// No quadrature weights enter: the discrete operator is the diagonal of
// samples in either weighting convention.
inline DiscreteOperator build_BM(double kappa, const Grid& g) {
  if (!(kappa > 0.0)) {
    throw std::invalid_argument("build_BM: kappa must be > 0, got " +
                                std::to_string(kappa));
  }
  Eigen::VectorXd d(g.n);
  for (int i = 0; i < g.n; ++i) d[i] = std::pow(g.points[i], kappa);
  std::map<std::string, std::string> extras{{"kappa", fmt_g17(kappa)}};
  return DiscreteOperator(std::make_shared<detail::DiagonalImpl>(
      std::move(d), "BM[kappa=" + fmt_g17(kappa) + ",n=" + std::to_string(g.n) + "]",
      std::move(extras)));
}

// Composite moment-of-integral operator assembled in one quadrature pass with
// row kernel (1 - t^j)/j (the integral of the moment kernel in its first
// argument), not as a product of the two discrete factors.
inline DiscreteOperator build_composite_A(int num_moments, const Grid& g,
                                          WeightingMode mode) {
  if (num_moments < 1) {
    throw std::invalid_argument("build_composite_A: num_moments must be >= 1");
  }
  const auto w = trapezoid_weights(g);
  Eigen::VectorXd colw =
      mode == WeightingMode::PaperFaithful ? w.w : w.w.cwiseSqrt();
  return DiscreteOperator(std::make_shared<detail::MomentRowsImpl>(
      num_moments, g, std::move(colw),
      detail::MomentRowsImpl::RowKernel::Composite, mode));
}

// Gram operator of the composite operator, with kernel truncated at j_max.
inline DiscreteOperator build_AstarA(const Grid& g, std::int64_t j_max,
                                     WeightingMode mode, double tol = 1e-12) {
  return DiscreteOperator(
      std::make_shared<detail::GramKernelImpl>(g, j_max, mode, tol));
}

// The symmetric core of a Gram operator as a standalone operator. Throws for
// any other representation.
inline DiscreteOperator symmetric_core_operator(const DiscreteOperator& op) {
  auto gram = std::dynamic_pointer_cast<const detail::GramKernelImpl>(
      op.impl_ptr());
  if (!gram) {
    throw std::invalid_argument(
        "symmetric_core_operator: " + op.name() +
        " has no kernel core (GramKernel representation required)");
  }
  return DiscreteOperator(std::make_shared<detail::GramCoreImpl>(gram));
}

}  // namespace specdecay
