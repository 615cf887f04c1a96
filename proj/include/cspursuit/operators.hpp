#pragma once

// Matrix-free linear operators. Every map in the library (dense matrices,
// the structurally random sensing operator, sparsifying bases, compositions
// and support-masked operators) is a LinearOperator with a forward and an
// adjoint application.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cspursuit/dense_matrix.hpp"
#include "cspursuit/error.hpp"
#include "cspursuit/seed.hpp"
#include "cspursuit/support.hpp"
#include "cspursuit/transforms.hpp"

namespace csp {

/// Implementation interface behind LinearOperator. Implementations are
/// immutable after construction and must tolerate concurrent calls.
class OperatorImpl {
 public:
  OperatorImpl(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}
  virtual ~OperatorImpl() = default;

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  virtual void forward(std::span<const double> x, std::span<double> y) const = 0;
  virtual void adjoint(std::span<const double> y, std::span<double> x) const = 0;

  // Applies the operator to x with every entry outside s treated as zero.
  virtual void forward_restricted(std::span<const double> x, const SupportSet& s, std::span<double> y) const {
    std::vector<double> masked(cols_, 0.0);
    for (std::size_t j : s) masked[j] = x[j];
    forward(masked, y);
  }

  // Writes (adjoint(y))[j] for j in s; entries of x outside s are untouched.
  virtual void adjoint_restricted(std::span<const double> y, const SupportSet& s, std::span<double> x) const {
    std::vector<double> full(cols_);
    adjoint(y, full);
    for (std::size_t j : s) x[j] = full[j];
  }

  // forward_restricted on a packed input: v[t] is the entry at index s[t].
  virtual void forward_packed(std::span<const double> v, const SupportSet& s, std::span<double> y) const {
    std::vector<double> x(cols_, 0.0);
    for (std::size_t t = 0; t < s.size(); ++t) x[s[t]] = v[t];
    forward_restricted(x, s, y);
  }

  // out[t] = (adjoint(y))[s[t]].
  virtual void adjoint_packed(std::span<const double> y, const SupportSet& s, std::span<double> out) const {
    std::vector<double> x(cols_, 0.0);
    adjoint_restricted(y, s, x);
    for (std::size_t t = 0; t < s.size(); ++t) out[t] = x[s[t]];
  }

  virtual std::size_t workspace_bytes() const = 0;
  virtual std::string name() const = 0;

 private:
  std::size_t rows_;
  std::size_t cols_;
};

/// Type-erased, cheaply copyable handle to an immutable M x N linear map.
class LinearOperator {
 public:
  LinearOperator() = default;
  explicit LinearOperator(std::shared_ptr<const OperatorImpl> impl) : impl_(std::move(impl)) {}

  std::size_t rows() const noexcept { return impl_->rows(); }
  std::size_t cols() const noexcept { return impl_->cols(); }
  /// Analytic upper bound on the auxiliary bytes one application needs,
  /// including any index tables the operator keeps.
  std::size_t workspace_bytes() const { return impl_->workspace_bytes(); }
  std::string name() const { return impl_->name(); }
  explicit operator bool() const noexcept { return impl_ != nullptr; }

  void forward(std::span<const double> x, std::span<double> y) const {
    require_length(x.size(), cols(), "forward input");
    require_length(y.size(), rows(), "forward output");
    impl_->forward(x, y);
  }
  std::vector<double> forward(std::span<const double> x) const {
    std::vector<double> y(rows());
    forward(x, y);
    return y;
  }

  void adjoint(std::span<const double> y, std::span<double> x) const {
    require_length(y.size(), rows(), "adjoint input");
    require_length(x.size(), cols(), "adjoint output");
    impl_->adjoint(y, x);
  }
  std::vector<double> adjoint(std::span<const double> y) const {
    std::vector<double> x(cols());
    adjoint(y, x);
    return x;
  }

  void forward_restricted(std::span<const double> x, const SupportSet& s, std::span<double> y) const {
    require_length(x.size(), cols(), "forward_restricted input");
    require_length(y.size(), rows(), "forward_restricted output");
    require_length(s.n(), cols(), "forward_restricted support");
    impl_->forward_restricted(x, s, y);
  }

  void adjoint_restricted(std::span<const double> y, const SupportSet& s, std::span<double> x) const {
    require_length(y.size(), rows(), "adjoint_restricted input");
    require_length(x.size(), cols(), "adjoint_restricted output");
    require_length(s.n(), cols(), "adjoint_restricted support");
    impl_->adjoint_restricted(y, s, x);
  }

  /// forward_restricted with the support entries packed in the order of s.
  void forward_packed(std::span<const double> v, const SupportSet& s, std::span<double> y) const {
    require_length(v.size(), s.size(), "forward_packed input");
    require_length(y.size(), rows(), "forward_packed output");
    require_length(s.n(), cols(), "forward_packed support");
    impl_->forward_packed(v, s, y);
  }

  /// adjoint_restricted written packed in the order of s.
  void adjoint_packed(std::span<const double> y, const SupportSet& s, std::span<double> out) const {
    require_length(y.size(), rows(), "adjoint_packed input");
    require_length(out.size(), s.size(), "adjoint_packed output");
    require_length(s.n(), cols(), "adjoint_packed support");
    impl_->adjoint_packed(y, s, out);
  }

  const OperatorImpl& impl() const noexcept { return *impl_; }

 private:
  std::shared_ptr<const OperatorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Dense

namespace detail {

class DenseOperator final : public OperatorImpl {
 public:
  explicit DenseOperator(DenseMatrix a) : OperatorImpl(a.rows(), a.cols()), a_(std::move(a)) {}

  void forward(std::span<const double> x, std::span<double> y) const override {
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto r = a_.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < cols(); ++j) acc += r[j] * x[j];
      y[i] = acc;
    }
  }

  void adjoint(std::span<const double> y, std::span<double> x) const override {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto r = a_.row(i);
      for (std::size_t j = 0; j < cols(); ++j) x[j] += r[j] * y[i];
    }
  }

  void forward_restricted(std::span<const double> x, const SupportSet& s, std::span<double> y) const override {
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto r = a_.row(i);
      double acc = 0.0;
      for (std::size_t j : s) acc += r[j] * x[j];
      y[i] = acc;
    }
  }

  void adjoint_restricted(std::span<const double> y, const SupportSet& s, std::span<double> x) const override {
    for (std::size_t j : s) x[j] = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto r = a_.row(i);
      for (std::size_t j : s) x[j] += r[j] * y[i];
    }
  }

  std::size_t workspace_bytes() const override { return rows() * cols() * sizeof(double); }
  std::string name() const override { return "dense"; }

 private:
  DenseMatrix a_;
};

class IdentityOperator final : public OperatorImpl {
 public:
  explicit IdentityOperator(std::size_t n) : OperatorImpl(n, n) {}
  void forward(std::span<const double> x, std::span<double> y) const override { std::copy(x.begin(), x.end(), y.begin()); }
  void adjoint(std::span<const double> y, std::span<double> x) const override { std::copy(y.begin(), y.end(), x.begin()); }
  std::size_t workspace_bytes() const override { return 0; }
  std::string name() const override { return "identity"; }
};

// Orthonormal DCT synthesis basis: forward is DCT-III, adjoint DCT-II.
class DctBasisOperator final : public OperatorImpl {
 public:
  explicit DctBasisOperator(std::size_t n) : OperatorImpl(n, n), plan_(dct_plan(n)) {}
  void forward(std::span<const double> x, std::span<double> y) const override { plan_->inverse(x, y); }
  void adjoint(std::span<const double> y, std::span<double> x) const override { plan_->forward(y, x); }
  std::size_t workspace_bytes() const override { return plan_->workspace_bytes(); }
  std::string name() const override { return "dct-basis"; }

 private:
  std::shared_ptr<const DctPlan> plan_;
};

}  // namespace detail

/// Wraps a dense matrix; forward is A x, adjoint is A^T y.
inline LinearOperator dense_operator(DenseMatrix a) {
  if (a.rows() == 0 || a.cols() == 0) throw InvalidArgument("dense_operator: zero-dimension matrix");
  if (!a.all_finite()) throw InvalidArgument("dense_operator: non-finite entry");
  return LinearOperator(std::make_shared<detail::DenseOperator>(std::move(a)));
}

inline LinearOperator identity_operator(std::size_t n) {
  if (n == 0) throw InvalidArgument("identity_operator: n must be positive");
  return LinearOperator(std::make_shared<detail::IdentityOperator>(n));
}

/// Orthonormal DCT basis Psi (x = Psi s maps DCT coefficients to samples).
inline LinearOperator dct_basis_operator(std::size_t n) {
  return LinearOperator(std::make_shared<detail::DctBasisOperator>(n));
}

// ---------------------------------------------------------------------------
// Structurally random matrix Phi = D F R

enum class Transform { kDct, kIdentity };

inline std::string to_string(Transform t) { return t == Transform::kDct ? "dct" : "identity"; }

inline Transform parse_transform(const std::string& s) {
  if (s == "dct" || s == "DCT") return Transform::kDct;
  if (s == "identity" || s == "IDENTITY") return Transform::kIdentity;
  throw InvalidArgument("unknown transform '" + s + "'");
}

/// Seedable description of a structurally random sensing operator. The row
/// selection and permutation are regenerated from the seed.
struct SrmSpec {
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  Transform transform = Transform::kDct;
  bool scaled = false;        // forward multiplies by sqrt(n/m)
  bool random_signs = false;  // randomizer also flips signs

  void validate() const {
    if (n == 0) throw InvalidArgument("SrmSpec: n must be positive");
    if (m == 0 || m > n) throw InvalidArgument("SrmSpec: need 1 <= m <= n");
  }
};

/// Concrete random pattern of an SRM: selected rows (sorted ascending),
/// permutation, and optional +-1 signs.
struct SrmSampling {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> permutation;
  std::vector<double> signs;
};

/// Draws the permutation (Fisher-Yates) and then M rows uniformly without
/// replacement (partial Fisher-Yates), both from one stream seeded by spec.seed.
inline SrmSampling sample_srm(const SrmSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SrmSampling out;
  out.permutation.resize(spec.n);
  std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
  std::shuffle(out.permutation.begin(), out.permutation.end(), rng);

  std::vector<std::size_t> pool(spec.n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < spec.m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, spec.n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  out.rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.m));
  std::sort(out.rows.begin(), out.rows.end());

  if (spec.random_signs) {
    out.signs.resize(spec.n);
    std::bernoulli_distribution coin(0.5);
    for (auto& s : out.signs) s = coin(rng) ? 1.0 : -1.0;
  }
  return out;
}

namespace detail {

class SrmOperator final : public OperatorImpl {
 public:
  SrmOperator(const SrmSpec& spec, SrmSampling sampling)
      : OperatorImpl(spec.m, spec.n), transform_(spec.transform), sampling_(std::move(sampling)) {
    require_length(sampling_.rows.size(), spec.m, "SRM row selection");
    require_length(sampling_.permutation.size(), spec.n, "SRM permutation");
    validate_rows(sampling_.rows, spec.n);
    if (!sampling_.signs.empty()) require_length(sampling_.signs.size(), spec.n, "SRM signs");
    gain_ = spec.scaled ? std::sqrt(static_cast<double>(spec.n) / static_cast<double>(spec.m)) : 1.0;
    if (transform_ == Transform::kDct) {
      plan_ = dct_plan(spec.n);
      const auto inverse = invert_permutation(sampling_.permutation);
      column_pos_.resize(spec.n);
      for (std::size_t j = 0; j < spec.n; ++j)
        column_pos_[j] = static_cast<std::uint32_t>(DctPlan::reordered_index(inverse[j], spec.n));
      if (!sampling_.signs.empty()) {
        column_sign_.resize(spec.n);
        for (std::size_t j = 0; j < spec.n; ++j) column_sign_[j] = sampling_.signs[inverse[j]];
      }
    }
  }

  void forward(std::span<const double> x, std::span<double> y) const override {
    const auto& perm = sampling_.permutation;
    const auto& rows_sel = sampling_.rows;
    if (!plan_) {
      for (std::size_t r = 0; r < rows_sel.size(); ++r) {
        const std::size_t i = rows_sel[r];
        y[r] = gain_ * sign(i) * x[perm[i]];
      }
      return;
    }
    auto lease = plan_->acquire();
    double* real = lease.real();
    const std::size_t n = cols();
    for (std::size_t i = 0; i < n; ++i) real[DctPlan::reordered_index(i, n)] = sign(i) * x[perm[i]];
    plan_->analyze(lease);
    plan_->gather_rows(lease, rows_sel, y, gain_);
  }

  void forward_restricted(std::span<const double> x, const SupportSet& s, std::span<double> y) const override {
    if (!plan_) {
      OperatorImpl::forward_restricted(x, s, y);
      return;
    }
    analyze_support(s, [&x, &s](std::size_t t) { return x[s[t]]; }, y);
  }

  void forward_packed(std::span<const double> v, const SupportSet& s, std::span<double> y) const override {
    if (!plan_) {
      OperatorImpl::forward_packed(v, s, y);
      return;
    }
    analyze_support(s, [&v](std::size_t t) { return v[t]; }, y);
  }

  void adjoint(std::span<const double> y, std::span<double> x) const override {
    const auto& perm = sampling_.permutation;
    const auto& rows_sel = sampling_.rows;
    const std::size_t n = cols();
    if (!plan_) {
      std::fill(x.begin(), x.end(), 0.0);
      for (std::size_t r = 0; r < rows_sel.size(); ++r) {
        const std::size_t i = rows_sel[r];
        x[perm[i]] = gain_ * sign(i) * y[r];
      }
      return;
    }
    auto lease = synthesize(y);
    const double* real = lease.real();
    if (column_sign_.empty()) {
      for (std::size_t j = 0; j < n; ++j) x[j] = real[column_pos_[j]];
    } else {
      for (std::size_t j = 0; j < n; ++j) x[j] = column_sign_[j] * real[column_pos_[j]];
    }
  }

  void adjoint_restricted(std::span<const double> y, const SupportSet& s, std::span<double> x) const override {
    if (!plan_) {
      OperatorImpl::adjoint_restricted(y, s, x);
      return;
    }
    auto lease = synthesize(y);
    const double* real = lease.real();
    for (std::size_t j : s) x[j] = column_sign(j) * real[column_pos_[j]];
  }

  void adjoint_packed(std::span<const double> y, const SupportSet& s, std::span<double> out) const override {
    if (!plan_) {
      OperatorImpl::adjoint_packed(y, s, out);
      return;
    }
    auto lease = synthesize(y);
    const double* real = lease.real();
    for (std::size_t t = 0; t < s.size(); ++t) out[t] = column_sign(s[t]) * real[column_pos_[s[t]]];
  }

  std::size_t workspace_bytes() const override {
    const std::size_t n = cols();
    std::size_t bytes = n * sizeof(std::size_t) + rows() * sizeof(std::size_t);
    bytes += sampling_.signs.size() * sizeof(double);
    bytes += column_pos_.size() * sizeof(std::uint32_t) + column_sign_.size() * sizeof(double);
    if (plan_) bytes += plan_->workspace_bytes();
    return bytes;
  }

  std::string name() const override { return "srm-" + to_string(transform_); }

  const SrmSampling& sampling() const noexcept { return sampling_; }

 private:
  double sign(std::size_t i) const noexcept { return sampling_.signs.empty() ? 1.0 : sampling_.signs[i]; }
  double column_sign(std::size_t j) const noexcept { return column_sign_.empty() ? 1.0 : column_sign_[j]; }

  // DCT of the vector whose entry s[t] is value(t), sampled at the selected rows.
  template <class Value>
  void analyze_support(const SupportSet& s, Value value, std::span<double> y) const {
    auto lease = plan_->acquire();
    double* sparse = lease.sparse();
    for (std::size_t t = 0; t < s.size(); ++t) sparse[column_pos_[s[t]]] = column_sign(s[t]) * value(t);
    plan_->analyze_sparse(lease);
    for (std::size_t j : s) sparse[column_pos_[j]] = 0.0;
    plan_->gather_rows(lease, sampling_.rows, y, gain_);
  }

  DctPlan::Lease synthesize(std::span<const double> y) const {
    auto lease = plan_->acquire();
    plan_->synthesize_rows(lease, sampling_.rows, y, gain_);
    return lease;
  }

  Transform transform_;
  SrmSampling sampling_;
  // For column j: its position in the reordered DCT buffer, and its sign.
  std::vector<std::uint32_t> column_pos_;
  std::vector<double> column_sign_;
  double gain_ = 1.0;
  std::shared_ptr<const DctPlan> plan_;
};

}  // namespace detail

/// Phi = D F R: forward(x) = select_rows(F(permute(x))), adjoint is the exact
/// transpose. Nothing of size M x N is ever stored.
inline LinearOperator srm_operator(const SrmSpec& spec, SrmSampling sampling) {
  spec.validate();
  return LinearOperator(std::make_shared<detail::SrmOperator>(spec, std::move(sampling)));
}

inline LinearOperator srm_operator(const SrmSpec& spec) { return srm_operator(spec, sample_srm(spec)); }

// ---------------------------------------------------------------------------
// Composition and support masking

namespace detail {

class ComposedOperator final : public OperatorImpl {
 public:
  ComposedOperator(LinearOperator phi, LinearOperator psi)
      : OperatorImpl(phi.rows(), psi.cols()), phi_(std::move(phi)), psi_(std::move(psi)) {}

  void forward(std::span<const double> x, std::span<double> y) const override {
    std::vector<double> tmp(psi_.rows());
    psi_.forward(x, tmp);
    phi_.forward(tmp, y);
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    std::vector<double> tmp(psi_.rows());
    phi_.adjoint(y, tmp);
    psi_.adjoint(tmp, x);
  }
  void forward_restricted(std::span<const double> x, const SupportSet& s, std::span<double> y) const override {
    std::vector<double> tmp(psi_.rows());
    psi_.forward_restricted(x, s, tmp);
    phi_.forward(tmp, y);
  }
  void adjoint_restricted(std::span<const double> y, const SupportSet& s, std::span<double> x) const override {
    std::vector<double> tmp(psi_.rows());
    phi_.adjoint(y, tmp);
    psi_.adjoint_restricted(tmp, s, x);
  }
  std::size_t workspace_bytes() const override {
    return phi_.workspace_bytes() + psi_.workspace_bytes() + psi_.rows() * sizeof(double);
  }
  std::string name() const override { return phi_.name() + "*" + psi_.name(); }

 private:
  LinearOperator phi_;
  LinearOperator psi_;
};

class WeightedOperator final : public OperatorImpl {
 public:
  WeightedOperator(LinearOperator a, SupportSet s) : OperatorImpl(a.rows(), a.cols()), a_(std::move(a)), s_(std::move(s)) {}

  void forward(std::span<const double> x, std::span<double> y) const override { a_.forward_restricted(x, s_, y); }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    std::fill(x.begin(), x.end(), 0.0);
    a_.adjoint_restricted(y, s_, x);
  }
  void forward_restricted(std::span<const double> x, const SupportSet& s, std::span<double> y) const override {
    a_.forward_restricted(x, intersect(s), y);
  }
  void adjoint_restricted(std::span<const double> y, const SupportSet& s, std::span<double> x) const override {
    for (std::size_t j : s) x[j] = 0.0;
    a_.adjoint_restricted(y, intersect(s), x);
  }
  std::size_t workspace_bytes() const override { return a_.workspace_bytes() + s_.storage_bytes(); }
  std::string name() const override { return a_.name() + "*W"; }

 private:
  SupportSet intersect(const SupportSet& s) const {
    SupportSet both(cols());
    for (std::size_t j : s) {
      if (s_.contains(j)) both.insert(j);
    }
    return both;
  }

  LinearOperator a_;
  SupportSet s_;
};

}  // namespace detail

/// phi o psi: forward applies psi first.
inline LinearOperator compose(LinearOperator phi, LinearOperator psi) {
  if (phi.cols() != psi.rows()) {
    throw DimensionError("compose: phi has " + std::to_string(phi.cols()) + " columns but psi has " +
                         std::to_string(psi.rows()) + " rows");
  }
  return LinearOperator(std::make_shared<detail::ComposedOperator>(std::move(phi), std::move(psi)));
}

/// A W_S: the input is masked to s before a, and a's adjoint output is masked after.
inline LinearOperator weighted_operator(LinearOperator a, SupportSet s) {
  require_length(s.n(), a.cols(), "weighted_operator support");
  return LinearOperator(std::make_shared<detail::WeightedOperator>(std::move(a), std::move(s)));
}

}  // namespace csp
