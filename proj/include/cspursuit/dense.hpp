#pragma once

// Small-scale ground truth: dense materialization of operators, direct
// least squares by orthogonal factorization, an exhaustive sparse-recovery
// oracle, and a direct-summation DCT. None of this is used on the
// matrix-free path; it exists to check that path.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cspursuit/dense_matrix.hpp"
#include "cspursuit/error.hpp"
#include "cspursuit/operators.hpp"
#include "cspursuit/seed.hpp"
#include "cspursuit/support.hpp"
#include "cspursuit/vector_ops.hpp"

namespace csp {

inline constexpr std::size_t kDefaultDenseBudgetBytes = std::size_t{256} << 20;

/// Column j is a.forward(e_j).
inline DenseMatrix materialize(const LinearOperator& a, std::size_t budget_bytes = kDefaultDenseBudgetBytes) {
  const std::size_t bytes = a.rows() * a.cols() * sizeof(double);
  if (bytes > budget_bytes) {
    throw BudgetExceeded("materialize: " + std::to_string(bytes) + " bytes exceeds budget of " +
                         std::to_string(budget_bytes));
  }
  DenseMatrix out(a.rows(), a.cols());
  std::vector<double> e(a.cols(), 0.0);
  std::vector<double> col(a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    e[j] = 1.0;
    a.forward(e, col);
    e[j] = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) out(i, j) = col[i];
  }
  return out;
}

/// Materializes the adjoint column by column; its transpose must equal
/// materialize(a).
inline DenseMatrix materialize_adjoint(const LinearOperator& a, std::size_t budget_bytes = kDefaultDenseBudgetBytes) {
  const std::size_t bytes = a.rows() * a.cols() * sizeof(double);
  if (bytes > budget_bytes) throw BudgetExceeded("materialize_adjoint: budget exceeded");
  DenseMatrix out(a.cols(), a.rows());
  std::vector<double> e(a.rows(), 0.0);
  std::vector<double> col(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    e[i] = 1.0;
    a.adjoint(e, col);
    e[i] = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = col[j];
  }
  return out;
}

/// argmin ||y - A c||_2 through column-pivoted Householder QR. Throws
/// RankDeficientError (with an empty support) when A lacks full column rank.
inline std::vector<double> least_squares_qr(const DenseMatrix& a, std::span<const double> y) {
  require_length(y.size(), a.rows(), "least_squares_qr rhs");
  if (a.cols() == 0) return {};
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> map(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                                 static_cast<Eigen::Index>(a.cols()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(map);
  if (qr.rank() < static_cast<Eigen::Index>(a.cols())) throw RankDeficientError({});
  Eigen::Map<const Eigen::VectorXd> rhs(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd sol = qr.solve(rhs);
  return {sol.data(), sol.data() + sol.size()};
}

/// Numerical rank of a by column-pivoted QR.
inline std::size_t numerical_rank(const DenseMatrix& a) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> map(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                                 static_cast<Eigen::Index>(a.cols()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(map);
  return static_cast<std::size_t>(qr.rank());
}

/// O(N^2) orthonormal DCT-II by direct summation.
inline std::vector<double> naive_dct_forward(std::span<const double> x) {
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) * static_cast<double>(k) / (2.0 * nn));
    }
    const double ck = (k == 0) ? 1.0 / std::numbers::sqrt2 : 1.0;
    out[k] = ck * std::sqrt(2.0 / nn) * acc;
  }
  return out;
}

/// O(N^2) orthonormal DCT-III (transpose of naive_dct_forward).
inline std::vector<double> naive_dct_inverse(std::span<const double> c) {
  const std::size_t n = c.size();
  const double nn = static_cast<double>(n);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double ck = (k == 0) ? 1.0 / std::numbers::sqrt2 : 1.0;
      acc += ck * c[k] * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) * static_cast<double>(k) / (2.0 * nn));
    }
    out[i] = std::sqrt(2.0 / nn) * acc;
  }
  return out;
}

struct SparseFit {
  SupportSet support;
  std::vector<double> coefficients;  // length N, zero off support
  double residual = 0.0;             // ||y - A coefficients||_2
};

struct EnumerationLimits {
  std::size_t max_n = 24;
  std::size_t max_k = 4;
};

/// Exact l0 recovery by enumerating every k-subset of columns and solving
/// least squares on each. Returns the minimal-residual subset; ties go to
/// the lexicographically first subset. Rank-deficient subsets are skipped.
inline SparseFit brute_force_sparsest(const DenseMatrix& a, std::span<const double> y, std::size_t k,
                                      EnumerationLimits limits = {}) {
  require_length(y.size(), a.rows(), "brute_force_sparsest rhs");
  const std::size_t n = a.cols();
  if (n > limits.max_n || k > limits.max_k) {
    throw BudgetExceeded("brute_force_sparsest: enumeration guard (n <= " + std::to_string(limits.max_n) +
                         ", k <= " + std::to_string(limits.max_k) + ")");
  }
  if (k > n) throw InvalidArgument("brute_force_sparsest: k exceeds n");

  SparseFit best{SupportSet(n), std::vector<double>(n, 0.0), norm2(y)};
  if (k == 0) return best;

  best.residual = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> comb(k);
  for (std::size_t i = 0; i < k; ++i) comb[i] = i;
  for (;;) {
    const DenseMatrix sub = a.columns(comb);
    try {
      const auto c = least_squares_qr(sub, y);
      const auto fit = sub.multiply(c);
      const double res = norm2(subtract(y, fit));
      if (!std::isfinite(best.residual) || res < best.residual - 1e-12 * std::max(1.0, best.residual)) {
        best.residual = res;
        best.support = SupportSet(n, comb);
        std::fill(best.coefficients.begin(), best.coefficients.end(), 0.0);
        for (std::size_t i = 0; i < k; ++i) best.coefficients[comb[i]] = c[i];
      }
    } catch (const RankDeficientError&) {
    }
    // next combination in lexicographic order
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  if (!std::isfinite(best.residual)) throw RankDeficientError({}, "brute_force_sparsest: every subset is rank deficient");
  return best;
}

/// M x N matrix with i.i.d. N(0, 1/M) entries; optionally each column is
/// rescaled to unit norm. Used to build seeded test instances.
inline DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, bool unit_columns = true) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(rows)));
  DenseMatrix a(rows, cols);
  for (auto& v : a.data()) v = g(rng);
  if (unit_columns) {
    for (std::size_t j = 0; j < cols; ++j) {
      double nrm = 0.0;
      for (std::size_t i = 0; i < rows; ++i) nrm += a(i, j) * a(i, j);
      nrm = std::sqrt(nrm);
      for (std::size_t i = 0; i < rows; ++i) a(i, j) /= nrm;
    }
  }
  return a;
}

}  // namespace csp
