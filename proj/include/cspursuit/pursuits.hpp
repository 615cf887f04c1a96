#pragma once

// Greedy sparse recovery: OMP, Subspace Pursuit and OMPR. Each algorithm is
// written once against a least-squares backend, so the same code path runs
// either the matrix-free CG solve over a support mask or a dense QR solve on
// materialized columns.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cspursuit/cg.hpp"
#include "cspursuit/dense.hpp"
#include "cspursuit/error.hpp"
#include "cspursuit/operators.hpp"
#include "cspursuit/support.hpp"
#include "cspursuit/vector_ops.hpp"

namespace csp {

enum class Algorithm { kOmp, kSubspacePursuit, kOmpr };
enum class Backend { kCgWeighted, kDenseLs };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kOmp:
      return "omp";
    case Algorithm::kSubspacePursuit:
      return "sp";
    case Algorithm::kOmpr:
      return "ompr";
  }
  return "?";
}

inline std::string to_string(Backend b) { return b == Backend::kCgWeighted ? "cg" : "dense"; }

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "omp" || s == "OMP") return Algorithm::kOmp;
  if (s == "sp" || s == "SP") return Algorithm::kSubspacePursuit;
  if (s == "ompr" || s == "OMPR") return Algorithm::kOmpr;
  throw InvalidArgument("unknown algorithm '" + s + "'");
}

inline Backend parse_backend(const std::string& s) {
  if (s == "cg" || s == "CG_WEIGHTED" || s == "cg_weighted") return Backend::kCgWeighted;
  if (s == "dense" || s == "DENSE_LS" || s == "dense_ls") return Backend::kDenseLs;
  throw InvalidArgument("unknown backend '" + s + "'");
}

struct PursuitConfig {
  std::size_t sparsity = 0;  // K
  Backend backend = Backend::kCgWeighted;
  CgConfig cg;
  std::size_t max_outer_iters = 30;  // SP and OMPR
  double halting = 1e-12;            // SP/OMPR stop when ||r|| improves by less than this, relatively
  bool warm_start = false;           // start each CG solve from the previous coefficients
  bool residual_early_exit = false;  // OMP: stop once ||r|| <= residual_tolerance
  double residual_tolerance = 0.0;
  double ompr_step = 1.0;                // eta
  std::size_t ompr_replacements = 1;     // OMPR(l)
  std::size_t dense_budget_bytes = kDefaultDenseBudgetBytes;

  void validate(std::size_t m, std::size_t n) const {
    if (sparsity < 1 || sparsity > m || m > n) throw InvalidArgument("PursuitConfig: need 1 <= K <= M <= N");
    if (ompr_replacements < 1) throw InvalidArgument("PursuitConfig: OMPR needs at least one replacement");
    if (!(ompr_step > 0.0)) throw InvalidArgument("PursuitConfig: OMPR step must be positive");
    cg.validate();
  }
};

struct StageTimes {
  double setup = 0.0;          // backend construction (dense materialization)
  double correlation = 0.0;    // A^T r
  double least_squares = 0.0;  // backend solves
  double total = 0.0;
};

struct PursuitResult {
  std::vector<double> coefficients;       // length N, zero off support
  SupportSet support;
  std::vector<double> residual_history;   // ||y - A s_i||_2 per accepted outer iteration
  std::size_t cg_iterations_total = 0;
  std::size_t least_squares_solves = 0;
  std::size_t outer_iterations = 0;
  std::vector<std::string> warnings;
  StageTimes elapsed;
  std::size_t workspace_bytes = 0;        // analytic peak
};

// ---------------------------------------------------------------------------
// Least-squares backends

/// Dense least squares on an explicit column submatrix. Refuses when the
/// submatrix itself would exceed budget_bytes.
inline std::vector<double> dense_ls_backend(const DenseMatrix& a_s, std::span<const double> y,
                                            std::size_t budget_bytes = kDefaultDenseBudgetBytes) {
  if (a_s.rows() * a_s.cols() * sizeof(double) > budget_bytes) {
    throw BudgetExceeded("dense_ls_backend: column submatrix exceeds budget");
  }
  return least_squares_qr(a_s, y);
}

/// Previous coefficients with their fit A c and gradient A^T (y - A c),
/// either of the latter two possibly empty.
struct WarmStart {
  std::span<const double> coefficients;
  std::span<const double> fitted;
  std::span<const double> gradient;
};

struct LsSolution {
  std::vector<double> coefficients;  // length N
  std::vector<double> fitted;        // A * coefficients
  std::size_t iterations = 0;
};

class LeastSquaresBackend {
 public:
  virtual ~LeastSquaresBackend() = default;
  virtual LsSolution solve(const SupportSet& s, std::span<const double> y, const WarmStart& warm) const = 0;
  virtual std::size_t workspace_bytes(std::size_t max_support) const = 0;
};

class CgLeastSquares final : public LeastSquaresBackend {
 public:
  CgLeastSquares(LinearOperator a, CgConfig cfg) : a_(std::move(a)), cfg_(cfg) { cfg_.record_history = false; }

  LsSolution solve(const SupportSet& s, std::span<const double> y, const WarmStart& warm) const override {
    if (cached_y_.size() != y.size() || !std::equal(y.begin(), y.end(), cached_y_.begin())) {
      cached_y_.assign(y.begin(), y.end());
      adjoint_y_ = a_.adjoint(y);
    }
    auto rep = cg_solve(a_, s, y, cfg_, warm.coefficients, {}, CgHint{adjoint_y_, warm.fitted, warm.gradient});
    return {std::move(rep.solution), std::move(rep.fitted), rep.iterations};
  }

  // solution, residual, direction, H d and the cached A^T y (length N), plus
  // A d, the fit and the cached y (length M)
  std::size_t workspace_bytes(std::size_t) const override {
    return (5 * a_.cols() + 3 * a_.rows()) * sizeof(double);
  }

 private:
  LinearOperator a_;
  CgConfig cfg_;
  mutable std::vector<double> cached_y_;
  mutable std::vector<double> adjoint_y_;
};

class DenseLeastSquares final : public LeastSquaresBackend {
 public:
  DenseLeastSquares(const LinearOperator& a, std::size_t budget_bytes)
      : a_(materialize(a, budget_bytes)), budget_(budget_bytes) {}

  LsSolution solve(const SupportSet& s, std::span<const double> y, const WarmStart&) const override {
    const DenseMatrix a_s = a_.columns(s.indices());
    std::vector<double> c;
    try {
      c = dense_ls_backend(a_s, y, budget_);
    } catch (const RankDeficientError&) {
      throw RankDeficientError(s.sorted());
    }
    LsSolution out;
    out.coefficients.assign(a_.cols(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) out.coefficients[s[i]] = c[i];
    out.fitted = a_s.multiply(c);
    return out;
  }

  // materialized A, the column submatrix and its QR factor, pivots and fit
  std::size_t workspace_bytes(std::size_t max_support) const override {
    const std::size_t m = a_.rows();
    return (a_.rows() * a_.cols() + 2 * m * max_support + 3 * max_support + 2 * m) * sizeof(double);
  }

  const DenseMatrix& matrix() const noexcept { return a_; }

 private:
  DenseMatrix a_;
  std::size_t budget_;
};

inline std::unique_ptr<LeastSquaresBackend> make_backend(const LinearOperator& a, const PursuitConfig& cfg) {
  if (cfg.backend == Backend::kCgWeighted) return std::make_unique<CgLeastSquares>(a, cfg.cg);
  return std::make_unique<DenseLeastSquares>(a, cfg.dense_budget_bytes);
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Indices of the k largest |v[j]| over the candidates, ties to the lower
/// index; returned in descending order of magnitude.
inline std::vector<std::size_t> top_k_by_magnitude(std::span<const double> v, std::vector<std::size_t> candidates,
                                                   std::size_t k) {
  k = std::min(k, candidates.size());
  auto before = [&v](std::size_t a, std::size_t b) {
    const double fa = std::abs(v[a]);
    const double fb = std::abs(v[b]);
    return fa > fb || (fa == fb && a < b);
  };
  auto mid = candidates.begin() + static_cast<std::ptrdiff_t>(k);
  std::nth_element(candidates.begin(), mid, candidates.end(), before);
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end(), before);
  return candidates;
}

inline std::vector<std::size_t> complement(const SupportSet& s) {
  std::vector<std::size_t> out;
  out.reserve(s.n() - s.size());
  for (std::size_t j = 0; j < s.n(); ++j) {
    if (!s.contains(j)) out.push_back(j);
  }
  return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = j;
  return out;
}

inline SupportSet sorted_support(std::size_t n, std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  return SupportSet(n, idx);
}

/// Carries the per-run bookkeeping shared by the three algorithms.
class Run {
 public:
  Run(const LinearOperator& a, std::span<const double> y, const PursuitConfig& cfg)
      : a_(a), y_(y), cfg_(cfg) {
    require_length(y.size(), a.rows(), "pursuit measurement");
    if (!all_finite(y)) throw InvalidArgument("pursuit: non-finite measurement");
    cfg.validate(a.rows(), a.cols());
    Stopwatch setup;
    backend_ = make_backend(a, cfg);
    result_.elapsed.setup = setup.seconds();
    result_.support = SupportSet(a.cols());
    result_.coefficients.assign(a.cols(), 0.0);
    residual_.assign(y.begin(), y.end());
    correlation_.assign(a.cols(), 0.0);
  }

  const LinearOperator& op() const noexcept { return a_; }
  const PursuitConfig& cfg() const noexcept { return cfg_; }
  PursuitResult& result() noexcept { return result_; }
  std::span<const double> residual() const noexcept { return residual_; }
  double residual_norm() const { return norm2(residual_); }

  /// A^T r for the current residual.
  std::span<const double> correlate() {
    Stopwatch sw;
    a_.adjoint(residual_, correlation_);
    correlation_current_ = true;
    result_.elapsed.correlation += sw.seconds();
    return correlation_;
  }

  struct Fit {
    std::vector<double> coefficients;
    std::vector<double> residual;
    double residual_norm = 0.0;
  };

  Fit solve(const SupportSet& s, std::span<const double> warm) {
    Stopwatch sw;
    WarmStart start;
    if (cfg_.warm_start) {
      start.coefficients = warm;
      if (warm.data() == result_.coefficients.data() && correlation_current_ &&
          std::ranges::all_of(result_.support, [&s](std::size_t j) { return s.contains(j); })) {
        fitted_ = subtract(y_, residual_);
        start.fitted = fitted_;
        start.gradient = correlation_;
      }
    }
    auto sol = backend_->solve(s, y_, start);
    result_.elapsed.least_squares += sw.seconds();
    result_.cg_iterations_total += sol.iterations;
    ++result_.least_squares_solves;
    Fit f;
    f.coefficients = std::move(sol.coefficients);
    f.residual = subtract(y_, sol.fitted);
    f.residual_norm = norm2(f.residual);
    return f;
  }

  void accept(SupportSet s, Fit f) {
    result_.support = std::move(s);
    accept(std::move(f));
  }

  void accept(Fit f) {
    result_.coefficients = std::move(f.coefficients);
    residual_ = std::move(f.residual);
    correlation_current_ = false;
    result_.residual_history.push_back(f.residual_norm);
  }

  PursuitResult finish(std::size_t max_support, std::size_t extra_n_vectors, const Stopwatch& total) {
    const std::size_t n = a_.cols();
    const std::size_t m = a_.rows();
    // correlation, coefficients and residual, plus the support mask and indices
    std::size_t bytes = a_.workspace_bytes() + backend_->workspace_bytes(max_support);
    bytes += (2 * n + m + extra_n_vectors * n) * sizeof(double);
    bytes += n + 2 * max_support * sizeof(std::size_t);
    result_.workspace_bytes = bytes;
    result_.elapsed.total = total.seconds();
    return std::move(result_);
  }

 private:
  const LinearOperator& a_;
  std::span<const double> y_;
  const PursuitConfig& cfg_;
  std::unique_ptr<LeastSquaresBackend> backend_;
  PursuitResult result_;
  std::vector<double> residual_;
  std::vector<double> correlation_;
  std::vector<double> fitted_;
  bool correlation_current_ = false;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Algorithms

/// Orthogonal matching pursuit: K rounds of "pick the column most correlated
/// with the residual, then re-fit on the grown support".
inline PursuitResult omp(const LinearOperator& a, std::span<const double> y, const PursuitConfig& cfg) {
  detail::Stopwatch total;
  detail::Run run(a, y, cfg);
  auto& res = run.result();
  const std::size_t n = a.cols();

  for (std::size_t i = 0; i < cfg.sparsity; ++i) {
    const auto c = run.correlate();
    std::size_t best = n;
    std::size_t best_free = n;
    double best_v = -1.0;
    double best_free_v = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::abs(c[j]);
      if (v > best_v) {
        best_v = v;
        best = j;
      }
      if (v > best_free_v && !res.support.contains(j)) {
        best_free_v = v;
        best_free = j;
      }
    }
    if (best_free == n) break;
    if (best != best_free) {
      res.warnings.push_back("iteration " + std::to_string(i + 1) + ": index " + std::to_string(best) +
                             " already selected, took " + std::to_string(best_free));
    }
    res.support.insert(best_free);
    run.accept(run.solve(res.support, res.coefficients));
    ++res.outer_iterations;
    if (cfg.residual_early_exit && res.residual_history.back() <= cfg.residual_tolerance) break;
  }
  return run.finish(cfg.sparsity, 0, total);
}

/// Subspace pursuit: keep K indices, each round merge K new candidates from
/// the residual correlation, fit on the 2K union, prune back to the K largest
/// coefficients and re-fit. Stops when the residual no longer improves.
inline PursuitResult subspace_pursuit(const LinearOperator& a, std::span<const double> y, const PursuitConfig& cfg) {
  detail::Stopwatch total;
  detail::Run run(a, y, cfg);
  auto& res = run.result();
  const std::size_t n = a.cols();
  const std::size_t k = cfg.sparsity;

  {
    const auto c = run.correlate();
    auto init = detail::top_k_by_magnitude(c, detail::all_indices(n), k);
    auto s = detail::sorted_support(n, std::move(init));
    auto fit = run.solve(s, res.coefficients);
    run.accept(std::move(s), std::move(fit));
  }

  for (std::size_t it = 0; it < cfg.max_outer_iters; ++it) {
    const double current = res.residual_history.back();
    if (current == 0.0) break;
    const auto c = run.correlate();
    auto extra = detail::top_k_by_magnitude(c, detail::complement(res.support), k);
    std::vector<std::size_t> merged = res.support.sorted();
    merged.insert(merged.end(), extra.begin(), extra.end());
    const auto candidates = detail::sorted_support(n, merged);
    auto wide = run.solve(candidates, res.coefficients);

    auto kept = detail::top_k_by_magnitude(wide.coefficients, candidates.sorted(), k);
    auto pruned = detail::sorted_support(n, std::move(kept));
    auto fit = run.solve(pruned, wide.coefficients);
    ++res.outer_iterations;

    const double next = fit.residual_norm;
    const bool improved = next < current;
    if (improved) run.accept(std::move(pruned), std::move(fit));
    if (!(next < current * (1.0 - cfg.halting))) break;
  }
  // correlation, candidate fit and the pruned fit coefficients
  return run.finish(2 * k, 2, total);
}

/// OMPR(l): gradient step z = s + eta A^T r, then swap up to l support
/// entries with the smallest |z| for outside indices with larger |z|, and
/// re-fit. Stops at a fixed point or when the residual stops decreasing.
inline PursuitResult ompr(const LinearOperator& a, std::span<const double> y, const PursuitConfig& cfg) {
  detail::Stopwatch total;
  detail::Run run(a, y, cfg);
  auto& res = run.result();
  const std::size_t n = a.cols();
  const std::size_t k = cfg.sparsity;

  {
    const auto c = run.correlate();
    auto init = detail::top_k_by_magnitude(c, detail::all_indices(n), k);
    auto s = detail::sorted_support(n, std::move(init));
    auto fit = run.solve(s, res.coefficients);
    run.accept(std::move(s), std::move(fit));
  }

  std::vector<double> z(n);
  for (std::size_t it = 0; it < cfg.max_outer_iters; ++it) {
    const double current = res.residual_history.back();
    if (current == 0.0) break;
    const auto c = run.correlate();
    for (std::size_t j = 0; j < n; ++j) z[j] = res.coefficients[j] + cfg.ompr_step * c[j];

    const std::size_t l = std::min(cfg.ompr_replacements, std::min(k, n - k));
    auto incoming = detail::top_k_by_magnitude(z, detail::complement(res.support), l);
    // smallest |z| inside the support: top-l of the negated ordering
    std::vector<std::size_t> inside = res.support.sorted();
    std::sort(inside.begin(), inside.end(), [&z](std::size_t p, std::size_t q) {
      const double fp = std::abs(z[p]);
      const double fq = std::abs(z[q]);
      return fp < fq || (fp == fq && p > q);
    });

    std::vector<std::size_t> next_idx = res.support.sorted();
    std::size_t swaps = 0;
    for (std::size_t p = 0; p < incoming.size() && p < inside.size(); ++p) {
      if (!(std::abs(z[incoming[p]]) > std::abs(z[inside[p]]))) break;
      std::replace(next_idx.begin(), next_idx.end(), inside[p], incoming[p]);
      ++swaps;
    }
    if (swaps == 0) break;

    auto next = detail::sorted_support(n, std::move(next_idx));
    auto fit = run.solve(next, res.coefficients);
    ++res.outer_iterations;
    const double value = fit.residual_norm;
    if (!(value < current)) break;
    run.accept(std::move(next), std::move(fit));
    if (!(value < current * (1.0 - cfg.halting))) break;
  }
  // correlation and gradient-step vector z
  return run.finish(k, 2, total);
}

inline PursuitResult run_pursuit(Algorithm algo, const LinearOperator& a, std::span<const double> y,
                                 const PursuitConfig& cfg) {
  switch (algo) {
    case Algorithm::kOmp:
      return omp(a, y, cfg);
    case Algorithm::kSubspacePursuit:
      return subspace_pursuit(a, y, cfg);
    case Algorithm::kOmpr:
      return ompr(a, y, cfg);
  }
  throw InvalidArgument("unknown algorithm");
}

}  // namespace csp
