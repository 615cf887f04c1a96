#pragma once

// Conjugate gradient on the support-weighted normal equations
//
//   H theta = b,   H = W_S A^T A W_S,   b = W_S A^T y,
//
// applied matrix-free. H is never formed; each iteration costs one
// restricted forward and one restricted adjoint of A. With A_S of full column
// rank the S-restriction of the limit equals the ordinary least-squares
// solution on the columns in S, and the iterates restricted to S coincide with
// plain CG on A_S^T A_S (see reduced_cg_solve).

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cspursuit/dense.hpp"
#include "cspursuit/dense_matrix.hpp"
#include "cspursuit/error.hpp"
#include "cspursuit/operators.hpp"
#include "cspursuit/support.hpp"
#include "cspursuit/vector_ops.hpp"

namespace csp {

enum class CgTermination { kThreshold, kIterationCap, kStagnation };

inline std::string to_string(CgTermination t) {
  switch (t) {
    case CgTermination::kThreshold:
      return "threshold";
    case CgTermination::kIterationCap:
      return "iteration-cap";
    case CgTermination::kStagnation:
      return "stagnation";
  }
  return "?";
}

struct CgConfig {
  /// Absolute threshold on ||b - H theta||_2. Zero selects exact precision,
  /// realized as 1e-13 * ||b||_2 together with the |S| + 2 iteration cap.
  double xi = 0.0;
  /// Zero selects |S| + 2.
  std::size_t max_iters = 0;
  bool record_history = true;
  /// Consecutive non-decreasing squared residuals before giving up.
  std::size_t stagnation_window = 3;

  static constexpr double kExactRelative = 1e-13;
  static constexpr std::size_t kIterationSlack = 2;

  bool exact() const noexcept { return xi == 0.0; }

  void validate() const {
    if (!(xi >= 0.0) || !std::isfinite(xi)) throw InvalidArgument("CgConfig: xi must be finite and >= 0");
  }

  double threshold(double b_norm) const noexcept { return exact() ? kExactRelative * b_norm : xi; }
  std::size_t cap(std::size_t support_size) const noexcept {
    return max_iters != 0 ? max_iters : support_size + kIterationSlack;
  }
};

struct CgReport {
  std::vector<double> solution;          // length N, zero off the support
  std::vector<double> fitted;            // A * solution, accumulated alongside the iterates
  std::size_t iterations = 0;
  std::vector<double> residual_history;  // ||r_j||_2 for j = 0..iterations
  std::vector<double> alphas;            // alpha_j, j = 0..iterations-1
  std::vector<double> betas;             // beta_{j+1}, j = 0..iterations-1
  CgTermination termination = CgTermination::kThreshold;
  double threshold = 0.0;                // the threshold actually used
};

/// State after iteration j has produced theta_{j+1}, r_{j+1} and d_{j+1}.
struct CgIterate {
  std::size_t j = 0;
  std::span<const double> solution;
  std::span<const double> residual;
  std::span<const double> direction;
  double alpha = 0.0;
  double beta = 0.0;
};

using CgObserver = std::function<void(const CgIterate&)>;

/// Quantities a caller may already hold; each one given saves operator
/// applications. gradient must equal A^T (y - fitted) and fitted must equal
/// A * initial, with initial zero off the support.
struct CgHint {
  std::span<const double> adjoint_y;  // A^T y, length N
  std::span<const double> fitted;     // length M
  std::span<const double> gradient;   // length N
};

/// Solves min ||W_S A^T (y - A W_S theta)||_2 by CG started at `initial`
/// (restricted to S) or at zero.
inline CgReport cg_solve(const LinearOperator& a, const SupportSet& s, std::span<const double> y,
                         const CgConfig& cfg, std::span<const double> initial = {},
                         const CgObserver& observer = {}, const CgHint& hint = {}) {
  cfg.validate();
  if (s.empty()) throw InvalidArgument("cg_solve: empty support");
  require_length(s.n(), a.cols(), "cg_solve support");
  require_length(y.size(), a.rows(), "cg_solve rhs");
  if (!all_finite(y)) throw InvalidArgument("cg_solve: non-finite measurement");

  const std::size_t n = a.cols();
  const std::size_t m = a.rows();
  const std::size_t k = s.size();

  // The iteration runs on packed vectors: entry t belongs to index s[t].
  CgReport rep;
  rep.fitted.assign(m, 0.0);
  std::vector<double> theta(k, 0.0);
  std::vector<double> r(k);
  if (hint.adjoint_y.empty()) {
    a.adjoint_packed(y, s, r);
  } else {
    require_length(hint.adjoint_y.size(), n, "cg_solve adjoint_y");
    for (std::size_t t = 0; t < k; ++t) r[t] = hint.adjoint_y[s[t]];
  }
  double bb = 0.0;
  for (double v : r) bb += v * v;
  rep.threshold = cfg.threshold(std::sqrt(bb));
  const std::size_t cap = cfg.cap(k);

  std::vector<double> q(m);
  std::vector<double> hd(k);

  if (!initial.empty()) {
    require_length(initial.size(), n, "cg_solve initial guess");
    bool any = false;
    for (std::size_t t = 0; t < k; ++t) {
      theta[t] = initial[s[t]];
      any = any || theta[t] != 0.0;
    }
    if (any && !hint.gradient.empty()) {
      require_length(hint.fitted.size(), m, "cg_solve fitted");
      require_length(hint.gradient.size(), n, "cg_solve gradient");
      std::copy(hint.fitted.begin(), hint.fitted.end(), rep.fitted.begin());
      for (std::size_t t = 0; t < k; ++t) r[t] = hint.gradient[s[t]];
    } else if (any) {
      a.forward_packed(theta, s, rep.fitted);
      a.adjoint_packed(rep.fitted, s, hd);
      for (std::size_t t = 0; t < k; ++t) r[t] -= hd[t];
    }
  }

  std::vector<double> d = r;
  double rr = 0.0;
  for (double v : r) rr += v * v;
  if (cfg.record_history) rep.residual_history.push_back(std::sqrt(rr));

  std::vector<double> full_theta, full_r, full_d;
  if (observer) {
    full_theta.assign(n, 0.0);
    full_r.assign(n, 0.0);
    full_d.assign(n, 0.0);
  }

  std::size_t stalls = 0;
  rep.termination = CgTermination::kThreshold;
  while (std::sqrt(rr) > rep.threshold) {
    if (rep.iterations >= cap) {
      rep.termination = CgTermination::kIterationCap;
      break;
    }
    a.forward_packed(d, s, q);
    a.adjoint_packed(q, s, hd);
    double dhd = 0.0;
    double dd = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      dhd += d[t] * hd[t];
      dd += d[t] * d[t];
    }
    if (!(dhd > std::numeric_limits<double>::epsilon() * dd)) {
      rep.termination = CgTermination::kStagnation;
      break;
    }
    const double alpha = rr / dhd;
    double rr_next = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      theta[t] += alpha * d[t];
      r[t] -= alpha * hd[t];
      rr_next += r[t] * r[t];
    }
    for (std::size_t i = 0; i < m; ++i) rep.fitted[i] += alpha * q[i];
    const double beta = rr_next / rr;
    for (std::size_t t = 0; t < k; ++t) d[t] = r[t] + beta * d[t];

    if (cfg.record_history) {
      rep.residual_history.push_back(std::sqrt(rr_next));
      rep.alphas.push_back(alpha);
      rep.betas.push_back(beta);
    }
    if (observer) {
      for (std::size_t t = 0; t < k; ++t) {
        full_theta[s[t]] = theta[t];
        full_r[s[t]] = r[t];
        full_d[s[t]] = d[t];
      }
      observer(CgIterate{rep.iterations, full_theta, full_r, full_d, alpha, beta});
    }
    ++rep.iterations;

    stalls = (rr_next >= rr) ? stalls + 1 : 0;
    rr = rr_next;
    if (stalls >= cfg.stagnation_window && std::sqrt(rr) > rep.threshold) {
      rep.termination = CgTermination::kStagnation;
      break;
    }
  }
  rep.solution.assign(n, 0.0);
  for (std::size_t t = 0; t < k; ++t) rep.solution[s[t]] = theta[t];
  return rep;
}

struct ReducedCgReport {
  std::vector<double> solution;  // length |S|
  std::size_t iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> alphas;
  std::vector<double> betas;
  CgTermination termination = CgTermination::kThreshold;
  double threshold = 0.0;
};

/// Plain CG on the reduced system A_S^T A_S x = A_S^T y, with the same
/// thresholds and caps as cg_solve. Serves as the step-by-step reference for
/// the masked full-length iteration.
inline ReducedCgReport reduced_cg_solve(const DenseMatrix& a_s, std::span<const double> y, const CgConfig& cfg,
                                        const CgObserver& observer = {}) {
  cfg.validate();
  require_length(y.size(), a_s.rows(), "reduced_cg_solve rhs");
  const std::size_t k = a_s.cols();
  if (k == 0) throw InvalidArgument("reduced_cg_solve: empty column set");
  if (numerical_rank(a_s) < k) throw RankDeficientError({}, "reduced_cg_solve: A_S is rank deficient");

  ReducedCgReport rep;
  rep.solution.assign(k, 0.0);
  std::vector<double> r = a_s.multiply_transpose(y);
  std::vector<double> d = r;
  double rr = dot(r, r);
  rep.threshold = cfg.threshold(std::sqrt(rr));
  const std::size_t cap = cfg.cap(k);
  if (cfg.record_history) rep.residual_history.push_back(std::sqrt(rr));

  std::size_t stalls = 0;
  while (std::sqrt(rr) > rep.threshold) {
    if (rep.iterations >= cap) {
      rep.termination = CgTermination::kIterationCap;
      break;
    }
    const auto hd = a_s.multiply_transpose(a_s.multiply(d));
    const double dhd = dot(d, hd);
    if (!(dhd > std::numeric_limits<double>::epsilon() * dot(d, d))) {
      rep.termination = CgTermination::kStagnation;
      break;
    }
    const double alpha = rr / dhd;
    double rr_next = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      rep.solution[i] += alpha * d[i];
      r[i] -= alpha * hd[i];
      rr_next += r[i] * r[i];
    }
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < k; ++i) d[i] = r[i] + beta * d[i];
    if (cfg.record_history) {
      rep.residual_history.push_back(std::sqrt(rr_next));
      rep.alphas.push_back(alpha);
      rep.betas.push_back(beta);
    }
    if (observer) observer(CgIterate{rep.iterations, rep.solution, r, d, alpha, beta});
    ++rep.iterations;
    stalls = (rr_next >= rr) ? stalls + 1 : 0;
    rr = rr_next;
    if (stalls >= cfg.stagnation_window && std::sqrt(rr) > rep.threshold) {
      rep.termination = CgTermination::kStagnation;
      break;
    }
  }
  return rep;
}

}  // namespace csp
