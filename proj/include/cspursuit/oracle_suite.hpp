#pragma once

// Self-check suite run by `cspursuit check`: every matrix-free component is
// compared against its dense or exhaustive counterpart on small seeded
// instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "cspursuit/cg.hpp"
#include "cspursuit/dense.hpp"
#include "cspursuit/operators.hpp"
#include "cspursuit/pursuits.hpp"
#include "cspursuit/seed.hpp"
#include "cspursuit/transforms.hpp"
#include "cspursuit/vector_ops.hpp"

namespace csp {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string fmt_err(const char* label, double err, double tol) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s %.3e (tol %.1e)", label, err, tol);
  return buf;
}

inline std::vector<double> gaussian_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline SupportSet random_support(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < n; ++j) idx[j] = j;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return SupportSet(n, idx);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline CheckResult check_dct(std::uint64_t seed) {
  constexpr double tol = 1e-12;
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t n : {1, 2, 3, 4, 5, 8, 15, 16, 31, 64}) {
    const auto x = gaussian_vector(n, rng);
    worst = std::max(worst, max_abs_diff(dct_forward(x), naive_dct_forward(x)));
    worst = std::max(worst, max_abs_diff(dct_inverse(x), naive_dct_inverse(x)));
    worst = std::max(worst, max_abs_diff(dct_inverse(dct_forward(x)), x));
  }
  return {"fast DCT matches direct summation", worst <= tol, fmt_err("max abs error", worst, tol)};
}

inline CheckResult check_adjoint(std::uint64_t seed) {
  constexpr double tol = 1e-12;
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t n : {8, 17, 64, 256}) {
    for (Transform t : {Transform::kDct, Transform::kIdentity}) {
      for (bool scaled : {false, true}) {
        const SrmSpec spec{n, n / 4 + 1, rng(), t, scaled, scaled};
        const auto a = srm_operator(spec);
        const auto x = gaussian_vector(n, rng);
        const auto y = gaussian_vector(spec.m, rng);
        const double lhs = dot(a.forward(x), y);
        const double rhs = dot(x, a.adjoint(y));
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, norm2(x) * norm2(y)));
      }
    }
  }
  return {"SRM adjoint identity <Ax,y> = <x,A^T y>", worst <= tol, fmt_err("max relative gap", worst, tol)};
}

inline CheckResult check_materialize(std::uint64_t seed) {
  constexpr double tol = 1e-12;
  const SrmSpec spec{64, 20, seed, Transform::kDct, false, false};
  const auto a = srm_operator(spec);
  const auto fwd = materialize(a);
  const auto adj = materialize_adjoint(a).transpose();
  double worst = max_abs_diff(fwd.data(), adj.data());
  const auto gram = fwd * fwd.transpose();
  const auto eye = DenseMatrix::identity(spec.m);
  worst = std::max(worst, max_abs_diff(gram.data(), eye.data()));
  return {"materialized SRM: forward/adjoint agree, rows orthonormal", worst <= tol,
          fmt_err("max abs error", worst, tol)};
}

inline CheckResult check_restricted(std::uint64_t seed) {
  constexpr double tol = 1e-12;
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t n : {16, 100, 512}) {
    const SrmSpec spec{n, n / 3, rng(), Transform::kDct, false, false};
    const auto a = srm_operator(spec);
    const auto s = random_support(n, n / 10 + 1, rng);
    auto x = gaussian_vector(n, rng);
    const auto y = gaussian_vector(spec.m, rng);
    std::vector<double> masked(n, 0.0);
    for (std::size_t j : s) masked[j] = x[j];
    std::vector<double> out(spec.m);
    a.forward_restricted(x, s, out);
    worst = std::max(worst, max_abs_diff(out, a.forward(masked)));
    std::vector<double> back(n, 0.0);
    a.adjoint_restricted(y, s, back);
    const auto full = a.adjoint(y);
    for (std::size_t j : s) worst = std::max(worst, std::abs(back[j] - full[j]));
  }
  return {"restricted applications match masked full applications", worst <= tol,
          fmt_err("max abs error", worst, tol)};
}

inline CheckResult check_cg_vs_qr(std::uint64_t seed) {
  constexpr double tol = 1e-8;
  Rng rng(seed);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 32;
    const std::size_t n = 64;
    const auto dense = gaussian_matrix(m, n, rng());
    const auto a = dense_operator(dense);
    const auto s = random_support(n, 1 + rep % 8, rng);
    const auto y = gaussian_vector(m, rng);
    const auto cg = cg_solve(a, s, y, CgConfig{});
    const auto qr = least_squares_qr(dense.columns(s.indices()), y);
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      diff += (cg.solution[s[i]] - qr[i]) * (cg.solution[s[i]] - qr[i]);
      ref += qr[i] * qr[i];
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300));
  }
  return {"exact-precision CG equals QR least squares on the support", worst <= tol,
          fmt_err("max relative error", worst, tol)};
}

inline CheckResult check_backends(std::uint64_t seed) {
  constexpr double tol = 1e-8;
  Rng rng(seed);
  double worst = 0.0;
  bool supports_match = true;
  for (Algorithm algo : {Algorithm::kOmp, Algorithm::kSubspacePursuit, Algorithm::kOmpr}) {
    for (int rep = 0; rep < 4; ++rep) {
      const SrmSpec spec{128, 48, rng(), Transform::kDct, false, false};
      const auto a = srm_operator(spec);
      const auto truth_support = random_support(spec.n, 6, rng);
      std::vector<double> x(spec.n, 0.0);
      for (std::size_t j : truth_support) x[j] = std::normal_distribution<double>(0.0, 1.0)(rng);
      const auto y = a.forward(x);
      PursuitConfig cfg;
      cfg.sparsity = 6;
      cfg.backend = Backend::kCgWeighted;
      const auto via_cg = run_pursuit(algo, a, y, cfg);
      cfg.backend = Backend::kDenseLs;
      const auto via_dense = run_pursuit(algo, a, y, cfg);
      supports_match = supports_match && same_elements(via_cg.support, via_dense.support);
      worst = std::max(worst, max_abs_diff(via_cg.coefficients, via_dense.coefficients));
    }
  }
  return {"CG and dense backends give the same support and coefficients", supports_match && worst <= tol,
          std::string(supports_match ? "supports equal, " : "SUPPORTS DIFFER, ") +
              fmt_err("max coefficient gap", worst, tol)};
}

inline CheckResult check_brute_force(std::uint64_t seed) {
  Rng rng(seed);
  std::size_t agree = 0;
  std::size_t total = 0;
  bool never_better = true;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 10;
    const std::size_t n = 16;
    const std::size_t k = 2;
    const auto dense = gaussian_matrix(m, n, rng());
    const auto truth = random_support(n, k, rng);
    std::vector<double> x(n, 0.0);
    for (std::size_t j : truth) x[j] = 1.0 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto y = dense.multiply(x);
    const auto best = brute_force_sparsest(dense, y, k);
    PursuitConfig cfg;
    cfg.sparsity = k;
    cfg.backend = Backend::kDenseLs;
    const auto greedy = omp(dense_operator(dense), y, cfg);
    never_better = never_better && best.residual <= greedy.residual_history.back() + 1e-9;
    agree += same_elements(best.support, truth) ? 1 : 0;
    ++total;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "exhaustive search recovered %zu/%zu planted supports", agree, total);
  return {"exhaustive search lower-bounds OMP and finds planted supports",
          never_better && agree == total, buf};
}

}  // namespace detail

inline std::vector<CheckResult> run_oracle_suite(std::uint64_t seed = 7) {
  return {
      detail::check_dct(derive_seed(seed, 1)),         detail::check_adjoint(derive_seed(seed, 2)),
      detail::check_materialize(derive_seed(seed, 3)), detail::check_restricted(derive_seed(seed, 4)),
      detail::check_cg_vs_qr(derive_seed(seed, 5)),    detail::check_backends(derive_seed(seed, 6)),
      detail::check_brute_force(derive_seed(seed, 7)),
  };
}

}  // namespace csp
