#pragma once

// Fast orthonormal DCT-II / DCT-III pair and the permutation and subsampling
// primitives that the structurally random sensing operator is built from.
//
// The DCT is computed with Makhoul's reordering: the even-indexed samples are
// laid out ascending and the odd-indexed samples descending, a single real FFT
// of length N is taken, and each coefficient is one complex twiddle away from
// the FFT bin. The FFT itself is FFTW's r2c/c2r pair.

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "cspursuit/error.hpp"

namespace csp {

namespace detail {

// FFTW's planner is not thread safe; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(double* p) const noexcept { fftw_free(p); }
};

using AlignedDoubles = std::unique_ptr<double[], FftwDeleter>;

inline AlignedDoubles allocate_aligned(std::size_t count) {
  auto* p = fftw_alloc_real(count == 0 ? 1 : count);
  if (p == nullptr) throw std::bad_alloc();
  return AlignedDoubles(p);
}

}  // namespace detail

enum class DctKind { kForward, kInverse };

/// FFTW planning rigor. kMeasure times candidate algorithms when a plan is
/// built: about 40 s at N = 2^20 on a desktop core, repaid by roughly 2x
/// faster inverse transforms over long runs.
enum class PlanEffort { kEstimate, kMeasure };

namespace detail {
inline std::atomic<PlanEffort>& plan_effort_setting() {
  static std::atomic<PlanEffort> effort{PlanEffort::kEstimate};
  return effort;
}
}  // namespace detail

/// Effort used by plans created from now on (existing plans are unaffected).
inline void set_plan_effort(PlanEffort e) { detail::plan_effort_setting().store(e); }
inline PlanEffort plan_effort() { return detail::plan_effort_setting().load(); }

/// Reusable plan for the orthonormal DCT of one length N.
///
/// Forward is DCT-II, X[k] = c_k sqrt(2/N) sum_n x[n] cos(pi (2n+1) k / 2N)
/// with c_0 = 1/sqrt(2) and c_k = 1 otherwise; inverse is its transpose
/// (DCT-III). A plan is immutable once built. Scratch buffers come from an
/// internal pool, so one plan may be applied from several threads at once.
class DctPlan {
 public:
  /// Scratch for one application: the reordered real signal, the
  /// half-spectrum of its FFT, and a second input buffer that is all zero
  /// whenever the workspace is in the pool.
  struct Workspace {
    detail::AlignedDoubles real;
    detail::AlignedDoubles spectrum;
    detail::AlignedDoubles sparse;
  };

  /// Exclusive handle on a pooled workspace; returns it on destruction.
  class Lease {
   public:
    Lease(const DctPlan* plan, std::unique_ptr<Workspace> ws) : plan_(plan), ws_(std::move(ws)) {}
    Lease(Lease&&) noexcept = default;
    Lease& operator=(Lease&&) = delete;
    Lease(const Lease&) = delete;
    ~Lease() {
      if (ws_) plan_->release(std::move(ws_));
    }

    double* real() const noexcept { return ws_->real.get(); }
    double* spectrum() const noexcept { return ws_->spectrum.get(); }
    /// Zero on acquire. Whoever writes into it must zero those entries again
    /// before the lease ends.
    double* sparse() const noexcept { return ws_->sparse.get(); }

   private:
    const DctPlan* plan_;
    std::unique_ptr<Workspace> ws_;
  };

  explicit DctPlan(std::size_t n, PlanEffort effort = PlanEffort::kEstimate) : n_(n), half_(n / 2 + 1) {
    if (n == 0) throw InvalidArgument("DCT length must be at least 1");
    if (n > static_cast<std::size_t>(std::numeric_limits<int>::max()))
      throw InvalidArgument("DCT length exceeds the FFT size limit");
    cos_.resize(half_);
    sin_.resize(half_);
    const double step = std::numbers::pi / (2.0 * static_cast<double>(n_));
    for (std::size_t k = 0; k < half_; ++k) {
      cos_[k] = std::cos(step * static_cast<double>(k));
      sin_[k] = std::sin(step * static_cast<double>(k));
    }
    scale_dc_ = std::sqrt(1.0 / static_cast<double>(n_));
    scale_ac_ = std::sqrt(2.0 / static_cast<double>(n_));

    auto ws = make_workspace();
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      auto* spec = reinterpret_cast<fftw_complex*>(ws->spectrum.get());
      const unsigned flags = effort == PlanEffort::kMeasure ? FFTW_MEASURE : FFTW_ESTIMATE;
      r2c_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), ws->real.get(), spec, flags);
      c2r_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spec, ws->real.get(), flags);
    }
    if (r2c_ == nullptr || c2r_ == nullptr) throw Error("FFTW planning failed");
    pool_.push_back(std::move(ws));
  }

  DctPlan(const DctPlan&) = delete;
  DctPlan& operator=(const DctPlan&) = delete;

  ~DctPlan() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
  }

  std::size_t size() const noexcept { return n_; }

  /// Bytes of auxiliary storage one application touches: the twiddle tables
  /// plus one workspace.
  std::size_t workspace_bytes() const noexcept {
    return 2 * half_ * sizeof(double) + 2 * n_ * sizeof(double) + 2 * half_ * sizeof(double);
  }

  Lease acquire() const {
    std::unique_ptr<Workspace> ws;
    {
      std::lock_guard lock(pool_mutex_);
      if (!pool_.empty()) {
        ws = std::move(pool_.back());
        pool_.pop_back();
      }
    }
    if (!ws) ws = make_workspace();
    return Lease(this, std::move(ws));
  }

  /// Position of time sample i inside the reordered buffer.
  static constexpr std::size_t reordered_index(std::size_t i, std::size_t n) noexcept {
    return (i % 2 == 0) ? i / 2 : n - 1 - i / 2;
  }
  std::size_t reordered_index(std::size_t i) const noexcept { return reordered_index(i, n_); }

  /// FFT of the reordered signal held in lease.real(); result lands in
  /// lease.spectrum(). Call coefficient() afterwards.
  void analyze(const Lease& lease) const {
    fftw_execute_dft_r2c(r2c_, lease.real(), reinterpret_cast<fftw_complex*>(lease.spectrum()));
  }

  /// Same as analyze() but reads lease.sparse(), which FFTW leaves intact.
  void analyze_sparse(const Lease& lease) const {
    fftw_execute_dft_r2c(r2c_, lease.sparse(), reinterpret_cast<fftw_complex*>(lease.spectrum()));
  }

  /// Orthonormal DCT-II coefficient k after analyze().
  double coefficient(const Lease& lease, std::size_t k) const noexcept {
    const double* spec = lease.spectrum();
    const double scale = (k == 0) ? scale_dc_ : scale_ac_;
    if (k < half_) {
      const double re = spec[2 * k];
      const double im = spec[2 * k + 1];
      return scale * (re * cos_[k] + im * sin_[k]);
    }
    const std::size_t q = n_ - k;
    const double re = spec[2 * q];
    const double im = spec[2 * q + 1];
    return scale * (re * sin_[q] - im * cos_[q]);
  }

  /// gain * coefficient(rows[r]) for every r; rows must be sorted ascending.
  void gather_rows(const Lease& lease, std::span<const std::size_t> rows, std::span<double> out,
                   double gain) const {
    const double* spec = lease.spectrum();
    const auto split = static_cast<std::size_t>(std::lower_bound(rows.begin(), rows.end(), half_) - rows.begin());
    const double ac = gain * scale_ac_;
    std::size_t r = 0;
    if (r < split && rows[0] == 0) {
      out[0] = gain * scale_dc_ * spec[0];
      r = 1;
    }
    for (; r < split; ++r) {
      const std::size_t k = rows[r];
      out[r] = ac * (spec[2 * k] * cos_[k] + spec[2 * k + 1] * sin_[k]);
    }
    for (; r < rows.size(); ++r) {
      const std::size_t q = n_ - rows[r];
      out[r] = ac * (spec[2 * q] * sin_[q] - spec[2 * q + 1] * cos_[q]);
    }
  }

  /// Treats lease.real() as a dense vector of orthonormal DCT coefficients
  /// and overwrites it with the reordered time signal of their DCT-III.
  void synthesize(const Lease& lease) const {
    double* real = lease.real();
    double* spec = lease.spectrum();
    const double inv_n = 1.0 / static_cast<double>(n_);
    const double dc = inv_n / scale_dc_;
    const double ac = inv_n / scale_ac_;
    for (std::size_t k = 0; k < half_; ++k) {
      const double a = real[k] * (k == 0 ? dc : ac);
      const double b = (k == 0) ? 0.0 : real[n_ - k] * ac;
      spec[2 * k] = a * cos_[k] + b * sin_[k];
      spec[2 * k + 1] = a * sin_[k] - b * cos_[k];
    }
    fftw_execute_dft_c2r(c2r_, reinterpret_cast<fftw_complex*>(spec), real);
  }

  /// synthesize() for a coefficient vector that is zero outside `rows`
  /// (distinct indices), with values gain * values[r]. Builds the spectrum
  /// directly instead of going through a dense coefficient buffer.
  void synthesize_rows(const Lease& lease, std::span<const std::size_t> rows, std::span<const double> values,
                       double gain) const {
    double* spec = lease.spectrum();
    std::fill(spec, spec + 2 * half_, 0.0);
    const double inv_n = gain / static_cast<double>(n_);
    const double dc = inv_n / scale_dc_;
    const double ac = inv_n / scale_ac_;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t k = rows[r];
      if (k == 0) {
        spec[0] += values[r] * dc;
      } else if (k < half_) {
        const double a = values[r] * ac;
        spec[2 * k] += a * cos_[k];
        spec[2 * k + 1] += a * sin_[k];
        if (2 * k == n_) {
          spec[2 * k] += a * sin_[k];
          spec[2 * k + 1] -= a * cos_[k];
        }
      } else {
        const std::size_t q = n_ - k;
        const double b = values[r] * ac;
        spec[2 * q] += b * sin_[q];
        spec[2 * q + 1] -= b * cos_[q];
      }
    }
    fftw_execute_dft_c2r(c2r_, reinterpret_cast<fftw_complex*>(spec), lease.real());
  }

  void forward(std::span<const double> x, std::span<double> out) const {
    require_length(x.size(), n_, "dct_forward input");
    require_length(out.size(), n_, "dct_forward output");
    auto lease = acquire();
    double* real = lease.real();
    for (std::size_t i = 0; i < n_; ++i) real[reordered_index(i)] = x[i];
    analyze(lease);
    for (std::size_t k = 0; k < n_; ++k) out[k] = coefficient(lease, k);
  }

  void inverse(std::span<const double> c, std::span<double> out) const {
    require_length(c.size(), n_, "dct_inverse input");
    require_length(out.size(), n_, "dct_inverse output");
    auto lease = acquire();
    double* real = lease.real();
    for (std::size_t k = 0; k < n_; ++k) real[k] = c[k];
    synthesize(lease);
    for (std::size_t i = 0; i < n_; ++i) out[i] = real[reordered_index(i)];
  }

  void apply(DctKind kind, std::span<const double> x, std::span<double> out) const {
    if (kind == DctKind::kForward) {
      forward(x, out);
    } else {
      inverse(x, out);
    }
  }

 private:
  std::unique_ptr<Workspace> make_workspace() const {
    auto ws = std::make_unique<Workspace>();
    ws->real = detail::allocate_aligned(n_);
    ws->spectrum = detail::allocate_aligned(2 * half_);
    ws->sparse = detail::allocate_aligned(n_);
    std::fill(ws->sparse.get(), ws->sparse.get() + n_, 0.0);
    return ws;
  }

  void release(std::unique_ptr<Workspace> ws) const {
    std::lock_guard lock(pool_mutex_);
    pool_.push_back(std::move(ws));
  }

  std::size_t n_;
  std::size_t half_;
  std::vector<double> cos_;
  std::vector<double> sin_;
  double scale_dc_ = 0;
  double scale_ac_ = 0;
  fftw_plan r2c_ = nullptr;
  fftw_plan c2r_ = nullptr;
  mutable std::mutex pool_mutex_;
  mutable std::vector<std::unique_ptr<Workspace>> pool_;
};

/// Shared plan for length n at the current plan_effort(). A measured plan
/// stays cached for the life of the process; estimated ones only while in use.
inline std::shared_ptr<const DctPlan> dct_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::weak_ptr<const DctPlan>> cache;
  static std::map<std::size_t, std::shared_ptr<const DctPlan>> measured;
  const PlanEffort effort = plan_effort();
  std::lock_guard lock(mutex);
  if (auto it = measured.find(n); it != measured.end()) return it->second;
  if (effort == PlanEffort::kEstimate) {
    if (auto plan = cache[n].lock()) return plan;
  }
  auto plan = std::make_shared<const DctPlan>(n, effort);
  if (effort == PlanEffort::kMeasure) {
    measured[n] = plan;
  } else {
    cache[n] = plan;
  }
  return plan;
}

inline std::vector<double> dct_forward(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("dct_forward: empty input");
  std::vector<double> out(x.size());
  dct_plan(x.size())->forward(x, out);
  return out;
}

inline std::vector<double> dct_inverse(std::span<const double> c) {
  if (c.empty()) throw InvalidArgument("dct_inverse: empty input");
  std::vector<double> out(c.size());
  dct_plan(c.size())->inverse(c, out);
  return out;
}

// ---------------------------------------------------------------------------
// Permutation and subsampling

inline void validate_permutation(std::span<const std::size_t> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) throw InvalidArgument("permutation is not a bijection");
    seen[p] = true;
  }
}

inline void validate_rows(std::span<const std::size_t> rows, std::size_t n) {
  std::vector<bool> seen(n, false);
  for (std::size_t r : rows) {
    if (r >= n) throw InvalidArgument("row index out of range");
    if (seen[r]) throw InvalidArgument("duplicate row index");
    seen[r] = true;
  }
}

inline std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm) {
  validate_permutation(perm);
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

/// y[i] = x[perm[i]].
inline std::vector<double> permute(std::span<const double> x, std::span<const std::size_t> perm) {
  require_length(perm.size(), x.size(), "permute");
  validate_permutation(perm);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < perm.size(); ++i) y[i] = x[perm[i]];
  return y;
}

/// Inverse of permute: x[perm[i]] = y[i].
inline std::vector<double> permute_inverse(std::span<const double> y, std::span<const std::size_t> perm) {
  require_length(perm.size(), y.size(), "permute_inverse");
  validate_permutation(perm);
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < perm.size(); ++i) x[perm[i]] = y[i];
  return x;
}

inline std::vector<double> subsample(std::span<const double> x, std::span<const std::size_t> rows) {
  validate_rows(rows, x.size());
  std::vector<double> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) y[r] = x[rows[r]];
  return y;
}

/// Adjoint of subsample: zero vector of length n with y placed at rows.
inline std::vector<double> scatter(std::span<const double> y, std::span<const std::size_t> rows, std::size_t n) {
  require_length(y.size(), rows.size(), "scatter");
  validate_rows(rows, n);
  std::vector<double> x(n, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) x[rows[r]] = y[r];
  return x;
}

}  // namespace csp
