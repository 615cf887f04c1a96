#pragma once

// Synthetic recovery experiments: planted sparse signals, noisy SRM
// measurements, scoring, and seeded sweeps that stream TrialRecords to CSV.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cspursuit/dense.hpp"
#include "cspursuit/error.hpp"
#include "cspursuit/operators.hpp"
#include "cspursuit/pursuits.hpp"
#include "cspursuit/seed.hpp"
#include "cspursuit/support.hpp"
#include "cspursuit/vector_ops.hpp"

namespace csp {

enum class SignalModel { kFixedK, kBernoulli };
enum class SparsityBasis { kIdentity, kDct };

struct ExperimentSpec {
  std::size_t n = 4096;
  double m_ratio = 0.25;  // M / N
  double k_ratio = 0.25;  // K / M
  std::optional<std::size_t> m_override;
  std::optional<std::size_t> k_override;
  double sigma_on = 1.0;
  double sigma_eta = 0.01;
  Algorithm algo = Algorithm::kOmp;
  Backend backend = Backend::kCgWeighted;
  double xi = 0.0;  // 0 = exact precision
  std::size_t trials = 20;
  std::uint64_t master_seed = 1;
  SignalModel signal = SignalModel::kFixedK;
  Transform transform = Transform::kDct;
  SparsityBasis basis = SparsityBasis::kIdentity;
  bool scaled = false;
  bool warm_start = false;
  std::size_t max_cg_iters = 0;
  std::size_t max_outer_iters = 30;
  std::size_t dense_budget_bytes = kDefaultDenseBudgetBytes;

  std::size_t m() const {
    if (m_override) return *m_override;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * m_ratio)));
  }
  std::size_t k() const {
    if (k_override) return *k_override;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(m()) * k_ratio)));
  }
  /// Activity probability of the Bernoulli signal model, K / N.
  double p() const { return static_cast<double>(k()) / static_cast<double>(n); }

  void validate() const {
    if (n == 0) throw InvalidArgument("ExperimentSpec: n must be positive");
    if (!(m_ratio > 0.0 && m_ratio <= 1.0)) throw InvalidArgument("ExperimentSpec: need 0 < m_ratio <= 1");
    if (!(k_ratio > 0.0 && k_ratio <= 1.0)) throw InvalidArgument("ExperimentSpec: need 0 < k_ratio <= 1");
    if (!(sigma_on >= 0.0) || !(sigma_eta >= 0.0)) throw InvalidArgument("ExperimentSpec: sigmas must be >= 0");
    if (!(xi >= 0.0)) throw InvalidArgument("ExperimentSpec: xi must be >= 0");
    if (m() > n || k() > m()) throw InvalidArgument("ExperimentSpec: need K <= M <= N");
  }

  PursuitConfig pursuit_config() const {
    PursuitConfig cfg;
    cfg.sparsity = k();
    cfg.backend = backend;
    cfg.cg.xi = xi;
    cfg.cg.max_iters = max_cg_iters;
    cfg.warm_start = warm_start;
    cfg.max_outer_iters = max_outer_iters;
    cfg.dense_budget_bytes = dense_budget_bytes;
    return cfg;
  }
};

inline std::string xi_label(double xi) {
  if (xi == 0.0) return "exact";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", xi);
  return buf;
}

/// Canonical text of every field that influences results.
inline std::string canonical_string(const ExperimentSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << "n=" << s.n << ";m=" << s.m() << ";k=" << s.k() << ";sigma_on=" << s.sigma_on << ";sigma_eta=" << s.sigma_eta
     << ";algo=" << to_string(s.algo) << ";backend=" << to_string(s.backend) << ";xi=" << s.xi
     << ";seed=" << s.master_seed << ";signal=" << (s.signal == SignalModel::kFixedK ? "fixed_k" : "bernoulli")
     << ";transform=" << to_string(s.transform) << ";basis=" << (s.basis == SparsityBasis::kDct ? "dct" : "identity")
     << ";scaled=" << s.scaled << ";warm=" << s.warm_start << ";max_cg=" << s.max_cg_iters
     << ";max_outer=" << s.max_outer_iters;
  return os.str();
}

/// FNV-1a 64 of the canonical string, as 16 hex digits.
inline std::string spec_hash(const ExperimentSpec& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_string(s)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Signals and measurements

struct PlantedSignal {
  std::vector<double> values;
  SupportSet support;
};

/// Each entry is independently active with probability p and then drawn
/// from N(0, sigma_on^2).
inline PlantedSignal generate_signal(std::size_t n, double p, double sigma_on, std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("generate_signal: need 0 < p < 1");
  if (!(sigma_on > 0.0)) throw InvalidArgument("generate_signal: need sigma_on > 0");
  Rng rng(seed);
  std::bernoulli_distribution active(p);
  std::normal_distribution<double> amp(0.0, sigma_on);
  PlantedSignal out{std::vector<double>(n, 0.0), SupportSet(n)};
  for (std::size_t j = 0; j < n; ++j) {
    if (active(rng)) {
      out.values[j] = amp(rng);
      out.support.insert(j);
    }
  }
  return out;
}

/// Exactly k active entries, positions uniform without replacement, values
/// N(0, sigma_on^2). Support is listed in ascending order.
inline PlantedSignal generate_signal_fixed_k(std::size_t n, std::size_t k, double sigma_on, std::uint64_t seed) {
  if (k > n) throw InvalidArgument("generate_signal_fixed_k: k exceeds n");
  Rng rng(seed);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<std::size_t> idx(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(idx.begin(), idx.end());
  std::normal_distribution<double> amp(0.0, sigma_on);
  PlantedSignal out{std::vector<double>(n, 0.0), SupportSet(n, idx)};
  for (std::size_t j : idx) out.values[j] = amp(rng);
  return out;
}

/// y = A s + eta with eta i.i.d. N(0, sigma_eta^2).
inline std::vector<double> measure(const LinearOperator& a, std::span<const double> s, double sigma_eta,
                                   std::uint64_t seed) {
  auto y = a.forward(s);
  if (sigma_eta > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_eta);
    for (auto& v : y) v += noise(rng);
  }
  return y;
}

/// 20 log10(||truth|| / ||truth - estimate||); +inf for an exact match.
inline double snr_db(std::span<const double> truth, std::span<const double> estimate) {
  require_length(estimate.size(), truth.size(), "snr_db");
  const double signal = norm2(truth);
  if (signal == 0.0) throw InvalidArgument("snr_db: zero truth vector");
  const double error = norm2(subtract(truth, estimate));
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(signal / error);
}

// ---------------------------------------------------------------------------
// Trials

enum class TrialStatus { kOk, kSkipped, kError };

inline std::string to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::kOk:
      return "OK";
    case TrialStatus::kSkipped:
      return "SKIPPED";
    case TrialStatus::kError:
      return "ERROR";
  }
  return "?";
}

struct TrialRecord {
  std::string spec_hash;
  Algorithm algo = Algorithm::kOmp;
  Backend backend = Backend::kCgWeighted;
  double xi = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
  double precision = std::numeric_limits<double>::quiet_NaN();
  double recall = std::numeric_limits<double>::quiet_NaN();
  double elapsed_s = 0.0;
  std::size_t cg_iters = 0;
  std::size_t workspace_bytes = 0;
  TrialStatus status = TrialStatus::kOk;
  std::string message;  // not serialized
  double residual_norm = std::numeric_limits<double>::quiet_NaN();  // not serialized
};

/// Everything a trial draws, regenerated from (spec, trial index).
struct TrialInstance {
  LinearOperator a;
  PlantedSignal signal;
  std::vector<double> y;
  std::uint64_t seed = 0;
};

inline LinearOperator experiment_operator(const ExperimentSpec& spec, std::uint64_t seed) {
  SrmSpec srm{spec.n, spec.m(), derive_seed(seed, SeedRole::kOperator), spec.transform, spec.scaled, false};
  auto phi = srm_operator(srm);
  if (spec.basis == SparsityBasis::kDct) return compose(phi, dct_basis_operator(spec.n));
  return phi;
}

inline TrialInstance make_instance(const ExperimentSpec& spec, std::size_t trial) {
  spec.validate();
  TrialInstance inst;
  inst.seed = trial_seed(spec.master_seed, trial);
  inst.a = experiment_operator(spec, inst.seed);
  const auto signal_seed = derive_seed(inst.seed, SeedRole::kSignal);
  inst.signal = spec.signal == SignalModel::kFixedK
                    ? generate_signal_fixed_k(spec.n, spec.k(), spec.sigma_on, signal_seed)
                    : generate_signal(spec.n, spec.p(), spec.sigma_on, signal_seed);
  inst.y = measure(inst.a, inst.signal.values, spec.sigma_eta, derive_seed(inst.seed, SeedRole::kNoise));
  return inst;
}

inline bool exceeds_dense_budget(const ExperimentSpec& spec) {
  return spec.backend == Backend::kDenseLs && spec.n * spec.m() * sizeof(double) > spec.dense_budget_bytes;
}

inline TrialRecord run_trial(const ExperimentSpec& spec, std::size_t trial) {
  TrialRecord rec;
  rec.spec_hash = spec_hash(spec);
  rec.algo = spec.algo;
  rec.backend = spec.backend;
  rec.xi = spec.xi;
  rec.n = spec.n;
  rec.m = spec.m();
  rec.k = spec.k();
  rec.trial = trial;
  rec.seed = trial_seed(spec.master_seed, trial);
  if (exceeds_dense_budget(spec)) {
    rec.status = TrialStatus::kSkipped;
    rec.message = "dense materialization exceeds budget";
    return rec;
  }
  try {
    const auto inst = make_instance(spec, trial);
    const auto res = run_pursuit(spec.algo, inst.a, inst.y, spec.pursuit_config());
    rec.snr_db = norm2(inst.signal.values) > 0.0 ? snr_db(inst.signal.values, res.coefficients)
                                                 : std::numeric_limits<double>::quiet_NaN();
    std::size_t hits = 0;
    for (std::size_t j : res.support) hits += inst.signal.support.contains(j) ? 1 : 0;
    rec.precision = res.support.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(res.support.size());
    rec.recall = inst.signal.support.empty() ? 1.0
                                             : static_cast<double>(hits) / static_cast<double>(inst.signal.support.size());
    rec.elapsed_s = res.elapsed.total;
    rec.cg_iters = res.cg_iterations_total;
    rec.workspace_bytes = res.workspace_bytes;
    rec.residual_norm = res.residual_history.empty() ? norm2(inst.y) : res.residual_history.back();
  } catch (const BudgetExceeded& e) {
    rec.status = TrialStatus::kSkipped;
    rec.message = e.what();
  } catch (const std::exception& e) {
    rec.status = TrialStatus::kError;
    rec.message = e.what();
  }
  return rec;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCsvHeader =
    "spec_hash,algo,backend,xi,n,m,k,trial,seed,snr_db,precision,recall,elapsed_s,cg_iters,workspace_bytes,status";

namespace detail {
inline std::string format_real(double v, const char* fmt) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}
}  // namespace detail

inline std::string to_csv_row(const TrialRecord& r) {
  std::ostringstream os;
  os << r.spec_hash << ',' << to_string(r.algo) << ',' << to_string(r.backend) << ',' << xi_label(r.xi) << ',' << r.n
     << ',' << r.m << ',' << r.k << ',' << r.trial << ',' << r.seed << ',' << detail::format_real(r.snr_db, "%.6f")
     << ',' << detail::format_real(r.precision, "%.6f") << ',' << detail::format_real(r.recall, "%.6f") << ','
     << detail::format_real(r.elapsed_s, "%.6f") << ',' << r.cg_iters << ',' << r.workspace_bytes << ','
     << to_string(r.status);
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Parses one data row back into a TrialRecord.
inline TrialRecord parse_csv_row(const std::string& line) {
  const auto f = split_csv_line(line);
  if (f.size() != 16) throw InvalidArgument("CSV row has " + std::to_string(f.size()) + " fields, expected 16");
  auto real = [](const std::string& s) { return std::stod(s); };
  TrialRecord r;
  r.spec_hash = f[0];
  r.algo = parse_algorithm(f[1]);
  r.backend = parse_backend(f[2]);
  r.xi = f[3] == "exact" ? 0.0 : real(f[3]);
  r.n = std::stoull(f[4]);
  r.m = std::stoull(f[5]);
  r.k = std::stoull(f[6]);
  r.trial = std::stoull(f[7]);
  r.seed = std::stoull(f[8]);
  r.snr_db = real(f[9]);
  r.precision = real(f[10]);
  r.recall = real(f[11]);
  r.elapsed_s = real(f[12]);
  r.cg_iters = std::stoull(f[13]);
  r.workspace_bytes = std::stoull(f[14]);
  if (f[15] == "OK") {
    r.status = TrialStatus::kOk;
  } else if (f[15] == "SKIPPED") {
    r.status = TrialStatus::kSkipped;
  } else if (f[15] == "ERROR") {
    r.status = TrialStatus::kError;
  } else {
    throw InvalidArgument("CSV row has unknown status '" + f[15] + "'");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepOptions {
  std::size_t jobs = 1;
  /// Skip (spec_hash, trial) pairs already present in an existing output file.
  bool resume = false;
  std::function<void(const TrialRecord&)> on_record;
};

namespace detail {

struct SweepTask {
  const ExperimentSpec* spec;
  std::size_t trial;
};

/// Runs tasks on `jobs` workers and hands results to `emit` in task order.
inline void run_ordered(const std::vector<SweepTask>& tasks, std::size_t jobs,
                        const std::function<void(std::size_t, TrialRecord)>& emit) {
  if (jobs <= 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) emit(i, run_trial(*tasks[i].spec, tasks[i].trial));
    return;
  }
  std::mutex mu;
  std::size_t next_task = 0;
  std::size_t next_emit = 0;
  std::map<std::size_t, TrialRecord> done;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next_task >= tasks.size()) return;
        i = next_task++;
      }
      auto rec = run_trial(*tasks[i].spec, tasks[i].trial);
      std::unique_lock lock(mu);
      done.emplace(i, std::move(rec));
      // single writer: whoever holds the lock drains the in-order prefix
      while (!done.empty() && done.begin()->first == next_emit) {
        auto node = done.extract(done.begin());
        emit(node.key(), std::move(node.mapped()));
        ++next_emit;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(jobs, tasks.size());
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

inline std::set<std::pair<std::string, std::size_t>> completed_rows(const std::filesystem::path& path) {
  std::set<std::pair<std::string, std::size_t>> out;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) return out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto r = parse_csv_row(line);
      out.emplace(r.spec_hash, r.trial);
    } catch (const std::exception&) {
      // a torn final line from an interrupted run; it is simply re-run
    }
  }
  return out;
}

}  // namespace detail

/// Runs every (spec, trial) pair, streaming one CSV row per record to `out`
/// (header first) in deterministic order. Returns all records produced.
inline std::vector<TrialRecord> run_sweep(const std::vector<ExperimentSpec>& grid, std::ostream& out,
                                          const SweepOptions& opts = {}, bool write_header = true,
                                          const std::set<std::pair<std::string, std::size_t>>& skip = {}) {
  for (const auto& s : grid) s.validate();
  if (write_header) out << kCsvHeader << '\n' << std::flush;
  std::vector<detail::SweepTask> tasks;
  for (const auto& s : grid) {
    const auto h = spec_hash(s);
    for (std::size_t t = 0; t < s.trials; ++t) {
      if (!skip.count({h, t})) tasks.push_back({&s, t});
    }
  }
  std::vector<TrialRecord> records;
  records.reserve(tasks.size());
  detail::run_ordered(tasks, opts.jobs, [&](std::size_t, TrialRecord rec) {
    out << to_csv_row(rec) << '\n' << std::flush;
    if (opts.on_record) opts.on_record(rec);
    records.push_back(std::move(rec));
  });
  if (!out) throw Error("run_sweep: write to output stream failed");
  return records;
}

/// File variant; with opts.resume an existing file is appended to and rows
/// already present are not re-run.
inline std::vector<TrialRecord> run_sweep(const std::vector<ExperimentSpec>& grid, const std::filesystem::path& path,
                                          const SweepOptions& opts = {}) {
  std::set<std::pair<std::string, std::size_t>> skip;
  bool header = true;
  if (opts.resume && std::filesystem::exists(path)) {
    std::ifstream probe(path);
    std::string first;
    if (std::getline(probe, first) && first == kCsvHeader) {
      skip = detail::completed_rows(path);
      header = false;
    }
  }
  std::ofstream out(path, header ? std::ios::trunc : std::ios::app);
  if (!out) throw Error("run_sweep: cannot open " + path.string());
  return run_sweep(grid, out, opts, header, skip);
}

/// Median of the values; NaN for an empty input.
inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Least-squares slope of log(y) against log(x).
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  require_length(y.size(), x.size(), "log_log_slope");
  if (x.size() < 2) throw InvalidArgument("log_log_slope: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace csp
