// cspursuit: command-line front end.
//
//   cspursuit gen   -N 4096 --out data/x     signal/measurement pair + operator JSON
//   cspursuit run   -N 4096 --algo sp        one spec, CSV to stdout or --out
//   cspursuit bench --config sweep.json --out results.csv
//   cspursuit check                          oracle suite, pass/fail table

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cspursuit.hpp"

namespace {

struct GridFlags {
  std::string config;
  std::vector<std::size_t> n;
  std::optional<std::size_t> m;
  std::optional<std::size_t> k;
  std::vector<std::string> algo;
  std::vector<std::string> backend;
  std::vector<std::string> xi;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_cg_iters;
  std::optional<double> sigma_eta;
  bool warm_start = false;
};

void add_grid_flags(CLI::App* cmd, GridFlags& f, bool grid) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("-N", f.n, grid ? "signal length(s)" : "signal length");
  cmd->add_option("-M", f.m, "number of measurements (overrides m_ratio)");
  cmd->add_option("-K", f.k, "sparsity (overrides k_ratio)");
  cmd->add_option("--algo", f.algo, "omp | sp | ompr");
  cmd->add_option("--backend", f.backend, "cg | dense");
  cmd->add_option("--xi", f.xi, "CG threshold, or 'exact'");
  cmd->add_option("--trials", f.trials, "trials per grid point");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--max-cg-iters", f.max_cg_iters, "CG iteration cap (0 = |S|+2)");
  cmd->add_option("--sigma-eta", f.sigma_eta, "measurement noise standard deviation");
  cmd->add_flag("--warm-start", f.warm_start, "start each CG solve from the previous coefficients");
}

csp::SweepConfig build_grid(const GridFlags& f) {
  csp::SweepConfig cfg = f.config.empty() ? csp::SweepConfig{} : csp::load_sweep_config(f.config);
  if (!f.n.empty()) cfg.ns = f.n;
  if (f.m) cfg.base.m_override = *f.m;
  if (f.k) cfg.base.k_override = *f.k;
  if (!f.algo.empty()) {
    cfg.algos.clear();
    for (const auto& a : f.algo) cfg.algos.push_back(csp::parse_algorithm(a));
  }
  if (!f.backend.empty()) {
    cfg.backends.clear();
    for (const auto& b : f.backend) cfg.backends.push_back(csp::parse_backend(b));
  }
  if (!f.xi.empty()) {
    cfg.xis.clear();
    for (const auto& x : f.xi) cfg.xis.push_back(csp::parse_xi(x));
  }
  if (f.trials) cfg.base.trials = *f.trials;
  if (f.seed) cfg.base.master_seed = *f.seed;
  if (f.max_cg_iters) cfg.base.max_cg_iters = *f.max_cg_iters;
  if (f.sigma_eta) cfg.base.sigma_eta = *f.sigma_eta;
  if (f.warm_start) cfg.base.warm_start = true;
  return cfg;
}

void print_progress(const csp::TrialRecord& r) {
  std::fprintf(stderr, "%-4s %-5s xi=%-6s N=%-8zu trial=%-3zu %-7s snr=%7.2f dB  recall=%.3f  %.3f s%s%s\n",
               csp::to_string(r.algo).c_str(), csp::to_string(r.backend).c_str(), csp::xi_label(r.xi).c_str(),
               r.n, r.trial, csp::to_string(r.status).c_str(), r.snr_db, r.recall, r.elapsed_s,
               r.message.empty() ? "" : "  ", r.message.c_str());
}

int exit_code(const std::vector<csp::TrialRecord>& records) {
  for (const auto& r : records) {
    if (r.status == csp::TrialStatus::kError) return 1;
  }
  return 0;
}

int cmd_gen(const GridFlags& f, const std::string& prefix, std::size_t trial) {
  auto grid = build_grid(f);
  if (grid.ns.size() != 1) throw csp::InvalidArgument("gen takes a single -N");
  auto spec = grid.base;
  spec.n = grid.ns.front();
  const auto inst = csp::make_instance(spec, trial);

  csp::write_vector_file(prefix + ".signal.bin", inst.signal.values);
  csp::write_vector_file(prefix + ".measurements.bin", inst.y);
  csp::SrmSpec srm{spec.n, spec.m(), csp::derive_seed(inst.seed, csp::SeedRole::kOperator), spec.transform,
                   spec.scaled, false};
  nlohmann::json op = srm;
  op["basis"] = spec.basis == csp::SparsityBasis::kDct ? "dct" : "identity";
  std::ofstream(prefix + ".operator.json") << op.dump(2) << '\n';

  std::printf("wrote %s.{signal,measurements}.bin and %s.operator.json (N=%zu M=%zu K=%zu, %zu nonzeros)\n",
              prefix.c_str(), prefix.c_str(), spec.n, spec.m(), spec.k(), inst.signal.support.size());
  return 0;
}

int cmd_run(const GridFlags& f, const std::string& out) {
  const auto grid = build_grid(f);
  const auto specs = grid.expand();
  if (specs.size() != 1) throw csp::InvalidArgument("run takes exactly one grid point; use bench for grids");
  csp::SweepOptions opts;
  opts.on_record = print_progress;
  std::vector<csp::TrialRecord> records;
  if (out.empty()) {
    records = csp::run_sweep(specs, std::cout, opts);
  } else {
    records = csp::run_sweep(specs, std::filesystem::path(out), opts);
  }
  std::vector<double> snr;
  std::vector<double> secs;
  for (const auto& r : records) {
    if (r.status != csp::TrialStatus::kOk) continue;
    snr.push_back(r.snr_db);
    secs.push_back(r.elapsed_s);
  }
  if (!snr.empty()) {
    std::fprintf(stderr, "median over %zu trials: snr %.2f dB, elapsed %.4f s\n", snr.size(), csp::median(snr),
                 csp::median(secs));
  }
  return exit_code(records);
}

int cmd_bench(const GridFlags& f, const std::string& out, std::size_t jobs, bool resume) {
  const auto grid = build_grid(f);
  csp::SweepOptions opts;
  opts.jobs = jobs;
  opts.resume = resume;
  opts.on_record = print_progress;
  const auto records = csp::run_sweep(grid.expand(), std::filesystem::path(out), opts);
  std::fprintf(stderr, "%zu records written to %s\n", records.size(), out.c_str());
  return exit_code(records);
}

int cmd_check(std::uint64_t seed) {
  const auto results = csp::run_oracle_suite(seed);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("[%s] %-62s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  std::printf("%s\n", ok ? "all checks passed" : "some checks FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greedy sparse recovery with matrix-free CG least squares"};
  app.require_subcommand(1);

  GridFlags gen_flags;
  std::string gen_prefix;
  std::size_t gen_trial = 0;
  auto* gen = app.add_subcommand("gen", "write a planted signal and its measurements as binary vectors");
  add_grid_flags(gen, gen_flags, false);
  gen->add_option("--out", gen_prefix, "output path prefix")->required();
  gen->add_option("--trial", gen_trial, "trial index used for seed derivation");

  GridFlags run_flags;
  std::string run_out;
  auto* run = app.add_subcommand("run", "run the trials of one spec and emit CSV");
  add_grid_flags(run, run_flags, false);
  run->add_option("--out", run_out, "CSV path (default: stdout)");

  GridFlags bench_flags;
  std::string bench_out;
  std::size_t jobs = 1;
  bool resume = false;
  auto* bench = app.add_subcommand("bench", "run a spec grid and write CSV");
  add_grid_flags(bench, bench_flags, true);
  bench->add_option("--out", bench_out, "CSV path")->required();
  bench->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  bench->add_flag("--resume", resume, "skip rows already present in --out");

  std::uint64_t check_seed = 7;
  auto* check = app.add_subcommand("check", "run the oracle-equivalence suite");
  check->add_option("--seed", check_seed, "seed for the generated instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(gen_flags, gen_prefix, gen_trial);
    if (*run) return cmd_run(run_flags, run_out);
    if (*bench) return cmd_bench(bench_flags, bench_out, jobs, resume);
    if (*check) return cmd_check(check_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
