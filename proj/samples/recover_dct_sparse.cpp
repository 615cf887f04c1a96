// Recover a planted sparse vector from SRM measurements with each pursuit,
// once per least-squares backend, and print the reconstruction quality.

#include <cstdio>

#include "cspursuit.hpp"

int main() {
  csp::ExperimentSpec spec;
  spec.n = 1024;
  spec.m_ratio = 0.25;
  spec.k_ratio = 0.125;
  spec.sigma_eta = 0.01;
  spec.master_seed = 2024;

  const auto inst = csp::make_instance(spec, 0);
  std::printf("N=%zu M=%zu K=%zu operator=%s\n", spec.n, spec.m(), spec.k(), inst.a.name().c_str());

  for (auto algo : {csp::Algorithm::kOmp, csp::Algorithm::kSubspacePursuit, csp::Algorithm::kOmpr}) {
    for (auto backend : {csp::Backend::kCgWeighted, csp::Backend::kDenseLs}) {
      auto cfg = spec.pursuit_config();
      cfg.backend = backend;
      const auto res = csp::run_pursuit(algo, inst.a, inst.y, cfg);
      std::size_t hits = 0;
      for (std::size_t j : res.support) hits += inst.signal.support.contains(j) ? 1 : 0;
      std::printf("%-5s %-6s snr=%6.2f dB  support hits=%zu/%zu  cg_iters=%zu  residual=%.4g  %.3f s\n",
                  csp::to_string(algo).c_str(), csp::to_string(backend).c_str(),
                  csp::snr_db(inst.signal.values, res.coefficients), hits, inst.signal.support.size(),
                  res.cg_iterations_total, res.residual_history.back(), res.elapsed.total);
    }
  }
}
