#pragma once

// JSON experiment configuration.
//
//   {
//     "sweep":    { "n": [2048, 4096], "m_ratio": 0.25, "k_ratio": 0.25,
//                   "m": null, "k": null,
//                   "algo": ["omp", "sp", "ompr"], "backend": ["cg"],
//                   "xi": ["exact", 1e-10, 1e-5], "trials": 20, "seed": 1 },
//     "signal":   { "model": "fixed_k", "sigma_on": 1.0, "sigma_eta": 0.01,
//                   "basis": "identity" },
//     "operator": { "transform": "dct", "scaled": false },
//     "solver":   { "warm_start": false, "max_cg_iters": 0,
//                   "max_outer_iters": 30, "dense_budget_mb": 256 }
//   }
//
// Every section and key is optional. Grid keys (n, algo, backend, xi) take a
// scalar or an array. The operator section also accepts the full SrmSpec form
// {n, m, seed, transform, scaled}.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cspursuit/error.hpp"
#include "cspursuit/experiments.hpp"
#include "cspursuit/operators.hpp"
#include "cspursuit/pursuits.hpp"

namespace csp {

inline void to_json(nlohmann::json& j, const SrmSpec& s) {
  j = nlohmann::json{{"n", s.n}, {"m", s.m}, {"seed", s.seed}, {"transform", to_string(s.transform)}, {"scaled", s.scaled}};
}

inline void from_json(const nlohmann::json& j, SrmSpec& s) {
  s.n = j.at("n").get<std::size_t>();
  s.m = j.at("m").get<std::size_t>();
  s.seed = j.value("seed", std::uint64_t{0});
  s.transform = parse_transform(j.value("transform", std::string("dct")));
  s.scaled = j.value("scaled", false);
  s.validate();
}

struct SweepConfig {
  ExperimentSpec base;
  std::vector<std::size_t> ns{4096};
  std::vector<Algorithm> algos{Algorithm::kOmp};
  std::vector<Backend> backends{Backend::kCgWeighted};
  std::vector<double> xis{0.0};

  /// One ExperimentSpec per grid point, ordered algo, backend, xi, n.
  std::vector<ExperimentSpec> expand() const {
    std::vector<ExperimentSpec> out;
    for (auto a : algos) {
      for (auto b : backends) {
        for (double xi : xis) {
          for (std::size_t n : ns) {
            ExperimentSpec s = base;
            s.algo = a;
            s.backend = b;
            s.xi = xi;
            s.n = n;
            out.push_back(s);
          }
        }
      }
    }
    return out;
  }
};

inline double parse_xi(const nlohmann::json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "exact" || s == "EXACT") return 0.0;
    double xi = 0.0;
    try {
      xi = std::stod(s);
    } catch (const std::exception&) {
      throw InvalidArgument("xi must be 'exact' or a number, got '" + s + "'");
    }
    if (!(xi >= 0.0)) throw InvalidArgument("xi must be >= 0");
    return xi;
  }
  const double xi = v.get<double>();
  if (!(xi >= 0.0)) throw InvalidArgument("xi must be >= 0");
  return xi;
}

inline double parse_xi(const std::string& s) { return parse_xi(nlohmann::json(s)); }
inline double parse_xi(const char* s) { return parse_xi(std::string(s)); }

namespace detail {
template <class T, class F>
std::vector<T> scalar_or_array(const nlohmann::json& v, F&& convert) {
  std::vector<T> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(convert(e));
  } else {
    out.push_back(convert(v));
  }
  if (out.empty()) throw InvalidArgument("config: empty grid axis");
  return out;
}
}  // namespace detail

inline SweepConfig parse_sweep_config(const nlohmann::json& j) {
  SweepConfig cfg;
  auto& b = cfg.base;
  if (auto it = j.find("sweep"); it != j.end()) {
    const auto& s = *it;
    if (s.contains("n")) cfg.ns = detail::scalar_or_array<std::size_t>(s["n"], [](const auto& e) { return e.template get<std::size_t>(); });
    if (s.contains("algo")) cfg.algos = detail::scalar_or_array<Algorithm>(s["algo"], [](const auto& e) { return parse_algorithm(e.template get<std::string>()); });
    if (s.contains("backend")) cfg.backends = detail::scalar_or_array<Backend>(s["backend"], [](const auto& e) { return parse_backend(e.template get<std::string>()); });
    if (s.contains("xi")) cfg.xis = detail::scalar_or_array<double>(s["xi"], [](const auto& e) { return parse_xi(e); });
    b.m_ratio = s.value("m_ratio", b.m_ratio);
    b.k_ratio = s.value("k_ratio", b.k_ratio);
    if (s.contains("m") && !s["m"].is_null()) b.m_override = s["m"].get<std::size_t>();
    if (s.contains("k") && !s["k"].is_null()) b.k_override = s["k"].get<std::size_t>();
    b.trials = s.value("trials", b.trials);
    b.master_seed = s.value("seed", b.master_seed);
  }
  if (auto it = j.find("signal"); it != j.end()) {
    const auto& s = *it;
    const auto model = s.value("model", std::string("fixed_k"));
    if (model == "fixed_k") {
      b.signal = SignalModel::kFixedK;
    } else if (model == "bernoulli") {
      b.signal = SignalModel::kBernoulli;
    } else {
      throw InvalidArgument("config: unknown signal model '" + model + "'");
    }
    b.sigma_on = s.value("sigma_on", b.sigma_on);
    b.sigma_eta = s.value("sigma_eta", b.sigma_eta);
    const auto basis = s.value("basis", std::string("identity"));
    if (basis == "identity") {
      b.basis = SparsityBasis::kIdentity;
    } else if (basis == "dct") {
      b.basis = SparsityBasis::kDct;
    } else {
      throw InvalidArgument("config: unknown basis '" + basis + "'");
    }
  }
  if (auto it = j.find("operator"); it != j.end()) {
    const auto& s = *it;
    b.transform = parse_transform(s.value("transform", std::string("dct")));
    b.scaled = s.value("scaled", false);
    if (s.contains("n")) cfg.ns = {s["n"].get<std::size_t>()};
    if (s.contains("m")) b.m_override = s["m"].get<std::size_t>();
    if (s.contains("seed")) b.master_seed = s["seed"].get<std::uint64_t>();
  }
  if (auto it = j.find("solver"); it != j.end()) {
    const auto& s = *it;
    b.warm_start = s.value("warm_start", b.warm_start);
    b.max_cg_iters = s.value("max_cg_iters", b.max_cg_iters);
    b.max_outer_iters = s.value("max_outer_iters", b.max_outer_iters);
    if (s.contains("dense_budget_mb")) b.dense_budget_bytes = s["dense_budget_mb"].get<std::size_t>() << 20;
  }
  for (const auto& spec : cfg.expand()) spec.validate();
  return cfg;
}

inline SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  return parse_sweep_config(j);
}

}  // namespace csp
