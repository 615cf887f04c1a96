#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "cspursuit.hpp"
#include "generators.hpp"

namespace {

csp::CgConfig with_xi(double xi) {
  csp::CgConfig cfg;
  cfg.xi = xi;
  return cfg;
}

std::vector<double> restrict_to(std::span<const double> x, const csp::SupportSet& s) {
  std::vector<double> out;
  for (std::size_t j : s) out.push_back(x[j]);
  return out;
}

// Full-rank instance from the acceptance family: M = 32, N = 64, |S| in 1..8.
struct Instance {
  csp::DenseMatrix a;
  csp::SupportSet s;
  std::vector<double> y;
};

Instance random_instance(csp::Rng& rng, std::size_t m = 32, std::size_t n = 64) {
  Instance inst{gen::matrix(m, n, rng), csp::SupportSet(n), {}};
  inst.s = gen::support(n, gen::uniform(1, 8, rng), rng);
  inst.y = gen::gaussian(m, rng);
  return inst;
}

TEST(Cg, OrthonormalColumnsSolveImmediately) {
  const auto a = csp::dense_operator(csp::DenseMatrix::identity(4));
  const csp::SupportSet s(4, {0, 2});
  const auto rep = csp::cg_solve(a, s, std::vector<double>{3, 1, 4, 1}, csp::CgConfig{});
  EXPECT_LE(rep.iterations, 2u);
  const std::vector<double> want{3, 0, 4, 0};
  EXPECT_LE(gen::max_abs_diff(rep.solution, want), 1e-14);
  EXPECT_EQ(rep.termination, csp::CgTermination::kThreshold);
}

// Least-squares reference from numpy.linalg.lstsq on columns {1, 4, 5}.
TEST(Cg, FixedSixByEightInstanceMatchesFrozenLeastSquares) {
  const csp::DenseMatrix a(6, 8,
                           {1, 2, 0, -1, 3, 1, 0, 2,  0, 1, 1, 2,  -1, 0, 3, 1,  2,  -1, 1, 0, 1, 2, -2, 0,
                            1, 0, -3, 1, 0, 1, 1, -1, -1, 1, 2, 0, 2, -1, 0, 1, 0, 3,  1, 1, 1, 2, 1,  0});
  const std::vector<double> y{1, -2, 0.5, 3, 0, 1.5};
  const csp::SupportSet s(8, {1, 4, 5});
  const auto rep = csp::cg_solve(csp::dense_operator(a), s, y, with_xi(1e-12));
  const std::vector<double> want{-0.12317460317460315, 0.30539682539682544, 0.6444444444444445};
  EXPECT_LE(gen::relative_error(restrict_to(rep.solution, s), want), 1e-8);
  EXPECT_LE(rep.iterations, 3u);
}

TEST(Cg, TwoDistinctEigenvaluesConvergeInTwoIterations) {
  csp::Rng rng(201);
  // orthonormal columns scaled by 1 (block one) and 3 (block two)
  const std::size_t m = 12;
  const std::size_t k = 6;
  auto q = gen::matrix(m, k, rng);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t p = 0; p < j; ++p) {
      double d = 0.0;
      for (std::size_t i = 0; i < m; ++i) d += q(i, j) * q(i, p);
      for (std::size_t i = 0; i < m; ++i) q(i, j) -= d * q(i, p);
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < m; ++i) nrm += q(i, j) * q(i, j);
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < m; ++i) q(i, j) /= nrm;
  }
  for (std::size_t j = 3; j < k; ++j) {
    for (std::size_t i = 0; i < m; ++i) q(i, j) *= 3.0;
  }
  const auto rep = csp::cg_solve(csp::dense_operator(q), csp::SupportSet::all(k), gen::gaussian(m, rng), with_xi(1e-12));
  EXPECT_LE(rep.iterations, 2u);
  EXPECT_EQ(rep.termination, csp::CgTermination::kThreshold);
}

TEST(ReducedCg, IdentityColumnsTakeOneIteration) {
  const auto rep = csp::reduced_cg_solve(csp::DenseMatrix(4, 2, {1, 0, 0, 1, 0, 0, 0, 0}),
                                         std::vector<double>{7, 9, 0, 0}, csp::CgConfig{});
  EXPECT_EQ(rep.iterations, 1u);
  EXPECT_NEAR(rep.solution[0], 7.0, 1e-14);
  EXPECT_NEAR(rep.solution[1], 9.0, 1e-14);
}

TEST(ReducedCg, ThreeDistinctEigenvaluesTakeExactlyThreeIterations) {
  const csp::DenseMatrix a(3, 3, {1, 0, 0, 0, std::sqrt(2.0), 0, 0, 0, std::sqrt(3.0)});
  const auto rep = csp::reduced_cg_solve(a, std::vector<double>{1, 1, 1}, with_xi(1e-14));
  EXPECT_EQ(rep.iterations, 3u);
  EXPECT_NEAR(rep.solution[0], 1.0, 1e-12);
  EXPECT_NEAR(rep.solution[1], 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(rep.solution[2], 1.0 / std::sqrt(3.0), 1e-12);
}

TEST(ReducedCg, RejectsRankDeficientColumns) {
  const csp::DenseMatrix a(3, 2, {1, 1, 2, 2, 3, 3});
  EXPECT_THROW(csp::reduced_cg_solve(a, std::vector<double>{1, 2, 3}, csp::CgConfig{}), csp::RankDeficientError);
}

TEST(ReducedCg, TraceMatchesMaskedSolveOnEmbeddedProblem) {
  csp::Rng rng(202);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a_s = gen::matrix(8, 3, rng);
    const auto y = gen::gaussian(8, rng);
    // embed the three columns at positions 2, 5, 6 of a zero-padded 8 x 9 matrix
    const std::vector<std::size_t> where{2, 5, 6};
    csp::DenseMatrix full(8, 9);
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t c = 0; c < 3; ++c) full(i, where[c]) = a_s(i, c);
    }
    const csp::SupportSet s(9, where);
    const auto masked = csp::cg_solve(csp::dense_operator(full), s, y, with_xi(1e-13));
    const auto reduced = csp::reduced_cg_solve(a_s, y, with_xi(1e-13));
    ASSERT_EQ(masked.iterations, reduced.iterations);
    for (std::size_t j = 0; j < masked.iterations; ++j) {
      EXPECT_NEAR(masked.alphas[j], reduced.alphas[j], 1e-12 * std::abs(reduced.alphas[j]));
      EXPECT_NEAR(masked.betas[j], reduced.betas[j], 1e-12 * std::max(1.0, std::abs(reduced.betas[j])));
    }
    for (std::size_t j = 0; j <= masked.iterations; ++j) {
      EXPECT_NEAR(masked.residual_history[j], reduced.residual_history[j], 1e-12 * reduced.residual_history[0]);
    }
  }
}

// Iterate-by-iterate agreement of the full-length masked state with the
// reduced state, and exact zeros off the support.
TEST(CgProperties, MaskedStateEqualsReducedState) {
  csp::Rng rng(203);
  for (int rep = 0; rep < 50; ++rep) {
    const auto inst = random_instance(rng);
    std::vector<std::vector<double>> masked_sol, masked_res, masked_dir;
    std::vector<std::vector<double>> red_sol, red_res, red_dir;
    bool off_support_zero = true;
    const auto masked = csp::cg_solve(csp::dense_operator(inst.a), inst.s, inst.y, with_xi(1e-13), {},
                                      [&](const csp::CgIterate& it) {
                                        masked_sol.push_back(restrict_to(it.solution, inst.s));
                                        masked_res.push_back(restrict_to(it.residual, inst.s));
                                        masked_dir.push_back(restrict_to(it.direction, inst.s));
                                        for (std::size_t j = 0; j < inst.s.n(); ++j) {
                                          if (inst.s.contains(j)) continue;
                                          off_support_zero = off_support_zero && it.solution[j] == 0.0 &&
                                                             it.residual[j] == 0.0 && it.direction[j] == 0.0;
                                        }
                                      });
    const auto reduced =
        csp::reduced_cg_solve(inst.a.columns(inst.s.indices()), inst.y, with_xi(1e-13), [&](const csp::CgIterate& it) {
          red_sol.emplace_back(it.solution.begin(), it.solution.end());
          red_res.emplace_back(it.residual.begin(), it.residual.end());
          red_dir.emplace_back(it.direction.begin(), it.direction.end());
        });
    EXPECT_TRUE(off_support_zero);
    ASSERT_EQ(masked_sol.size(), red_sol.size());
    for (std::size_t j = 0; j < masked_sol.size(); ++j) {
      const double scale = 1.0 + csp::norm2(red_dir[0]);
      EXPECT_LE(gen::max_abs_diff(masked_sol[j], red_sol[j]), 1e-10 * (1.0 + csp::norm2(red_sol[j])));
      EXPECT_LE(gen::max_abs_diff(masked_res[j], red_res[j]), 1e-10 * scale);
      EXPECT_LE(gen::max_abs_diff(masked_dir[j], red_dir[j]), 1e-10 * scale);
    }
    for (std::size_t j = 0; j < masked.solution.size(); ++j) {
      if (!inst.s.contains(j)) EXPECT_EQ(masked.solution[j], 0.0);
    }
  }
}

TEST(CgProperties, IterationBoundAtTightThreshold) {
  csp::Rng rng(204);
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = random_instance(rng);
    const auto r = csp::cg_solve(csp::dense_operator(inst.a), inst.s, inst.y, with_xi(1e-13));
    EXPECT_LE(r.iterations, inst.s.size() + 2) << "trial " << rep;
  }
}

TEST(CgProperties, PursuitObjectiveIsNonIncreasing) {
  csp::Rng rng(205);
  for (int rep = 0; rep < 50; ++rep) {
    const auto inst = random_instance(rng);
    const auto a = csp::dense_operator(inst.a);
    std::vector<double> objective{csp::norm2(inst.y)};
    csp::cg_solve(a, inst.s, inst.y, with_xi(1e-13), {}, [&](const csp::CgIterate& it) {
      objective.push_back(csp::norm2(csp::subtract(inst.y, a.forward(it.solution))));
    });
    for (std::size_t j = 1; j < objective.size(); ++j) EXPECT_LE(objective[j], objective[j - 1] + 1e-12);
  }
}

TEST(CgProperties, ExactSolveMatchesQrUpTo256Columns) {
  csp::Rng rng(206);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = gen::uniform(16, 256, rng);
    const std::size_t m = gen::uniform(12, 48, rng);
    const auto a = gen::matrix(m, n, rng);
    const auto s = gen::support(n, gen::uniform(1, 8, rng), rng);
    const auto y = gen::gaussian(m, rng);
    const auto cg = csp::cg_solve(csp::dense_operator(a), s, y, with_xi(1e-13));
    const auto qr = csp::least_squares_qr(a.columns(s.indices()), y);
    EXPECT_LE(gen::relative_error(restrict_to(cg.solution, s), qr), 1e-8);
  }
}

TEST(CgProperties, ConvergesBelowThresholdOnSrmOperators) {
  csp::Rng rng(207);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 256;
    const auto a = csp::srm_operator({n, 64, rng(), csp::Transform::kDct, false, false});
    const auto s = gen::support(n, gen::uniform(1, 16, rng), rng);
    const auto y = gen::gaussian(64, rng);
    const double xi = rep % 2 ? 1e-10 : 1e-5;
    csp::CgConfig cfg = with_xi(xi);
    cfg.max_iters = 200;
    const auto r = csp::cg_solve(a, s, y, cfg);
    EXPECT_EQ(r.termination, csp::CgTermination::kThreshold);
    EXPECT_LE(r.residual_history.back(), xi);
    // normal-equation residual recomputed independently
    const auto fit = a.forward(r.solution);
    const auto back = a.adjoint(csp::subtract(y, fit));
    EXPECT_LE(csp::norm2(restrict_to(back, s)), xi * (1 + 1e-6) + 1e-12);
    EXPECT_LE(gen::max_abs_diff(fit, r.fitted), 1e-10);
  }
}

TEST(Cg, ExactModeUsesRelativeThresholdAndCap) {
  csp::CgConfig cfg;
  EXPECT_TRUE(cfg.exact());
  EXPECT_DOUBLE_EQ(cfg.threshold(2.0), 2e-13);
  EXPECT_EQ(cfg.cap(5), 7u);
  cfg.max_iters = 3;
  EXPECT_EQ(cfg.cap(5), 3u);
  cfg.xi = 1e-5;
  EXPECT_DOUBLE_EQ(cfg.threshold(100.0), 1e-5);
}

TEST(Cg, IterationCapIsReported) {
  csp::Rng rng(208);
  const auto inst = random_instance(rng);
  auto s = gen::support(64, 8, rng);
  csp::CgConfig cfg;
  cfg.max_iters = 1;
  const auto r = csp::cg_solve(csp::dense_operator(inst.a), s, inst.y, cfg);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.termination, csp::CgTermination::kIterationCap);
  EXPECT_EQ(r.residual_history.size(), 2u);
}

TEST(Cg, WarmStartAtSolutionNeedsNoIterations) {
  csp::Rng rng(209);
  const auto inst = random_instance(rng);
  const auto a = csp::dense_operator(inst.a);
  const auto cold = csp::cg_solve(a, inst.s, inst.y, with_xi(1e-8));
  const auto warm = csp::cg_solve(a, inst.s, inst.y, with_xi(1e-8), cold.solution);
  EXPECT_EQ(warm.iterations, 0u);
  EXPECT_LE(gen::max_abs_diff(warm.solution, cold.solution), 1e-15);
}

TEST(Cg, HintsReproduceTheUnhintedSolve) {
  csp::Rng rng(210);
  for (int rep = 0; rep < 30; ++rep) {
    const auto inst = random_instance(rng);
    const auto a = csp::dense_operator(inst.a);
    const auto aty = a.adjoint(inst.y);
    const auto plain = csp::cg_solve(a, inst.s, inst.y, with_xi(1e-10));
    const auto hinted = csp::cg_solve(a, inst.s, inst.y, with_xi(1e-10), {}, {}, csp::CgHint{aty, {}, {}});
    EXPECT_EQ(hinted.iterations, plain.iterations);
    EXPECT_LE(gen::max_abs_diff(hinted.solution, plain.solution), 1e-12);

    // start from a random point on the support, with its fit and gradient
    std::vector<double> x0(inst.s.n(), 0.0);
    for (std::size_t j : inst.s) x0[j] = std::normal_distribution<double>(0.0, 1.0)(rng);
    const auto fit = a.forward(x0);
    const auto grad = a.adjoint(csp::subtract(inst.y, fit));
    const auto warm = csp::cg_solve(a, inst.s, inst.y, with_xi(1e-10), x0);
    const auto warm_hinted = csp::cg_solve(a, inst.s, inst.y, with_xi(1e-10), x0, {}, csp::CgHint{aty, fit, grad});
    EXPECT_EQ(warm_hinted.iterations, warm.iterations);
    EXPECT_LE(gen::max_abs_diff(warm_hinted.solution, warm.solution), 1e-9);
    EXPECT_LE(gen::max_abs_diff(warm_hinted.fitted, warm.fitted), 1e-9);
  }
}

// forward is the identity but the "adjoint" negates: H = -I is not
// semidefinite, so the first curvature check fails.
class BrokenAdjoint final : public csp::OperatorImpl {
 public:
  explicit BrokenAdjoint(std::size_t n) : OperatorImpl(n, n) {}
  void forward(std::span<const double> x, std::span<double> y) const override {
    std::copy(x.begin(), x.end(), y.begin());
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = -y[i];
  }
  std::size_t workspace_bytes() const override { return 0; }
  std::string name() const override { return "broken"; }
};

TEST(Cg, NonPositiveCurvatureIsStagnation) {
  const csp::LinearOperator a(std::make_shared<BrokenAdjoint>(4));
  const auto r = csp::cg_solve(a, csp::SupportSet::all(4), std::vector<double>{1, 2, 3, 4}, csp::CgConfig{});
  EXPECT_EQ(r.termination, csp::CgTermination::kStagnation);
  EXPECT_EQ(r.iterations, 0u);
}

TEST(Cg, RejectsBadInputs) {
  const auto a = csp::dense_operator(csp::DenseMatrix::identity(3));
  const std::vector<double> y{1, 2, 3};
  EXPECT_THROW(csp::cg_solve(a, csp::SupportSet(3), y, csp::CgConfig{}), csp::InvalidArgument);
  EXPECT_THROW(csp::cg_solve(a, csp::SupportSet(3, {0}), std::vector<double>{1, std::nan(""), 3}, csp::CgConfig{}),
               csp::InvalidArgument);
  EXPECT_THROW(csp::cg_solve(a, csp::SupportSet(3, {0}), std::vector<double>{1, 2}, csp::CgConfig{}),
               csp::DimensionError);
  EXPECT_THROW(csp::cg_solve(a, csp::SupportSet(3, {0}), y, with_xi(-1.0)), csp::InvalidArgument);
}

}  // namespace
