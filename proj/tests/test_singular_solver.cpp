#include <gtest/gtest.h>

#include <cmath>

#include "pulse_optics/singular_solver.hpp"

using namespace pulse_optics;

namespace {

BoundaryPulse pulse(double amp, double rise = 0.1) {
  BoundaryPulse g;
  g.amplitude = Vec::Constant(2, amp);
  g.rise = rise;
  return g;
}

double oracle_error(const SystemSpec& s, const BoundaryPulse& G, double eps, const FineGrid& g) {
  const FineSolution num = solve_exact(s, G, eps, g);
  const FineSolution ref =
      sample_solution(g, eps, s.N, [&](double t, double x) { return linear_oracle(s, G, eps, t, x, g.beta0); });
  return sup_difference(num, ref);
}

}  // namespace

TEST(FiniteDifference, WeightsExactOnPolynomials) {
  for (const std::vector<int>& offs : {std::vector<int>{0, 1, 2}, {-1, 0, 1}, {-2, -1, 0, 1}, {-3, -2, -1, 0, 1, 2},
                                       {-1, 0, 1, 2}, {-2, -1, 0, 1, 2, 3}, {0, 1, 2, 3, 4}}) {
    const std::vector<double> w = derivative_weights(offs);
    for (size_t deg = 0; deg < offs.size(); ++deg) {
      double d = 0.0;
      for (size_t a = 0; a < offs.size(); ++a) d += w[a] * std::pow(double(offs[a]), double(deg));
      EXPECT_NEAR(d, deg == 1 ? 1.0 : 0.0, 1e-12) << "degree " << deg;
    }
  }
}

TEST(ExactSolver, ZeroDataGivesZero) {
  const SystemSpec s = ex1_coupled_system();
  const FineGrid g = fine_grid(s, 0.1, 0.4, 1.0, 12, 0.8, 4);
  const FineSolution sol = solve_exact(s, pulse(0.0), 0.1, g);
  for (const auto& U : sol.u) EXPECT_EQ(U.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.bc_residual_sup, 0.0);
}

TEST(ExactSolver, LinearOracleSecondOrder) {
  const SystemSpec s = ex1_system(false);
  const double eps = 0.1;
  const FineGrid g1 = fine_grid(s, eps, 0.6, 1.3, 12, 0.8, 4);
  const FineGrid g2 = refined(g1);
  const double e1 = oracle_error(s, pulse(0.5), eps, g1);
  const double e2 = oracle_error(s, pulse(0.5), eps, g2);
  EXPECT_LT(e1, 0.05);
  EXPECT_GT(std::log2(e1 / e2), 1.9) << e1 << " " << e2;
}

TEST(ExactSolver, LinearOracleRejectsNonlinearSpec) {
  EXPECT_THROW(linear_oracle(ex1_system(true), pulse(0.1), 0.1, 0.5, 0.1), Error);
}

TEST(ExactSolver, SelfConvergenceOrder) {
  const SystemSpec s = ex1_coupled_system();
  const double eps = 0.1;
  const FineGrid g1 = fine_grid(s, eps, 0.5, 1.1, 12, 0.8, 4);
  const FineGrid g2 = refined(g1), g3 = refined(g2);
  const FineSolution a = solve_exact(s, pulse(0.2), eps, g1);
  const FineSolution b = solve_exact(s, pulse(0.2), eps, g2);
  const FineSolution c = solve_exact(s, pulse(0.2), eps, g3);
  const double d12 = sup_difference_coarse(a, b), d23 = sup_difference_coarse(b, c);
  EXPECT_GT(std::log2(d12 / d23), 1.7) << d12 << " " << d23;
}

TEST(ExactSolver, NonlinearBoundaryResidual) {
  SystemSpec s = ex1_coupled_system();
  s.dB.assign(3, Mat::Zero(2, 3));
  s.dB[0](0, 2) = 0.5;
  s.dB[2](1, 0) = -0.3;
  const BoundaryPulse G = pulse(0.3);
  const FineGrid g = fine_grid(s, 0.1, 0.5, 1.1, 16, 0.8, 4);
  const FineSolution sol = solve_exact(s, G, 0.1, g);
  const ResidualNorms r = residual_norms(sol, s, G);
  EXPECT_LE(r.bc_residual_sup, 1e-10);
  EXPECT_GT(sol.newton_max_iterations, 1);
  EXPECT_LE(sol.newton_max_iterations, 20);
}

TEST(ExactSolver, InteriorResidualShrinksWithGrid) {
  const SystemSpec s = ex1_coupled_system();
  const BoundaryPulse G = pulse(0.2);
  const FineGrid g1 = fine_grid(s, 0.1, 0.5, 1.1, 12, 0.8, 4);
  const double r1 = residual_norms(solve_exact(s, G, 0.1, g1), s, G).pde_residual_sup;
  const double r2 = residual_norms(solve_exact(s, G, 0.1, refined(g1)), s, G).pde_residual_sup;
  EXPECT_LT(r2, 0.4 * r1) << r1 << " " << r2;
}

TEST(ExactSolver, CausalityBeforeOnset) {
  const SystemSpec s = ex1_coupled_system();
  BoundaryPulse G = pulse(0.2);
  G.onset = 0.25;
  const FineGrid g = fine_grid(s, 0.1, 0.5, 1.0, 12, 0.8, 4);
  const FineSolution sol = solve_exact(s, G, 0.1, g);
  for (size_t k = 0; k < sol.times.size(); ++k) {
    if (sol.times[k] <= 0.25)
      EXPECT_EQ(sol.u[k].cwiseAbs().maxCoeff(), 0.0);
    else
      EXPECT_GT(sol.u[k].cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(ExactSolver, Deterministic) {
  const SystemSpec s = ex1_coupled_system();
  const FineGrid g = fine_grid(s, 0.1, 0.3, 0.8, 12, 0.8, 4);
  const FineSolution a = solve_exact(s, pulse(0.2), 0.1, g);
  const FineSolution b = solve_exact(s, pulse(0.2), 0.1, g);
  EXPECT_EQ(sup_difference(a, b), 0.0);
}

TEST(ExactSolver, ValidityBallEnforced) {
  const SystemSpec s = ex1_coupled_system();
  const FineGrid g = fine_grid(s, 0.1, 0.6, 1.3, 12, 0.8, 4);
  ExactOptions o;
  o.validity = 0.01;
  try {
    solve_exact(s, pulse(0.5), 0.1, g, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidityBall);
  }
}

TEST(ExactSolver, SaveLoadRoundTrip) {
  const SystemSpec s = ex1_coupled_system();
  const FineGrid g = fine_grid(s, 0.1, 0.2, 0.6, 12, 0.8, 4);
  const FineSolution a = solve_exact(s, pulse(0.2), 0.1, g);
  const std::string path = ::testing::TempDir() + "fine.bin";
  save_fine_solution(path, a);
  const FineSolution b = load_fine_solution(path);
  EXPECT_EQ(sup_difference(a, b), 0.0);
  EXPECT_EQ(b.times, a.times);
}

TEST(PicardSingular, FixedPointIsExactScheme) {
  const SystemSpec s = ex1_coupled_system();
  const FineGrid g = fine_grid(s, 0.1, 0.5, 1.1, 12, 0.8, 4);
  const double tol = 1e-11;
  const FineSolution pic = picard_solve_singular(s, pulse(0.2), 0.1, g, tol);
  const FineSolution ex = solve_exact(s, pulse(0.2), 0.1, g);
  EXPECT_LE(sup_difference(pic, ex), 5 * tol);
  ASSERT_GE(pic.ratios.size(), 2u);
  for (double r : pic.ratios) EXPECT_LT(r, 0.5);
}

TEST(PicardSingular, ZeroDataConvergesAtOnce) {
  const SystemSpec s = ex1_coupled_system();
  const FineGrid g = fine_grid(s, 0.1, 0.2, 0.6, 12, 0.8, 4);
  const FineSolution pic = picard_solve_singular(s, pulse(0.0), 0.1, g);
  EXPECT_EQ(pic.iterations, 1);
  EXPECT_EQ(pic.diffs.front(), 0.0);
}

TEST(PicardSingular, RatiosUniformInEps) {
  const SystemSpec s = ex1_coupled_system();
  // the pulse centre sits at t = 5 eps, so the window must contain it for every eps
  auto max_ratio = [&](double eps) {
    const FineGrid g = fine_grid(s, eps, 1.0, 2.1, 8, 0.8, 4);
    const FineSolution pic = picard_solve_singular(s, pulse(0.2), eps, g, 1e-10);
    double m = 0.0;
    for (double r : pic.ratios) m = std::max(m, r);
    return m;
  };
  const double r10 = max_ratio(0.1), r20 = max_ratio(0.05);
  RecordProperty("ratio_eps_10", std::to_string(r10));
  RecordProperty("ratio_eps_20", std::to_string(r20));
  EXPECT_LT(std::max(r10, r20), 0.5);
  EXPECT_LT(std::max(r10, r20) / std::min(r10, r20), 2.0) << r10 << " " << r20;
}
