// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "mmsebcd/jointsolver.hpp"
#include "oracle/oracle.hpp"
#include "support.hpp"

using namespace mmsebcd;

namespace {

JointProblem random_problem(Philox4x32& rng, int max_L = 2, int max_dim = 3) {
  const SystemModel m = support::random_model(rng, {max_L, max_dim});
  const Receiver rx(support::random_complex(static_cast<Eigen::Index>(m.M()),
                                            static_cast<Eigen::Index>(m.K()), rng));
  return make_joint_problem(m, assemble_vectorized(m, rx), rx);
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

TEST(JointSolver, ScalarBoundaryClip) {
  JointProblem prob;
  prob.H_q = support::scalar(1.0);
  prob.lin = Vec::Constant(1, 2.0);
  prob.constraints.push_back({0, support::scalar(1.0), 1.0});
  prob.c = 0.25;
  const JointSolution sol = solve_joint(prob, feasible_start(prob));
  EXPECT_NEAR(sol.f(0).real(), 1.0, 1e-6);
  EXPECT_NEAR(sol.objective, -3.0 + 0.25, 1e-7);
  EXPECT_LT(sol.gap, 1e-8);
}

TEST(JointSolver, InteriorOptimum) {
  Philox4x32 rng(31, 1);
  JointProblem prob;
  prob.H_q = support::random_pd(4, rng, 0.5);
  const Vec target = 0.1 * support::random_vec(4, rng);
  prob.lin = prob.H_q * target;
  prob.constraints.push_back({0, Mat::Identity(2, 2), 1.0});
  prob.constraints.push_back({2, Mat::Identity(2, 2), 1.0});
  const JointSolution sol = solve_joint(prob, feasible_start(prob));
  // The barrier certifies the objective; the point follows at sqrt accuracy.
  EXPECT_NEAR(sol.objective, prob.objective(target), 1e-8);
  EXPECT_LT((sol.f - target).norm(), 1e-4);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LT(prob.constraint_value(i, sol.f), 0.99);
}

TEST(JointSolver, MatchesInnerDescentAndProjectedGradient) {
  Philox4x32 rng(31, 2);
  for (int t = 0; t < 15; ++t) {
    const JointProblem prob = random_problem(rng);
    const JointSolution sol = solve_joint(prob, feasible_start(prob));
    const auto cd = oracle::inner_descent_joint(prob, 1e-14);
    const auto pg = oracle::projected_gradient_joint(prob);
    const double c_ref = cd.objective;
    EXPECT_LT(rel_gap(sol.objective, c_ref), 1e-6) << "instance " << t;
    EXPECT_LT(rel_gap(pg.objective, c_ref), 1e-5) << "instance " << t;
  }
}

TEST(JointSolver, FeasibleAndMonotoneCenters) {
  Philox4x32 rng(31, 3);
  for (int t = 0; t < 20; ++t) {
    const JointProblem prob = random_problem(rng, 3, 3);
    const JointSolution sol = solve_joint(prob, feasible_start(prob));
    for (std::size_t i = 0; i < prob.constraints.size(); ++i)
      EXPECT_LE(prob.constraint_value(i, sol.f), prob.constraints[i].P * (1 + 1e-9));
    for (std::size_t k = 1; k < sol.center_objectives.size(); ++k)
      EXPECT_LE(sol.center_objectives[k], sol.center_objectives[k - 1] + 1e-9);
    EXPECT_LT(sol.gap, 1e-8);
  }
}

TEST(FeasibleStart, DefaultIsOrigin) {
  Philox4x32 rng(31, 4);
  const JointProblem prob = random_problem(rng);
  const Vec f = feasible_start(prob);
  EXPECT_EQ(f.norm(), 0.0);
  for (std::size_t i = 0; i < prob.constraints.size(); ++i)
    EXPECT_DOUBLE_EQ(prob.constraints[i].P - prob.constraint_value(i, f), prob.constraints[i].P);
}

TEST(FeasibleStart, WarmStartOnBoundaryIsPulledInside) {
  Philox4x32 rng(31, 5);
  const JointProblem prob = random_problem(rng);
  Vec f = support::random_vec(prob.size(), rng);
  double worst = 0.0;
  for (std::size_t i = 0; i < prob.constraints.size(); ++i)
    worst = std::max(worst, prob.constraint_value(i, f) / prob.constraints[i].P);
  f /= std::sqrt(worst);  // now the tightest constraint is active
  EXPECT_FALSE(prob.strictly_feasible(f));
  EXPECT_TRUE(prob.strictly_feasible(feasible_start(prob, f)));
  EXPECT_TRUE(prob.strictly_feasible(0.99 * f));
  const Vec inside = 0.5 * f;
  EXPECT_EQ(feasible_start(prob, inside), inside);
}

TEST(JointSolver, WarmStartReachesSameOptimum) {
  Philox4x32 rng(31, 6);
  const JointProblem prob = random_problem(rng);
  const JointSolution cold = solve_joint(prob, feasible_start(prob));
  const JointSolution warm = solve_joint(prob, feasible_start(prob, cold.f));
  EXPECT_LT(rel_gap(warm.objective, cold.objective), 1e-8);
}

TEST(JointSolver, ContractErrors) {
  Philox4x32 rng(31, 7);
  const JointProblem prob = random_problem(rng);
  EXPECT_THROW(solve_joint(prob, Vec::Zero(prob.size() + 1)), ContractViolation);
  EXPECT_THROW(solve_joint(prob, 1e6 * Vec::Ones(prob.size())), ContractViolation);
  BarrierSettings bad;
  bad.shrink = 1.0;
  EXPECT_THROW(solve_joint(prob, feasible_start(prob), bad), ContractViolation);
}

}  // namespace
