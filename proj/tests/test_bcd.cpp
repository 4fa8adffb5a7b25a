// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "mmsebcd/bcd.hpp"
#include "mmsebcd/experiments.hpp"
#include "oracle/oracle.hpp"
#include "support.hpp"

using namespace mmsebcd;

namespace {

// Optimum of the nonconvexity witness found by grid search over
// [-2, 2]^2 at resolution 1e-3 (GridOracle.WitnessGoldenValue recomputes it).
constexpr double kWitnessMse = 0.5;

const char* const kAllVariants[] = {"two-bcd",  "layered",         "layered:2",   "bfg",
                                    "bfg-prox", "bfg-approx",      "bfg-approx-prox",
                                    "gauss-seidel"};

std::vector<BlockId> blocks(std::initializer_list<const char*> names) {
  std::vector<BlockId> out;
  for (const char* n : names) out.push_back(BlockId::parse(n));
  return out;
}

bool is_monotone_variant(const std::string& name) {
  return name.find("approx") == std::string::npos;
}

TEST(Schedule, FgPatternForThreeSensors) {
  const UpdateSchedule s(blocks({"F1", "G", "F2", "G", "F3", "G"}), 3);
  EXPECT_EQ(s.period(), 6u);
  EXPECT_EQ(UpdateSchedule::fg(3).pattern(), s.pattern());
}

TEST(Schedule, MissingSensorIsNamed) {
  try {
    validate_schedule(blocks({"F1", "G", "F1", "G"}), 2);
    FAIL() << "expected ScheduleError";
  } catch (const ScheduleError& e) {
    EXPECT_NE(std::string(e.what()).find("F2"), std::string::npos) << e.what();
  }
}

TEST(Schedule, GaussSeidelOrder) {
  const UpdateSchedule s(blocks({"F1", "F2", "F3", "G"}), 3);
  EXPECT_EQ(s.period(), 4u);
  EXPECT_EQ(UpdateSchedule::gauss_seidel(3).pattern(), s.pattern());
}

TEST(Schedule, RequiresReceiverAndKnownBlocks) {
  EXPECT_THROW(validate_schedule(blocks({"F1", "F2"}), 2), ScheduleError);
  EXPECT_THROW(validate_schedule(blocks({"F1", "F4", "G"}), 1), ScheduleError);
  EXPECT_THROW(validate_schedule({}, 1), ScheduleError);
  EXPECT_THROW(BlockId::parse("X1"), ScheduleError);
  EXPECT_THROW(BlockId::parse("F0"), ScheduleError);
  EXPECT_EQ(UpdateSchedule::parse("F2,G,F1,G", 2).period(), 4u);
}

TEST(SolverConfig, RejectsBadParameters) {
  SolverConfig c;
  EssCyclic ec;
  ec.rule.kind = UpdateRule::Kind::proximal;
  ec.rule.kappa = 0.0;
  c.algorithm = ec;
  EXPECT_THROW(c.validate(2), ContractViolation);
  ec.rule.kind = UpdateRule::Kind::approx_then_proximal;
  ec.rule.kappa = 1.0;
  ec.rule.switch_iter = 0;
  c.algorithm = ec;
  EXPECT_THROW(c.validate(2), ContractViolation);
  c = SolverConfig{};
  c.stopping.rel_tol = 0.0;
  EXPECT_THROW(c.validate(2), ContractViolation);
  c = SolverConfig{};
  c.algorithm = Layered{0};
  EXPECT_THROW(c.validate(2), ContractViolation);
}

TEST(Init, PowerFractionAndDeterminism) {
  Philox4x32 rng(41, 1);
  const SystemModel m = support::random_model(rng);
  const auto [bf, rx] = init_feasible(m, 99);
  for (std::size_t i = 0; i < m.L(); ++i)
    EXPECT_NEAR(transmit_power(m, bf, i), 0.9 * m.sensor(i).power_budget(), 1e-9);
  const auto [bf2, rx2] = init_feasible(m, 99);
  for (std::size_t i = 0; i < m.L(); ++i) EXPECT_EQ(bf.mat(i), bf2.mat(i));
  EXPECT_EQ(rx.mat(), rx2.mat());
  EXPECT_LT((rx.mat() - wiener_receiver(m, bf).mat()).norm(), 1e-15);
}

TEST(Init, DistinctSeedsGiveDistinctStarts) {
  ExperimentConfig cfg = paper_preset();
  const SystemModel m = build_model(cfg, 6.0, 0);
  std::set<double> mses;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto [bf, rx] = init_feasible(m, s);
    const double v = mse_total(m, bf, rx);
    EXPECT_TRUE(std::isfinite(v));
    mses.insert(v);
  }
  EXPECT_EQ(mses.size(), 10u);
}

TEST(Run, WitnessMatchesGridOracle) {
  const SystemModel m = support::witness_model();
  for (const char* name : kAllVariants) {
    SolverConfig cfg = parse_algorithm(name, 1);
    cfg.seed = 5;
    const RunResult res = run(m, cfg);
    EXPECT_NEAR(res.trace.mse_per_outer.back(), kWitnessMse, 1e-4) << name;
  }
}

TEST(Run, ZeroChannelsConvergeImmediately) {
  Philox4x32 rng(41, 2);
  const SystemModel r = support::random_model(rng);
  std::vector<SensorSpec> sensors = r.sensors();
  std::vector<Mat> zeros;
  for (std::size_t i = 0; i < r.L(); ++i)
    zeros.push_back(Mat::Zero(static_cast<Eigen::Index>(r.M()),
                              static_cast<Eigen::Index>(r.sensor(i).N())));
  const SystemModel m(r.source(), sensors, r.M(), zeros, r.sigma0_sq());
  const double trace = m.source().covariance().trace().real();
  for (const char* name : kAllVariants) {
    const RunResult res = run(m, parse_algorithm(name, m.L()));
    EXPECT_EQ(res.rx.mat().norm(), 0.0) << name;
    EXPECT_NEAR(res.trace.mse_per_outer.back(), trace, 1e-12) << name;
    EXPECT_EQ(res.trace.outer_iterations(), 1) << name;
    EXPECT_EQ(res.trace.termination, Termination::converged);
  }
}

TEST(Run, TwoBcdAndFgAgreeAcrossSeeds) {
  ExperimentConfig cfg = paper_preset();
  const SystemModel m = build_model(cfg, 2.0, 0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SolverConfig a = parse_algorithm("bfg", 3), b = parse_algorithm("two-bcd", 3);
    a.seed = b.seed = seed;
    // The MSE tail on this channel creeps for hundreds of iterations; the
    // default cap of 500 leaves the two runs up to 0.7% apart.
    a.stopping.max_outer = b.stopping.max_outer = 1500;
    const double ma = run(m, a).trace.mse_per_outer.back();
    const double mb = run(m, b).trace.mse_per_outer.back();
    EXPECT_LT(std::abs(ma - mb) / mb, 5e-3) << "seed " << seed;
  }
}

TEST(Run, MonotoneFeasibleAndProximalDecrease) {
  Philox4x32 rng(41, 3);
  for (int t = 0; t < 8; ++t) {
    const SystemModel m = support::random_model(rng);
    for (const char* name : kAllVariants) {
      SolverConfig cfg = parse_algorithm(name, m.L());
      cfg.seed = static_cast<std::uint64_t>(t);
      cfg.stopping.max_outer = 40;
      const RunResult res = run(m, cfg);
      const auto seq = res.trace.mse_per_update();
      ASSERT_EQ(seq.size(), res.trace.updates.size() + 1);
      for (std::size_t k = 0; k < res.trace.updates.size(); ++k) {
        const UpdateRecord& u = res.trace.updates[k];
        EXPECT_GE(u.power_slack, -1e-9 * 3.0) << name;
        if (is_monotone_variant(name)) {
          EXPECT_LE(seq[k + 1], seq[k] + 1e-9 * (1.0 + seq[k])) << name << " update " << k;
        }
        if (u.kind == UpdateKind::proximal) {
          EXPECT_LE(seq[k + 1], seq[k] - 1.0 * u.step_sq + 1e-8) << name << " update " << k;
        }
      }
      for (std::size_t i = 0; i < m.L(); ++i)
        EXPECT_LE(transmit_power(m, res.bf, i), m.sensor(i).power_budget() * (1 + 1e-9));
    }
  }
}

TEST(Run, TraceFollowsSchedule) {
  Philox4x32 rng(41, 4);
  const SystemModel m = support::random_model(rng, {3, 3});
  SolverConfig cfg;
  EssCyclic ec;
  ec.schedule = UpdateSchedule::gauss_seidel(m.L());
  cfg.algorithm = ec;
  cfg.stopping.max_outer = 3;
  cfg.stopping.rel_tol = 1e-300;
  const RunResult res = run(m, cfg);
  const std::size_t T = m.L() + 1;
  ASSERT_EQ(res.trace.updates.size(), T * static_cast<std::size_t>(res.trace.outer_iterations()));
  for (std::size_t k = 0; k < res.trace.updates.size(); ++k) {
    EXPECT_EQ(res.trace.updates[k].block, ec.schedule->pattern()[k % T]);
    EXPECT_EQ(res.trace.updates[k].outer, static_cast<int>(k / T) + 1);
  }
  EXPECT_EQ(res.trace.mse_per_outer.size(), res.trace.seconds_per_outer.size() + 1);
}

TEST(Run, ApproximateThenProximalSwitches) {
  Philox4x32 rng(41, 5);
  const SystemModel m = support::random_model(rng, {2, 3});
  SolverConfig cfg = parse_algorithm("bfg-approx-prox", m.L());
  cfg.stopping.rel_tol = 1e-300;
  cfg.stopping.max_outer = 14;
  const RunResult res = run(m, cfg);
  for (const auto& u : res.trace.updates) {
    if (u.block.kind != BlockId::Kind::F) continue;
    EXPECT_EQ(*u.kind, u.outer <= 10 ? UpdateKind::approximate : UpdateKind::proximal);
  }
}

TEST(Run, LayeredFixedInnerSweeps) {
  Philox4x32 rng(41, 6);
  const SystemModel m = support::random_model(rng, {3, 3});
  SolverConfig cfg = parse_algorithm("layered:2", m.L());
  cfg.stopping.max_outer = 3;
  cfg.stopping.rel_tol = 1e-300;
  const RunResult res = run(m, cfg);
  const std::size_t per_outer = 2 * m.L() + 1;
  ASSERT_EQ(res.trace.updates.size(), per_outer * static_cast<std::size_t>(res.trace.outer_iterations()));
  EXPECT_EQ(res.trace.updates[per_outer - 1].block, BlockId::G());
}

TEST(Run, ExplicitStartPoint) {
  const SystemModel m = support::witness_model();
  SolverConfig cfg = parse_algorithm("bfg", 1);
  const RunResult res = run(m, cfg, BeamformerSet(std::vector<Mat>{support::scalar(1.0)}));
  EXPECT_NEAR(res.trace.initial_mse, 0.5, 1e-15);
  EXPECT_EQ(res.trace.outer_iterations(), 1);
}

TEST(Run, ReceiverUpdateIsIdempotent) {
  Philox4x32 rng(41, 7);
  for (int t = 0; t < 10; ++t) {
    const SystemModel m = support::random_model(rng);
    const BeamformerSet bf = support::random_feasible(m, rng);
    const Receiver a = wiener_receiver(m, bf);
    const Receiver b = wiener_receiver(m, bf);
    EXPECT_LE((a.mat() - b.mat()).norm(), 1e-10);
  }
  // Schedules with back-to-back G updates leave the MSE unchanged between them.
  const SystemModel m = support::random_model(rng, {2, 3});
  SolverConfig cfg;
  EssCyclic ec;
  ec.schedule = UpdateSchedule::parse("F1,G,G,F2,G", 2 <= m.L() ? m.L() : 2);
  if (m.L() == 2) {
    cfg.algorithm = ec;
    cfg.stopping.max_outer = 5;
    const RunResult res = run(m, cfg);
    for (std::size_t k = 2; k < res.trace.updates.size(); k += 5)
      EXPECT_NEAR(res.trace.updates[k].mse, res.trace.updates[k - 1].mse, 1e-12);
  }
}

TEST(Run, FixedPointConsistency) {
  // A run from a stationary point does not move the MSE.
  const SystemModel m = support::witness_model();
  const BeamformerSet opt(std::vector<Mat>{support::scalar(1.0)});
  ASSERT_LE(stationarity_residual(m, opt, wiener_receiver(m, opt)), 1e-8);
  for (const char* name : kAllVariants) {
    const RunResult res = run(m, parse_algorithm(name, 1), opt);
    EXPECT_LE(std::abs(res.trace.mse_per_outer.back() - 0.5), 1e-7) << name;
  }
}

TEST(Stationarity, WitnessOptimum) {
  const SystemModel m = support::witness_model();
  const auto g = oracle::grid_search_scalar(m);
  const BeamformerSet bf(std::vector<Mat>{Mat::Constant(1, 1, g.f)});
  EXPECT_LE(stationarity_residual(m, bf, Receiver(Mat::Constant(1, 1, g.g))), 1e-4);
}

TEST(Stationarity, RandomPointIsNotStationary) {
  Philox4x32 rng(41, 8);
  for (int t = 0; t < 10; ++t) {
    const SystemModel m = support::random_model(rng);
    const BeamformerSet bf = support::random_feasible(m, rng, 0.3);
    const Receiver rx(support::random_complex(static_cast<Eigen::Index>(m.M()),
                                              static_cast<Eigen::Index>(m.K()), rng));
    EXPECT_GT(stationarity_residual(m, bf, rx), 1e-3);
  }
}

TEST(Stationarity, ReceiverComponentVanishesAtWiener) {
  Philox4x32 rng(41, 9);
  for (int t = 0; t < 10; ++t) {
    const SystemModel m = support::random_model(rng);
    const BeamformerSet bf = support::random_feasible(m, rng);
    EXPECT_LE(stationarity_report(m, bf, wiener_receiver(m, bf)).g_residual, 1e-6);
  }
}

TEST(Stationarity, ReceiverComponentMatchesFiniteDifferences) {
  Philox4x32 rng(41, 10);
  const SystemModel m = support::random_model(rng);
  const BeamformerSet bf = support::random_feasible(m, rng);
  const Receiver rx(support::random_complex(static_cast<Eigen::Index>(m.M()),
                                            static_cast<Eigen::Index>(m.K()), rng));
  const auto rows = rx.mat().rows(), cols = rx.mat().cols();
  auto fn = [&](const RVec& x) { return mse_total(m, bf, Receiver(unvec(unlift(x), rows, cols))); };
  const double fd = oracle::finite_diff_grad(fn, lift(rx.vec())).norm();
  EXPECT_NEAR(stationarity_report(m, bf, rx).g_residual, fd, 1e-5 * (1.0 + fd));
}

TEST(Stationarity, ConvergedRunsAreNearlyStationary) {
  Philox4x32 rng(41, 11);
  const SystemModel m = support::random_model(rng, {2, 3});
  SolverConfig cfg = parse_algorithm("bfg", m.L());
  cfg.stopping.max_outer = 3000;
  cfg.stopping.rel_tol = 1e-13;
  const RunResult res = run(m, cfg);
  EXPECT_LT(res.trace.stationarity, 1e-3);
}

}  // namespace
