// SPDX-License-Identifier: Apache-2.0
//
// Block coordinate descent drivers over the blocks {F_1, ..., F_L, G}:
//
//  * TwoBcd     alternate the joint beamformer solve and the Wiener receiver;
//  * Layered    inner cyclic sweeps of single-beamformer solves, then G;
//  * EssCyclic  walk an essentially cyclic schedule such as F1,G,F2,G,...
//               with plain, proximal, approximate or approximate-then-
//               proximal F updates.
#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mmsebcd/jointsolver.hpp"
#include "mmsebcd/model.hpp"
#include "mmsebcd/rng.hpp"
#include "mmsebcd/subproblem.hpp"

namespace mmsebcd {

struct BlockId {
  enum class Kind { F, G, AllF };
  Kind kind = Kind::G;
  std::size_t sensor = 0;  // 0-based, F only

  static BlockId F(std::size_t i) { return {Kind::F, i}; }
  static BlockId G() { return {Kind::G, 0}; }
  static BlockId all_F() { return {Kind::AllF, 0}; }

  bool operator==(const BlockId&) const = default;

  /// "F1".."FL" (1-based), "G", or "F*" for a joint update.
  std::string name() const {
    switch (kind) {
      case Kind::F: return "F" + std::to_string(sensor + 1);
      case Kind::G: return "G";
      case Kind::AllF: return "F*";
    }
    return "?";
  }

  static BlockId parse(const std::string& s) {
    if (s == "G" || s == "g") return G();
    if (s.size() >= 2 && (s[0] == 'F' || s[0] == 'f')) {
      std::size_t pos = 0;
      unsigned long idx = 0;
      try {
        idx = std::stoul(s.substr(1), &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == s.size() - 1 && idx >= 1) return F(idx - 1);
    }
    throw ScheduleError("unknown block '" + s + "'");
  }
};

/// Throws ScheduleError unless every block of {F_1..F_L, G} occurs in the
/// pattern (so each recurs within any window of one period).
inline void validate_schedule(const std::vector<BlockId>& pattern,
                              std::size_t L) {
  if (pattern.empty()) throw ScheduleError("schedule is empty");
  std::vector<bool> seen(L, false);
  bool has_g = false;
  for (const BlockId& b : pattern) {
    switch (b.kind) {
      case BlockId::Kind::G: has_g = true; break;
      case BlockId::Kind::F:
        if (b.sensor >= L)
          throw ScheduleError("block " + b.name() + " does not exist for L = " +
                              std::to_string(L));
        seen[b.sensor] = true;
        break;
      case BlockId::Kind::AllF:
        throw ScheduleError("joint block F* is not allowed in a schedule");
    }
  }
  for (std::size_t i = 0; i < L; ++i)
    if (!seen[i])
      throw ScheduleError("block " + BlockId::F(i).name() + " never updated");
  if (!has_g) throw ScheduleError("block G never updated");
}

class UpdateSchedule {
 public:
  UpdateSchedule(std::vector<BlockId> pattern, std::size_t L)
      : pattern_(std::move(pattern)), L_(L) {
    validate_schedule(pattern_, L_);
  }

  /// F1,G,F2,G,...,FL,G.
  static UpdateSchedule fg(std::size_t L) {
    std::vector<BlockId> p;
    for (std::size_t i = 0; i < L; ++i) {
      p.push_back(BlockId::F(i));
      p.push_back(BlockId::G());
    }
    return UpdateSchedule(std::move(p), L);
  }

  /// F1,...,FL,G (classical Gauss-Seidel order).
  static UpdateSchedule gauss_seidel(std::size_t L) {
    std::vector<BlockId> p;
    for (std::size_t i = 0; i < L; ++i) p.push_back(BlockId::F(i));
    p.push_back(BlockId::G());
    return UpdateSchedule(std::move(p), L);
  }

  /// Comma-separated block names, e.g. "F1,G,F2,G".
  static UpdateSchedule parse(const std::string& text, std::size_t L) {
    std::vector<BlockId> p;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) p.push_back(BlockId::parse(tok));
    return UpdateSchedule(std::move(p), L);
  }

  const std::vector<BlockId>& pattern() const { return pattern_; }
  std::size_t period() const { return pattern_.size(); }
  std::size_t L() const { return L_; }

 private:
  std::vector<BlockId> pattern_;
  std::size_t L_;
};

struct UpdateRule {
  enum class Kind { plain, proximal, approximate, approx_then_proximal };
  Kind kind = Kind::plain;
  double kappa = 1.0;
  int switch_iter = 10;  // outer iterations of approximate updates first

  UpdateKind at_outer(int outer) const {
    switch (kind) {
      case Kind::plain: return UpdateKind::plain;
      case Kind::proximal: return UpdateKind::proximal;
      case Kind::approximate: return UpdateKind::approximate;
      case Kind::approx_then_proximal:
        return outer < switch_iter ? UpdateKind::approximate
                                   : UpdateKind::proximal;
    }
    return UpdateKind::plain;
  }
};

struct TwoBcd {
  BarrierSettings barrier;
};

struct Layered {
  std::optional<int> inner_iters;  // fixed sweep count; otherwise inner_tol
  double inner_tol = 1e-9;
  int max_inner = 1000;
};

struct EssCyclic {
  std::optional<UpdateSchedule> schedule;  // defaults to F1,G,...,FL,G
  UpdateRule rule;
};

using Algorithm = std::variant<TwoBcd, Layered, EssCyclic>;

struct StoppingRule {
  double rel_tol = 1e-8;  // |MSE change| per outer iteration, relative
  int max_outer = 500;
};

struct SolverConfig {
  Algorithm algorithm = EssCyclic{};
  StoppingRule stopping;
  std::uint64_t seed = 0;
  double init_fraction = 0.9;
  double bisection_tol = kBisectionTol;

  void validate(std::size_t L) const {
    if (!(stopping.rel_tol > 0.0) || stopping.max_outer < 1)
      throw ContractViolation("stopping thresholds must be positive");
    if (!(init_fraction > 0.0 && init_fraction <= 1.0))
      throw ContractViolation("init_fraction must lie in (0, 1]");
    if (!(bisection_tol > 0.0))
      throw ContractViolation("bisection tolerance must be positive");
    if (const auto* ly = std::get_if<Layered>(&algorithm)) {
      if (ly->inner_iters && *ly->inner_iters < 1)
        throw ContractViolation("layered inner iterations must be >= 1");
      if (!(ly->inner_tol > 0.0) || ly->max_inner < 1)
        throw ContractViolation("layered inner thresholds must be positive");
    }
    if (const auto* ec = std::get_if<EssCyclic>(&algorithm)) {
      if (ec->schedule) validate_schedule(ec->schedule->pattern(), L);
      const auto k = ec->rule.kind;
      if ((k == UpdateRule::Kind::proximal ||
           k == UpdateRule::Kind::approx_then_proximal) &&
          !(ec->rule.kappa > 0.0))
        throw ContractViolation("proximal weight kappa must be positive");
      if (k == UpdateRule::Kind::approx_then_proximal && ec->rule.switch_iter < 1)
        throw ContractViolation("switch_iter must be >= 1");
    }
    if (const auto* tb = std::get_if<TwoBcd>(&algorithm)) tb->barrier.validate();
  }
};

struct UpdateRecord {
  BlockId block;
  int outer = 0;  // 1-based outer iteration the update belongs to
  double mse = 0.0;
  std::optional<SolutionCase> case_taken;
  std::optional<UpdateKind> kind;
  double mu = 0.0;
  double power_slack = 0.0;  // min_i (P_i - power_i) after the update
  double step_sq = 0.0;      // ||f_new - f_old||^2 of the updated block(s)
};

enum class Termination { converged, max_iterations };

inline std::string_view to_string(Termination t) {
  return t == Termination::converged ? "converged" : "max_iterations";
}

struct SolverTrace {
  double initial_mse = 0.0;
  std::vector<UpdateRecord> updates;
  std::vector<double> mse_per_outer;  // [0] is the initial point
  std::vector<double> seconds_per_outer;
  double stationarity = 0.0;
  Termination termination = Termination::max_iterations;
  int mse_increases = 0;  // updates that raised the MSE (approximate only)

  int outer_iterations() const {
    return static_cast<int>(mse_per_outer.size()) - 1;
  }
  std::vector<double> mse_per_update() const {
    std::vector<double> out{initial_mse};
    for (const auto& u : updates) out.push_back(u.mse);
    return out;
  }
};

struct RunResult {
  BeamformerSet bf;
  Receiver rx;
  SolverTrace trace;
};

/// Random precoders with i.i.d. CN(0,1) entries rescaled to
/// power = init_fraction * P_i, and the matching Wiener receiver.
inline std::pair<BeamformerSet, Receiver> init_feasible(
    const SystemModel& model, std::uint64_t seed, double init_fraction = 0.9) {
  Philox4x32 rng(seed, stream_id(StreamPurpose::init, 0));
  std::vector<Mat> mats;
  for (std::size_t i = 0; i < model.L(); ++i) {
    const auto& s = model.sensor(i);
    Mat f(static_cast<Eigen::Index>(s.N()), static_cast<Eigen::Index>(s.J()));
    for (Eigen::Index c = 0; c < f.cols(); ++c)
      for (Eigen::Index r = 0; r < f.rows(); ++r) f(r, c) = rng.complex_normal();
    const double pw = real_scalar(
        (f * model.observation_gram(i) * f.adjoint()).trace(), "power");
    f *= std::sqrt(init_fraction * s.power_budget() / pw);
    mats.push_back(std::move(f));
  }
  BeamformerSet bf(std::move(mats));
  Receiver rx = wiener_receiver(model, bf);
  return {std::move(bf), std::move(rx)};
}

struct StationarityReport {
  double g_residual = 0.0;
  std::vector<double> f_residual;
  double max() const {
    double m = g_residual;
    for (double v : f_residual) m = std::max(m, v);
    return m;
  }
};

/// First-order optimality violation per block. For G: norm of the real
/// gradient. For F_i: norm of the projected-gradient mapping
/// f~ - Proj(f~ - grad~) in whitened coordinates f~ = E_i^{1/2} f_i, where
/// the feasible set is the ball of radius sqrt(P_i).
inline StationarityReport stationarity_report(const SystemModel& model,
                                              const BeamformerSet& bf,
                                              const Receiver& rx) {
  StationarityReport rep;
  const Mat x = effective_channel(model, bf);
  const Mat xs = x * model.source().covariance();
  const Mat r = xs * x.adjoint() + noise_covariance(model, bf);
  rep.g_residual = 2.0 * (r * rx.mat() - xs).norm();
  for (std::size_t i = 0; i < model.L(); ++i) {
    const SensorBlocks blk = assemble_sensor(model, bf, rx, i);
    const Vec fi = bf.vec(i);
    const Vec grad = 2.0 * ((blk.A_ii + blk.C_i) * fi + blk.q - blk.Bh_g);
    const auto gram = ConstraintGram::for_sensor(model, i);
    const Vec ft = gram->root * fi;
    Vec trial = ft - gram->inv_root * grad;
    const double radius = std::sqrt(model.sensor(i).power_budget());
    const double tn = trial.norm();
    if (tn > radius) trial *= radius / tn;
    rep.f_residual.push_back((ft - trial).norm());
  }
  return rep;
}

inline double stationarity_residual(const SystemModel& model,
                                    const BeamformerSet& bf,
                                    const Receiver& rx) {
  return stationarity_report(model, bf, rx).max();
}

namespace detail {

class BcdRunner {
 public:
  BcdRunner(const SystemModel& model, const SolverConfig& cfg,
            BeamformerSet bf, Receiver rx)
      : model_(model), cfg_(cfg), bf_(std::move(bf)), rx_(std::move(rx)) {
    for (std::size_t i = 0; i < model_.L(); ++i)
      grams_.push_back(ConstraintGram::for_sensor(model_, i));
    mse_ = mse_total(model_, bf_, rx_);
    trace_.initial_mse = mse_;
    trace_.mse_per_outer.push_back(mse_);
  }

  RunResult run() {
    using clock = std::chrono::steady_clock;
    std::optional<UpdateSchedule> schedule;
    if (const auto* ec = std::get_if<EssCyclic>(&cfg_.algorithm))
      schedule = ec->schedule ? *ec->schedule : UpdateSchedule::fg(model_.L());

    for (int outer = 1; outer <= cfg_.stopping.max_outer; ++outer) {
      outer_ = outer;
      const double before = mse_;
      const auto t0 = clock::now();
      std::visit(
          [&](const auto& alg) {
            using T = std::decay_t<decltype(alg)>;
            if constexpr (std::is_same_v<T, TwoBcd>) {
              step_two_bcd(alg);
            } else if constexpr (std::is_same_v<T, Layered>) {
              step_layered(alg);
            } else {
              step_cyclic(alg, *schedule);
            }
          },
          cfg_.algorithm);
      trace_.seconds_per_outer.push_back(
          std::chrono::duration<double>(clock::now() - t0).count());
      trace_.mse_per_outer.push_back(mse_);
      if (std::abs(before - mse_) <=
          cfg_.stopping.rel_tol * std::max(before, 1e-300)) {
        trace_.termination = Termination::converged;
        break;
      }
    }
    trace_.stationarity = stationarity_residual(model_, bf_, rx_);
    return {std::move(bf_), std::move(rx_), std::move(trace_)};
  }

 private:
  double min_slack() const {
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < model_.L(); ++i)
      s = std::min(s, model_.sensor(i).power_budget() -
                          transmit_power(model_, bf_, i));
    return s;
  }

  void record(UpdateRecord rec) {
    const double prev = mse_;
    mse_ = mse_total(model_, bf_, rx_);
    if (mse_ > prev + 1e-9 * (1.0 + prev)) ++trace_.mse_increases;
    rec.outer = outer_;
    rec.mse = mse_;
    rec.power_slack = min_slack();
    trace_.updates.push_back(std::move(rec));
  }

  void update_g() {
    rx_ = wiener_receiver(model_, bf_);
    UpdateRecord rec;
    rec.block = BlockId::G();
    record(std::move(rec));
  }

  void update_f(std::size_t i, UpdateKind kind, double kappa) {
    const SensorBlocks blk = assemble_sensor(model_, bf_, rx_, i);
    const double P = model_.sensor(i).power_budget();
    const Vec old = bf_.vec(i);
    SubproblemInstance inst;
    switch (kind) {
      case UpdateKind::plain: inst = build_plain(blk, grams_[i], P); break;
      case UpdateKind::proximal:
        inst = build_proximal(blk, grams_[i], P, kappa, old);
        break;
      case UpdateKind::approximate:
        inst = build_approximate(blk, grams_[i], P, old);
        break;
    }
    const SubproblemSolution sol = solve_single(inst, cfg_.bisection_tol);
    bf_.set_vec(i, sol.f);
    record({.block = BlockId::F(i),
            .case_taken = sol.case_taken,
            .kind = kind,
            .mu = sol.mu,
            .step_sq = (sol.f - old).squaredNorm()});
  }

  void step_two_bcd(const TwoBcd& alg) {
    const VectorizedForm vf = assemble_vectorized(model_, rx_);
    const JointProblem prob = make_joint_problem(model_, vf, rx_);
    const JointSolution js = solve_joint(prob, feasible_start(prob), alg.barrier);
    const Vec old = bf_.stacked();
    BeamformerSet candidate = BeamformerSet::from_stacked(model_, js.f);
    // The barrier optimum is only certified to within its duality gap;
    // keep the incumbent if it is already at least as good.
    if (mse_total(model_, candidate, rx_) <= mse_) bf_ = std::move(candidate);
    UpdateRecord rec;
    rec.block = BlockId::all_F();
    rec.step_sq = (bf_.stacked() - old).squaredNorm();
    record(std::move(rec));
    update_g();
  }

  void step_layered(const Layered& alg) {
    const int sweeps = alg.inner_iters.value_or(alg.max_inner);
    for (int s = 0; s < sweeps; ++s) {
      const double before = mse_;
      for (std::size_t i = 0; i < model_.L(); ++i)
        update_f(i, UpdateKind::plain, 0.0);
      if (!alg.inner_iters &&
          before - mse_ < alg.inner_tol * std::max(before, 1e-300))
        break;
    }
    update_g();
  }

  void step_cyclic(const EssCyclic& alg, const UpdateSchedule& schedule) {
    const UpdateKind kind = alg.rule.at_outer(outer_ - 1);
    for (const BlockId& b : schedule.pattern()) {
      if (b.kind == BlockId::Kind::G)
        update_g();
      else
        update_f(b.sensor, kind, alg.rule.kappa);
    }
  }

  const SystemModel& model_;
  const SolverConfig& cfg_;
  BeamformerSet bf_;
  Receiver rx_;
  std::vector<std::shared_ptr<const ConstraintGram>> grams_;
  double mse_ = 0.0;
  int outer_ = 0;
  SolverTrace trace_;
};

}  // namespace detail

/// Runs the configured algorithm from the given beamformers (G is set by the
/// Wiener receiver first).
inline RunResult run(const SystemModel& model, const SolverConfig& config,
                     BeamformerSet start) {
  config.validate(model.L());
  check_dims(model, start);
  Receiver rx = wiener_receiver(model, start);
  return detail::BcdRunner(model, config, std::move(start), std::move(rx)).run();
}

/// Runs the configured algorithm from init_feasible(model, config.seed).
inline RunResult run(const SystemModel& model, const SolverConfig& config) {
  config.validate(model.L());
  auto [bf, rx] = init_feasible(model, config.seed, config.init_fraction);
  return detail::BcdRunner(model, config, std::move(bf), std::move(rx)).run();
}

}  // namespace mmsebcd
