// SPDX-License-Identifier: Apache-2.0
//
// Log-barrier path-following solver for the joint beamformer problem
//
//   min_f  f^H Hq f - 2 Re{lin^H f} + c   s.t.  f_i^H E_i f_i <= P_i,
//
// solved over the real-composite variable x = [Re f; Im f] so every Newton
// system is real symmetric.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mmsebcd/linalg.hpp"
#include "mmsebcd/model.hpp"

namespace mmsebcd {

struct JointConstraint {
  std::size_t offset = 0;  // start of f_i in the stacked f
  Mat E;                   // restriction of D_i to block i
  double P = 0.0;
};

struct JointProblem {
  Mat H_q;  // A + C
  Vec lin;  // B^H g
  std::vector<JointConstraint> constraints;
  double c = 0.0;

  Eigen::Index size() const { return lin.size(); }

  /// Full D_i, E_i embedded on the diagonal.
  Mat D(std::size_t i) const {
    const JointConstraint& jc = constraints.at(i);
    Mat d = Mat::Zero(size(), size());
    const auto o = static_cast<Eigen::Index>(jc.offset);
    d.block(o, o, jc.E.rows(), jc.E.cols()) = jc.E;
    return d;
  }

  double objective(const Vec& f) const {
    return real_scalar(f.dot(H_q * f), "f^H Hq f") - 2.0 * lin.dot(f).real() + c;
  }

  double constraint_value(std::size_t i, const Vec& f) const {
    const JointConstraint& jc = constraints.at(i);
    const Vec fi = f.segment(static_cast<Eigen::Index>(jc.offset), jc.E.rows());
    return real_scalar(fi.dot(jc.E * fi), "f_i^H E_i f_i");
  }

  bool strictly_feasible(const Vec& f) const {
    for (std::size_t i = 0; i < constraints.size(); ++i)
      if (!(constraint_value(i, f) < constraints[i].P)) return false;
    return true;
  }
};

inline JointProblem make_joint_problem(const SystemModel& model,
                                       const VectorizedForm& vf,
                                       const Receiver& rx) {
  JointProblem prob;
  prob.H_q = vf.quadratic();
  prob.lin = vf.B().adjoint() * rx.vec();
  prob.c = vf.c;
  for (std::size_t i = 0; i < vf.L(); ++i)
    prob.constraints.push_back(
        {vf.offsets[i], vf.E_blocks[i], model.sensor(i).power_budget()});
  return prob;
}

struct BarrierSettings {
  double mu0 = 1.0;
  double shrink = 0.2;
  double newton_tol = 1e-10;
  double outer_tol = 1e-8;
  int max_newton = 100;
  int max_outer = 200;

  void validate() const {
    if (!(shrink > 0.0 && shrink < 1.0))
      throw ContractViolation("barrier shrink factor must lie in (0, 1)");
    if (!(mu0 > 0.0 && newton_tol > 0.0 && outer_tol > 0.0))
      throw ContractViolation("barrier weights and tolerances must be positive");
    if (max_newton < 1 || max_outer < 1)
      throw ContractViolation("barrier iteration limits must be positive");
  }
};

struct JointSolution {
  Vec f;
  double objective = 0.0;
  double gap = 0.0;  // L * mu at the last center, bounds objective - optimum
  std::vector<double> center_objectives;
  int newton_iters = 0;
};

/// The origin is strictly feasible whenever every budget is positive.
inline Vec feasible_start(const JointProblem& prob) {
  return Vec::Zero(prob.size());
}

/// Pulls a warm start strictly inside every constraint.
inline Vec feasible_start(const JointProblem& prob, const Vec& warm) {
  Vec f = warm;
  double worst = 0.0;
  for (std::size_t i = 0; i < prob.constraints.size(); ++i)
    worst = std::max(worst, prob.constraint_value(i, f) / prob.constraints[i].P);
  if (worst >= 1.0) f *= (1.0 - 1e-6) / std::sqrt(worst);
  return f;
}

namespace detail {

struct LiftedProblem {
  RMat H;                    // lift(Hq)
  RVec l;                    // lift(lin)
  std::vector<RMat> E;       // lift(E_i)
  std::vector<Eigen::Index> off;  // block offsets in the lifted variable
  std::vector<Eigen::Index> len;
  std::vector<double> P;
  Eigen::Index n = 0;        // complex dimension

  // Works on the lifted layout [Re f; Im f]: block i occupies
  // [off, off+len) and [n+off, n+off+len).
  RVec block(const RVec& x, std::size_t i) const {
    RVec out(2 * len[i]);
    out << x.segment(off[i], len[i]), x.segment(n + off[i], len[i]);
    return out;
  }
  void add_block(RVec& x, std::size_t i, const RVec& v) const {
    x.segment(off[i], len[i]) += v.head(len[i]);
    x.segment(n + off[i], len[i]) += v.tail(len[i]);
  }
  void add_block(RMat& h, std::size_t i, const RMat& v) const {
    const Eigen::Index k = len[i];
    const Eigen::Index r[2] = {off[i], n + off[i]};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        h.block(r[a], r[b], k, k) += v.block(a * k, b * k, k, k);
  }
  double slack(const RVec& x, std::size_t i) const {
    const RVec xi = block(x, i);
    return P[i] - xi.dot(E[i] * xi);
  }
  double objective(const RVec& x) const { return x.dot(H * x) - 2.0 * l.dot(x); }
  double barrier(const RVec& x, double mu) const {
    double v = objective(x);
    for (std::size_t i = 0; i < P.size(); ++i) {
      const double s = slack(x, i);
      if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
      v -= mu * std::log(s);
    }
    return v;
  }
};

inline LiftedProblem lift_problem(const JointProblem& prob) {
  LiftedProblem lp;
  lp.n = prob.size();
  lp.H = lift_hermitian(prob.H_q);
  lp.l = lift(prob.lin);
  for (const auto& jc : prob.constraints) {
    lp.E.push_back(lift_hermitian(hermitian_part(jc.E)));
    lp.off.push_back(static_cast<Eigen::Index>(jc.offset));
    lp.len.push_back(jc.E.rows());
    lp.P.push_back(jc.P);
  }
  return lp;
}

}  // namespace detail

/// Path-following barrier method. The returned point is feasible and its
/// objective exceeds the optimum by at most solution.gap.
inline JointSolution solve_joint(const JointProblem& prob, const Vec& start,
                                 const BarrierSettings& settings = {}) {
  settings.validate();
  if (prob.constraints.empty())
    throw ContractViolation("solve_joint: problem has no constraints");
  if (start.size() != prob.size())
    throw ContractViolation("solve_joint: start has wrong length");
  if (!prob.strictly_feasible(start))
    throw ContractViolation("solve_joint: start is not strictly feasible");

  const detail::LiftedProblem lp = detail::lift_problem(prob);
  const auto ncons = static_cast<double>(lp.P.size());
  RVec x = lift(start);
  double mu = settings.mu0;
  JointSolution sol;
  const double grad_scale = 1.0 + 2.0 * lp.l.norm();

  for (int outer = 0; outer < settings.max_outer; ++outer) {
    for (int it = 0; it < settings.max_newton; ++it) {
      RVec grad = 2.0 * (lp.H * x) - 2.0 * lp.l;
      RMat hess = 2.0 * lp.H;
      for (std::size_t i = 0; i < lp.P.size(); ++i) {
        const double s = lp.slack(x, i);
        const RVec ex = lp.E[i] * lp.block(x, i);
        lp.add_block(grad, i, (2.0 * mu / s) * ex);
        lp.add_block(hess, i,
                     (2.0 * mu / s) * lp.E[i] +
                         (4.0 * mu / (s * s)) * (ex * ex.transpose()));
      }
      if (grad.norm() <= settings.newton_tol * grad_scale) break;

      Eigen::LLT<RMat> llt(hess);
      if (llt.info() != Eigen::Success) {
        hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
        llt.compute(hess);
        if (llt.info() != Eigen::Success)
          throw NumericalError("solve_joint: Newton system not positive "
                               "definite at barrier weight " +
                               std::to_string(mu));
      }
      const RVec step = -llt.solve(grad);
      const double decrement_sq = -grad.dot(step);
      // The gradient norm can stall at roundoff along directions where the
      // Hessian is nearly singular; the Newton decrement does not.
      if (decrement_sq <= settings.newton_tol * (1.0 + std::abs(lp.objective(x)))) break;

      // Backtracking: stay strictly feasible, then Armijo.
      const double phi = lp.barrier(x, mu);
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const RVec trial = x + t * step;
        const double phi_t = lp.barrier(trial, mu);
        if (std::isfinite(phi_t) && phi_t <= phi - 0.25 * t * decrement_sq) {
          x = trial;
          moved = true;
          break;
        }
      }
      ++sol.newton_iters;
      if (!moved) break;  // at roundoff level of this center
    }
    sol.center_objectives.push_back(lp.objective(x) + prob.c);
    sol.gap = ncons * mu;
    if (sol.gap < settings.outer_tol) break;
    mu *= settings.shrink;
  }

  sol.f = unlift(x);
  if (!prob.strictly_feasible(sol.f))
    throw NumericalError("solve_joint: lost feasibility");
  sol.objective = prob.objective(sol.f);
  return sol;
}

}  // namespace mmsebcd
