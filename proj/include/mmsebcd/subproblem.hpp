// SPDX-License-Identifier: Apache-2.0
//
// Single-beamformer QCQP
//
//   min_f  f^H Q f - 2 Re{lin^H f}   s.t.  f^H E f <= P
//
// with Q Hermitian PSD and E Hermitian PD. Whitening f~ = E^{1/2} f turns the
// ellipsoid into a Euclidean ball; the eigendecomposition of the whitened
// quadratic M = E^{-1/2} Q E^{-1/2} then decides whether the multiplier is
// positive (found by bisection on a bracketed interval) or zero (minimum-norm
// pseudoinverse solution).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "mmsebcd/linalg.hpp"
#include "mmsebcd/model.hpp"

namespace mmsebcd {

/// Eigenvalues at or below this fraction of the largest are treated as zero.
inline constexpr double kRankTol = 1e-10;
/// A rotated component counts as nonzero above this fraction of ||p||.
inline constexpr double kNullComponentTol = 1e-9;
inline constexpr double kBisectionTol = 1e-10;
inline constexpr int kBisectionMaxIter = 200;

/// Power constraint gram E and its Hermitian roots. E only depends on model
/// data, so one instance per sensor is shared for a whole solver run.
struct ConstraintGram {
  Mat E;
  Mat root;
  Mat inv_root;

  static std::shared_ptr<const ConstraintGram> make(Mat e) {
    if (!is_hermitian(e))
      throw ModelError("constraint gram is not Hermitian");
    auto out = std::make_shared<ConstraintGram>();
    out->E = hermitian_part(e);
    HermitianRoot r = hermitian_root(out->E);  // throws if not PD
    out->root = std::move(r.root);
    out->inv_root = std::move(r.inv_root);
    return out;
  }

  static std::shared_ptr<const ConstraintGram> for_sensor(
      const SystemModel& model, std::size_t i) {
    return make(power_gram(model, i));
  }
};

enum class UpdateKind { plain, proximal, approximate };

inline std::string_view to_string(UpdateKind k) {
  switch (k) {
    case UpdateKind::plain: return "plain";
    case UpdateKind::proximal: return "proximal";
    case UpdateKind::approximate: return "approximate";
  }
  return "?";
}

struct SubproblemInstance {
  Mat Q;
  Vec lin;
  std::shared_ptr<const ConstraintGram> gram;
  double P = 0.0;
  UpdateKind kind = UpdateKind::plain;
  double kappa = 0.0;  // proximal only
  Vec anchor;          // f^_i for proximal / approximate

  const Mat& E() const { return gram->E; }
  Eigen::Index size() const { return lin.size(); }

  void validate() const {
    if (!gram) throw ContractViolation("subproblem has no constraint gram");
    const Eigen::Index n = lin.size();
    if (Q.rows() != n || Q.cols() != n || gram->E.rows() != n)
      throw ContractViolation("subproblem dimensions disagree");
    if (!(P > 0.0)) throw ContractViolation("power budget must be positive");
    if (kind == UpdateKind::proximal && !(kappa > 0.0))
      throw ContractViolation("proximal weight must be positive");
  }
};

inline double objective(const SubproblemInstance& inst, const Vec& f) {
  return real_scalar(f.dot(inst.Q * f), "f^H Q f") -
         2.0 * inst.lin.dot(f).real();
}

/// Whitened eigen-data of one subproblem. lambda is descending and already
/// rank-truncated: lambda(k) == 0 for k >= rank.
struct SpectralForm {
  Mat M;
  Mat U;
  RVec lambda;
  Vec b;
  Vec p;
  std::size_t rank = 0;
};

inline SpectralForm whiten(const SubproblemInstance& inst) {
  inst.validate();
  const Mat& w = inst.gram->inv_root;
  SpectralForm sf;
  sf.M = hermitian_part(w * inst.Q * w);
  Eigen::SelfAdjointEigenSolver<Mat> es(sf.M);
  if (es.info() != Eigen::Success)
    throw NumericalError("whiten: eigendecomposition failed");
  const Eigen::Index n = sf.M.rows();
  sf.U = es.eigenvectors().rowwise().reverse();
  sf.lambda = es.eigenvalues().reverse();
  const double top = n > 0 ? sf.lambda(0) : 0.0;
  if (n > 0 && sf.lambda(n - 1) < -kPsdTol * std::max(top, 0.0))
    throw ContractViolation("whiten: quadratic matrix is not PSD (min "
                            "eigenvalue " +
                            std::to_string(sf.lambda(n - 1)) + ")");
  sf.rank = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (top > 0.0 && sf.lambda(k) > kRankTol * top)
      ++sf.rank;
    else
      sf.lambda(k) = 0.0;
  }
  sf.b = w * inst.lin;
  sf.p = sf.U.adjoint() * sf.b;
  return sf;
}

enum class SolutionCase { case_i_i, case_i_ii, case_ii };

inline std::string_view to_string(SolutionCase c) {
  switch (c) {
    case SolutionCase::case_i_i: return "CaseI-i";
    case SolutionCase::case_i_ii: return "CaseI-ii";
    case SolutionCase::case_ii: return "CaseII";
  }
  return "?";
}

namespace detail {

inline bool has_null_component(const SpectralForm& sf) {
  const double thresh = kNullComponentTol * sf.p.norm();
  for (Eigen::Index k = static_cast<Eigen::Index>(sf.rank); k < sf.p.size(); ++k)
    if (std::abs(sf.p(k)) > thresh) return true;
  return false;
}

/// sum_{k<r} |p_k|^2 / lambda_k^2, the whitened power of the mu = 0 solution.
inline double range_power(const SpectralForm& sf) {
  double s = 0.0;
  for (std::size_t k = 0; k < sf.rank; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    s += std::norm(sf.p(kk)) / (sf.lambda(kk) * sf.lambda(kk));
  }
  return s;
}

inline double range_norm(const SpectralForm& sf) {
  return sf.p.head(static_cast<Eigen::Index>(sf.rank)).norm();
}

}  // namespace detail

/// Exactly one of the three cases holds for any spectral form.
inline SolutionCase classify_case(const SpectralForm& sf, double P) {
  if (sf.p.norm() == 0.0) return SolutionCase::case_ii;
  if (detail::has_null_component(sf)) return SolutionCase::case_i_i;
  if (detail::range_power(sf) > P) return SolutionCase::case_i_ii;
  return SolutionCase::case_ii;
}

/// Whitened power ||f~(mu)||^2 = sum_k |p_k|^2 / (lambda_k + mu)^2. In
/// CaseI-ii the numerically-null components are taken as exactly zero.
inline double power_curve(const SpectralForm& sf, double mu, SolutionCase c) {
  const Eigen::Index n = sf.p.size();
  const Eigen::Index stop =
      c == SolutionCase::case_i_i ? n : static_cast<Eigen::Index>(sf.rank);
  double s = 0.0;
  for (Eigen::Index k = 0; k < stop; ++k) {
    const double d = sf.lambda(k) + mu;
    if (d == 0.0) return std::numeric_limits<double>::infinity();
    s += std::norm(sf.p(k)) / (d * d);
  }
  return s;
}

struct MultiplierBracket {
  double lbd = 0.0;
  double ubd = 0.0;
};

inline MultiplierBracket multiplier_bounds(const SpectralForm& sf, double P,
                                           SolutionCase c) {
  const double sp = std::sqrt(P);
  const Eigen::Index n = sf.p.size();
  const double lambda1 = n > 0 ? sf.lambda(0) : 0.0;
  switch (c) {
    case SolutionCase::case_i_i: {
      const double ratio = sf.p.norm() / sp;
      return {std::max(0.0, ratio - lambda1), ratio};
    }
    case SolutionCase::case_i_ii: {
      const double ratio = detail::range_norm(sf) / sp;
      const double lambda_r = sf.lambda(static_cast<Eigen::Index>(sf.rank) - 1);
      return {std::max(0.0, ratio - lambda1), ratio - lambda_r};
    }
    case SolutionCase::case_ii:
      break;
  }
  throw ContractViolation("multiplier_bounds: CaseII has a zero multiplier");
}

struct MultiplierSolution {
  double mu = 0.0;
  int iterations = 0;
  MultiplierBracket bracket;
};

/// Bisection on the strictly decreasing power curve until
/// |g(mu) - P| <= tol * P.
inline MultiplierSolution solve_multiplier(const SpectralForm& sf, double P,
                                           SolutionCase c,
                                           double tol = kBisectionTol) {
  MultiplierSolution out;
  out.bracket = multiplier_bounds(sf, P, c);
  double lo = out.bracket.lbd;
  double hi = out.bracket.ubd;
  auto g = [&](double mu) { return power_curve(sf, mu, c); };
  if (hi <= lo) {
    out.mu = hi;
    return out;
  }
  // Roundoff in the eigen-data can push a bound marginally off the root.
  const double slack = 1e-12 * P;
  for (int expand = 0; g(lo) < P - slack || g(hi) > P + slack; ++expand) {
    if (expand >= 64)
      throw NumericalError("solve_multiplier: bracket [" + std::to_string(lo) +
                           ", " + std::to_string(hi) +
                           "] does not contain the root");
    const double w = std::max(hi - lo, 1e-300);
    if (g(lo) < P - slack) lo = std::max(0.0, lo - w);
    if (g(hi) > P + slack) hi = hi + w;
  }
  double mu = hi;
  for (int it = 0; it < kBisectionMaxIter; ++it) {
    out.iterations = it + 1;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if (gm > P) {
      lo = mid;
    } else {
      hi = mid;
    }
    mu = hi;
    if (std::abs(gm - P) <= tol * P) {
      mu = mid;
      break;
    }
  }
  out.mu = mu;
  return out;
}

struct SubproblemSolution {
  Vec f;
  double mu = 0.0;
  SolutionCase case_taken = SolutionCase::case_ii;
  int bisection_iters = 0;
  double kkt_residual = 0.0;
  double power = 0.0;
};

inline SubproblemSolution solve_single(const SubproblemInstance& inst,
                                       double tol = kBisectionTol) {
  const SpectralForm sf = whiten(inst);
  SubproblemSolution sol;
  sol.case_taken = classify_case(sf, inst.P);
  if (sol.case_taken == SolutionCase::case_ii) {
    const auto r = static_cast<Eigen::Index>(sf.rank);
    const Vec alpha =
        sf.p.head(r).cwiseQuotient(sf.lambda.head(r).cast<cplx>());
    sol.f = inst.gram->inv_root * (sf.U.leftCols(r) * alpha);
    sol.mu = 0.0;
  } else {
    const MultiplierSolution ms =
        solve_multiplier(sf, inst.P, sol.case_taken, tol);
    sol.mu = ms.mu;
    sol.bisection_iters = ms.iterations;
    const Mat system = hermitian_part(inst.Q + sol.mu * inst.E());
    Eigen::LLT<Mat> llt(system);
    if (llt.info() != Eigen::Success)
      throw NumericalError("solve_single: Q + mu E not positive definite (mu = " +
                           std::to_string(sol.mu) + ", case " +
                           std::string(to_string(sol.case_taken)) + ")");
    sol.f = llt.solve(inst.lin);
  }
  sol.power = real_scalar(sol.f.dot(inst.E() * sol.f), "f^H E f");
  if (sol.power > inst.P) {
    sol.f *= std::sqrt(inst.P / sol.power);
    sol.power = real_scalar(sol.f.dot(inst.E() * sol.f), "f^H E f");
  }
  sol.kkt_residual =
      ((inst.Q + sol.mu * inst.E()) * sol.f - inst.lin).norm();
  return sol;
}

/// Q = A_ii + C_i, lin = B_i^H g - q_i.
inline SubproblemInstance build_plain(const SensorBlocks& blocks,
                                      std::shared_ptr<const ConstraintGram> gram,
                                      double P) {
  SubproblemInstance inst;
  inst.Q = hermitian_part(blocks.A_ii + blocks.C_i);
  inst.lin = blocks.Bh_g - blocks.q;
  inst.gram = std::move(gram);
  inst.P = P;
  inst.kind = UpdateKind::plain;
  inst.validate();
  return inst;
}

/// Plain objective plus kappa ||f - anchor||^2.
inline SubproblemInstance build_proximal(
    const SensorBlocks& blocks, std::shared_ptr<const ConstraintGram> gram,
    double P, double kappa, const Vec& anchor) {
  if (!(kappa > 0.0))
    throw ContractViolation("build_proximal: kappa must be positive");
  SubproblemInstance inst = build_plain(blocks, std::move(gram), P);
  inst.Q += kappa * Mat::Identity(inst.Q.rows(), inst.Q.cols());
  inst.lin += kappa * anchor;
  inst.kind = UpdateKind::proximal;
  inst.kappa = kappa;
  inst.anchor = anchor;
  return inst;
}

/// Freezes the self-coupling A_ii f_i at the anchor: Q = C_i,
/// lin = B_i^H g - (q_i + A_ii anchor).
inline SubproblemInstance build_approximate(
    const SensorBlocks& blocks, std::shared_ptr<const ConstraintGram> gram,
    double P, const Vec& anchor) {
  SubproblemInstance inst;
  inst.Q = hermitian_part(blocks.C_i);
  inst.lin = blocks.Bh_g - (blocks.q + blocks.A_ii * anchor);
  inst.gram = std::move(gram);
  inst.P = P;
  inst.kind = UpdateKind::approximate;
  inst.anchor = anchor;
  inst.validate();
  return inst;
}

inline SubproblemInstance build_plain(const SystemModel& model,
                                      const VectorizedForm& vf,
                                      const BeamformerSet& bf,
                                      const Receiver& rx, std::size_t i) {
  return build_plain(sensor_blocks(vf, bf, rx, i),
                     ConstraintGram::make(vf.E_blocks.at(i)),
                     model.sensor(i).power_budget());
}

inline SubproblemInstance build_proximal(const SystemModel& model,
                                         const VectorizedForm& vf,
                                         const BeamformerSet& bf,
                                         const Receiver& rx, std::size_t i,
                                         double kappa) {
  return build_proximal(sensor_blocks(vf, bf, rx, i),
                        ConstraintGram::make(vf.E_blocks.at(i)),
                        model.sensor(i).power_budget(), kappa, bf.vec(i));
}

inline SubproblemInstance build_approximate(const SystemModel& model,
                                            const VectorizedForm& vf,
                                            const BeamformerSet& bf,
                                            const Receiver& rx, std::size_t i) {
  return build_approximate(sensor_blocks(vf, bf, rx, i),
                           ConstraintGram::make(vf.E_blocks.at(i)),
                           model.sensor(i).power_budget(), bf.vec(i));
}

}  // namespace mmsebcd
