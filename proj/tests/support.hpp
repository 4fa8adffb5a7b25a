// SPDX-License-Identifier: Apache-2.0
//
// Random instance generators shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mmsebcd/model.hpp"
#include "mmsebcd/rng.hpp"
#include "mmsebcd/subproblem.hpp"
#include "oracle/oracle.hpp"

namespace support {

using namespace mmsebcd;

inline double uniform(Philox4x32& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.uniform();
}

inline int uniform_int(Philox4x32& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline Mat random_complex(Eigen::Index r, Eigen::Index c, Philox4x32& rng) {
  Mat x(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) x(i, j) = rng.complex_normal();
  return x;
}

inline Vec random_vec(Eigen::Index n, Philox4x32& rng) { return random_complex(n, 1, rng); }

/// A A^H / n + floor I.
inline Mat random_pd(Eigen::Index n, Philox4x32& rng, double floor = 0.1) {
  const Mat a = random_complex(n, n, rng);
  return hermitian_part(a * a.adjoint() / static_cast<double>(n) +
                        floor * Mat::Identity(n, n));
}

/// U diag(d) U^H with rank nonzero eigenvalues in [0.2, 2].
inline Mat random_psd_rank(Eigen::Index n, Eigen::Index rank, Philox4x32& rng) {
  Eigen::HouseholderQR<Mat> qr(random_complex(n, n, rng));
  const Mat u = qr.householderQ() * Mat::Identity(n, n);
  RVec d = RVec::Zero(n);
  for (Eigen::Index k = 0; k < rank; ++k) d(k) = uniform(rng, 0.2, 2.0);
  return hermitian_part(u * d.cast<cplx>().asDiagonal() * u.adjoint());
}

struct ModelLimits {
  int max_L = 3;
  int max_dim = 4;
};

inline SystemModel random_model(Philox4x32& rng, ModelLimits lim = {}) {
  const int L = uniform_int(rng, 1, lim.max_L);
  const int K = uniform_int(rng, 1, lim.max_dim);
  const int M = uniform_int(rng, 1, lim.max_dim);
  std::vector<SensorSpec> sensors;
  std::vector<Mat> channels;
  for (int i = 0; i < L; ++i) {
    const int N = uniform_int(rng, 1, lim.max_dim);
    const int J = uniform_int(rng, 1, lim.max_dim);
    sensors.emplace_back(N, random_complex(J, K, rng), random_pd(J, rng, 0.05),
                         uniform(rng, 0.5, 3.0));
    channels.push_back(random_complex(M, N, rng));
  }
  return SystemModel(SourceModel(random_pd(K, rng, 0.2)), std::move(sensors), M,
                     std::move(channels), uniform(rng, 0.1, 2.0));
}

/// Random F_i rescaled to frac * P_i.
inline BeamformerSet random_feasible(const SystemModel& m, Philox4x32& rng, double frac = 0.7) {
  std::vector<Mat> mats;
  for (std::size_t i = 0; i < m.L(); ++i) {
    Mat f = random_complex(static_cast<Eigen::Index>(m.sensor(i).N()),
                           static_cast<Eigen::Index>(m.sensor(i).J()), rng);
    const double pw = (f * m.observation_gram(i) * f.adjoint()).trace().real();
    mats.push_back(f * std::sqrt(frac * m.sensor(i).power_budget() / pw));
  }
  return BeamformerSet(std::move(mats));
}

inline Mat scalar(double v) { return Mat::Constant(1, 1, cplx(v, 0.0)); }

/// K = M = N = J = L = 1.
inline SystemModel scalar_model(cplx h, cplx k, double s, double sigma1, double sigma0_sq,
                                double P) {
  return SystemModel(SourceModel(scalar(s)),
                     {SensorSpec(1, Mat::Constant(1, 1, k), scalar(sigma1), P)}, 1,
                     {Mat::Constant(1, 1, h)}, sigma0_sq);
}

/// The nonconvexity witness: H = K_1 = Sigma_s = 1, Sigma_1 = 0, sigma0^2 = 1, P = 1.
inline SystemModel witness_model() { return scalar_model(1.0, 1.0, 1.0, 0.0, 1.0, 1.0); }

/// ||M^+ b||^2 computed from an independent pseudoinverse.
inline double unconstrained_whitened_power(const Mat& Q, const Vec& lin, const Mat& E) {
  const oracle::Whitener w(E);
  const Mat M = w.inv_root * Q * w.inv_root;
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(M);
  cod.setThreshold(1e-10);
  return (cod.pseudoInverse() * (w.inv_root * lin)).squaredNorm();
}

/// Instance designed to land in the requested case.
inline SubproblemInstance random_instance(Philox4x32& rng, SolutionCase target,
                                          Eigen::Index n) {
  SubproblemInstance inst;
  inst.gram = ConstraintGram::make(random_pd(n, rng, 0.2));
  if (target == SolutionCase::case_i_i) {
    inst.Q = random_psd_rank(n, uniform_int(rng, 0, static_cast<int>(n) - 1), rng);
    inst.lin = random_vec(n, rng);
    inst.P = uniform(rng, 0.1, 5.0);
  } else {
    inst.Q = random_psd_rank(n, uniform_int(rng, 1, static_cast<int>(n)), rng);
    inst.lin = inst.Q * random_vec(n, rng);
    const double pw = unconstrained_whitened_power(inst.Q, inst.lin, inst.E());
    inst.P = target == SolutionCase::case_i_ii ? pw * uniform(rng, 0.1, 0.9)
                                               : pw * uniform(rng, 1.1, 3.0);
  }
  inst.validate();
  return inst;
}

}  // namespace support
