// SPDX-License-Identifier: Apache-2.0
//
// System model for a coherent-MAC sensor network: L sensors observe a common
// K-dimensional source through K_i, precode with F_i, and superimpose over
// fading channels H_i at a fusion center that applies the receiver G^H.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mmsebcd/linalg.hpp"

namespace mmsebcd {

namespace detail {
inline std::string dims(const Mat& x) {
  return std::to_string(x.rows()) + "x" + std::to_string(x.cols());
}
}  // namespace detail

class SourceModel {
 public:
  explicit SourceModel(Mat sigma_s) : sigma_s_(std::move(sigma_s)) {
    if (sigma_s_.rows() == 0 || sigma_s_.rows() != sigma_s_.cols())
      throw ModelError("source covariance must be square and nonempty, got " +
                       detail::dims(sigma_s_));
    if (!is_hermitian(sigma_s_))
      throw ModelError("source covariance is not Hermitian");
    sigma_s_ = hermitian_part(sigma_s_);
    if (!is_psd(sigma_s_))
      throw ModelError("source covariance is not positive semidefinite");
  }

  std::size_t dim() const { return static_cast<std::size_t>(sigma_s_.rows()); }
  const Mat& covariance() const { return sigma_s_; }

 private:
  Mat sigma_s_;
};

class SensorSpec {
 public:
  /// observation: J x K matrix K_i; noise: J x J covariance Sigma_i.
  SensorSpec(std::size_t antennas, Mat observation, Mat noise,
             double power_budget)
      : n_(antennas),
        k_mat_(std::move(observation)),
        sigma_obs_(std::move(noise)),
        power_(power_budget) {
    if (n_ == 0) throw ModelError("sensor antenna count must be positive");
    if (k_mat_.rows() == 0 || k_mat_.cols() == 0)
      throw ModelError("observation matrix must be nonempty");
    if (sigma_obs_.rows() != k_mat_.rows() ||
        sigma_obs_.cols() != k_mat_.rows())
      throw ModelError("observation noise covariance is " +
                       detail::dims(sigma_obs_) + ", expected " +
                       std::to_string(k_mat_.rows()) + "x" +
                       std::to_string(k_mat_.rows()));
    if (!is_hermitian(sigma_obs_))
      throw ModelError("observation noise covariance is not Hermitian");
    sigma_obs_ = hermitian_part(sigma_obs_);
    if (!is_psd(sigma_obs_))
      throw ModelError("observation noise covariance is not PSD");
    if (!(power_budget > 0.0))
      throw ModelError("power budget must be positive");
  }

  std::size_t J() const { return static_cast<std::size_t>(k_mat_.rows()); }
  std::size_t N() const { return n_; }
  std::size_t K() const { return static_cast<std::size_t>(k_mat_.cols()); }
  const Mat& observation() const { return k_mat_; }
  const Mat& noise() const { return sigma_obs_; }
  double power_budget() const { return power_; }

 private:
  std::size_t n_;
  Mat k_mat_;
  Mat sigma_obs_;
  double power_;
};

class SystemModel {
 public:
  SystemModel(SourceModel source, std::vector<SensorSpec> sensors,
              std::size_t fc_antennas, std::vector<Mat> channels,
              double sigma0_sq)
      : source_(std::move(source)),
        sensors_(std::move(sensors)),
        m_(fc_antennas),
        channels_(std::move(channels)),
        sigma0_sq_(sigma0_sq) {
    if (sensors_.empty()) throw ModelError("at least one sensor is required");
    if (m_ == 0) throw ModelError("fusion center antenna count must be positive");
    if (channels_.size() != sensors_.size())
      throw ModelError("expected " + std::to_string(sensors_.size()) +
                       " channels, got " + std::to_string(channels_.size()));
    if (!(sigma0_sq_ > 0.0))
      throw ModelError("channel noise variance must be positive");
    grams_.reserve(sensors_.size());
    for (std::size_t i = 0; i < sensors_.size(); ++i) {
      const auto& s = sensors_[i];
      if (s.K() != source_.dim())
        throw ModelError("sensor " + std::to_string(i) +
                         ": observation matrix has " + std::to_string(s.K()) +
                         " columns, source dimension is " +
                         std::to_string(source_.dim()));
      const Mat& h = channels_[i];
      if (static_cast<std::size_t>(h.rows()) != m_ ||
          static_cast<std::size_t>(h.cols()) != s.N())
        throw ModelError("channel " + std::to_string(i) + " is " +
                         detail::dims(h) + ", expected " + std::to_string(m_) +
                         "x" + std::to_string(s.N()));
      Mat gram = hermitian_part(s.observation() * source_.covariance() *
                                    s.observation().adjoint() +
                                s.noise());
      if (!is_pd(gram))
        throw ModelError("sensor " + std::to_string(i) +
                         ": K_i Sigma_s K_i^H + Sigma_i is not positive "
                         "definite");
      grams_.push_back(std::move(gram));
    }
  }

  std::size_t L() const { return sensors_.size(); }
  std::size_t M() const { return m_; }
  std::size_t K() const { return source_.dim(); }
  const SourceModel& source() const { return source_; }
  const SensorSpec& sensor(std::size_t i) const { return sensors_.at(i); }
  const std::vector<SensorSpec>& sensors() const { return sensors_; }
  const Mat& channel(std::size_t i) const { return channels_.at(i); }
  double sigma0_sq() const { return sigma0_sq_; }

  /// K_i Sigma_s K_i^H + Sigma_i, the J_i x J_i signal-plus-noise covariance.
  const Mat& observation_gram(std::size_t i) const { return grams_.at(i); }

  /// Length of f_i = vec(F_i).
  std::size_t block_size(std::size_t i) const {
    return sensor(i).N() * sensor(i).J();
  }
  std::size_t block_offset(std::size_t i) const {
    std::size_t off = 0;
    for (std::size_t j = 0; j < i; ++j) off += block_size(j);
    return off;
  }
  std::size_t total_size() const { return block_offset(L()); }

  /// Same model with a different channel noise level.
  SystemModel with_sigma0_sq(double s) const {
    SystemModel copy = *this;
    if (!(s > 0.0)) throw ModelError("channel noise variance must be positive");
    copy.sigma0_sq_ = s;
    return copy;
  }

 private:
  SourceModel source_;
  std::vector<SensorSpec> sensors_;
  std::size_t m_;
  std::vector<Mat> channels_;
  double sigma0_sq_;
  std::vector<Mat> grams_;
};

/// The precoders {F_i}. Feasibility is not part of the type.
class BeamformerSet {
 public:
  BeamformerSet() = default;
  explicit BeamformerSet(std::vector<Mat> mats) : mats_(std::move(mats)) {}

  static BeamformerSet zeros(const SystemModel& model) {
    std::vector<Mat> mats;
    for (const auto& s : model.sensors())
      mats.push_back(Mat::Zero(static_cast<Eigen::Index>(s.N()),
                               static_cast<Eigen::Index>(s.J())));
    return BeamformerSet(std::move(mats));
  }

  static BeamformerSet from_stacked(const SystemModel& model, const Vec& f) {
    if (static_cast<std::size_t>(f.size()) != model.total_size())
      throw ModelError("stacked beamformer has length " +
                       std::to_string(f.size()) + ", expected " +
                       std::to_string(model.total_size()));
    std::vector<Mat> mats;
    std::size_t off = 0;
    for (const auto& s : model.sensors()) {
      const auto n = static_cast<Eigen::Index>(s.N());
      const auto j = static_cast<Eigen::Index>(s.J());
      mats.push_back(unvec(f.segment(static_cast<Eigen::Index>(off), n * j), n, j));
      off += s.N() * s.J();
    }
    return BeamformerSet(std::move(mats));
  }

  std::size_t size() const { return mats_.size(); }
  const Mat& mat(std::size_t i) const { return mats_.at(i); }
  const std::vector<Mat>& mats() const { return mats_; }
  Vec vec(std::size_t i) const { return mmsebcd::vec(mats_.at(i)); }

  Vec stacked() const {
    Eigen::Index n = 0;
    for (const auto& m : mats_) n += m.size();
    Vec f(n);
    Eigen::Index off = 0;
    for (const auto& m : mats_) {
      f.segment(off, m.size()) = mmsebcd::vec(m);
      off += m.size();
    }
    return f;
  }

  void set(std::size_t i, Mat m) {
    Mat& slot = mats_.at(i);
    if (m.rows() != slot.rows() || m.cols() != slot.cols())
      throw ModelError("beamformer " + std::to_string(i) + " must be " +
                       detail::dims(slot) + ", got " + detail::dims(m));
    slot = std::move(m);
  }

  void set_vec(std::size_t i, const Vec& f) {
    const Mat& slot = mats_.at(i);
    set(i, unvec(f, slot.rows(), slot.cols()));
  }

 private:
  std::vector<Mat> mats_;
};

/// The fusion-center matrix G (the receiver applies G^H).
class Receiver {
 public:
  Receiver() = default;
  explicit Receiver(Mat g) : g_(std::move(g)) {}
  static Receiver zeros(const SystemModel& model) {
    return Receiver(Mat::Zero(static_cast<Eigen::Index>(model.M()),
                              static_cast<Eigen::Index>(model.K())));
  }
  const Mat& mat() const { return g_; }
  Vec vec() const { return mmsebcd::vec(g_); }

 private:
  Mat g_;
};

inline void check_dims(const SystemModel& model, const BeamformerSet& bf) {
  if (bf.size() != model.L())
    throw ModelError("expected " + std::to_string(model.L()) +
                     " beamformers, got " + std::to_string(bf.size()));
  for (std::size_t i = 0; i < model.L(); ++i) {
    const auto& s = model.sensor(i);
    const Mat& f = bf.mat(i);
    if (static_cast<std::size_t>(f.rows()) != s.N() ||
        static_cast<std::size_t>(f.cols()) != s.J())
      throw ModelError("beamformer " + std::to_string(i) + " is " +
                       detail::dims(f) + ", expected " + std::to_string(s.N()) +
                       "x" + std::to_string(s.J()));
  }
}

inline void check_dims(const SystemModel& model, const Receiver& rx) {
  if (static_cast<std::size_t>(rx.mat().rows()) != model.M() ||
      static_cast<std::size_t>(rx.mat().cols()) != model.K())
    throw ModelError("receiver is " + detail::dims(rx.mat()) + ", expected " +
                     std::to_string(model.M()) + "x" +
                     std::to_string(model.K()));
}

/// sum_i H_i F_i K_i, the effective M x K source-to-FC map.
inline Mat effective_channel(const SystemModel& model, const BeamformerSet& bf) {
  check_dims(model, bf);
  Mat x = Mat::Zero(static_cast<Eigen::Index>(model.M()),
                    static_cast<Eigen::Index>(model.K()));
  for (std::size_t i = 0; i < model.L(); ++i)
    x += model.channel(i) * bf.mat(i) * model.sensor(i).observation();
  return x;
}

/// Covariance of the compound noise at the FC, sigma0^2 I + sum H F Sigma F^H H^H.
inline Mat noise_covariance(const SystemModel& model, const BeamformerSet& bf) {
  check_dims(model, bf);
  const auto m = static_cast<Eigen::Index>(model.M());
  Mat sn = model.sigma0_sq() * Mat::Identity(m, m);
  for (std::size_t i = 0; i < model.L(); ++i) {
    const Mat hf = model.channel(i) * bf.mat(i);
    sn += hf * model.sensor(i).noise() * hf.adjoint();
  }
  return hermitian_part(sn);
}

/// Error covariance E{(s - s_hat)(s - s_hat)^H}.
inline Mat mse_matrix(const SystemModel& model, const BeamformerSet& bf,
                      const Receiver& rx) {
  check_dims(model, rx);
  const Mat x = effective_channel(model, bf);
  const Mat& ss = model.source().covariance();
  const Mat& g = rx.mat();
  const Mat gx_ss = g.adjoint() * x * ss;
  Mat phi = g.adjoint() * x * ss * x.adjoint() * g - gx_ss - gx_ss.adjoint() +
            g.adjoint() * noise_covariance(model, bf) * g + ss;
  return phi;
}

inline double mse_total(const SystemModel& model, const BeamformerSet& bf,
                        const Receiver& rx) {
  const double v = real_scalar(mse_matrix(model, bf, rx).trace(), "MSE");
  return std::max(v, 0.0);
}

inline double transmit_power(const SystemModel& model, const BeamformerSet& bf,
                             std::size_t i) {
  check_dims(model, bf);
  if (i >= model.L())
    throw ContractViolation("sensor index " + std::to_string(i) +
                            " out of range");
  const Mat& f = bf.mat(i);
  return real_scalar((f * model.observation_gram(i) * f.adjoint()).trace(),
                     "transmit power");
}

/// Wiener receiver [X Sigma_s X^H + Sigma_n]^{-1} X Sigma_s, solved through a
/// Cholesky factorization of the bracketed matrix.
inline Receiver wiener_receiver(const SystemModel& model,
                                const BeamformerSet& bf) {
  const Mat x = effective_channel(model, bf);
  const Mat xs = x * model.source().covariance();
  const Mat r = hermitian_part(xs * x.adjoint() + noise_covariance(model, bf));
  Eigen::LLT<Mat> llt(r);
  if (llt.info() != Eigen::Success)
    throw NumericalError("wiener_receiver: receive covariance is not positive "
                         "definite");
  return Receiver(llt.solve(xs));
}

/// Quadratic data of the MSE as a function of the stacked beamformer f for a
/// fixed receiver:  MSE = f^H (A + C) f - 2 Re{g^H B f} + c.
struct VectorizedForm {
  std::vector<std::vector<Mat>> A_blocks;  // A_ij, (J_i N_i) x (J_j N_j)
  std::vector<Mat> B_blocks;               // B_i, KM x (J_i N_i)
  std::vector<Mat> C_blocks;               // C_i
  std::vector<Mat> E_blocks;               // E_i, power gram of f_i
  double c = 0.0;
  std::vector<std::size_t> offsets;        // start of f_i in f

  std::size_t L() const { return B_blocks.size(); }
  std::size_t total_size() const {
    return offsets.empty() ? 0
                           : offsets.back() +
                                 static_cast<std::size_t>(E_blocks.back().rows());
  }

  Mat A() const {
    const auto n = static_cast<Eigen::Index>(total_size());
    Mat a(n, n);
    for (std::size_t i = 0; i < L(); ++i)
      for (std::size_t j = 0; j < L(); ++j)
        a.block(static_cast<Eigen::Index>(offsets[i]),
                static_cast<Eigen::Index>(offsets[j]), A_blocks[i][j].rows(),
                A_blocks[i][j].cols()) = A_blocks[i][j];
    return a;
  }
  Mat B() const {
    Mat b(B_blocks.front().rows(), static_cast<Eigen::Index>(total_size()));
    for (std::size_t i = 0; i < L(); ++i)
      b.middleCols(static_cast<Eigen::Index>(offsets[i]), B_blocks[i].cols()) =
          B_blocks[i];
    return b;
  }
  Mat C() const {
    const auto n = static_cast<Eigen::Index>(total_size());
    Mat c_mat = Mat::Zero(n, n);
    for (std::size_t i = 0; i < L(); ++i) {
      const auto o = static_cast<Eigen::Index>(offsets[i]);
      c_mat.block(o, o, C_blocks[i].rows(), C_blocks[i].cols()) = C_blocks[i];
    }
    return c_mat;
  }
  /// E_i embedded as the i-th diagonal block, zeros elsewhere.
  Mat D(std::size_t i) const {
    const auto n = static_cast<Eigen::Index>(total_size());
    Mat d = Mat::Zero(n, n);
    const auto o = static_cast<Eigen::Index>(offsets.at(i));
    d.block(o, o, E_blocks[i].rows(), E_blocks[i].cols()) = E_blocks[i];
    return d;
  }
  /// A + C, symmetrized.
  Mat quadratic() const { return hermitian_part(A() + C()); }
};

/// (K_i Sigma_s K_i^H + Sigma_i)^T (x) I_{N_i}. Depends on model data only.
inline Mat power_gram(const SystemModel& model, std::size_t i) {
  const auto n = static_cast<Eigen::Index>(model.sensor(i).N());
  return kron(model.observation_gram(i).transpose(), Mat::Identity(n, n));
}

inline VectorizedForm assemble_vectorized(const SystemModel& model,
                                          const Receiver& rx) {
  check_dims(model, rx);
  const std::size_t L = model.L();
  const Mat& ss = model.source().covariance();
  const Mat& g = rx.mat();
  const Mat ggh = g * g.adjoint();

  VectorizedForm vf;
  vf.A_blocks.assign(L, std::vector<Mat>(L));
  std::size_t off = 0;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& si = model.sensor(i);
    const Mat& hi = model.channel(i);
    for (std::size_t j = 0; j < L; ++j) {
      const auto& sj = model.sensor(j);
      const Mat& hj = model.channel(j);
      const Mat left = sj.observation() * ss * si.observation().adjoint();
      vf.A_blocks[i][j] =
          kron(left.transpose(), hi.adjoint() * ggh * hj);
    }
    vf.B_blocks.push_back(kron((si.observation() * ss).transpose(), hi));
    vf.C_blocks.push_back(kron(si.noise().conjugate(), hi.adjoint() * ggh * hi));
    vf.E_blocks.push_back(power_gram(model, i));
    vf.offsets.push_back(off);
    off += model.block_size(i);
  }
  vf.c = real_scalar(ss.trace(), "Tr{Sigma_s}") +
         model.sigma0_sq() * g.squaredNorm();

  if (!is_psd(vf.quadratic()))
    throw InternalError("assemble_vectorized: A + C is not PSD");
  return vf;
}

inline double mse_quadratic(const VectorizedForm& vf, const BeamformerSet& bf,
                            const Receiver& rx) {
  const Vec f = bf.stacked();
  if (static_cast<std::size_t>(f.size()) != vf.total_size())
    throw ModelError("mse_quadratic: beamformer length " +
                     std::to_string(f.size()) + " does not match form size " +
                     std::to_string(vf.total_size()));
  const Vec g = rx.vec();
  if (g.size() != vf.B_blocks.front().rows())
    throw ModelError("mse_quadratic: receiver length mismatch");
  cplx quad = 0.0;
  cplx lin = 0.0;
  for (std::size_t i = 0; i < vf.L(); ++i) {
    const Vec fi = f.segment(static_cast<Eigen::Index>(vf.offsets[i]),
                             vf.E_blocks[i].rows());
    for (std::size_t j = 0; j < vf.L(); ++j) {
      const Vec fj = f.segment(static_cast<Eigen::Index>(vf.offsets[j]),
                               vf.E_blocks[j].rows());
      quad += fi.dot(vf.A_blocks[i][j] * fj);
    }
    quad += fi.dot(vf.C_blocks[i] * fi);
    lin += g.dot(vf.B_blocks[i] * fi);
  }
  return real_scalar(quad, "f^H(A+C)f") - 2.0 * lin.real() + vf.c;
}

/// The per-sensor slice of the vectorized form needed for one F_i update,
/// built without assembling the full Kronecker system.
struct SensorBlocks {
  Mat A_ii;
  Mat C_i;
  Vec Bh_g;  // B_i^H g
  Vec q;     // sum_{j != i} A_ij f_j
};

inline SensorBlocks assemble_sensor(const SystemModel& model,
                                    const BeamformerSet& bf,
                                    const Receiver& rx, std::size_t i) {
  check_dims(model, bf);
  check_dims(model, rx);
  const Mat& ss = model.source().covariance();
  const Mat& g = rx.mat();
  const auto& si = model.sensor(i);
  const Mat& hi = model.channel(i);
  const Mat hg = hi.adjoint() * g;  // N_i x K
  const Mat hggh = hg * hg.adjoint();
  const Mat ki = si.observation();

  SensorBlocks out;
  out.A_ii = kron((ki * ss * ki.adjoint()).transpose(), hggh);
  out.C_i = kron(si.noise().conjugate(), hggh);
  // (X^T (x) Y) vec(Z) = vec(Y Z X)
  out.Bh_g = vec(hg * ss * ki.adjoint());
  Mat coupling = Mat::Zero(hg.rows(), ki.rows());
  for (std::size_t j = 0; j < model.L(); ++j) {
    if (j == i) continue;
    coupling += hg * (g.adjoint() * model.channel(j) * bf.mat(j) *
                      model.sensor(j).observation()) *
                ss * ki.adjoint();
  }
  out.q = vec(coupling);
  return out;
}

/// Same slice, read off a fully assembled vectorized form.
inline SensorBlocks sensor_blocks(const VectorizedForm& vf,
                                  const BeamformerSet& bf, const Receiver& rx,
                                  std::size_t i) {
  if (i >= vf.L())
    throw ContractViolation("sensor index " + std::to_string(i) +
                            " out of range");
  SensorBlocks out;
  out.A_ii = vf.A_blocks[i][i];
  out.C_i = vf.C_blocks[i];
  out.Bh_g = vf.B_blocks[i].adjoint() * rx.vec();
  out.q = Vec::Zero(vf.E_blocks[i].rows());
  for (std::size_t j = 0; j < vf.L(); ++j)
    if (j != i) out.q += vf.A_blocks[i][j] * bf.vec(j);
  return out;
}

}  // namespace mmsebcd
