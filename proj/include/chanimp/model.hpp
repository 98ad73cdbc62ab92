#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "chanimp/rng.hpp"

namespace chanimp {

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Passive two-terminal impedance in ohms.
struct Impedance {
  double resistance = 0.0;
  double reactance = 0.0;

  Impedance() = default;
  Impedance(double r, double x);
  explicit Impedance(cdouble z);

  cdouble value() const noexcept { return {resistance, reactance}; }

  friend bool operator==(const Impedance&, const Impedance&) = default;
};

/// Two-state load schedule: Z1 for the first K training symbols, Z2 for the
/// remaining T - K.
struct LoadSwitchPlan {
  Impedance z1;
  Impedance z2;
  std::size_t split = 0;   // K
  std::size_t length = 0;  // T

  LoadSwitchPlan(Impedance z1, Impedance z2, std::size_t split,
                 std::size_t length);
};

/// Training symbols partitioned at `split` into x1 (first K) and x2 (rest).
class TrainingSequence {
 public:
  TrainingSequence(CVector symbols, std::size_t split);

  const CVector& symbols() const noexcept { return symbols_; }
  std::size_t length() const noexcept { return static_cast<std::size_t>(symbols_.size()); }
  std::size_t split() const noexcept { return split_; }

  Eigen::VectorBlock<const CVector> x1() const { return symbols_.head(split_); }
  Eigen::VectorBlock<const CVector> x2() const {
    return symbols_.tail(symbols_.size() - static_cast<Eigen::Index>(split_));
  }

  /// ||x1||^2
  double s1() const noexcept { return s1_; }
  /// ||x2||^2
  double s2() const noexcept { return s2_; }

 private:
  CVector symbols_;
  std::size_t split_;
  double s1_;
  double s2_;
};

/// Even-length Zadoff-Chu sequence x_n = exp(-j pi u n^2 / T), split at K.
TrainingSequence zadoff_chu(std::size_t length, std::size_t root,
                            std::size_t split);

/// F = (1 + ZA/Z1) / (1 + ZA/Z2).
cdouble f_from_impedance(const Impedance& antenna, const Impedance& z1,
                         const Impedance& z2);

/// Inverse of f_from_impedance: ZA = (1 - F) / (F/Z2 - 1/Z1).
///
/// The returned impedance may have negative resistance when F lies outside the
/// image of passive antennas; callers that need passivity check it.
Impedance impedance_from_f(cdouble f, const Impedance& z1, const Impedance& z2);

/// Effective channel H = Z1 G / (ZA + Z1).
cdouble effective_channel(cdouble path_gain, const Impedance& antenna,
                          const Impedance& z1);

/// Ground truth for one receiver: antenna, load plan, training and noise.
class ReceiverScenario {
 public:
  ReceiverScenario(Impedance antenna, LoadSwitchPlan plan,
                   TrainingSequence training, double noise_var);

  const Impedance& antenna() const noexcept { return antenna_; }
  const LoadSwitchPlan& plan() const noexcept { return plan_; }
  const TrainingSequence& training() const noexcept { return training_; }
  double noise_var() const noexcept { return noise_var_; }

  cdouble f() const noexcept { return f_; }
  double s1() const noexcept { return training_.s1(); }
  double s2() const noexcept { return training_.s2(); }
  double alpha() const noexcept { return training_.s2() / training_.s1(); }

  ReceiverScenario with_noise_var(double noise_var) const;
  ReceiverScenario with_antenna(const Impedance& antenna) const;

 private:
  Impedance antenna_;
  LoadSwitchPlan plan_;
  TrainingSequence training_;
  double noise_var_;
  cdouble f_;
};

/// Dipole at 73 + j42.5 ohm, Z1 = 50, Z2 = 50 + j20, ZC training with T = 64,
/// K = 32.
ReceiverScenario reference_scenario(double noise_var = 1.0);

/// Known covariance of the L-packet channel vector H ~ CN(0, C_H).
///
/// Besides the dense matrix the prior keeps an eigendecomposition, which is
/// what the estimators and bounds work in. The i.i.d. kind never stores a
/// dense basis, so very long packet sequences stay cheap.
class ChannelPrior {
 public:
  enum class Kind { iid, slow_fading, exponential, explicit_matrix };

  static ChannelPrior iid(std::size_t packets, double sigma_h2);
  static ChannelPrior slow_fading(std::size_t packets, double sigma_h2);
  /// C[i,j] = sigma_h2 * r^|i-j|, 0 <= r < 1.
  static ChannelPrior exponential(std::size_t packets, double sigma_h2, double r);
  /// Hermitian positive-semidefinite matrix; rejected otherwise.
  static ChannelPrior explicit_covariance(const CMatrix& covariance);

  Kind kind() const noexcept { return kind_; }
  std::size_t packets() const noexcept { return packets_; }
  /// Tr[C_H] / L; equals sigma_H^2 for every parametric kind.
  double sigma_h2() const noexcept { return trace_ / static_cast<double>(packets_); }
  double trace() const noexcept { return trace_; }
  /// Correlation coefficient of the exponential kind, 0 otherwise.
  double correlation() const noexcept { return r_; }

  CMatrix covariance() const;
  const RVector& eigenvalues() const noexcept { return eigenvalues_; }
  bool is_singular() const noexcept { return singular_; }

  /// U^H x, where C_H = U diag(eigenvalues) U^H.
  CVector to_eigenbasis(const CVector& x) const;
  /// U y.
  CVector from_eigenbasis(const CVector& y) const;

  /// ln det C_H. Throws SingularError for singular priors.
  double log_det() const;
  /// h^H C_H^{-1} h. Throws SingularError for singular priors.
  double inverse_quadratic(const CVector& h) const;

  /// Same kind with every eigenvalue multiplied by `factor`.
  ChannelPrior scaled(double factor) const;

  ChannelPrior with_packets(std::size_t packets) const;

 private:
  ChannelPrior() = default;
  void finish();

  Kind kind_ = Kind::iid;
  std::size_t packets_ = 0;
  double r_ = 0.0;
  double param_sigma_h2_ = 0.0;
  double trace_ = 0.0;
  bool singular_ = false;
  std::optional<CMatrix> dense_;  // explicit / exponential
  std::optional<CMatrix> basis_;  // U, absent for iid and slow fading
  RVector eigenvalues_;
};

/// One draw of H ~ CN(0, C_H).
CVector sample_channels(const ChannelPrior& prior, Rng& rng);

/// Raw received samples of one packet, length T.
struct PacketObservation {
  CVector v;
};

/// v = [H x1; F H x2] + n with n ~ CN(0, sigma_n^2 I).
PacketObservation simulate_packet(cdouble h, cdouble f,
                                  const ReceiverScenario& scenario, Rng& rng);

}  // namespace chanimp
