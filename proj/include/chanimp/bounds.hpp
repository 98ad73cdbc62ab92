#pragma once

#include <cstddef>
#include <utility>

#include "chanimp/model.hpp"

namespace chanimp {

/// Hybrid Cramer-Rao bound. The bound is block diagonal: an L x L block for
/// the channel vector and a scalar for F.
struct HcrbReport {
  /// [((S1 + |F|^2 S2) / sn2) I + C_H^{-1}]^{-1}
  CMatrix h_block;
  /// sn2 / (S2 Tr[C_H])
  double f_bound = 0.0;
};

/// Evaluates both blocks. Singular priors are accepted: directions with zero
/// prior variance get a zero bound, which is the limit of the nonsingular
/// formula.
HcrbReport hcrb(cdouble f, const ChannelPrior& prior, double s1, double s2, double noise_var);

/// Tr[h_block] / Tr[C_H]: the bound on E||H_hat - H||^2 / (L sigma_H^2).
/// Needs only the eigenvalues, so it is cheap for long i.i.d. sequences.
double hcrb_relative_channel(cdouble f, const ChannelPrior& prior, double s1, double s2,
                             double noise_var);

/// f_bound on its own; needs only Tr[C_H] > 0.
double hcrb_f(const ChannelPrior& prior, double s2, double noise_var);

/// Large-L limits of the two i.i.d. quadratic roots under population moments:
/// [a|F|^2 - cd +/- sqrt((a|F|^2 - cd)^2 + 4 a c |F|^2)] / (2 a c F*).
std::pair<cdouble, cdouble> asymptotic_ml_limit(cdouble f, double sigma_h2, double noise_var,
                                                double s1, double s2);

/// Monte Carlo averages of the complex score s = dL/dtheta*, theta = [H; F],
/// evaluated at the true parameters over draws of (H, V).
struct ScoreMoments {
  /// mean of s s^T; vanishes when the HCRB applies
  CMatrix pseudo;
  /// entrywise standard errors of Re / Im of `pseudo`
  Eigen::MatrixXd pseudo_se_re;
  Eigen::MatrixXd pseudo_se_im;
  /// mean of s s^H; estimates the hybrid information matrix
  CMatrix information;
  std::size_t trials = 0;
};

ScoreMoments pseudo_information_mc(cdouble f, const ChannelPrior& prior,
                                   const ReceiverScenario& scenario, std::size_t trials,
                                   Rng& rng);

}  // namespace chanimp
