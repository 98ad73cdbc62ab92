#include "chanimp/bounds.hpp"

#include <cmath>
#include <limits>

#include "chanimp/error.hpp"
#include "chanimp/estimators.hpp"
#include "chanimp/sufficient_stats.hpp"

namespace chanimp {

namespace {

void check_inputs(double s1, double s2, double noise_var) {
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw DomainError("S1 and S2 must be positive");
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
    throw DomainError("noise variance must be finite and non-negative");
  }
}

// Eigenvalues of the channel block.
RVector channel_block_spectrum(cdouble f, const ChannelPrior& prior, double s1, double s2,
                               double noise_var) {
  const double gain = s1 + std::norm(f) * s2;
  const RVector& lam = prior.eigenvalues();
  RVector mu(lam.size());
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    const double den = gain * lam[k] + noise_var;
    mu[k] = den > 0.0 ? lam[k] * noise_var / den : 0.0;
  }
  return mu;
}

}  // namespace

HcrbReport hcrb(cdouble f, const ChannelPrior& prior, double s1, double s2, double noise_var) {
  check_inputs(s1, s2, noise_var);
  HcrbReport out;
  out.f_bound = hcrb_f(prior, s2, noise_var);
  const RVector mu = channel_block_spectrum(f, prior, s1, s2, noise_var);
  const auto n = static_cast<Eigen::Index>(prior.packets());
  out.h_block.resize(n, n);
  CVector e = CVector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e.setZero();
    e[j] = 1.0;
    CVector w = prior.to_eigenbasis(e);
    w.array() *= mu.array().cast<cdouble>();
    out.h_block.col(j) = prior.from_eigenbasis(w);
  }
  return out;
}

double hcrb_relative_channel(cdouble f, const ChannelPrior& prior, double s1, double s2,
                             double noise_var) {
  check_inputs(s1, s2, noise_var);
  if (!(prior.trace() > 0.0)) throw DomainError("Tr[C_H] must be positive");
  return channel_block_spectrum(f, prior, s1, s2, noise_var).sum() / prior.trace();
}

double hcrb_f(const ChannelPrior& prior, double s2, double noise_var) {
  if (!(prior.trace() > 0.0)) throw DomainError("Tr[C_H] must be positive for the F bound");
  if (!(s2 > 0.0)) throw DomainError("S2 must be positive");
  return noise_var / (s2 * prior.trace());
}

std::pair<cdouble, cdouble> asymptotic_ml_limit(cdouble f, double sigma_h2, double noise_var,
                                                double s1, double s2) {
  check_inputs(s1, s2, noise_var);
  if (!(sigma_h2 > 0.0)) throw DomainError("sigma_H^2 must be positive");
  const double alpha = s2 / s1;
  const double c = shrinkage(s1, sigma_h2, noise_var);
  const double d = consistency_factor(s1, sigma_h2, noise_var);
  const double b = alpha * std::norm(f) - c * d;
  const double disc = std::sqrt(b * b + 4.0 * alpha * c * std::norm(f));
  const cdouble den = 2.0 * alpha * c * std::conj(f);
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Same cancellation-free arrangement as the finite-L roots.
  cdouble plus;
  cdouble minus;
  if (b >= 0.0) {
    plus = den != 0.0 ? (b + disc) / den : cdouble(inf, inf);
    minus = -2.0 * f / (b + disc);
  } else {
    plus = 2.0 * f / (disc - b);
    minus = den != 0.0 ? (b - disc) / den : cdouble(inf, inf);
  }
  return {plus, minus};
}

ScoreMoments pseudo_information_mc(cdouble f, const ChannelPrior& prior,
                                   const ReceiverScenario& scenario, std::size_t trials,
                                   Rng& rng) {
  if (trials < 2) throw DomainError("need at least two trials");
  if (prior.is_singular()) throw SingularError("pseudo-information needs a nonsingular prior");
  if (!(scenario.noise_var() > 0.0)) throw DomainError("noise variance must be positive");
  const auto n = static_cast<Eigen::Index>(prior.packets()) + 1;
  CMatrix sum_t = CMatrix::Zero(n, n);
  Eigen::MatrixXd sq_re = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd sq_im = Eigen::MatrixXd::Zero(n, n);
  CMatrix sum_h = CMatrix::Zero(n, n);
  CVector score(n);
  for (std::size_t t = 0; t < trials; ++t) {
    const CVector h = sample_channels(prior, rng);
    const SufficientStats stats = draw_stats(h, f, scenario, rng);
    const LoglikGradient g = hybrid_gradient(h, f, stats, prior);
    score.head(n - 1) = g.h;
    score[n - 1] = g.f;
    const CMatrix outer_t = score * score.transpose();
    sum_t += outer_t;
    sq_re.array() += outer_t.real().array().square();
    sq_im.array() += outer_t.imag().array().square();
    sum_h += score * score.adjoint();
  }
  const double m = static_cast<double>(trials);
  ScoreMoments out;
  out.trials = trials;
  out.pseudo = sum_t / m;
  out.information = sum_h / m;
  const auto se = [m](const Eigen::MatrixXd& sq, const Eigen::MatrixXd& mean) {
    Eigen::MatrixXd var = (sq.array() / m - mean.array().square()) * (m / (m - 1.0));
    return Eigen::MatrixXd((var.array().max(0.0) / m).sqrt());
  };
  out.pseudo_se_re = se(sq_re, out.pseudo.real());
  out.pseudo_se_im = se(sq_im, out.pseudo.imag());
  return out;
}

}  // namespace chanimp
