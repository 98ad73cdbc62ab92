#include "chanimp/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "chanimp/error.hpp"

namespace chanimp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Leading coefficient of the quadratic counts as zero below this fraction of
// sqrt(P11 P22).
constexpr double kDegenerateP21 = 1e-12;

void check_sizes(const SufficientStats& stats, const ChannelPrior& prior) {
  if (stats.packets() != prior.packets()) {
    throw DomainError("prior has " + std::to_string(prior.packets()) +
                      " packets but the statistics have " + std::to_string(stats.packets()));
  }
}

void require_nonsingular(const ChannelPrior& prior) {
  if (prior.is_singular()) {
    throw SingularError(
        "channel covariance is singular; use the slow_fading method for fully-correlated "
        "channels");
  }
}

bool all_zero(const CVector& v) { return (v.array() == cdouble(0.0)).all(); }

// Everything that stays fixed while F varies, in the prior's eigenbasis.
class Profile {
 public:
  Profile(const SufficientStats& stats, const ChannelPrior& prior)
      : prior_(prior),
        w1_(prior.to_eigenbasis(stats.v1)),
        w2_(prior.to_eigenbasis(stats.v2)),
        lambda_(prior.eigenvalues()),
        alpha_(stats.alpha()),
        noise_ratio_(stats.noise_var / stats.s1) {}

  // Eigenbasis coordinates of A(F)(V1 + alpha F* V2).
  CVector h_eigen(cdouble f) const {
    const double g = 1.0 + alpha_ * std::norm(f);
    CVector y = w1_ + (alpha_ * std::conj(f)) * w2_;
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      y[k] *= lambda_[k] / (g * lambda_[k] + noise_ratio_);
    }
    return y;
  }

  CVector h(cdouble f) const { return prior_.from_eigenbasis(h_eigen(f)); }

  cdouble g(cdouble f) const {
    const double gain = 1.0 + alpha_ * std::norm(f);
    cdouble acc = 0.0;
    for (Eigen::Index k = 0; k < w1_.size(); ++k) {
      const double den = gain * lambda_[k] + noise_ratio_;
      const double a = lambda_[k] / den;  // A(F) eigenvalue
      const double b = noise_ratio_ / den;  // A(F) (sn2/S1) C^{-1} eigenvalue
      const cdouble y = w1_[k] + alpha_ * std::conj(f) * w2_[k];
      acc += std::conj(y) * a * (a * (w2_[k] - f * w1_[k]) + b * w2_[k]);
    }
    return acc;
  }

 private:
  const ChannelPrior& prior_;
  CVector w1_;
  CVector w2_;
  const RVector& lambda_;
  double alpha_;
  double noise_ratio_;
};

// i.i.d. profile objective, monotone in the concentrated log-likelihood:
// c (P11 + 2 alpha Re(F* P12) + alpha^2 |F|^2 P22) / (1 + c alpha |F|^2).
double iid_profile(const CrossMoments& m, double c, double alpha, cdouble f) {
  const double num = m.p11 + 2.0 * alpha * std::real(std::conj(f) * m.p12) +
                     alpha * alpha * std::norm(f) * m.p22;
  return c * num / (1.0 + c * alpha * std::norm(f));
}

// Roots of  alpha P21 k F^2 - b F - q P12 = 0 written as
// F = [b +/- sqrt(b^2 + 4 alpha k q |P21|^2)] / (2 alpha k P21),
// in cancellation-free form. (k, q) = (c, 1) for the ML quadratic and
// (1, c d) for the consistent one.
std::pair<cdouble, cdouble> stable_roots(const CrossMoments& m, double b, double alpha, double k,
                                         double q, bool& degenerate) {
  if (!(m.p11 > 0.0)) {
    throw UnidentifiableError("V1 carries no energy; F is unidentifiable");
  }
  const double a21 = std::abs(m.p21);
  const double disc = std::sqrt(b * b + 4.0 * alpha * k * q * a21 * a21);
  degenerate = a21 <= kDegenerateP21 * std::sqrt(m.p11 * m.p22);
  if (degenerate) {
    if (b == 0.0) {
      throw UnidentifiableError("quadratic for F degenerates with no linear term");
    }
    const cdouble lin = -q * m.p12 / b;
    return {lin, lin};
  }
  const cdouble den = 2.0 * alpha * k * m.p21;
  cdouble plus;
  cdouble minus;
  if (b >= 0.0) {
    plus = (b + disc) / den;
    minus = -2.0 * q * m.p12 / (b + disc);
  } else {
    plus = 2.0 * q * m.p12 / (disc - b);
    minus = (b - disc) / den;
  }
  return {plus, minus};
}

struct NewtonResult {
  cdouble f;
  double residual;
  bool converged;
};

NewtonResult newton_root(const Profile& profile, double scale, cdouble seed,
                         const SolverSettings& settings) {
  const auto resid = [&](cdouble f) { return profile.g(f) / scale; };
  cdouble x = seed;
  cdouble r = resid(x);
  const double runaway = 1e8 * (1.0 + std::abs(seed));
  // Steps taken after the tolerance is met; they only polish round-off.
  int polish = 0;
  for (int it = 0; it < settings.max_iterations; ++it) {
    if (std::abs(r) < settings.root_tolerance && ++polish > 2) break;
    const double h = 1e-7 * std::max(1.0, std::abs(x));
    const cdouble dre = (resid(x + h) - resid(x - h)) / (2.0 * h);
    const cdouble dim = (resid(x + cdouble(0.0, h)) - resid(x - cdouble(0.0, h))) / (2.0 * h);
    // [Re dre  Re dim] [dx]   [-Re r]
    // [Im dre  Im dim] [dy] = [-Im r]
    const double det = dre.real() * dim.imag() - dim.real() * dre.imag();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
    const double dx = (-r.real() * dim.imag() + dim.real() * r.imag()) / det;
    const double dy = (-dre.real() * r.imag() + dre.imag() * r.real()) / det;
    const cdouble step(dx, dy);
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const cdouble cand = x + t * step;
      const cdouble rc = resid(cand);
      if (std::abs(rc) < std::abs(r)) {
        x = cand;
        r = rc;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved || std::abs(x) > runaway) break;
  }
  return {x, std::abs(r), std::abs(r) < settings.root_tolerance};
}

HybridEstimate unidentifiable_estimate(std::size_t packets, Method method) {
  HybridEstimate est;
  est.h = CVector::Zero(static_cast<Eigen::Index>(packets));
  est.f = {kNaN, kNaN};
  est.loglik = kNaN;
  est.method = method;
  est.identifiable = false;
  return est;
}

}  // namespace

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::general:
      return "map_ml_general";
    case Method::iid_quadratic:
      return "iid_quadratic";
    case Method::low_noise:
      return "low_noise";
    case Method::single_packet:
      return "single_packet";
    case Method::slow_fading:
      return "slow_fading";
    case Method::consistent:
      return "consistent";
  }
  return "unknown";
}

void SolverSettings::validate() const {
  if (!(root_tolerance > 0.0)) throw DomainError("root_tolerance must be positive");
  if (max_iterations < 1) throw DomainError("max_iterations must be at least 1");
  if (!(dedupe_radius >= 0.0)) throw DomainError("dedupe_radius must be non-negative");
}

double hybrid_loglik(const CVector& h, cdouble f, const SufficientStats& stats,
                     const ChannelPrior& prior) {
  check_sizes(stats, prior);
  if (static_cast<std::size_t>(h.size()) != stats.packets()) {
    throw DomainError("H length does not match the statistics");
  }
  require_nonsingular(prior);
  const double fit1 = (stats.v1 - h).squaredNorm();
  const double fit2 = (stats.v2 - f * h).squaredNorm();
  if (stats.noise_var == 0.0) {
    return -(stats.s1 * fit1 + stats.s2 * fit2);
  }
  const double l = static_cast<double>(stats.packets());
  const double pi = std::numbers::pi;
  const double obs = -(stats.s1 * fit1 + stats.s2 * fit2) / stats.noise_var -
                     l * std::log(pi * stats.noise_var / stats.s1) -
                     l * std::log(pi * stats.noise_var / stats.s2);
  const double pri = -prior.inverse_quadratic(h) - l * std::log(pi) - prior.log_det();
  return obs + pri;
}

double slow_fading_loglik(cdouble h, cdouble f, const SufficientStats& stats, double sigma_h2) {
  if (!(sigma_h2 > 0.0)) throw DomainError("sigma_H^2 must be positive");
  const double fit1 = (stats.v1.array() - h).abs2().sum();
  const double fit2 = (stats.v2.array() - f * h).abs2().sum();
  if (stats.noise_var == 0.0) {
    return -(stats.s1 * fit1 + stats.s2 * fit2);
  }
  const double l = static_cast<double>(stats.packets());
  const double pi = std::numbers::pi;
  return -(stats.s1 * fit1 + stats.s2 * fit2) / stats.noise_var -
         l * std::log(pi * stats.noise_var / stats.s1) -
         l * std::log(pi * stats.noise_var / stats.s2) - std::norm(h) / sigma_h2 -
         std::log(pi * sigma_h2);
}

LoglikGradient hybrid_gradient(const CVector& h, cdouble f, const SufficientStats& stats,
                               const ChannelPrior& prior) {
  check_sizes(stats, prior);
  require_nonsingular(prior);
  if (!(stats.noise_var > 0.0)) throw DomainError("gradient needs positive noise variance");
  const double a1 = stats.s1 / stats.noise_var;
  const double a2 = stats.s2 / stats.noise_var;
  const CVector r2 = stats.v2 - f * h;
  CVector cinv_h = prior.to_eigenbasis(h);
  cinv_h.array() /= prior.eigenvalues().array().cast<cdouble>();
  cinv_h = prior.from_eigenbasis(cinv_h);
  LoglikGradient g;
  g.h = a1 * (stats.v1 - h) + (a2 * std::conj(f)) * r2 - cinv_h;
  g.f = a2 * h.dot(r2);
  return g;
}

CVector map_h_given_f(cdouble f, const SufficientStats& stats, const ChannelPrior& prior) {
  check_sizes(stats, prior);
  require_nonsingular(prior);
  return Profile(stats, prior).h(f);
}

cdouble g_of_f(cdouble f, const SufficientStats& stats, const ChannelPrior& prior) {
  check_sizes(stats, prior);
  require_nonsingular(prior);
  return Profile(stats, prior).g(f);
}

double shrinkage(double s1, double sigma_h2, double noise_var) {
  const double sig = s1 * sigma_h2;
  if (!(sig > 0.0)) throw DomainError("shrinkage needs S1 sigma_H^2 > 0");
  return sig / (sig + noise_var);
}

double consistency_factor(double s1, double sigma_h2, double noise_var) {
  if (!(s1 * sigma_h2 > 0.0)) throw DomainError("consistency factor needs S1 sigma_H^2 > 0");
  const double e = noise_var / (s1 * sigma_h2);
  return 1.0 - e * e;
}

QuadraticRoots ml_f_iid(const CrossMoments& m, double c, double alpha) {
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("shrinkage c must lie in (0, 1]");
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  const double b = alpha * m.p22 - c * m.p11;
  QuadraticRoots out;
  const auto [plus, minus] = stable_roots(m, b, alpha, c, 1.0, out.degenerate);
  out.plus = plus;
  out.minus = minus;
  if (out.degenerate) {
    out.selected = plus;
  } else {
    out.selected = iid_profile(m, c, alpha, minus) > iid_profile(m, c, alpha, plus) ? minus : plus;
  }
  return out;
}

QuadraticRoots ml_f_low_noise(const CrossMoments& m, double alpha) {
  return ml_f_iid(m, 1.0, alpha);
}

cdouble consistent_f(const CrossMoments& m, double c, double d, double alpha) {
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("shrinkage c must lie in (0, 1]");
  if (!(d > 0.0 && d <= 1.0)) {
    throw DomainError("consistency factor d must lie in (0, 1]; SNR too low for S1");
  }
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  const double b = alpha * m.p22 - c * m.p11;
  bool degenerate = false;
  return stable_roots(m, b, alpha, 1.0, c * d, degenerate).first;
}

std::pair<cdouble, cdouble> single_packet_closed_form(cdouble v1, cdouble v2, double c) {
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("shrinkage c must lie in (0, 1]");
  if (v1 == 0.0) throw UnidentifiableError("V1 = 0; F is unidentifiable from this packet");
  return {c * v1, v2 / (c * v1)};
}

HybridEstimate joint_map_ml_general(const SufficientStats& stats, const ChannelPrior& prior,
                                    const SolverSettings& settings) {
  settings.validate();
  check_sizes(stats, prior);
  require_nonsingular(prior);
  if (all_zero(stats.v1)) {
    throw UnidentifiableError("V1 carries no energy; F is unidentifiable");
  }
  const Profile profile(stats, prior);
  const double scale = stats.v1.squaredNorm() + stats.v2.squaredNorm();
  const CrossMoments m = cross_moments(stats);
  const double alpha = stats.alpha();

  std::vector<cdouble> seeds;
  try {
    const double c = shrinkage(stats.s1, prior.sigma_h2(), stats.noise_var);
    const QuadraticRoots iid = ml_f_iid(m, c, alpha);
    seeds.push_back(iid.plus);
    seeds.push_back(iid.minus);
  } catch (const Error&) {
  }
  try {
    const QuadraticRoots low = ml_f_low_noise(m, alpha);
    seeds.push_back(low.plus);
    seeds.push_back(low.minus);
  } catch (const Error&) {
  }
  seeds.push_back(0.0);
  seeds.insert(seeds.end(), settings.multistart.begin(), settings.multistart.end());

  HybridEstimate est;
  est.method = Method::general;
  double best_residual = std::numeric_limits<double>::infinity();
  for (const cdouble seed : seeds) {
    if (!std::isfinite(seed.real()) || !std::isfinite(seed.imag())) continue;
    const NewtonResult nr = newton_root(profile, scale, seed, settings);
    best_residual = std::min(best_residual, nr.residual);
    if (!nr.converged) continue;
    const bool duplicate = std::any_of(
        est.candidates.begin(), est.candidates.end(), [&](const RootCandidate& c) {
          return std::abs(c.f - nr.f) <= settings.dedupe_radius * (1.0 + std::abs(nr.f));
        });
    if (duplicate) continue;
    const double ll = hybrid_loglik(profile.h(nr.f), nr.f, stats, prior);
    est.candidates.push_back({nr.f, ll, nr.residual});
  }
  if (est.candidates.empty()) {
    throw SolverFailure("no root of g(F) converged from any seed", best_residual);
  }
  const auto best = std::max_element(
      est.candidates.begin(), est.candidates.end(),
      [](const RootCandidate& a, const RootCandidate& b) { return a.loglik < b.loglik; });
  est.f = best->f;
  est.loglik = best->loglik;
  est.h = profile.h(est.f);
  return est;
}

namespace {

// H from map_h_given_f for each quadratic root, best by hybrid log-likelihood.
HybridEstimate select_quadratic(const QuadraticRoots& roots, const SufficientStats& stats,
                                const ChannelPrior& prior, Method method) {
  const Profile profile(stats, prior);
  HybridEstimate est;
  est.method = method;
  const CVector hp = profile.h(roots.plus);
  const double lp = hybrid_loglik(hp, roots.plus, stats, prior);
  est.candidates.push_back({roots.plus, lp, 0.0});
  est.h = hp;
  est.f = roots.plus;
  est.loglik = lp;
  if (!roots.degenerate) {
    const CVector hm = profile.h(roots.minus);
    const double lm = hybrid_loglik(hm, roots.minus, stats, prior);
    est.candidates.push_back({roots.minus, lm, 0.0});
    if (lm > lp) {
      est.h = hm;
      est.f = roots.minus;
      est.loglik = lm;
      est.minus_root_selected = true;
    }
  }
  return est;
}

}  // namespace

HybridEstimate estimate_iid(const SufficientStats& stats, const ChannelPrior& prior) {
  check_sizes(stats, prior);
  require_nonsingular(prior);
  const double c = shrinkage(stats.s1, prior.sigma_h2(), stats.noise_var);
  const QuadraticRoots roots = ml_f_iid(cross_moments(stats), c, stats.alpha());
  return select_quadratic(roots, stats, prior, Method::iid_quadratic);
}

HybridEstimate estimate_low_noise(const SufficientStats& stats, const ChannelPrior& prior) {
  check_sizes(stats, prior);
  require_nonsingular(prior);
  const QuadraticRoots roots = ml_f_low_noise(cross_moments(stats), stats.alpha());
  return select_quadratic(roots, stats, prior, Method::low_noise);
}

HybridEstimate estimate_single_packet(const SufficientStats& stats, double sigma_h2) {
  if (stats.packets() != 1) {
    throw DomainError("single-packet estimator needs exactly one packet");
  }
  const double c = shrinkage(stats.s1, sigma_h2, stats.noise_var);
  const cdouble v1 = stats.v1[0];
  const cdouble v2 = stats.v2[0];
  if (v1 == 0.0) {
    return unidentifiable_estimate(1, Method::single_packet);
  }
  const auto [h, f] = single_packet_closed_form(v1, v2, c);
  const ChannelPrior prior = ChannelPrior::iid(1, sigma_h2);
  HybridEstimate est;
  est.method = Method::single_packet;
  est.h = CVector::Constant(1, h);
  est.f = f;
  est.loglik = hybrid_loglik(est.h, f, stats, prior);
  est.candidates.push_back({f, est.loglik, 0.0});
  if (v2 != 0.0) {
    const cdouble f2 = -std::conj(v1) / (stats.alpha() * std::conj(v2));
    est.candidates.push_back({f2, hybrid_loglik(CVector::Zero(1), f2, stats, prior), 0.0});
  }
  return est;
}

HybridEstimate estimate_slow_fading(const SufficientStats& stats, double sigma_h2) {
  const auto n = static_cast<Eigen::Index>(stats.packets());
  const double l = static_cast<double>(n);
  const cdouble v1 = stats.v1.mean();
  const cdouble v2 = stats.v2.mean();
  if (v1 == 0.0) {
    return unidentifiable_estimate(stats.packets(), Method::slow_fading);
  }
  const double c = shrinkage(l * stats.s1, sigma_h2, stats.noise_var);
  const auto [h, f] = single_packet_closed_form(v1, v2, c);
  HybridEstimate est;
  est.method = Method::slow_fading;
  est.h = CVector::Constant(n, h);
  est.f = f;
  est.loglik = slow_fading_loglik(h, f, stats, sigma_h2);
  est.candidates.push_back({f, est.loglik, 0.0});
  if (v2 != 0.0) {
    const cdouble f2 = -std::conj(v1) / (stats.alpha() * std::conj(v2));
    est.candidates.push_back({f2, slow_fading_loglik(0.0, f2, stats, sigma_h2), 0.0});
  }
  return est;
}

HybridEstimate estimate_consistent(const SufficientStats& stats, const ChannelPrior& prior) {
  check_sizes(stats, prior);
  require_nonsingular(prior);
  const double sh2 = prior.sigma_h2();
  const double c = shrinkage(stats.s1, sh2, stats.noise_var);
  const double d = consistency_factor(stats.s1, sh2, stats.noise_var);
  HybridEstimate est;
  est.method = Method::consistent;
  est.f = consistent_f(cross_moments(stats), c, d, stats.alpha());
  est.h = map_h_given_f(est.f, stats, prior);
  est.loglik = hybrid_loglik(est.h, est.f, stats, prior);
  return est;
}

HybridEstimate estimate(Method method, const SufficientStats& stats, const ChannelPrior& prior,
                        const SolverSettings& settings) {
  switch (method) {
    case Method::general:
      return joint_map_ml_general(stats, prior, settings);
    case Method::iid_quadratic:
      return estimate_iid(stats, prior);
    case Method::low_noise:
      return estimate_low_noise(stats, prior);
    case Method::single_packet:
      check_sizes(stats, prior);
      return estimate_single_packet(stats, prior.sigma_h2());
    case Method::slow_fading:
      check_sizes(stats, prior);
      return estimate_slow_fading(stats, prior.sigma_h2());
    case Method::consistent:
      return estimate_consistent(stats, prior);
  }
  throw DomainError("unknown estimation method");
}

}  // namespace chanimp
