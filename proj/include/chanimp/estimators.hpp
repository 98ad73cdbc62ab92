#pragma once

#include <string_view>
#include <vector>

#include "chanimp/model.hpp"
#include "chanimp/sufficient_stats.hpp"

namespace chanimp {

enum class Method { general, iid_quadratic, low_noise, single_packet, slow_fading, consistent };

std::string_view to_string(Method method) noexcept;

/// A stationary point examined while resolving multiple roots.
struct RootCandidate {
  cdouble f;
  double loglik = 0.0;
  double residual = 0.0;  // |g(F)| / (||V1||^2 + ||V2||^2); 0 for closed forms
};

/// Joint estimate of the channel vector and F.
struct HybridEstimate {
  CVector h;
  cdouble f;
  double loglik = 0.0;
  Method method = Method::general;
  std::vector<RootCandidate> candidates;
  /// False when V1 carries no energy; h is then zero and f is NaN.
  bool identifiable = true;
  /// Diagnostic for the quadratic closed forms: the "-" root had the larger
  /// likelihood.
  bool minus_root_selected = false;
};

struct SolverSettings {
  /// Convergence threshold on |g(F)| / (||V1||^2 + ||V2||^2).
  double root_tolerance = 1e-11;
  int max_iterations = 100;
  /// Seeds tried in addition to the closed-form ones.
  std::vector<cdouble> multistart;
  /// Roots closer than dedupe_radius * (1 + |F|) are merged.
  double dedupe_radius = 1e-6;

  void validate() const;
};

/// ln p(V, H; F) including every normalization constant.
///
/// With zero noise variance the density degenerates; the function then
/// returns -(S1 ||V1 - H||^2 + S2 ||V2 - F H||^2), the limit of
/// sigma_n^2 ln p, which ranks candidates the same way.
double hybrid_loglik(const CVector& h, cdouble f, const SufficientStats& stats,
                     const ChannelPrior& prior);

/// ln p(V, h 1; F) for the fully-correlated channel h 1, h ~ CN(0, sigma_h2).
double slow_fading_loglik(cdouble h, cdouble f, const SufficientStats& stats, double sigma_h2);

/// Complex gradient dL/dtheta* = (1/2)(dL/dtheta_r + j dL/dtheta_i).
struct LoglikGradient {
  CVector h;  // (S1/sn2)(V1 - H) + (S2/sn2) F*(V2 - F H) - C^{-1} H
  cdouble f;  // (S2/sn2) H^H (V2 - F H)
};

LoglikGradient hybrid_gradient(const CVector& h, cdouble f, const SufficientStats& stats,
                               const ChannelPrior& prior);

/// A(F) (V1 + alpha F* V2) with A(F) = [(1 + alpha|F|^2) I + (sn2/S1) C^{-1}]^{-1}.
CVector map_h_given_f(cdouble f, const SufficientStats& stats, const ChannelPrior& prior);

/// (V1 + alpha F* V2)^H A^H A (V2 - F V1 + (sn2/S1) C^{-1} V2). Zeros are the
/// stationary points of the profile likelihood in F.
cdouble g_of_f(cdouble f, const SufficientStats& stats, const ChannelPrior& prior);

/// c = S1 sH2 / (S1 sH2 + sn2).
double shrinkage(double s1, double sigma_h2, double noise_var);
/// d = 1 - (sn2 / (S1 sH2))^2.
double consistency_factor(double s1, double sigma_h2, double noise_var);

struct QuadraticRoots {
  cdouble plus;
  cdouble minus;
  /// Root with the larger i.i.d. profile likelihood.
  cdouble selected;
  /// |P21| collapsed; both roots hold the finite linear solution.
  bool degenerate = false;
};

/// Roots of P12 + (alpha P22 - c P11) F - alpha c P21 F^2 = 0.
QuadraticRoots ml_f_iid(const CrossMoments& m, double c, double alpha);

/// ml_f_iid with c = 1.
QuadraticRoots ml_f_low_noise(const CrossMoments& m, double alpha);

/// [alpha P22 - c P11 + sqrt((alpha P22 - c P11)^2 + 4 alpha c d |P21|^2)] / (2 alpha P21)
cdouble consistent_f(const CrossMoments& m, double c, double d, double alpha);

/// Closed-form single-packet pair (c V1, V2 / (c V1)).
std::pair<cdouble, cdouble> single_packet_closed_form(cdouble v1, cdouble v2, double c);

/// General-covariance joint MAP/ML: damped Newton on g(F) from several seeds,
/// candidate H from map_h_given_f, selection by hybrid log-likelihood.
HybridEstimate joint_map_ml_general(const SufficientStats& stats, const ChannelPrior& prior,
                                    const SolverSettings& settings = {});

/// F from the i.i.d. quadratic (c from Tr[C_H]/L), H from map_h_given_f.
HybridEstimate estimate_iid(const SufficientStats& stats, const ChannelPrior& prior);

/// F from the low-noise quadratic, H from map_h_given_f.
HybridEstimate estimate_low_noise(const SufficientStats& stats, const ChannelPrior& prior);

/// L = 1 closed form. Also records the second stationary point
/// (0, -V1* / (alpha V2*)).
HybridEstimate estimate_single_packet(const SufficientStats& stats, double sigma_h2);

/// Fully-correlated channel: pools all packets into one of size L T.
HybridEstimate estimate_slow_fading(const SufficientStats& stats, double sigma_h2);

/// Consistent F estimate with H from map_h_given_f.
HybridEstimate estimate_consistent(const SufficientStats& stats, const ChannelPrior& prior);

/// Dispatches on `method`. slow_fading and single_packet use Tr[C_H]/L as sigma_H^2.
HybridEstimate estimate(Method method, const SufficientStats& stats, const ChannelPrior& prior,
                        const SolverSettings& settings = {});

}  // namespace chanimp
