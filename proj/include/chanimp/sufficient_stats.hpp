#pragma once

#include <span>
#include <utility>

#include "chanimp/model.hpp"

namespace chanimp {

/// Matched-filter reduction of L packets.
///
/// Conditioned on H, V1 = H + N1 and V2 = F H + N2 with N1 ~ CN(0, sigma_n^2/S1 I)
/// and N2 ~ CN(0, sigma_n^2/S2 I) independent, i.e. V = [V1; V2] has mean
/// [H; F H] and block-diagonal covariance diag(sigma_n^2/S1 I, sigma_n^2/S2 I).
struct SufficientStats {
  CVector v1;
  CVector v2;
  double s1 = 0.0;
  double s2 = 0.0;
  double noise_var = 0.0;

  SufficientStats() = default;
  SufficientStats(CVector v1, CVector v2, double s1, double s2, double noise_var);

  std::size_t packets() const noexcept { return static_cast<std::size_t>(v1.size()); }
  double alpha() const noexcept { return s2 / s1; }
};

/// P_ij = (1/L) V_i^H V_j.
struct CrossMoments {
  double p11 = 0.0;
  cdouble p12;
  cdouble p21;
  double p22 = 0.0;
};

/// (x1^H v1 / S1, x2^H v2 / S2) for one packet.
std::pair<cdouble, cdouble> reduce_packet(const PacketObservation& obs,
                                          const TrainingSequence& training);

SufficientStats reduce_all(std::span<const PacketObservation> packets,
                           const TrainingSequence& training, double noise_var);

CrossMoments cross_moments(const SufficientStats& stats);

/// Draws V directly from its conditional law given H. Equivalent in
/// distribution to simulating raw packets and reducing them, at a fraction of
/// the cost.
SufficientStats draw_stats(const CVector& h, cdouble f, const ReceiverScenario& scenario,
                           Rng& rng);

/// Simulates L raw packets for the channel vector h and reduces them.
SufficientStats simulate_and_reduce(const CVector& h, cdouble f,
                                    const ReceiverScenario& scenario, Rng& rng);

}  // namespace chanimp
