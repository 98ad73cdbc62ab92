#include "chanimp/sufficient_stats.hpp"

#include <cmath>
#include <vector>

#include "chanimp/error.hpp"

namespace chanimp {

SufficientStats::SufficientStats(CVector v1_, CVector v2_, double s1_, double s2_,
                                 double noise_var_)
    : v1(std::move(v1_)), v2(std::move(v2_)), s1(s1_), s2(s2_), noise_var(noise_var_) {
  if (v1.size() == 0 || v1.size() != v2.size()) {
    throw DomainError("V1 and V2 must be nonempty and of equal length");
  }
  if (!(s1 > 0.0) || !(s2 > 0.0) || !std::isfinite(s1) || !std::isfinite(s2)) {
    throw DomainError("training energies S1, S2 must be positive");
  }
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
    throw DomainError("noise variance must be finite and non-negative");
  }
  if (!v1.allFinite() || !v2.allFinite()) {
    throw DomainError("statistics contain non-finite values");
  }
}

std::pair<cdouble, cdouble> reduce_packet(const PacketObservation& obs,
                                          const TrainingSequence& training) {
  if (static_cast<std::size_t>(obs.v.size()) != training.length()) {
    throw DomainError("packet length " + std::to_string(obs.v.size()) +
                      " does not match training length " + std::to_string(training.length()));
  }
  const auto k = static_cast<Eigen::Index>(training.split());
  const cdouble a = training.x1().dot(obs.v.head(k)) / training.s1();
  const cdouble b = training.x2().dot(obs.v.tail(obs.v.size() - k)) / training.s2();
  return {a, b};
}

SufficientStats reduce_all(std::span<const PacketObservation> packets,
                           const TrainingSequence& training, double noise_var) {
  if (packets.empty()) {
    throw DomainError("at least one packet is required");
  }
  const auto n = static_cast<Eigen::Index>(packets.size());
  CVector v1(n);
  CVector v2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [a, b] = reduce_packet(packets[static_cast<std::size_t>(i)], training);
    v1[i] = a;
    v2[i] = b;
  }
  return SufficientStats(std::move(v1), std::move(v2), training.s1(), training.s2(), noise_var);
}

CrossMoments cross_moments(const SufficientStats& stats) {
  const double inv_l = 1.0 / static_cast<double>(stats.packets());
  CrossMoments m;
  // Eigen's dot() conjugates its left operand.
  m.p11 = stats.v1.squaredNorm() * inv_l;
  m.p22 = stats.v2.squaredNorm() * inv_l;
  m.p12 = stats.v1.dot(stats.v2) * inv_l;
  m.p21 = std::conj(m.p12);
  return m;
}

SufficientStats draw_stats(const CVector& h, cdouble f, const ReceiverScenario& scenario,
                           Rng& rng) {
  const double n1 = scenario.noise_var() / scenario.s1();
  const double n2 = scenario.noise_var() / scenario.s2();
  CVector v1 = h;
  CVector v2 = f * h;
  if (scenario.noise_var() > 0.0) {
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      v1[i] += rng.complex_normal(n1);
      v2[i] += rng.complex_normal(n2);
    }
  }
  return SufficientStats(std::move(v1), std::move(v2), scenario.s1(), scenario.s2(),
                         scenario.noise_var());
}

SufficientStats simulate_and_reduce(const CVector& h, cdouble f,
                                    const ReceiverScenario& scenario, Rng& rng) {
  std::vector<PacketObservation> packets;
  packets.reserve(static_cast<std::size_t>(h.size()));
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    packets.push_back(simulate_packet(h[i], f, scenario, rng));
  }
  return reduce_all(packets, scenario.training(), scenario.noise_var());
}

}  // namespace chanimp
