#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "chanimp/error.hpp"
#include "chanimp/estimators.hpp"
#include "oracles.hpp"

using namespace chanimp;

namespace {

constexpr cdouble kJ(0.0, 1.0);

SufficientStats random_stats(Rng& rng, const ChannelPrior& prior, cdouble f, double s1, double s2,
                             double nv) {
  const CVector h = sample_channels(prior, rng);
  CVector v1(h.size()), v2(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    v1[i] = h[i] + rng.complex_normal(nv / s1);
    v2[i] = f * h[i] + rng.complex_normal(nv / s2);
  }
  return {v1, v2, s1, s2, nv};
}

CMatrix random_covariance(Rng& rng, int n) {
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.complex_normal(1.0);
  return a * a.adjoint() + 0.2 * CMatrix::Identity(n, n);
}

CrossMoments population(cdouble f, double sh2, double nv, double s1, double s2) {
  CrossMoments m;
  m.p11 = sh2 + nv / s1;
  m.p12 = f * sh2;
  m.p21 = std::conj(f) * sh2;
  m.p22 = std::norm(f) * sh2 + nv / s2;
  return m;
}

}  // namespace

TEST(HybridLoglik, MatchesDensityProduct) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3;
    const CMatrix c = random_covariance(rng, n);
    const auto prior = ChannelPrior::explicit_covariance(c);
    const auto st = random_stats(rng, prior, cdouble(0.8, 0.4), 32, 20, 0.3);
    const CVector h = sample_channels(prior, rng);
    const cdouble f(rng.normal(), rng.normal());
    const double got = hybrid_loglik(h, f, st, prior);
    const double want = oracle::joint_density_log(h, f, st, c);
    EXPECT_NEAR(got, want, 1e-10 * std::abs(want));
  }
}

TEST(HybridLoglik, IidAndExponentialPriors) {
  Rng rng(2);
  for (const auto& prior : {ChannelPrior::iid(4, 1.3), ChannelPrior::exponential(4, 0.9, 0.5)}) {
    const auto st = random_stats(rng, prior, cdouble(1.0, 0.2), 32, 32, 0.5);
    const CVector h = sample_channels(prior, rng);
    const double want = oracle::joint_density_log(h, 0.9, st, prior.covariance());
    EXPECT_NEAR(hybrid_loglik(h, 0.9, st, prior), want, 1e-10 * std::abs(want));
  }
}

TEST(HybridLoglik, LargeNoiseLimit) {
  Rng rng(3);
  const auto prior = ChannelPrior::iid(2, 1.0);
  auto st = random_stats(rng, prior, 1.0, 32, 32, 1.0);
  const CVector h = sample_channels(prior, rng);
  st.noise_var = 1e12;
  const double norm_only = -2.0 * std::log(M_PI * 1e12 / 32) * 2.0;
  const double prior_part = -h.squaredNorm() - 2.0 * std::log(M_PI);
  EXPECT_NEAR(hybrid_loglik(h, 0.5, st, prior), norm_only + prior_part, 1e-9);
}

TEST(HybridLoglik, SingularPriorRejected) {
  const auto prior = ChannelPrior::slow_fading(3, 1.0);
  const SufficientStats st(CVector::Ones(3), CVector::Ones(3), 32, 32, 1);
  EXPECT_THROW(hybrid_loglik(CVector::Ones(3), 1.0, st, prior), SingularError);
  EXPECT_THROW(map_h_given_f(1.0, st, prior), SingularError);
  EXPECT_THROW(g_of_f(1.0, st, prior), SingularError);
  EXPECT_THROW(joint_map_ml_general(st, prior), SingularError);
}

TEST(Gradient, FiniteDifference) {
  Rng rng(4);
  const auto prior = ChannelPrior::exponential(3, 1.0, 0.4);
  const auto st = random_stats(rng, prior, cdouble(0.9, 0.3), 32, 32, 0.2);
  const CVector h = sample_channels(prior, rng);
  const cdouble f(0.7, -0.2);
  const auto g = hybrid_gradient(h, f, st, prior);
  const double d = 1e-6;
  auto fd = [&](auto perturb) {
    return (perturb(d) - perturb(-d)) / (2.0 * d);
  };
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double dre = fd([&](double e) {
      CVector x = h;
      x[i] += e;
      return hybrid_loglik(x, f, st, prior);
    });
    const double dim = fd([&](double e) {
      CVector x = h;
      x[i] += kJ * e;
      return hybrid_loglik(x, f, st, prior);
    });
    const cdouble want = 0.5 * cdouble(dre, dim);
    EXPECT_NEAR(std::abs(g.h[i] - want), 0.0, 1e-5 * (1.0 + std::abs(want)));
  }
  const double dre = fd([&](double e) { return hybrid_loglik(h, f + e, st, prior); });
  const double dim = fd([&](double e) { return hybrid_loglik(h, f + kJ * e, st, prior); });
  const cdouble want = 0.5 * cdouble(dre, dim);
  EXPECT_NEAR(std::abs(g.f - want), 0.0, 1e-5 * (1.0 + std::abs(want)));
}

TEST(MapH, MatchesNormalEquations) {
  Rng rng(5);
  const CMatrix c = random_covariance(rng, 3);
  const auto prior = ChannelPrior::explicit_covariance(c);
  const auto st = random_stats(rng, prior, cdouble(1.0, 0.2), 32, 32, 0.4);
  for (cdouble f : {cdouble(0.0), cdouble(1.1, -0.4), cdouble(-2.0, 3.0)}) {
    EXPECT_LT((map_h_given_f(f, st, prior) - oracle::best_h(f, st, c)).norm(), 1e-12);
  }
}

TEST(MapH, Limits) {
  Rng rng(6);
  const auto prior = ChannelPrior::iid(3, 2.0);
  auto st = random_stats(rng, prior, cdouble(1.0, 0.2), 32, 16, 0.5);
  const double c = shrinkage(32, 2.0, 0.5);
  EXPECT_LT((map_h_given_f(0.0, st, prior) - c * st.v1).norm(), 1e-14);
  st.noise_var = 0.0;
  const cdouble f(0.6, 0.8);
  const double a = st.alpha();
  const CVector want = (st.v1 + a * std::conj(f) * st.v2) / (1.0 + a * std::norm(f));
  EXPECT_LT((map_h_given_f(f, st, prior) - want).norm(), 1e-14);
}

TEST(GOfF, ZeroV2) {
  Rng rng(7);
  const auto prior = ChannelPrior::exponential(3, 1.0, 0.3);
  const SufficientStats st(sample_channels(prior, rng), CVector::Zero(3), 32, 32, 1.0);
  EXPECT_NEAR(std::abs(g_of_f(0.0, st, prior)), 0.0, 1e-15);
}

TEST(GOfF, ProfileIdentity) {
  Rng rng(8);
  const auto prior = ChannelPrior::explicit_covariance(random_covariance(rng, 3));
  const auto st = random_stats(rng, prior, cdouble(0.9, 0.3), 32, 24, 0.3);
  for (int k = 0; k < 10; ++k) {
    const cdouble f(rng.normal(), rng.normal());
    const CVector h = map_h_given_f(f, st, prior);
    const cdouble want = h.dot(st.v2 - f * h);
    EXPECT_NEAR(std::abs(g_of_f(f, st, prior) - want), 0.0, 1e-12 * (1.0 + std::abs(want)));
  }
}

TEST(GOfF, VanishesAtIidRoots) {
  Rng rng(9);
  const auto prior = ChannelPrior::iid(5, 1.0);
  const auto st = random_stats(rng, prior, cdouble(0.98, 0.24), 32, 32, 0.1);
  const auto r = ml_f_iid(cross_moments(st), shrinkage(32, 1.0, 0.1), st.alpha());
  const double scale = st.v1.squaredNorm() + st.v2.squaredNorm();
  EXPECT_LT(std::abs(g_of_f(r.plus, st, prior)), 1e-10 * scale);
  EXPECT_LT(std::abs(g_of_f(r.minus, st, prior)), 1e-10 * scale);
}

TEST(IidQuadratic, NoiselessPlusRootIsF) {
  const cdouble f(0.9860, 0.2445);
  for (double alpha : {1.0, 0.5, 3.0}) {
    CrossMoments m;
    const double e = 1.7;
    m.p11 = e;
    m.p12 = f * e;
    m.p21 = std::conj(f) * e;
    m.p22 = std::norm(f) * e;
    const auto r = ml_f_iid(m, 1.0, alpha);
    EXPECT_NEAR(std::abs(r.plus - f), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(r.selected - f), 0.0, 1e-14);
    // Product of roots of the quadratic.
    EXPECT_NEAR(std::abs(r.plus * r.minus + m.p12 / (alpha * m.p21)), 0.0, 1e-13);
  }
}

TEST(IidQuadratic, RootsSatisfyQuadratic) {
  Rng rng(10);
  for (int k = 0; k < 50; ++k) {
    const auto st = random_stats(rng, ChannelPrior::iid(4, 1.0), cdouble(rng.normal(), rng.normal()),
                                 32, 20, 0.5);
    const auto m = cross_moments(st);
    const double c = 0.8;
    const double a = st.alpha();
    for (cdouble f : {ml_f_iid(m, c, a).plus, ml_f_iid(m, c, a).minus}) {
      const cdouble q = m.p12 + (a * m.p22 - c * m.p11) * f - a * c * m.p21 * f * f;
      EXPECT_LT(std::abs(q), 1e-12 * (m.p11 + m.p22));
    }
  }
}

TEST(IidQuadratic, DegenerateFallsBackToLinearRoot) {
  CrossMoments m;
  m.p11 = 2.0;
  m.p12 = cdouble(0.5, 0.25);
  m.p21 = 0.0;
  m.p22 = 1.0;
  const double c = 0.9;
  const double a = 1.0;
  const auto r = ml_f_iid(m, c, a);
  EXPECT_TRUE(r.degenerate);
  const cdouble want = m.p12 / (c * m.p11 - a * m.p22);
  EXPECT_NEAR(std::abs(r.selected - want), 0.0, 1e-15);

  m.p22 = c * m.p11 / a;
  EXPECT_THROW(ml_f_iid(m, c, a), UnidentifiableError);
}

TEST(LowNoise, EqualsIidAtUnitShrinkage) {
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    const auto st = random_stats(rng, ChannelPrior::iid(3, 1.0), cdouble(1.0, 0.3), 32, 32, 1.0);
    const auto m = cross_moments(st);
    const auto a = ml_f_low_noise(m, 1.0);
    const auto b = ml_f_iid(m, 1.0, 1.0);
    EXPECT_EQ(a.plus, b.plus);
    EXPECT_EQ(a.minus, b.minus);
  }
}

TEST(LowNoise, AgreesWithGeneralAtHighSnr) {
  Rng rng(12);
  const auto prior = ChannelPrior::exponential(5, 1.0, 0.5);
  const auto sc = reference_scenario(1e-4);
  for (int k = 0; k < 10; ++k) {
    const CVector h = sample_channels(prior, rng);
    const auto st = draw_stats(h, sc.f(), sc, rng);
    const auto gen = joint_map_ml_general(st, prior);
    const auto low = estimate_low_noise(st, prior);
    EXPECT_LT(std::abs(gen.f - low.f) / std::abs(gen.f), 1e-3);
  }
}

TEST(General, MatchesIidClosedForm) {
  Rng rng(13);
  const auto sc = reference_scenario();
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 2 + k % 8;
    const double snr = std::pow(10.0, (k % 4) * 0.5);
    const auto prior = ChannelPrior::iid(n, 1.0);
    const auto s = sc.with_noise_var(1.0 / snr);
    const auto st = draw_stats(sample_channels(prior, rng), s.f(), s, rng);
    const auto gen = joint_map_ml_general(st, prior);
    const auto closed = ml_f_iid(cross_moments(st), shrinkage(st.s1, 1.0, st.noise_var), st.alpha());
    EXPECT_LT(std::abs(gen.f - closed.selected), 1e-8 * (1.0 + std::abs(closed.selected))) << k;
  }
}

TEST(General, NoiselessExponentialRecoversF) {
  Rng rng(14);
  const auto prior = ChannelPrior::exponential(6, 1.0, 0.5);
  const auto sc = reference_scenario(1e-12);
  const CVector h = sample_channels(prior, rng);
  const auto st = draw_stats(h, sc.f(), sc, rng);
  const auto est = joint_map_ml_general(st, prior);
  EXPECT_LT(std::abs(est.f - sc.f()) / std::abs(sc.f()), 1e-4);
}

TEST(General, StationarityAndSelection) {
  Rng rng(15);
  const auto sc = reference_scenario(0.5);
  for (int k = 0; k < 20; ++k) {
    const auto prior = ChannelPrior::explicit_covariance(random_covariance(rng, 1 + k % 4));
    const auto st = draw_stats(sample_channels(prior, rng), sc.f(), sc, rng);
    SolverSettings settings;
    const auto est = joint_map_ml_general(st, prior, settings);
    const auto g = hybrid_gradient(est.h, est.f, st, prior);
    const double scale = (st.s1 / st.noise_var) * (st.v1.norm() + st.v2.norm()) + 1.0;
    EXPECT_LT(std::sqrt(g.h.squaredNorm() + std::norm(g.f)), 1e-8 * scale);
    const double best =
        std::max_element(est.candidates.begin(), est.candidates.end(), [](auto& a, auto& b) {
          return a.loglik < b.loglik;
        })->loglik;
    EXPECT_EQ(est.loglik, best);
    EXPECT_LT(std::abs(g_of_f(est.f, st, prior)) / (st.v1.squaredNorm() + st.v2.squaredNorm()),
              settings.root_tolerance);
  }
}

TEST(General, BruteForceOracle) {
  Rng rng(16);
  const auto sc = reference_scenario(0.3);
  for (int k = 0; k < 6; ++k) {
    const int n = 1 + k % 3;
    const CMatrix c = random_covariance(rng, n);
    const auto prior = ChannelPrior::explicit_covariance(c);
    const auto st = draw_stats(sample_channels(prior, rng), sc.f(), sc, rng);
    const auto est = joint_map_ml_general(st, prior);
    const double box = 3.0 * (1.0 + std::abs(est.f));
    const auto brute = oracle::maximize_profile(st, c, box);
    EXPECT_NEAR(est.loglik, brute.value, 1e-6 * std::max(1.0, std::abs(brute.value)));
    EXPECT_GE(est.loglik, brute.value - 1e-9 * std::abs(brute.value));
  }
}

TEST(General, Unidentifiable) {
  const auto prior = ChannelPrior::iid(3, 1.0);
  const SufficientStats st(CVector::Zero(3), CVector::Ones(3), 32, 32, 1);
  EXPECT_THROW(joint_map_ml_general(st, prior), UnidentifiableError);
  EXPECT_THROW(estimate_iid(st, prior), UnidentifiableError);
  EXPECT_THROW(estimate_consistent(st, prior), UnidentifiableError);
  EXPECT_FALSE(estimate_slow_fading(st, 1.0).identifiable);
}

TEST(General, SettingsValidation) {
  SolverSettings s;
  s.root_tolerance = 0.0;
  EXPECT_THROW(s.validate(), DomainError);
  s = {};
  s.max_iterations = 0;
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(SinglePacket, WorkedExample) {
  CVector v1(1), v2(1);
  v1 << 1.0;
  v2 << kJ;
  const SufficientStats st(v1, v2, 32, 32, 1.0);
  const auto est = estimate_single_packet(st, 1.0);
  EXPECT_NEAR(std::abs(est.h[0] - 32.0 / 33.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(est.f - kJ * 33.0 / 32.0), 0.0, 1e-15);

  // Two-dimensional numerical maximization.
  const CMatrix c = CMatrix::Identity(1, 1);
  const auto brute = oracle::maximize_profile(st, c, 3.0);
  EXPECT_NEAR(std::abs(brute.f - est.f), 0.0, 1e-6);
  EXPECT_NEAR(brute.value, est.loglik, 1e-9);
}

TEST(SinglePacket, BeatsSecondStationaryPoint) {
  Rng rng(17);
  const auto prior = ChannelPrior::iid(1, 1.0);
  for (int k = 0; k < 200; ++k) {
    const auto st = random_stats(rng, prior, cdouble(1.0, 0.3), 32, 32, std::pow(10.0, -k % 4));
    const auto est = estimate_single_packet(st, 1.0);
    const cdouble f2 = -std::conj(st.v1[0]) / (st.alpha() * std::conj(st.v2[0]));
    const double l2 = hybrid_loglik(CVector::Zero(1), f2, st, prior);
    EXPECT_GE(est.loglik, l2);
    // Both are stationary points.
    const auto g = hybrid_gradient(CVector::Zero(1), f2, st, prior);
    EXPECT_LT(std::abs(g.h[0]), 1e-9 * (1.0 + st.s1 / st.noise_var));
  }
}

TEST(SinglePacket, NoiselessAndErrors) {
  CVector h(1);
  h << cdouble(0.4, -0.7);
  const cdouble f(0.98, 0.24);
  const auto est = estimate_single_packet(SufficientStats(h, f * h, 32, 32, 0.0), 1.0);
  EXPECT_NEAR(std::abs(est.h[0] - h[0]), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(est.f - f), 0.0, 1e-15);
  const auto zero = estimate_single_packet(SufficientStats(CVector::Zero(1), h, 32, 32, 1.0), 1.0);
  EXPECT_FALSE(zero.identifiable);
  EXPECT_EQ(zero.h[0], cdouble(0.0));
  EXPECT_THROW(estimate_single_packet(SufficientStats(CVector::Ones(2), CVector::Ones(2), 32, 32, 1),
                                      1.0),
               DomainError);
  const auto [hc, fc] = single_packet_closed_form(2.0, 1.0, 0.5);
  EXPECT_EQ(hc, cdouble(1.0));
  EXPECT_EQ(fc, cdouble(1.0));
}

TEST(SinglePacket, GeneralSolverAgrees) {
  Rng rng(18);
  const auto prior = ChannelPrior::iid(1, 1.0);
  for (int k = 0; k < 20; ++k) {
    const auto st = random_stats(rng, prior, cdouble(0.98, 0.24), 32, 32, 0.2);
    const auto a = estimate_single_packet(st, 1.0);
    const auto b = joint_map_ml_general(st, prior);
    EXPECT_LT(std::abs(a.f - b.f), 1e-8 * std::abs(a.f));
    EXPECT_LT(std::abs(a.h[0] - b.h[0]), 1e-8 * (1.0 + std::abs(a.h[0])));
  }
}

TEST(SlowFading, ReducesToSinglePacket) {
  Rng rng(19);
  const auto st = random_stats(rng, ChannelPrior::iid(1, 1.0), cdouble(1.0, 0.2), 32, 32, 0.5);
  const auto a = estimate_slow_fading(st, 1.0);
  const auto b = estimate_single_packet(st, 1.0);
  EXPECT_NEAR(std::abs(a.f - b.f), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(a.h[0] - b.h[0]), 0.0, 1e-14);
}

TEST(SlowFading, NoiselessReplicated) {
  const cdouble h0(0.3, 0.9);
  const cdouble f(0.98, 0.24);
  const CVector h = CVector::Constant(7, h0);
  const auto est = estimate_slow_fading(SufficientStats(h, f * h, 32, 32, 0.0), 1.0);
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_NEAR(std::abs(est.h[i] - h0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(est.f - f), 0.0, 1e-14);
}

TEST(SlowFading, PooledMseBelowSinglePacket) {
  Rng rng(20);
  const auto sc = reference_scenario(1.0);
  const auto slow = ChannelPrior::slow_fading(10, 1.0);
  double pooled = 0.0;
  double single = 0.0;
  const int n = 4000;
  for (int t = 0; t < n; ++t) {
    const CVector h = sample_channels(slow, rng);
    const auto st = draw_stats(h, sc.f(), sc, rng);
    pooled += (estimate_slow_fading(st, 1.0).h - h).squaredNorm() / 10.0;
    const SufficientStats one(st.v1.head(1), st.v2.head(1), st.s1, st.s2, st.noise_var);
    single += std::norm(estimate_single_packet(one, 1.0).h[0] - h[0]);
  }
  EXPECT_LT(pooled / n, 0.5 * single / n);
}

TEST(SlowFading, SingularPriorRoutesThroughDispatcher) {
  Rng rng(21);
  const auto prior = ChannelPrior::slow_fading(4, 1.0);
  const auto sc = reference_scenario(0.1);
  const auto st = draw_stats(sample_channels(prior, rng), sc.f(), sc, rng);
  EXPECT_NO_THROW(estimate(Method::slow_fading, st, prior));
  try {
    estimate(Method::general, st, prior);
    FAIL() << "expected SingularError";
  } catch (const SingularError& e) {
    EXPECT_NE(std::string(e.what()).find("slow_fading"), std::string::npos);
  }
}

TEST(Consistent, Identities) {
  EXPECT_NEAR(consistency_factor(32, 1.0, 1.0), 1.0 - 1.0 / 1024.0, 1e-16);
  EXPECT_NEAR(consistency_factor(32, 1.0, 1.0), 0.99902, 1e-5);
  Rng rng(22);
  for (int k = 0; k < 20; ++k) {
    const auto st = random_stats(rng, ChannelPrior::iid(3, 1.0), cdouble(1.0, 0.3), 32, 16, 1.0);
    const auto m = cross_moments(st);
    EXPECT_NEAR(std::abs(consistent_f(m, 1.0, 1.0, st.alpha()) - ml_f_low_noise(m, st.alpha()).plus),
                0.0, 1e-13);
  }
}

TEST(Consistent, PopulationMomentsGiveF) {
  const cdouble f(0.9860, 0.2445);
  for (double nv : {0.01, 0.1, 1.0, 3.0}) {
    const double s1 = 32, s2 = 32, sh2 = 1.0;
    const double c = shrinkage(s1, sh2, nv);
    const double d = consistency_factor(s1, sh2, nv);
    const auto m = population(f, sh2, nv, s1, s2);
    EXPECT_NEAR(std::abs(consistent_f(m, c, d, s2 / s1) - f), 0.0, 1e-12) << nv;
    // The unmodified ML root does not converge to F.
    EXPECT_GT(std::abs(ml_f_iid(m, c, s2 / s1).plus - f), 1e-6);
  }
}

TEST(Consistent, ValidatesArguments) {
  CrossMoments m;
  m.p11 = m.p22 = 1.0;
  m.p12 = m.p21 = 1.0;
  EXPECT_THROW(consistent_f(m, 0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(consistent_f(m, 0.5, 0.0, 1.0), DomainError);
  EXPECT_THROW(consistent_f(m, 0.5, 1.0, 0.0), DomainError);
}

TEST(Estimators, NoiselessExactness) {
  const auto sc = reference_scenario(0.0);
  Rng rng(23);
  const auto prior = ChannelPrior::iid(4, 1.0);
  const CVector h = sample_channels(prior, rng);
  const auto st = draw_stats(h, sc.f(), sc, rng);
  for (Method m : {Method::general, Method::iid_quadratic, Method::low_noise, Method::consistent,
                   Method::slow_fading}) {
    const auto est = estimate(m, st, prior);
    if (m == Method::slow_fading) continue;  // replicated channel model, h is not constant here
    EXPECT_LT(std::abs(est.f - sc.f()) / std::abs(sc.f()), 1e-10) << to_string(m);
    EXPECT_LT((est.h - h).norm() / h.norm(), 1e-10) << to_string(m);
  }
}

TEST(Estimators, MethodNames) {
  EXPECT_EQ(to_string(Method::general), "map_ml_general");
  EXPECT_EQ(to_string(Method::iid_quadratic), "iid_quadratic");
  EXPECT_EQ(to_string(Method::consistent), "consistent");
}
