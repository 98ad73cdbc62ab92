#include "chanimp/model.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "chanimp/error.hpp"

namespace chanimp {

namespace {

bool finite(cdouble z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Eigenvalues below this fraction of the largest one count as zero.
constexpr double kSingularRatio = 1e-12;

}  // namespace

Impedance::Impedance(double r, double x) : resistance(r), reactance(x) {
  if (!std::isfinite(r) || !std::isfinite(x)) {
    throw DomainError("impedance components must be finite");
  }
  if (r < 0.0) {
    throw DomainError("impedance resistance must be non-negative, got " + std::to_string(r));
  }
}

Impedance::Impedance(cdouble z) : Impedance(z.real(), z.imag()) {}

LoadSwitchPlan::LoadSwitchPlan(Impedance z1_, Impedance z2_, std::size_t split_,
                               std::size_t length_)
    : z1(z1_), z2(z2_), split(split_), length(length_) {
  if (split < 1 || split >= length) {
    throw DomainError("load switch split K must satisfy 1 <= K < T");
  }
  if (z1 == z2) {
    throw DomainError("degenerate load plan: Z1 == Z2 makes the impedance unobservable");
  }
}

TrainingSequence::TrainingSequence(CVector symbols, std::size_t split)
    : symbols_(std::move(symbols)), split_(split) {
  if (split_ < 1 || split_ >= length()) {
    throw DomainError("training split K must satisfy 1 <= K < T");
  }
  s1_ = x1().squaredNorm();
  s2_ = x2().squaredNorm();
  if (!(s1_ > 0.0) || !(s2_ > 0.0)) {
    throw DomainError("both training segments need positive energy");
  }
}

TrainingSequence zadoff_chu(std::size_t length, std::size_t root, std::size_t split) {
  if (length == 0 || length % 2 != 0) {
    throw DomainError("Zadoff-Chu length must be even and positive");
  }
  if (root == 0 || root % 2 == 0 || std::gcd(root, length) != 1) {
    throw DomainError("Zadoff-Chu root must be odd and coprime with the length");
  }
  CVector x(static_cast<Eigen::Index>(length));
  for (std::size_t n = 0; n < length; ++n) {
    // Reduce u n^2 mod 2T before scaling so the phase stays exact for long
    // sequences.
    const std::size_t k = (root * ((n * n) % (2 * length))) % (2 * length);
    const double phase = -std::numbers::pi * static_cast<double>(k) / static_cast<double>(length);
    x[static_cast<Eigen::Index>(n)] = std::polar(1.0, phase);
  }
  return TrainingSequence(std::move(x), split);
}

cdouble f_from_impedance(const Impedance& antenna, const Impedance& z1, const Impedance& z2) {
  if (z1 == z2) {
    throw DomainError("degenerate load plan: Z1 == Z2");
  }
  const cdouble za = antenna.value();
  if (z1.value() == 0.0 || z2.value() == 0.0) {
    throw SingularError("load impedances must be nonzero");
  }
  const cdouble den = 1.0 + za / z2.value();
  if (std::abs(den) == 0.0) {
    throw SingularError("F map denominator 1 + ZA/Z2 vanishes");
  }
  return (1.0 + za / z1.value()) / den;
}

Impedance impedance_from_f(cdouble f, const Impedance& z1, const Impedance& z2) {
  if (z1 == z2) {
    throw DomainError("degenerate load plan: Z1 == Z2");
  }
  if (!finite(f)) {
    throw DomainError("F must be finite");
  }
  const cdouble w1 = z1.value();
  const cdouble w2 = z2.value();
  const cdouble den = f / w2 - 1.0 / w1;
  // F = Z2/Z1 is the image of an infinite antenna impedance.
  if (std::abs(den) <= 1e-15 * (std::abs(f / w2) + std::abs(1.0 / w1))) {
    throw SingularError("F = Z2/Z1 corresponds to an unbounded antenna impedance");
  }
  const cdouble za = (1.0 - f) / den;
  Impedance out;
  out.resistance = za.real();
  out.reactance = za.imag();
  return out;
}

cdouble effective_channel(cdouble path_gain, const Impedance& antenna, const Impedance& z1) {
  const cdouble den = antenna.value() + z1.value();
  if (std::abs(den) == 0.0) {
    throw SingularError("ZA + Z1 vanishes");
  }
  return z1.value() * path_gain / den;
}

ReceiverScenario::ReceiverScenario(Impedance antenna, LoadSwitchPlan plan,
                                   TrainingSequence training, double noise_var)
    : antenna_(antenna),
      plan_(std::move(plan)),
      training_(std::move(training)),
      noise_var_(noise_var) {
  if (training_.length() != plan_.length || training_.split() != plan_.split) {
    throw DomainError("training sequence does not match the load plan (T, K)");
  }
  if (!std::isfinite(noise_var_) || noise_var_ < 0.0) {
    throw DomainError("noise variance must be finite and non-negative");
  }
  f_ = f_from_impedance(antenna_, plan_.z1, plan_.z2);
}

ReceiverScenario ReceiverScenario::with_noise_var(double noise_var) const {
  return ReceiverScenario(antenna_, plan_, training_, noise_var);
}

ReceiverScenario ReceiverScenario::with_antenna(const Impedance& antenna) const {
  return ReceiverScenario(antenna, plan_, training_, noise_var_);
}

ReceiverScenario reference_scenario(double noise_var) {
  constexpr std::size_t T = 64;
  constexpr std::size_t K = T / 2;
  LoadSwitchPlan plan(Impedance(50.0, 0.0), Impedance(50.0, 20.0), K, T);
  return ReceiverScenario(Impedance(73.0, 42.5), plan, zadoff_chu(T, 1, K), noise_var);
}

// ---------------------------------------------------------------- ChannelPrior

ChannelPrior ChannelPrior::iid(std::size_t packets, double sigma_h2) {
  if (packets == 0) throw DomainError("prior needs at least one packet");
  if (!std::isfinite(sigma_h2) || sigma_h2 < 0.0) {
    throw DomainError("sigma_H^2 must be finite and non-negative");
  }
  ChannelPrior p;
  p.kind_ = Kind::iid;
  p.packets_ = packets;
  p.param_sigma_h2_ = sigma_h2;
  p.eigenvalues_ = RVector::Constant(static_cast<Eigen::Index>(packets), sigma_h2);
  p.finish();
  return p;
}

ChannelPrior ChannelPrior::slow_fading(std::size_t packets, double sigma_h2) {
  if (packets == 0) throw DomainError("prior needs at least one packet");
  if (!std::isfinite(sigma_h2) || sigma_h2 < 0.0) {
    throw DomainError("sigma_H^2 must be finite and non-negative");
  }
  ChannelPrior p;
  p.kind_ = Kind::slow_fading;
  p.packets_ = packets;
  p.param_sigma_h2_ = sigma_h2;
  // All-ones matrix: one eigenvalue L (DFT bin 0), the rest zero.
  p.eigenvalues_ = RVector::Zero(static_cast<Eigen::Index>(packets));
  p.eigenvalues_[0] = static_cast<double>(packets) * sigma_h2;
  p.finish();
  return p;
}

ChannelPrior ChannelPrior::exponential(std::size_t packets, double sigma_h2, double r) {
  if (packets == 0) throw DomainError("prior needs at least one packet");
  if (!std::isfinite(sigma_h2) || sigma_h2 < 0.0) {
    throw DomainError("sigma_H^2 must be finite and non-negative");
  }
  if (!(r >= 0.0 && r < 1.0)) {
    throw DomainError("exponential correlation r must satisfy 0 <= r < 1");
  }
  const auto n = static_cast<Eigen::Index>(packets);
  CMatrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      c(i, j) = sigma_h2 * std::pow(r, static_cast<double>(std::abs(i - j)));
    }
  }
  ChannelPrior p = explicit_covariance(c);
  p.kind_ = Kind::exponential;
  p.r_ = r;
  p.param_sigma_h2_ = sigma_h2;
  return p;
}

ChannelPrior ChannelPrior::explicit_covariance(const CMatrix& covariance) {
  if (covariance.rows() == 0 || covariance.rows() != covariance.cols()) {
    throw DomainError("covariance must be a nonempty square matrix");
  }
  if (!covariance.allFinite()) {
    throw DomainError("covariance entries must be finite");
  }
  const double norm = covariance.norm();
  if ((covariance - covariance.adjoint()).norm() > 1e-12 * std::max(norm, 1e-300)) {
    throw DomainError("covariance is not Hermitian");
  }
  const CMatrix sym = 0.5 * (covariance + covariance.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw DomainError("eigendecomposition of the covariance failed");
  }
  RVector ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-12 * top) {
      throw DomainError("covariance is not positive semidefinite (eigenvalue " +
                        std::to_string(ev[i]) + ")");
    }
    ev[i] = std::max(ev[i], 0.0);
  }
  ChannelPrior p;
  p.kind_ = Kind::explicit_matrix;
  p.packets_ = static_cast<std::size_t>(covariance.rows());
  p.dense_ = sym;
  p.basis_ = es.eigenvectors();
  p.eigenvalues_ = std::move(ev);
  p.finish();
  return p;
}

void ChannelPrior::finish() {
  trace_ = eigenvalues_.sum();
  const double top = eigenvalues_.size() ? eigenvalues_.maxCoeff() : 0.0;
  singular_ = !(top > 0.0) || eigenvalues_.minCoeff() <= kSingularRatio * top;
}

CMatrix ChannelPrior::covariance() const {
  const auto n = static_cast<Eigen::Index>(packets_);
  switch (kind_) {
    case Kind::iid:
      return CMatrix::Identity(n, n) * param_sigma_h2_;
    case Kind::slow_fading:
      return CMatrix::Constant(n, n, param_sigma_h2_);
    case Kind::exponential:
    case Kind::explicit_matrix:
      return *dense_;
  }
  return {};
}

CVector ChannelPrior::to_eigenbasis(const CVector& x) const {
  if (static_cast<std::size_t>(x.size()) != packets_) {
    throw DomainError("vector length does not match the prior");
  }
  if (basis_) return basis_->adjoint() * x;
  if (kind_ == Kind::iid) return x;
  // Slow fading: unitary DFT.
  const auto n = x.size();
  CVector y(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    cdouble acc = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
      acc += x[m] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((k * m) % n) /
                                        static_cast<double>(n));
    }
    y[k] = acc * scale;
  }
  return y;
}

CVector ChannelPrior::from_eigenbasis(const CVector& y) const {
  if (static_cast<std::size_t>(y.size()) != packets_) {
    throw DomainError("vector length does not match the prior");
  }
  if (basis_) return *basis_ * y;
  if (kind_ == Kind::iid) return y;
  const auto n = y.size();
  CVector x(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index m = 0; m < n; ++m) {
    cdouble acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      acc += y[k] * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>((k * m) % n) /
                                        static_cast<double>(n));
    }
    x[m] = acc * scale;
  }
  return x;
}

double ChannelPrior::log_det() const {
  if (singular_) throw SingularError("channel covariance is singular");
  return eigenvalues_.array().log().sum();
}

double ChannelPrior::inverse_quadratic(const CVector& h) const {
  if (singular_) throw SingularError("channel covariance is singular");
  const CVector w = to_eigenbasis(h);
  return (w.cwiseAbs2().array() / eigenvalues_.array()).sum();
}

ChannelPrior ChannelPrior::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw DomainError("scale factor must be positive");
  }
  switch (kind_) {
    case Kind::iid:
      return iid(packets_, param_sigma_h2_ * factor);
    case Kind::slow_fading:
      return slow_fading(packets_, param_sigma_h2_ * factor);
    case Kind::exponential:
      return exponential(packets_, param_sigma_h2_ * factor, r_);
    case Kind::explicit_matrix:
      return explicit_covariance(*dense_ * factor);
  }
  return *this;
}

ChannelPrior ChannelPrior::with_packets(std::size_t packets) const {
  switch (kind_) {
    case Kind::iid:
      return iid(packets, param_sigma_h2_);
    case Kind::slow_fading:
      return slow_fading(packets, param_sigma_h2_);
    case Kind::exponential:
      return exponential(packets, param_sigma_h2_, r_);
    case Kind::explicit_matrix:
      if (packets != packets_) {
        throw DomainError("an explicit covariance has a fixed packet count");
      }
      return *this;
  }
  return *this;
}

CVector sample_channels(const ChannelPrior& prior, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(prior.packets());
  CVector h(n);
  switch (prior.kind()) {
    case ChannelPrior::Kind::iid: {
      const double v = prior.sigma_h2();
      for (Eigen::Index i = 0; i < n; ++i) h[i] = rng.complex_normal(v);
      return h;
    }
    case ChannelPrior::Kind::slow_fading: {
      h.setConstant(rng.complex_normal(prior.sigma_h2()));
      return h;
    }
    case ChannelPrior::Kind::exponential:
    case ChannelPrior::Kind::explicit_matrix: {
      CVector z(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        z[i] = rng.complex_normal(1.0) * std::sqrt(prior.eigenvalues()[i]);
      }
      return prior.from_eigenbasis(z);
    }
  }
  return h;
}

PacketObservation simulate_packet(cdouble h, cdouble f, const ReceiverScenario& scenario,
                                  Rng& rng) {
  const TrainingSequence& tr = scenario.training();
  const auto k = static_cast<Eigen::Index>(tr.split());
  const auto t = static_cast<Eigen::Index>(tr.length());
  PacketObservation obs{CVector(t)};
  obs.v.head(k) = h * tr.x1();
  obs.v.tail(t - k) = (f * h) * tr.x2();
  const double nv = scenario.noise_var();
  if (nv > 0.0) {
    for (Eigen::Index i = 0; i < t; ++i) obs.v[i] += rng.complex_normal(nv);
  }
  return obs;
}

}  // namespace chanimp
