#include "chanimp/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "chanimp/bounds.hpp"
#include "chanimp/error.hpp"
#include "chanimp/rng.hpp"
#include "chanimp/sufficient_stats.hpp"

namespace chanimp {

namespace {

double normal_quantile_two_sided(double level) {
  const boost::math::normal_distribution<double> n01;
  return boost::math::quantile(n01, 0.5 + level / 2.0);
}

// Mean and standard error of a sample.
struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) {
    m.mean = std::nan("");
    m.se = std::nan("");
    return m;
  }
  // Fixed-order two-pass sums keep the output independent of threading.
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    m.se = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return m;
}

double trimmed_mean(std::vector<double> xs, double trim) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const auto drop = static_cast<std::size_t>(std::floor(trim * static_cast<double>(xs.size())));
  const std::size_t keep = std::max<std::size_t>(1, xs.size() - drop);
  double sum = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum += xs[i];
  return sum / static_cast<double>(keep);
}

GridPoint make_point(const SweepConfig& config, const ReceiverScenario& base,
                     const ChannelPrior::Kind kind, double snr_db, std::size_t packets) {
  PriorSpec spec = config.prior;
  spec.kind = kind;
  ChannelPrior prior = spec.make(packets);
  const double rho = std::pow(10.0, snr_db / 10.0);
  return GridPoint{base.with_noise_var(prior.sigma_h2() / rho), std::move(prior), config.fidelity,
                   config.solver};
}

void label(MetricRecord& rec, const char* study, const GridPoint& point, double snr_db) {
  rec.study = study;
  rec.prior = std::string(to_string(point.prior.kind()));
  rec.snr_db = snr_db;
}

std::vector<MetricRecord> run_grid(const SweepConfig& config, const ReceiverScenario& base,
                                   ChannelPrior::Kind kind, const std::vector<Method>& estimators,
                                   const char* study) {
  std::vector<MetricRecord> out;
  const std::size_t nl = config.packets.size();
  for (std::size_t is = 0; is < config.snr_db.size(); ++is) {
    for (std::size_t il = 0; il < nl; ++il) {
      const double snr = config.snr_db[is];
      const GridPoint point = make_point(config, base, kind, snr, config.packets[il]);
      const std::uint64_t index = is * nl + il;
      const auto trials =
          run_point(point, estimators, config.seed, index, config.trials, config.threads);
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        MetricRecord rec = aggregate(trials, e, point, config.ci_level, config.trim_fraction);
        label(rec, study, point, snr);
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

void check_methods_fit(const std::vector<Method>& methods, ChannelPrior::Kind kind,
                       const std::vector<std::size_t>& packets) {
  const std::size_t lmax = *std::max_element(packets.begin(), packets.end());
  for (const Method m : methods) {
    if (m == Method::single_packet && lmax > 1) {
      throw ConfigError("sweep.estimators", "single_packet requires every L in the grid to be 1");
    }
    if (kind == ChannelPrior::Kind::slow_fading && lmax > 1 && m != Method::slow_fading) {
      throw ConfigError("sweep.estimators",
                        std::string(to_string(m)) +
                            " needs a nonsingular prior; use slow_fading for the slow_fading "
                            "prior");
    }
  }
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string_view to_string(ChannelPrior::Kind kind) noexcept {
  switch (kind) {
    case ChannelPrior::Kind::iid:
      return "iid";
    case ChannelPrior::Kind::slow_fading:
      return "slow_fading";
    case ChannelPrior::Kind::exponential:
      return "exponential";
    case ChannelPrior::Kind::explicit_matrix:
      return "explicit";
  }
  return "unknown";
}

ChannelPrior PriorSpec::make(std::size_t packets) const {
  switch (kind) {
    case ChannelPrior::Kind::iid:
      return ChannelPrior::iid(packets, sigma_h2);
    case ChannelPrior::Kind::slow_fading:
      return ChannelPrior::slow_fading(packets, sigma_h2);
    case ChannelPrior::Kind::exponential:
      return ChannelPrior::exponential(packets, sigma_h2, r);
    case ChannelPrior::Kind::explicit_matrix:
      if (!matrix) throw ConfigError("prior.covariance", "explicit prior needs a matrix");
      if (static_cast<std::size_t>(matrix->rows()) != packets) {
        throw ConfigError("prior.covariance",
                          "explicit covariance size does not match L = " + std::to_string(packets));
      }
      return ChannelPrior::explicit_covariance(*matrix);
  }
  throw ConfigError("prior.kind", "unknown prior kind");
}

void SweepConfig::validate() const {
  if (trials < 1) throw ConfigError("sweep.trials", "must be at least 1");
  if (snr_db.empty()) throw ConfigError("sweep.snr_db", "grid must be nonempty");
  if (packets.empty()) throw ConfigError("sweep.L", "grid must be nonempty");
  for (const auto l : packets) {
    if (l < 1) throw ConfigError("sweep.L", "packet counts must be at least 1");
  }
  for (const double s : snr_db) {
    if (!std::isfinite(s)) throw ConfigError("sweep.snr_db", "SNR values must be finite");
  }
  if (estimators.empty()) throw ConfigError("sweep.estimators", "list must be nonempty");
  if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) {
    throw ConfigError("sweep.trim_fraction", "must lie in [0, 1)");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("sweep.ci_level", "must lie in (0, 1)");
  if (threads < 1) throw ConfigError("sweep.threads", "must be at least 1");
  try {
    solver.validate();
  } catch (const DomainError& e) {
    throw ConfigError("solver", e.what());
  }
  switch (study) {
    case Study::sweep:
    case Study::bias:
      check_methods_fit(estimators, prior.kind, packets);
      break;
    case Study::correlation:
      check_methods_fit(estimators, ChannelPrior::Kind::iid, packets);
      break;
  }
}

TrialResult run_trial(const GridPoint& point, const std::vector<Method>& estimators, Rng& rng) {
  const cdouble f = point.scenario.f();
  const CVector h = sample_channels(point.prior, rng);
  const SufficientStats stats = point.fidelity == Fidelity::packets
                                    ? simulate_and_reduce(h, f, point.scenario, rng)
                                    : draw_stats(h, f, point.scenario, rng);
  TrialResult result;
  result.h_energy = h.squaredNorm();
  result.outcomes.reserve(estimators.size());
  for (const Method m : estimators) {
    EstimatorOutcome out;
    out.method = m;
    try {
      const HybridEstimate est = estimate(m, stats, point.prior, point.solver);
      if (!est.identifiable) {
        out.status = TrialStatus::unidentifiable;
      } else {
        out.h_error = est.h - h;
        out.f_hat = est.f;
        out.minus_root = est.minus_root_selected;
      }
    } catch (const UnidentifiableError&) {
      out.status = TrialStatus::unidentifiable;
    } catch (const SolverFailure& e) {
      out.status = TrialStatus::failed;
      out.residual = e.best_residual();
    }
    result.outcomes.push_back(std::move(out));
  }
  return result;
}

std::vector<TrialResult> run_point(const GridPoint& point, const std::vector<Method>& estimators,
                                   std::uint64_t seed, std::uint64_t point_index,
                                   std::size_t trials, unsigned threads) {
  std::vector<TrialResult> results(trials);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      Rng rng(stream_seed(seed, point_index, t));
      results[t] = run_trial(point, estimators, rng);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, trials));
  if (workers == 1) {
    work(0, trials);
    return results;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (trials + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(trials, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

MetricRecord aggregate(const std::vector<TrialResult>& trials, std::size_t index,
                       const GridPoint& point, double ci_level, double trim_fraction) {
  const double z = normal_quantile_two_sided(ci_level);
  const cdouble f = point.scenario.f();
  const double fabs = std::abs(f);
  const double tr = point.prior.trace();

  MetricRecord rec;
  rec.packets = point.prior.packets();
  rec.f_true = f;
  rec.trials = trials.size();
  std::vector<double> e_h, e_f2, e_f1, f_re, f_im;
  std::size_t minus = 0;
  for (const TrialResult& t : trials) {
    const EstimatorOutcome& o = t.outcomes.at(index);
    rec.estimator = std::string(to_string(o.method));
    if (o.status == TrialStatus::unidentifiable) {
      ++rec.unidentifiable;
      continue;
    }
    if (o.status == TrialStatus::failed) {
      ++rec.failed;
      continue;
    }
    ++rec.ok;
    e_h.push_back(o.h_error.squaredNorm() / tr);
    const cdouble df = o.f_hat - f;
    e_f2.push_back(std::norm(df) / (fabs * fabs));
    e_f1.push_back(std::abs(df) / fabs);
    f_re.push_back(o.f_hat.real());
    f_im.push_back(o.f_hat.imag());
    if (o.minus_root) ++minus;
  }
  const Moments mh = moments(e_h);
  const Moments mf2 = moments(e_f2);
  const Moments mf1 = moments(e_f1);
  const Moments mre = moments(f_re);
  const Moments mim = moments(f_im);
  rec.rel_mse_h = mh.mean;
  rec.rel_mse_h_ci = z * mh.se;
  rec.rel_mse_f = mf2.mean;
  rec.rel_mse_f_ci = z * mf2.se;
  rec.rel_mae_f = mf1.mean;
  rec.rel_mae_f_ci = z * mf1.se;
  rec.mean_f = {mre.mean, mim.mean};
  rec.mean_f_re_ci = z * mre.se;
  rec.mean_f_im_ci = z * mim.se;
  rec.rel_bias_f = std::abs(rec.mean_f - f) / fabs;
  rec.rel_bias_f_ci = z * std::hypot(mre.se, mim.se) / fabs;
  rec.trimmed_rel_mae_f = trimmed_mean(e_f1, trim_fraction);
  rec.trimmed_rel_mse_f = trimmed_mean(e_f2, trim_fraction);
  rec.minus_root_rate = rec.ok ? static_cast<double>(minus) / static_cast<double>(rec.ok) : 0.0;
  const ReceiverScenario& sc = point.scenario;
  rec.hcrb_rel_h = hcrb_relative_channel(f, point.prior, sc.s1(), sc.s2(), sc.noise_var());
  rec.hcrb_rel_f = hcrb_f(point.prior, sc.s2(), sc.noise_var()) / (fabs * fabs);
  return rec;
}

std::vector<MetricRecord> sweep(const SweepConfig& config) {
  config.validate();
  return run_grid(config, config.scenario, config.prior.kind, config.estimators, "sweep");
}

std::vector<MetricRecord> bias_study(const SweepConfig& config,
                                     const std::vector<cdouble>& f_values) {
  config.validate();
  std::vector<MetricRecord> out;
  const std::vector<cdouble> fs =
      f_values.empty() ? std::vector<cdouble>{config.scenario.f()} : f_values;
  const LoadSwitchPlan& plan = config.scenario.plan();
  for (const cdouble f : fs) {
    const Impedance za = impedance_from_f(f, plan.z1, plan.z2);
    const ReceiverScenario base = config.scenario.with_antenna(za);
    auto recs = run_grid(config, base, config.prior.kind, config.estimators, "bias");
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

std::vector<MetricRecord> correlation_study(const SweepConfig& config) {
  config.validate();
  auto out = run_grid(config, config.scenario, ChannelPrior::Kind::iid, config.estimators,
                      "correlation");
  auto slow = run_grid(config, config.scenario, ChannelPrior::Kind::slow_fading,
                       {Method::slow_fading}, "correlation");
  out.insert(out.end(), slow.begin(), slow.end());
  return out;
}

std::vector<MetricRecord> run_study(const SweepConfig& config) {
  switch (config.study) {
    case Study::sweep:
      return sweep(config);
    case Study::bias:
      return bias_study(config, config.f_values);
    case Study::correlation:
      return correlation_study(config);
  }
  throw ConfigError("sweep.study", "unknown study");
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{
      "study",          "prior",          "snr_db",         "L",
      "estimator",      "F_re",           "F_im",           "trials",
      "ok",             "unidentifiable", "failed",         "rel_mse_H",
      "rel_mse_H_ci",   "rel_mse_F",      "rel_mse_F_ci",   "rel_mae_F",
      "rel_mae_F_ci",   "rel_bias_F",     "rel_bias_F_ci",  "mean_F_re",
      "mean_F_re_ci",   "mean_F_im",      "mean_F_im_ci",   "trimmed_rel_mae_F",
      "trimmed_rel_mse_F", "hcrb_rel_H",  "hcrb_rel_F",     "minus_root_rate"};
  return cols;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
  const auto& cols = metric_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const MetricRecord& r : records) {
    out << r.study << ',' << r.prior << ',' << fmt(r.snr_db) << ',' << r.packets << ','
        << r.estimator << ',' << fmt(r.f_true.real()) << ',' << fmt(r.f_true.imag()) << ','
        << r.trials << ',' << r.ok << ',' << r.unidentifiable << ',' << r.failed << ','
        << fmt(r.rel_mse_h) << ',' << fmt(r.rel_mse_h_ci) << ',' << fmt(r.rel_mse_f) << ','
        << fmt(r.rel_mse_f_ci) << ',' << fmt(r.rel_mae_f) << ',' << fmt(r.rel_mae_f_ci) << ','
        << fmt(r.rel_bias_f) << ',' << fmt(r.rel_bias_f_ci) << ',' << fmt(r.mean_f.real()) << ','
        << fmt(r.mean_f_re_ci) << ',' << fmt(r.mean_f.imag()) << ',' << fmt(r.mean_f_im_ci)
        << ',' << fmt(r.trimmed_rel_mae_f) << ',' << fmt(r.trimmed_rel_mse_f) << ','
        << fmt(r.hcrb_rel_h) << ',' << fmt(r.hcrb_rel_f) << ',' << fmt(r.minus_root_rate)
        << '\n';
  }
}

}  // namespace chanimp
