#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "chanimp/estimators.hpp"
#include "chanimp/model.hpp"

namespace chanimp {

/// How a trial produces its sufficient statistic.
enum class Fidelity {
  packets,  // simulate T raw samples per packet, then matched-filter
  stats,    // draw V from its exact conditional law
};

/// Prior family, instantiated per packet count.
struct PriorSpec {
  ChannelPrior::Kind kind = ChannelPrior::Kind::iid;
  double sigma_h2 = 1.0;
  double r = 0.0;
  std::optional<CMatrix> matrix;  // explicit kind only

  ChannelPrior make(std::size_t packets) const;
};

std::string_view to_string(ChannelPrior::Kind kind) noexcept;

enum class Study { sweep, bias, correlation };

struct SweepConfig {
  ReceiverScenario scenario = reference_scenario();
  PriorSpec prior;
  std::vector<double> snr_db;
  std::vector<std::size_t> packets;
  std::size_t trials = 10000;
  std::vector<Method> estimators{Method::general};
  std::uint64_t seed = 1;
  Fidelity fidelity = Fidelity::packets;
  /// Fraction of the largest |F_hat - F| dropped in the trimmed columns.
  double trim_fraction = 0.0;
  /// Two-sided confidence level of every *_ci column.
  double ci_level = 0.95;
  SolverSettings solver;
  unsigned threads = 1;

  Study study = Study::sweep;
  /// bias study only; empty means the scenario's own F
  std::vector<cdouble> f_values;

  void validate() const;
};

/// Everything one grid point needs to run trials.
struct GridPoint {
  ReceiverScenario scenario;
  ChannelPrior prior;
  Fidelity fidelity = Fidelity::packets;
  SolverSettings solver;
};

enum class TrialStatus { ok, unidentifiable, failed };

struct EstimatorOutcome {
  Method method = Method::general;
  TrialStatus status = TrialStatus::ok;
  CVector h_error;  // H_hat - H
  cdouble f_hat;
  double residual = 0.0;  // best residual of a solver failure
  bool minus_root = false;
};

struct TrialResult {
  double h_energy = 0.0;  // ||H||^2 of the drawn channel
  std::vector<EstimatorOutcome> outcomes;
};

/// Draw H, simulate L packets, reduce, run every estimator.
TrialResult run_trial(const GridPoint& point, const std::vector<Method>& estimators, Rng& rng);

/// All trials of one grid point, in trial-index order. Trial t uses
/// Rng(stream_seed(seed, point_index, t)), so the result does not depend on
/// `threads`.
std::vector<TrialResult> run_point(const GridPoint& point, const std::vector<Method>& estimators,
                                   std::uint64_t seed, std::uint64_t point_index,
                                   std::size_t trials, unsigned threads);

/// One row of a sweep table.
struct MetricRecord {
  std::string study;
  std::string prior;
  double snr_db = 0.0;
  std::size_t packets = 0;
  std::string estimator;
  cdouble f_true;
  std::size_t trials = 0;
  std::size_t ok = 0;
  std::size_t unidentifiable = 0;
  std::size_t failed = 0;

  double rel_mse_h = 0.0, rel_mse_h_ci = 0.0;      // E||H_hat - H||^2 / Tr[C_H]
  double rel_mse_f = 0.0, rel_mse_f_ci = 0.0;      // E|F_hat - F|^2 / |F|^2
  double rel_mae_f = 0.0, rel_mae_f_ci = 0.0;      // E|F_hat - F| / |F|
  double rel_bias_f = 0.0, rel_bias_f_ci = 0.0;    // |E[F_hat - F]| / |F|
  cdouble mean_f;
  double mean_f_re_ci = 0.0, mean_f_im_ci = 0.0;
  double trimmed_rel_mae_f = 0.0;
  double trimmed_rel_mse_f = 0.0;
  double hcrb_rel_h = 0.0;  // Tr[HCRB_H] / Tr[C_H]
  double hcrb_rel_f = 0.0;  // HCRB_F / |F|^2
  double minus_root_rate = 0.0;

  double failure_rate() const noexcept {
    return trials ? static_cast<double>(failed + unidentifiable) / static_cast<double>(trials)
                  : 0.0;
  }
};

/// Aggregates per-trial results of one estimator into a record. `index` is
/// the estimator's position in each TrialResult::outcomes.
MetricRecord aggregate(const std::vector<TrialResult>& trials, std::size_t index,
                       const GridPoint& point, double ci_level, double trim_fraction);

/// One record per (snr, L, estimator).
std::vector<MetricRecord> sweep(const SweepConfig& config);

/// F_hat bias against SNR and L for each F in `f_values` (antenna impedance
/// derived from F).
std::vector<MetricRecord> bias_study(const SweepConfig& config,
                                     const std::vector<cdouble>& f_values);

/// Runs the configured estimators under the i.i.d. prior and slow_fading
/// under the fully-correlated prior on the same (snr, L) grid and seeds.
std::vector<MetricRecord> correlation_study(const SweepConfig& config);

/// Dispatches on config.study.
std::vector<MetricRecord> run_study(const SweepConfig& config);

/// Column names, in output order.
const std::vector<std::string>& metric_columns();

/// CSV with a header row; numbers carry 17 significant digits.
void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& records);

}  // namespace chanimp
