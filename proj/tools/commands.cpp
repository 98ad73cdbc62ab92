#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chanimp/bounds.hpp"
#include "chanimp/config.hpp"
#include "chanimp/error.hpp"
#include "chanimp/estimators.hpp"
#include "chanimp/montecarlo.hpp"
#include "chanimp/stats_io.hpp"

namespace chanimp::cli {

namespace {

using json = nlohmann::ordered_json;

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SingularError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const UnidentifiableError& e) {
    err << "unidentifiable: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << " (best residual " << e.best_residual() << ")\n";
    return kNumericalFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string complex_text(cdouble z) {
  std::ostringstream s;
  s << std::setprecision(10) << z.real() << (z.imag() < 0 ? " - j" : " + j") << std::abs(z.imag());
  return s.str();
}

json complex_json(cdouble z) { return json::array({z.real(), z.imag()}); }

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunConfig optional_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

ChannelPrior::Kind parse_kind(const std::string& kind) {
  if (kind == "iid") return ChannelPrior::Kind::iid;
  if (kind == "slow_fading") return ChannelPrior::Kind::slow_fading;
  if (kind == "exponential") return ChannelPrior::Kind::exponential;
  if (kind == "explicit") return ChannelPrior::Kind::explicit_matrix;
  throw ConfigError("prior.kind", "unknown kind '" + kind + "'");
}

}  // namespace

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    const std::string text = read_file(args.config_path);
    RunConfig cfg = parse_run_config(text);
    if (!cfg.sweep) throw ConfigError("sweep", "config has no [sweep] table");
    SweepConfig sw = *cfg.sweep;
    if (args.seed) sw.seed = *args.seed;
    if (args.threads) sw.threads = *args.threads;
    const auto records = run_study(sw);

    std::ostringstream csv;
    write_metrics_csv(csv, records);
    write_file(args.out_path, csv.str());

    double worst = 0.0;
    for (const auto& r : records) worst = std::max(worst, r.failure_rate());
    out << "wrote " << records.size() << " records to " << args.out_path << '\n';

    if (!args.manifest_path.empty()) {
      const auto finished = std::chrono::system_clock::now();
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json m;
      m["tool"] = "chanimp";
      m["version"] = CHANIMP_VERSION;
      m["command"] = "sweep";
      m["config_path"] = args.config_path;
      m["config"] = json::parse(config_to_json(text));
      m["seed"] = sw.seed;
      m["threads"] = sw.threads;
      m["started"] = iso_time(started);
      m["finished"] = iso_time(finished);
      m["wall_seconds"] = wall;
      m["outputs"] = json::array({args.out_path});
      m["records"] = records.size();
      m["max_failure_rate_observed"] = worst;
      write_file(args.manifest_path, m.dump(2) + "\n");
    }
    if (worst > cfg.max_failure_rate) {
      err << "failure rate " << worst << " exceeds max_failure_rate " << cfg.max_failure_rate
          << '\n';
      return static_cast<int>(kNumericalFailure);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SufficientStats stats = load_stats_csv(args.stats_path);
    const RunConfig cfg = optional_config(args.config_path);
    PriorSpec spec = cfg.prior;
    if (args.prior_kind) spec.kind = parse_kind(*args.prior_kind);
    if (args.sigma_h2) spec.sigma_h2 = *args.sigma_h2;
    if (args.r) spec.r = *args.r;
    const ChannelPrior prior = spec.make(stats.packets());
    Method method;
    try {
      method = parse_method(args.method);
    } catch (const DomainError& e) {
      throw ConfigError("--method", e.what());
    }
    const HybridEstimate est = estimate(method, stats, prior, cfg.solver);
    if (!est.identifiable) {
      throw UnidentifiableError("V1 carries no energy; F is unidentifiable");
    }
    const LoadSwitchPlan& plan = cfg.scenario.plan();
    std::optional<Impedance> za;
    try {
      za = impedance_from_f(est.f, plan.z1, plan.z2);
    } catch (const SingularError&) {
    }

    if (args.json) {
      json j;
      j["method"] = std::string(to_string(est.method));
      j["packets"] = stats.packets();
      j["F_hat"] = complex_json(est.f);
      j["Z_A_hat"] = za ? complex_json(za->value()) : json(nullptr);
      j["loglik"] = est.loglik;
      json h = json::array();
      for (Eigen::Index i = 0; i < est.h.size(); ++i) h.push_back(complex_json(est.h[i]));
      j["H_hat"] = h;
      json cands = json::array();
      for (const auto& c : est.candidates) {
        cands.push_back({{"F", complex_json(c.f)}, {"loglik", c.loglik}, {"residual", c.residual}});
      }
      j["candidates"] = cands;
      j["minus_root_selected"] = est.minus_root_selected;
      out << j.dump(2) << '\n';
      return static_cast<int>(kOk);
    }
    out << std::setprecision(12);
    out << "method      " << to_string(est.method) << '\n';
    out << "packets     " << stats.packets() << '\n';
    out << "F_hat       " << complex_text(est.f) << '\n';
    if (za) {
      out << "Z_A_hat     " << complex_text(za->value()) << " ohm";
      if (za->resistance < 0.0) out << "  (negative resistance)";
      out << '\n';
    } else {
      out << "Z_A_hat     unbounded\n";
    }
    out << "loglik      " << est.loglik << '\n';
    for (Eigen::Index i = 0; i < est.h.size(); ++i) {
      out << "H_hat[" << i << "]    " << complex_text(est.h[i]) << '\n';
    }
    for (const auto& c : est.candidates) {
      out << "candidate   F = " << complex_text(c.f) << "  loglik = " << c.loglik << '\n';
    }
    return static_cast<int>(kOk);
  });
}

int cmd_bound(const BoundArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = optional_config(args.config_path);
    PriorSpec spec = cfg.prior;
    if (args.prior_kind) spec.kind = parse_kind(*args.prior_kind);
    if (args.sigma_h2) spec.sigma_h2 = *args.sigma_h2;
    if (args.packets < 1) throw ConfigError("--L", "must be at least 1");
    const ChannelPrior prior = spec.make(args.packets);
    double noise_var = cfg.scenario.noise_var();
    if (args.snr_db) noise_var = prior.sigma_h2() / std::pow(10.0, *args.snr_db / 10.0);
    const ReceiverScenario& sc = cfg.scenario;
    const HcrbReport rep = hcrb(sc.f(), prior, sc.s1(), sc.s2(), noise_var);
    const double sh2 = prior.sigma_h2();
    if (args.json) {
      json j;
      j["L"] = args.packets;
      j["F"] = complex_json(sc.f());
      j["noise_var"] = noise_var;
      j["sigma_H2"] = sh2;
      json diag = json::array();
      for (Eigen::Index i = 0; i < rep.h_block.rows(); ++i) {
        diag.push_back(rep.h_block(i, i).real() / sh2);
      }
      j["h_block_diag_relative"] = diag;
      j["f_bound"] = rep.f_bound;
      j["f_bound_relative"] = rep.f_bound / std::norm(sc.f());
      out << j.dump(2) << '\n';
      return static_cast<int>(kOk);
    }
    out << "F            " << complex_text(sc.f()) << '\n';
    out << "noise_var    " << fmt(noise_var) << '\n';
    for (Eigen::Index i = 0; i < rep.h_block.rows(); ++i) {
      out << "h_rel[" << i << "]     " << fmt(rep.h_block(i, i).real() / sh2) << '\n';
    }
    out << "f_bound      " << fmt(rep.f_bound) << '\n';
    out << "f_bound_rel  " << fmt(rep.f_bound / std::norm(sc.f())) << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_gen(const GenArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::size_t k = args.split.value_or(args.length / 2);
    TrainingSequence tr = [&] {
      try {
        return zadoff_chu(args.length, args.root, k);
      } catch (const DomainError& e) {
        throw ConfigError("--T/--K/--u", e.what());
      }
    }();
    const ReceiverScenario ref = reference_scenario();
    LoadSwitchPlan plan(ref.plan().z1, ref.plan().z2, k, args.length);
    const ReceiverScenario sc(ref.antenna(), plan, std::move(tr), ref.noise_var());
    write_file(args.out_path, scenario_to_toml(sc, args.root));
    out << "wrote " << args.length << " training symbols to " << args.out_path << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = optional_config(args.config_path);
    if (args.packets < 1) throw ConfigError("--L", "must be at least 1");
    const ChannelPrior prior = cfg.prior.make(args.packets);
    double nv = cfg.scenario.noise_var();
    if (args.snr_db) nv = prior.sigma_h2() / std::pow(10.0, *args.snr_db / 10.0);
    if (args.noise_var) nv = *args.noise_var;
    const ReceiverScenario sc = cfg.scenario.with_noise_var(nv);
    Rng rng(args.seed);
    const CVector h = sample_channels(prior, rng);
    SufficientStats stats;
    if (args.fidelity == "packets") {
      stats = simulate_and_reduce(h, sc.f(), sc, rng);
    } else if (args.fidelity == "stats") {
      stats = draw_stats(h, sc.f(), sc, rng);
    } else {
      throw ConfigError("--fidelity", "must be 'packets' or 'stats'");
    }
    save_stats_csv(args.out_path, stats);
    out << "wrote " << args.packets << " packets to " << args.out_path << " (true F "
        << complex_text(sc.f()) << ")\n";
    return static_cast<int>(kOk);
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint channel and antenna-impedance estimation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CHANIMP_VERSION);

  SweepArgs sweep_args;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a Monte Carlo study and write a metrics CSV");
  sweep->add_option("--config", sweep_args.config_path, "TOML run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_args.out_path, "Output CSV path")->required();
  auto* seed_opt = sweep->add_option("--seed", seed, "Override the master seed");
  auto* threads_opt = sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--manifest", sweep_args.manifest_path, "Write a JSON run manifest");

  EstimateArgs est_args;
  std::string est_prior;
  double est_sigma = 0.0;
  double est_r = 0.0;
  auto* est = app.add_subcommand("estimate", "Estimate (H, F) from a sufficient-statistic CSV");
  est->add_option("stats", est_args.stats_path, "Sufficient-statistic CSV")->required();
  est->add_option("--config", est_args.config_path, "TOML with [prior] and [scenario]");
  est->add_option("--method", est_args.method,
                  "map_ml_general | iid_quadratic | low_noise | single_packet | slow_fading | "
                  "consistent");
  auto* est_prior_opt = est->add_option("--prior", est_prior, "Prior kind override");
  auto* est_sigma_opt = est->add_option("--sigma-h2", est_sigma, "sigma_H^2 override");
  auto* est_r_opt = est->add_option("--r", est_r, "Exponential correlation override");
  est->add_flag("--json", est_args.json, "Print JSON");

  BoundArgs bound_args;
  std::string bound_prior;
  double bound_snr = 0.0;
  double bound_sigma = 0.0;
  auto* bound = app.add_subcommand("bound", "Print the hybrid Cramer-Rao bound");
  bound->add_option("--config", bound_args.config_path, "TOML with [scenario] and [prior]");
  bound->add_option("--L", bound_args.packets, "Packet count");
  auto* bound_snr_opt = bound->add_option("--snr-db", bound_snr, "SNR sigma_H^2/sigma_n^2 in dB");
  auto* bound_sigma_opt = bound->add_option("--sigma-h2", bound_sigma, "sigma_H^2 override");
  auto* bound_prior_opt = bound->add_option("--prior", bound_prior, "Prior kind override");
  bound->add_flag("--json", bound_args.json, "Print JSON");

  GenArgs gen_args;
  std::size_t gen_k = 0;
  auto* gen = app.add_subcommand("gen", "Write a Zadoff-Chu training sequence and scenario");
  gen->add_option("--T", gen_args.length, "Sequence length (even)");
  auto* gen_k_opt = gen->add_option("--K", gen_k, "Load switch index (default T/2)");
  gen->add_option("--u", gen_args.root, "Zadoff-Chu root (odd, coprime with T)");
  gen->add_option("--out", gen_args.out_path, "Output TOML path")->required();

  SimulateArgs sim_args;
  double sim_snr = 0.0;
  double sim_nv = 0.0;
  auto* sim = app.add_subcommand("simulate", "Simulate packets and write their sufficient statistic");
  sim->add_option("--config", sim_args.config_path, "TOML with [scenario] and [prior]");
  sim->add_option("--out", sim_args.out_path, "Output CSV path")->required();
  sim->add_option("--L", sim_args.packets, "Packet count");
  auto* sim_snr_opt = sim->add_option("--snr-db", sim_snr, "SNR in dB (sets sigma_n^2)");
  auto* sim_nv_opt = sim->add_option("--noise-var", sim_nv, "sigma_n^2 (overrides --snr-db)");
  sim->add_option("--seed", sim_args.seed, "Seed");
  sim->add_option("--fidelity", sim_args.fidelity, "packets | stats");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kConfigError);
  }

  if (*sweep) {
    if (*seed_opt) sweep_args.seed = seed;
    if (*threads_opt) sweep_args.threads = threads;
    return cmd_sweep(sweep_args, out, err);
  }
  if (*est) {
    if (*est_prior_opt) est_args.prior_kind = est_prior;
    if (*est_sigma_opt) est_args.sigma_h2 = est_sigma;
    if (*est_r_opt) est_args.r = est_r;
    return cmd_estimate(est_args, out, err);
  }
  if (*bound) {
    if (*bound_snr_opt) bound_args.snr_db = bound_snr;
    if (*bound_sigma_opt) bound_args.sigma_h2 = bound_sigma;
    if (*bound_prior_opt) bound_args.prior_kind = bound_prior;
    return cmd_bound(bound_args, out, err);
  }
  if (*gen) {
    if (*gen_k_opt) gen_args.split = gen_k;
    return cmd_gen(gen_args, out, err);
  }
  if (*sim) {
    if (*sim_snr_opt) sim_args.snr_db = sim_snr;
    if (*sim_nv_opt) sim_args.noise_var = sim_nv;
    return cmd_simulate(sim_args, out, err);
  }
  return static_cast<int>(kConfigError);
}

}  // namespace chanimp::cli
