#include "chanimp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "chanimp/error.hpp"

namespace chanimp {

namespace {

using Keys = std::set<std::string_view>;

void reject_unknown(const toml::table& tbl, const std::string& prefix, const Keys& allowed) {
  for (auto&& [k, v] : tbl) {
    if (!allowed.count(k.str())) {
      throw ConfigError(prefix + std::string(k.str()), "unknown key");
    }
  }
}

double number(const toml::node& node, const std::string& key) {
  if (auto v = node.value<double>(); v && (node.is_integer() || node.is_floating_point())) {
    return *v;
  }
  throw ConfigError(key, "expected a number");
}

std::int64_t integer(const toml::node& node, const std::string& key) {
  if (auto v = node.value<std::int64_t>(); v && node.is_integer()) return *v;
  throw ConfigError(key, "expected an integer");
}

std::size_t count(const toml::node& node, const std::string& key) {
  const std::int64_t v = integer(node, key);
  if (v < 0) throw ConfigError(key, "must be non-negative");
  return static_cast<std::size_t>(v);
}

std::string string(const toml::node& node, const std::string& key) {
  if (auto v = node.value<std::string>(); v && node.is_string()) return *v;
  throw ConfigError(key, "expected a string");
}

cdouble complex(const toml::node& node, const std::string& key) {
  if (node.is_string()) {
    try {
      return parse_complex(*node.value<std::string>());
    } catch (const DomainError& e) {
      throw ConfigError(key, e.what());
    }
  }
  if (const auto* arr = node.as_array(); arr && arr->size() == 2) {
    return {number(*arr->get(0), key), number(*arr->get(1), key)};
  }
  if (node.is_integer() || node.is_floating_point()) return {number(node, key), 0.0};
  throw ConfigError(key, "expected a complex number as [re, im] or \"re+imj\"");
}

const toml::array& array(const toml::node& node, const std::string& key) {
  if (const auto* arr = node.as_array()) return *arr;
  throw ConfigError(key, "expected an array");
}

template <class F>
auto list(const toml::node& node, const std::string& key, F&& item) {
  std::vector<decltype(item(node, key))> out;
  const auto& arr = array(node, key);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(item(*arr.get(i), key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Impedance impedance(const toml::node& node, const std::string& key) {
  try {
    return Impedance(complex(node, key));
  } catch (const DomainError& e) {
    throw ConfigError(key, e.what());
  }
}

ReceiverScenario parse_scenario(const toml::table* tbl) {
  if (!tbl) return reference_scenario();
  reject_unknown(*tbl, "scenario.",
                 {"antenna", "z1", "z2", "T", "K", "zc_root", "noise_var", "training"});
  const auto get = [&](std::string_view k) { return tbl->get(k); };
  const Impedance za = get("antenna") ? impedance(*get("antenna"), "scenario.antenna")
                                      : Impedance(73.0, 42.5);
  const Impedance z1 = get("z1") ? impedance(*get("z1"), "scenario.z1") : Impedance(50.0, 0.0);
  const Impedance z2 = get("z2") ? impedance(*get("z2"), "scenario.z2") : Impedance(50.0, 20.0);
  const double nv = get("noise_var") ? number(*get("noise_var"), "scenario.noise_var") : 1.0;
  try {
    if (get("training")) {
      const auto syms = list(*get("training"), "scenario.training", complex);
      CVector x(static_cast<Eigen::Index>(syms.size()));
      for (std::size_t i = 0; i < syms.size(); ++i) x[static_cast<Eigen::Index>(i)] = syms[i];
      const std::size_t t = syms.size();
      if (get("T") && count(*get("T"), "scenario.T") != t) {
        throw ConfigError("scenario.T", "does not match the number of training symbols");
      }
      const std::size_t k = get("K") ? count(*get("K"), "scenario.K") : t / 2;
      return ReceiverScenario(za, LoadSwitchPlan(z1, z2, k, t), TrainingSequence(x, k), nv);
    }
    const std::size_t t = get("T") ? count(*get("T"), "scenario.T") : 64;
    const std::size_t k = get("K") ? count(*get("K"), "scenario.K") : t / 2;
    const std::size_t u = get("zc_root") ? count(*get("zc_root"), "scenario.zc_root") : 1;
    if (t % 2 != 0) throw ConfigError("scenario.T", "Zadoff-Chu length must be even");
    if (std::gcd(t, u) != 1) {
      throw ConfigError("scenario.zc_root", "must be odd and coprime with T");
    }
    return ReceiverScenario(za, LoadSwitchPlan(z1, z2, k, t), zadoff_chu(t, u, k), nv);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("scenario", e.what());
  }
}

PriorSpec parse_prior(const toml::table* tbl) {
  PriorSpec spec;
  if (!tbl) return spec;
  reject_unknown(*tbl, "prior.", {"kind", "sigma_H2", "r", "covariance"});
  if (auto n = tbl->get("kind")) {
    const std::string kind = string(*n, "prior.kind");
    if (kind == "iid") {
      spec.kind = ChannelPrior::Kind::iid;
    } else if (kind == "slow_fading") {
      spec.kind = ChannelPrior::Kind::slow_fading;
    } else if (kind == "exponential") {
      spec.kind = ChannelPrior::Kind::exponential;
    } else if (kind == "explicit") {
      spec.kind = ChannelPrior::Kind::explicit_matrix;
    } else {
      throw ConfigError("prior.kind", "unknown kind '" + kind + "'");
    }
  }
  if (auto n = tbl->get("sigma_H2")) spec.sigma_h2 = number(*n, "prior.sigma_H2");
  if (!(spec.sigma_h2 > 0.0)) throw ConfigError("prior.sigma_H2", "must be positive");
  if (auto n = tbl->get("r")) spec.r = number(*n, "prior.r");
  if (spec.kind == ChannelPrior::Kind::exponential && !(spec.r >= 0.0 && spec.r < 1.0)) {
    throw ConfigError("prior.r", "must satisfy 0 <= r < 1");
  }
  if (auto n = tbl->get("covariance")) {
    const auto rows = list(*n, "prior.covariance", [](const toml::node& row, const std::string& k) {
      return list(row, k, complex);
    });
    const auto dim = static_cast<Eigen::Index>(rows.size());
    CMatrix c(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != dim) {
        throw ConfigError("prior.covariance", "matrix must be square");
      }
      for (Eigen::Index j = 0; j < dim; ++j) {
        c(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    try {
      (void)ChannelPrior::explicit_covariance(c);
    } catch (const DomainError& e) {
      throw ConfigError("prior.covariance", e.what());
    }
    spec.matrix = std::move(c);
  }
  if (spec.kind == ChannelPrior::Kind::explicit_matrix) {
    if (!spec.matrix) throw ConfigError("prior.covariance", "required for the explicit kind");
    // sigma_H2 is implied by the matrix.
    spec.sigma_h2 = spec.matrix->trace().real() / static_cast<double>(spec.matrix->rows());
  }
  return spec;
}

SolverSettings parse_solver(const toml::table* tbl) {
  SolverSettings s;
  if (!tbl) return s;
  reject_unknown(*tbl, "solver.", {"root_tolerance", "max_iterations", "dedupe_radius", "multistart"});
  if (auto n = tbl->get("root_tolerance")) s.root_tolerance = number(*n, "solver.root_tolerance");
  if (auto n = tbl->get("max_iterations")) {
    s.max_iterations = static_cast<int>(integer(*n, "solver.max_iterations"));
  }
  if (auto n = tbl->get("dedupe_radius")) s.dedupe_radius = number(*n, "solver.dedupe_radius");
  if (auto n = tbl->get("multistart")) s.multistart = list(*n, "solver.multistart", complex);
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ConfigError("solver", e.what());
  }
  return s;
}

const toml::node& required(const toml::table& tbl, std::string_view key, const std::string& full) {
  if (const toml::node* n = tbl.get(key)) return *n;
  throw ConfigError(full, "required key is missing");
}

SweepConfig parse_sweep(const toml::table& tbl, const RunConfig& base, double& max_failure_rate) {
  reject_unknown(tbl, "sweep.",
                 {"study", "snr_db", "L", "trials", "estimators", "seed", "fidelity",
                  "trim_fraction", "ci_level", "threads", "max_failure_rate", "F_values"});
  SweepConfig cfg;
  cfg.scenario = base.scenario;
  cfg.prior = base.prior;
  cfg.solver = base.solver;
  cfg.snr_db = list(required(tbl, "snr_db", "sweep.snr_db"), "sweep.snr_db", number);
  cfg.packets = list(required(tbl, "L", "sweep.L"), "sweep.L", count);
  cfg.trials = count(required(tbl, "trials", "sweep.trials"), "sweep.trials");
  if (auto n = tbl.get("study")) {
    const std::string s = string(*n, "sweep.study");
    if (s == "sweep") {
      cfg.study = Study::sweep;
    } else if (s == "bias") {
      cfg.study = Study::bias;
    } else if (s == "correlation") {
      cfg.study = Study::correlation;
    } else {
      throw ConfigError("sweep.study", "unknown study '" + s + "'");
    }
  }
  if (auto n = tbl.get("estimators")) {
    cfg.estimators = list(*n, "sweep.estimators", [](const toml::node& e, const std::string& k) {
      try {
        return parse_method(string(e, k));
      } catch (const DomainError& err) {
        throw ConfigError(k, err.what());
      }
    });
  }
  if (auto n = tbl.get("seed")) {
    cfg.seed = static_cast<std::uint64_t>(integer(*n, "sweep.seed"));
  }
  if (auto n = tbl.get("fidelity")) {
    const std::string s = string(*n, "sweep.fidelity");
    if (s == "packets") {
      cfg.fidelity = Fidelity::packets;
    } else if (s == "stats") {
      cfg.fidelity = Fidelity::stats;
    } else {
      throw ConfigError("sweep.fidelity", "must be 'packets' or 'stats'");
    }
  }
  if (auto n = tbl.get("trim_fraction")) cfg.trim_fraction = number(*n, "sweep.trim_fraction");
  if (auto n = tbl.get("ci_level")) cfg.ci_level = number(*n, "sweep.ci_level");
  if (auto n = tbl.get("threads")) cfg.threads = static_cast<unsigned>(count(*n, "sweep.threads"));
  if (auto n = tbl.get("max_failure_rate")) {
    max_failure_rate = number(*n, "sweep.max_failure_rate");
    if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) {
      throw ConfigError("sweep.max_failure_rate", "must lie in [0, 1]");
    }
  }
  if (auto n = tbl.get("F_values")) cfg.f_values = list(*n, "sweep.F_values", complex);
  cfg.validate();
  return cfg;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  // Keep TOML floats recognizable as floats.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

cdouble parse_complex(std::string_view text) {
  std::string s;
  for (char ch : text) {
    if (ch != ' ' && ch != '\t') s += ch;
  }
  if (s.empty()) throw DomainError("empty complex number");
  const auto to_double = [&](const std::string& part) {
    if (part.empty() || part == "+") return 1.0;
    if (part == "-") return -1.0;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      throw DomainError("cannot parse complex number '" + std::string(text) + "'");
    }
    if (used != part.size()) throw DomainError("cannot parse complex number '" + std::string(text) + "'");
    return v;
  };
  const char last = s.back();
  if (last != 'j' && last != 'i') return {to_double(s), 0.0};
  s.pop_back();
  // Split at the last sign that is not the leading one and not an exponent sign.
  std::size_t split = std::string::npos;
  for (std::size_t i = s.size(); i-- > 1;) {
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string::npos) return {0.0, to_double(s)};
  return {to_double(s.substr(0, split)), to_double(s.substr(split))};
}

Method parse_method(std::string_view name) {
  for (const Method m : {Method::general, Method::iid_quadratic, Method::low_noise,
                         Method::single_packet, Method::slow_fading, Method::consistent}) {
    if (to_string(m) == name) return m;
  }
  if (name == "general") return Method::general;
  throw DomainError("unknown estimator '" + std::string(name) +
                    "' (expected map_ml_general, iid_quadratic, low_noise, single_packet, "
                    "slow_fading or consistent)");
}

RunConfig parse_run_config(std::string_view toml_text) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " at line " << e.source().begin.line;
    throw ConfigError("", msg.str());
  }
  reject_unknown(doc, "", {"scenario", "prior", "sweep", "solver"});
  RunConfig cfg;
  cfg.scenario = parse_scenario(doc["scenario"].as_table());
  cfg.prior = parse_prior(doc["prior"].as_table());
  cfg.solver = parse_solver(doc["solver"].as_table());
  if (const toml::table* sw = doc["sweep"].as_table()) {
    cfg.sweep = parse_sweep(*sw, cfg, cfg.max_failure_rate);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string config_to_json(std::string_view toml_text) {
  std::ostringstream out;
  out << toml::json_formatter{toml::parse(toml_text)};
  return out.str();
}

std::string scenario_to_toml(const ReceiverScenario& scenario, std::size_t zc_root) {
  const auto cpx = [](cdouble z) { return "[" + fmt(z.real()) + ", " + fmt(z.imag()) + "]"; };
  std::ostringstream out;
  out << "[scenario]\n";
  out << "antenna = " << cpx(scenario.antenna().value()) << "\n";
  out << "z1 = " << cpx(scenario.plan().z1.value()) << "\n";
  out << "z2 = " << cpx(scenario.plan().z2.value()) << "\n";
  out << "T = " << scenario.plan().length << "\n";
  out << "K = " << scenario.plan().split << "\n";
  out << "zc_root = " << zc_root << "\n";
  out << "noise_var = " << fmt(scenario.noise_var()) << "\n";
  out << "training = [\n";
  const CVector& x = scenario.training().symbols();
  for (Eigen::Index i = 0; i < x.size(); ++i) out << "  " << cpx(x[i]) << ",\n";
  out << "]\n";
  return out.str();
}

}  // namespace chanimp
