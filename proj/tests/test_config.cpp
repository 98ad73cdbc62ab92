#include <gtest/gtest.h>

#include "chanimp/config.hpp"
#include "chanimp/error.hpp"

using namespace chanimp;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(ParseComplex, Forms) {
  EXPECT_EQ(parse_complex("1.5+2j"), cdouble(1.5, 2.0));
  EXPECT_EQ(parse_complex("1.5-2j"), cdouble(1.5, -2.0));
  EXPECT_EQ(parse_complex("-3j"), cdouble(0.0, -3.0));
  EXPECT_EQ(parse_complex("4"), cdouble(4.0, 0.0));
  EXPECT_EQ(parse_complex("0.9860+0.2445i"), cdouble(0.9860, 0.2445));
  EXPECT_EQ(parse_complex("1e-3+2e2j"), cdouble(1e-3, 2e2));
  EXPECT_THROW(parse_complex("abc"), DomainError);
  EXPECT_THROW(parse_complex(""), DomainError);
}

TEST(ParseMethod, Names) {
  EXPECT_EQ(parse_method("map_ml_general"), Method::general);
  EXPECT_EQ(parse_method("slow_fading"), Method::slow_fading);
  EXPECT_THROW(parse_method("bogus"), DomainError);
}

TEST(RunConfig, Defaults) {
  const auto cfg = parse_run_config("");
  EXPECT_FALSE(cfg.sweep.has_value());
  EXPECT_NEAR(std::abs(cfg.scenario.f() - reference_scenario().f()), 0.0, 1e-15);
}

TEST(RunConfig, FullDocument) {
  const auto cfg = parse_run_config(R"(
[scenario]
antenna = "80+30j"
z1 = [50.0, 0.0]
z2 = [50.0, 20.0]
T = 32
K = 10
zc_root = 3
noise_var = 0.25

[prior]
kind = "exponential"
sigma_H2 = 2.0
r = 0.5

[sweep]
snr_db = [0, 10]
L = [2, 4]
trials = 50
estimators = ["general", "consistent"]
seed = 99
fidelity = "stats"
threads = 2

[solver]
root_tolerance = 1e-10
multistart = ["1+1j", [0.5, -0.5]]
)");
  EXPECT_EQ(cfg.scenario.plan().length, 32u);
  EXPECT_EQ(cfg.scenario.plan().split, 10u);
  EXPECT_DOUBLE_EQ(cfg.scenario.noise_var(), 0.25);
  EXPECT_EQ(cfg.scenario.antenna(), Impedance(80.0, 30.0));
  EXPECT_EQ(cfg.prior.kind, ChannelPrior::Kind::exponential);
  ASSERT_TRUE(cfg.sweep);
  EXPECT_EQ(cfg.sweep->trials, 50u);
  EXPECT_EQ(cfg.sweep->seed, 99u);
  EXPECT_EQ(cfg.sweep->fidelity, Fidelity::stats);
  EXPECT_EQ(cfg.sweep->estimators.size(), 2u);
  EXPECT_EQ(cfg.solver.multistart.size(), 2u);
  EXPECT_EQ(cfg.sweep->solver.root_tolerance, 1e-10);
}

TEST(RunConfig, ErrorsNameTheKey) {
  EXPECT_EQ(error_key("[sweep]\nsnr_db=[0]\nL=[1]\n"), "sweep.trials");
  EXPECT_EQ(error_key("[sweep]\nsnr_db=[0]\nL=[1]\ntrials=10\nbogus=1\n"), "sweep.bogus");
  EXPECT_EQ(error_key("[prior]\nkind=\"weird\"\n"), "prior.kind");
  EXPECT_EQ(error_key("[scenario]\nT=63\n"), "scenario.T");
  EXPECT_EQ(error_key("[scenario]\nantenna=\"x\"\n"), "scenario.antenna");
  EXPECT_THROW(parse_run_config("not = [valid"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/file.toml"), IoError);
}

TEST(RunConfig, ScenarioRoundTrip) {
  const auto sc = ReceiverScenario(Impedance(73.0, 42.5),
                                   LoadSwitchPlan(Impedance(50, 0), Impedance(50, 20), 20, 48),
                                   zadoff_chu(48, 5, 20), 0.5);
  const std::string text = scenario_to_toml(sc, 5);
  const auto back = parse_run_config(text).scenario;
  EXPECT_EQ(back.training().symbols(), sc.training().symbols());
  EXPECT_EQ(back.plan().split, 20u);
  EXPECT_EQ(back.noise_var(), 0.5);
  EXPECT_EQ(back.f(), sc.f());
  // Rendering again gives the same text.
  EXPECT_EQ(scenario_to_toml(back, 5), text);
}

TEST(RunConfig, JsonEcho) {
  const std::string json = config_to_json("[prior]\nkind = \"iid\"\nsigma_H2 = 2.0\n");
  EXPECT_NE(json.find("\"sigma_H2\""), std::string::npos);
  EXPECT_NE(json.find("\"iid\""), std::string::npos);
}
