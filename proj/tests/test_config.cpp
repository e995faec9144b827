#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfctrl/config.hpp"

using namespace mfctrl;
using nlohmann::json;

TEST_CASE("defaults and basic parsing") {
  ExperimentConfig cfg = parse_config_json(json::object());
  CHECK(cfg.model == "lossnet");
  CHECK(cfg.n_particles == 1000);
  CHECK(cfg.policy == "uncontrolled");
  CHECK(cfg.x0_policy == "fixed_point");

  json j{{"model", "two_state"}, {"N", 500},      {"T", 2.5},
         {"alpha", 0.001},       {"seed", 77},    {"policy", "lqr"},
         {"n_trials", 4},        {"parallelism", 8}};
  cfg = parse_config_json(j);
  CHECK(cfg.model == "two_state");
  CHECK(cfg.n_particles == 500);
  CHECK(cfg.horizon == 2.5);
  CHECK(cfg.alpha == 0.001);
  CHECK(cfg.seed == 77);
  CHECK(cfg.policy == "lqr");
  CHECK(cfg.config_hash == fnv1a(j.dump()));
}

TEST_CASE("unknown keys are rejected at top level and in model_params") {
  CHECK_THROWS_AS((void)parse_config_json(json{{"n", 10}}), ConfigError);
  CHECK_THROWS_AS(
      (void)parse_config_json(json{{"model_params", json{{"capasity", 6}}}}),
      ConfigError);
}

TEST_CASE("scalar-or-pair model parameters") {
  json j{{"model_params", json{{"lambda", 2.0}, {"tau", json::array({1.0, 3.0})}}}};
  ExperimentConfig cfg = parse_config_json(j);
  CHECK(cfg.lossnet.lambda1 == 2.0);
  CHECK(cfg.lossnet.lambda2 == 2.0);
  CHECK(cfg.lossnet.tau1 == 1.0);
  CHECK(cfg.lossnet.tau2 == 3.0);

  CHECK_THROWS_AS((void)parse_config_json(
                      json{{"model_params", json{{"lambda", json::array({1.0, 2.0, 3.0})}}}}),
                  ConfigError);
}

TEST_CASE("benchmark preset expands, explicit overrides still apply") {
  ExperimentConfig cfg = parse_config_json(json{{"table1", true}});
  CHECK(cfg.model == "lossnet");
  CHECK(cfg.n_particles == 10000);
  CHECK(cfg.horizon == 10.0);
  CHECK(cfg.n_trials == 128);
  CHECK(cfg.table1_preset);

  cfg = parse_config_json(json{{"table1", true}, {"n_trials", 8}, {"N", 1000}});
  CHECK(cfg.n_particles == 1000);
  CHECK(cfg.n_trials == 8);
}

TEST_CASE("x0: policy string or explicit vector") {
  ExperimentConfig cfg = parse_config_json(json{{"x0", "uniform"}});
  CHECK(cfg.x0_policy == "uniform");
  cfg = parse_config_json(json{{"model", "two_state"}, {"x0", json::array({0.5, 0.5})}});
  CHECK(cfg.x0_policy == "explicit");
  REQUIRE(cfg.x0_explicit.size() == 2);
  CHECK(cfg.x0_explicit[0] == 0.5);
  CHECK_THROWS_AS((void)parse_config_json(json{{"x0", 5}}), ConfigError);
  CHECK_THROWS_AS((void)parse_config_json(json{{"x0", "somewhere"}}), ConfigError);
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS((void)parse_config_json(json{{"N", 0}}), ConfigError);
  CHECK_THROWS_AS((void)parse_config_json(json{{"T", -1.0}}), ConfigError);
  CHECK_THROWS_AS((void)parse_config_json(json{{"policy", "bangbang"}}), ConfigError);
  CHECK_THROWS_AS((void)parse_config_json(json{{"model", "mm1"}}), ConfigError);
  CHECK_THROWS_AS((void)parse_config_json(json{{"fluid_h", 0.0}}), ConfigError);
  CHECK_THROWS_AS((void)parse_config_json(json{{"policy", "lqr"}, {"alpha", -0.1}}),
                  ConfigError);
}

TEST_CASE("config hash distinguishes configurations; file errors are reported") {
  const auto h1 = parse_config_json(json{{"N", 100}}).config_hash;
  const auto h2 = parse_config_json(json{{"N", 101}}).config_hash;
  CHECK(h1 != h2);
  CHECK_THROWS_AS((void)parse_config("/nonexistent/config.json"), ConfigError);
}
