#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfctrl/models/lossnet.hpp"
#include "mfctrl/models/two_state.hpp"

namespace mfctrl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string model = "lossnet";
  LossNetParams lossnet;
  TwoStateParams two_state;

  int n_particles = 1000;
  double horizon = 1.0;
  int n_trials = 32;
  int n_paths = 1000;          // sde command
  double alpha = 0.01;
  double fluid_h = 1e-3;
  double riccati_h = 1e-3;
  double sde_h = 1e-3;
  double quad_step = 0.01;
  std::uint64_t seed = 1;
  int parallelism = 1;
  std::string out_dir = ".";
  std::string policy = "uncontrolled";  // uncontrolled | lqr | zero
  std::string x0_policy = "fixed_point";  // fixed_point | uniform | explicit
  std::vector<double> x0_explicit;
  bool table1_preset = false;

  std::uint64_t config_hash = 0;

  void validate() const {
    if (n_particles < 1) throw ConfigError("config: N must be >= 1");
    if (horizon <= 0) throw ConfigError("config: T must be > 0");
    if (n_trials < 1) throw ConfigError("config: n_trials must be >= 1");
    if (fluid_h <= 0 || riccati_h <= 0 || sde_h <= 0 || quad_step <= 0)
      throw ConfigError("config: all grid steps must be > 0");
    if (policy != "uncontrolled" && policy != "lqr" && policy != "zero")
      throw ConfigError("config: policy must be uncontrolled, lqr, or zero");
    if (policy == "lqr" && alpha <= 0) throw ConfigError("config: alpha must be > 0 with policy lqr");
    if (model != "lossnet" && model != "two_state")
      throw ConfigError("config: model must be lossnet or two_state");
    if (x0_policy != "fixed_point" && x0_policy != "uniform" && x0_policy != "explicit")
      throw ConfigError("config: x0 must be fixed_point, uniform, or an explicit vector");
  }
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline void expect_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                        const std::string& where) {
  std::string unknown;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) unknown += (unknown.empty() ? "" : ", ") + it.key();
  if (!unknown.empty())
    throw ConfigError("config: unknown key(s) in " + where + ": " + unknown);
}

inline void read_pair(const nlohmann::json& j, const std::string& key, double& a, double& b) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_number()) {
    a = b = v.get<double>();
  } else if (v.is_array() && v.size() == 2) {
    a = v[0].get<double>();
    b = v[1].get<double>();
  } else {
    throw ConfigError("config: " + key + " must be a number or a pair");
  }
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  detail::expect_keys(j,
                      {"model", "model_params", "N", "T", "n_trials", "n_paths", "alpha",
                       "fluid_h", "riccati_h", "sde_h", "quad_step", "seed", "parallelism",
                       "out_dir", "policy", "x0", "table1"},
                      "top level");

  if (j.contains("table1")) cfg.table1_preset = j.at("table1").get<bool>();
  if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
  if (cfg.table1_preset) {
    cfg.model = "lossnet";
    cfg.n_particles = 10000;
    cfg.horizon = 10.0;
    cfg.n_trials = 128;
  }
  if (j.contains("N")) cfg.n_particles = j.at("N").get<int>();
  if (j.contains("T")) cfg.horizon = j.at("T").get<double>();
  if (j.contains("n_trials")) cfg.n_trials = j.at("n_trials").get<int>();
  if (j.contains("n_paths")) cfg.n_paths = j.at("n_paths").get<int>();
  if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
  if (j.contains("fluid_h")) cfg.fluid_h = j.at("fluid_h").get<double>();
  if (j.contains("riccati_h")) cfg.riccati_h = j.at("riccati_h").get<double>();
  if (j.contains("sde_h")) cfg.sde_h = j.at("sde_h").get<double>();
  if (j.contains("quad_step")) cfg.quad_step = j.at("quad_step").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("policy")) cfg.policy = j.at("policy").get<std::string>();

  if (j.contains("x0")) {
    const auto& x0 = j.at("x0");
    if (x0.is_string()) {
      cfg.x0_policy = x0.get<std::string>();
    } else if (x0.is_array()) {
      cfg.x0_policy = "explicit";
      for (const auto& v : x0) cfg.x0_explicit.push_back(v.get<double>());
    } else {
      throw ConfigError("config: x0 must be a policy name or a vector");
    }
  }

  if (j.contains("model_params")) {
    const auto& mp = j.at("model_params");
    if (cfg.model == "lossnet") {
      detail::expect_keys(mp, {"capacity", "a1", "a2", "lambda", "tau", "gamma", "D"},
                          "model_params");
      if (mp.contains("capacity")) cfg.lossnet.capacity = mp.at("capacity").get<int>();
      if (mp.contains("a1")) cfg.lossnet.a1 = mp.at("a1").get<int>();
      if (mp.contains("a2")) cfg.lossnet.a2 = mp.at("a2").get<int>();
      detail::read_pair(mp, "lambda", cfg.lossnet.lambda1, cfg.lossnet.lambda2);
      detail::read_pair(mp, "tau", cfg.lossnet.tau1, cfg.lossnet.tau2);
      detail::read_pair(mp, "gamma", cfg.lossnet.gamma1, cfg.lossnet.gamma2);
      if (mp.contains("D")) cfg.lossnet.control_halfwidth = mp.at("D").get<double>();
    } else {
      detail::expect_keys(mp, {"lambda", "tau", "D"}, "model_params");
      if (mp.contains("lambda")) cfg.two_state.lambda = mp.at("lambda").get<double>();
      if (mp.contains("tau")) cfg.two_state.tau = mp.at("tau").get<double>();
      if (mp.contains("D")) cfg.two_state.control_halfwidth = mp.at("D").get<double>();
    }
  }

  cfg.config_hash = fnv1a(j.dump());
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
  }
  return parse_config_json(j);
}

}  // namespace mfctrl
