#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <string>

#include "mfctrl/experiment.hpp"

namespace {

using namespace mfctrl;

struct CliArgs {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
};

int cmd_fluid(const ExperimentContext& ctx) {
  out::write_fluid_csv(ctx.cfg.out_dir, ctx.fluid);
  std::cout << "fluid: " << ctx.fluid.nodes() << " nodes, dim " << ctx.spec.dim
            << ", written to " << ctx.cfg.out_dir << "/fluid.csv\n";
  return 0;
}

int cmd_coeffs(const ExperimentContext& ctx) {
  const std::string dir =
      (std::filesystem::path(ctx.cfg.out_dir) / "coeffs").string();
  out::write_matrix_grid_csv(dir, "B.csv", ctx.coeffs.B);
  out::write_matrix_grid_csv(dir, "beta.csv", ctx.coeffs.beta);
  out::write_matrix_grid_csv(dir, "a.csv", ctx.coeffs.a);
  out::write_matrix_grid_csv(dir, "sigma.csv", ctx.coeffs.sigma);
  std::cout << "coeffs: written B, beta, a, sigma to " << dir << "\n";
  return 0;
}

int cmd_riccati(const ExperimentContext& ctx) {
  const RiccatiSolution sol = ctx.riccati(ctx.cfg.alpha);
  out::write_riccati_csv(ctx.cfg.out_dir, sol);
  const double value = lqr_value(sol, ctx.v_n());
  std::cout << "riccati: alpha " << ctx.cfg.alpha << ", predicted cost " << value
            << ", written to " << ctx.cfg.out_dir << "/riccati.csv\n";
  return 0;
}

int cmd_simulate(const ExperimentContext& ctx) {
  const auto& cfg = ctx.cfg;
  SimModel sim(ctx.spec, cfg.n_particles);
  SimOptions opt;
  opt.quad_step = cfg.quad_step;

  Policy policy = uncontrolled_policy();
  std::optional<RiccatiSolution> sol;
  double alpha = 0.0;
  if (cfg.policy == "lqr") {
    alpha = cfg.alpha;
    sol = ctx.riccati(alpha);
    policy = lqr_policy(*sol);
  } else if (cfg.policy == "zero") {
    policy = zero_policy(ctx.spec.control_dim);
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunSummary summary =
      run_trials(sim, ctx.fluid, ctx.x_counts, policy, cfg.horizon, cfg.n_trials,
                 cfg.seed, cfg.parallelism, ctx.cost(alpha), opt);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out::write_trials_csv(cfg.out_dir, "trials.csv", summary);
  nlohmann::json js = {{"version", kVersion},
                       {"config_hash", cfg.config_hash},
                       {"policy", cfg.policy},
                       {"run", out::summary_json(summary)}};
  out::open(cfg.out_dir, "summary.json") << js.dump(2) << "\n";
  std::cout << "simulate: " << cfg.n_trials << " trials in " << secs << " s, total cost "
            << summary.total_cost.mean << " +/- " << summary.total_cost.ci95 << "\n";
  return 0;
}

int cmd_sde(const ExperimentContext& ctx) {
  const auto& cfg = ctx.cfg;
  SdeCoeffTables tab(ctx.coeffs, cfg.horizon, cfg.sde_h);

  Policy policy = uncontrolled_policy();
  std::optional<RiccatiSolution> sol;
  double alpha = 0.0;
  if (cfg.policy == "lqr") {
    alpha = cfg.alpha;
    sol = ctx.riccati(alpha);
    policy = lqr_policy(*sol);
  } else if (cfg.policy == "zero") {
    policy = zero_policy(ctx.spec.control_dim);
  }

  const SdeEstimate est = estimate_J(tab, policy, ctx.v_n(), ctx.cost(alpha),
                                     cfg.n_paths, cfg.seed, cfg.parallelism);
  nlohmann::json js = {{"version", kVersion},
                       {"config_hash", cfg.config_hash},
                       {"policy", cfg.policy},
                       {"n_paths", est.n_paths},
                       {"h", est.h},
                       {"mean", est.mean},
                       {"std_error", est.std_error},
                       {"dev_mean", est.dev_mean},
                       {"ctrl_mean", est.ctrl_mean}};
  out::open(cfg.out_dir, "sde.json") << js.dump(2) << "\n";
  std::cout << "sde: " << est.n_paths << " paths, cost " << est.mean << " +/- "
            << 1.96 * est.std_error << "\n";
  return 0;
}

int cmd_validate(const ExperimentContext& ctx) {
  const ConditionReport rep = validate_conditions(ctx.spec, ctx.fluid, ctx.cfg.seed);
  auto check_json = [](const ConditionCheck& c) {
    nlohmann::json j = {{"pass", c.pass}, {"stat", c.stat}};
    if (!c.witness.empty()) j["witness"] = c.witness;
    return j;
  };
  nlohmann::json js = {{"version", kVersion},
                       {"config_hash", ctx.cfg.config_hash},
                       {"rate_growth", check_json(rep.rate_growth)},
                       {"drift_residual", check_json(rep.drift_residual)},
                       {"nondegeneracy", check_json(rep.nondegeneracy)},
                       {"lipschitz_estimate", rep.lipschitz_estimate},
                       {"all_pass", rep.all_pass()}};
  out::open(ctx.cfg.out_dir, "validate.json") << js.dump(2) << "\n";
  std::cout << "validate: rate_growth " << (rep.rate_growth.pass ? "pass" : "FAIL")
            << ", drift_residual " << (rep.drift_residual.pass ? "pass" : "FAIL")
            << ", nondegeneracy " << (rep.nondegeneracy.pass ? "pass" : "FAIL") << "\n";
  if (!rep.all_pass()) {
    for (const auto* c : {&rep.rate_growth, &rep.drift_residual, &rep.nondegeneracy})
      if (!c->pass && !c->witness.empty()) std::cout << "  witness: " << c->witness << "\n";
    return 3;
  }
  return 0;
}

int cmd_table1(const ExperimentContext& ctx, const std::vector<double>& alphas) {
  const auto t0 = std::chrono::steady_clock::now();
  const ComparisonReport rep = run_table1(ctx, alphas, ctx.cfg.parallelism);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto& cfg = ctx.cfg;
  for (const auto& arm : rep.arms)
    out::write_trials_csv(cfg.out_dir, "trials_" + arm.name + ".csv", arm.summary);
  nlohmann::json arms_summary = nlohmann::json::object();
  for (const auto& arm : rep.arms) arms_summary[arm.name] = out::summary_json(arm.summary);
  // wall-clock time and parallelism deliberately stay out of the json output
  // so it is byte-identical across thread counts; timings go to stdout only
  nlohmann::json js = {{"version", kVersion},
                       {"config_hash", cfg.config_hash},
                       {"master_seed", cfg.seed},
                       {"arms", arms_summary}};
  out::open(cfg.out_dir, "summary.json") << js.dump(2) << "\n";
  out::open(cfg.out_dir, "report.json") << report_json(rep).dump(2) << "\n";

  std::cout << format_cost_table(rep);
  std::cout << "elapsed: " << secs << " s (" << cfg.parallelism << " threads)\n";
  return 0;
}

int run(const CliArgs& args) {
  ExperimentConfig cfg = parse_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.threads) cfg.parallelism = std::max(1, *args.threads);
  if (args.out_dir) cfg.out_dir = *args.out_dir;

  std::vector<double> alphas{cfg.alpha};
  if (cfg.table1_preset || args.command == "table1") {
    const Table1Config t1 = table1_config();
    alphas = t1.alphas;
    if (cfg.table1_preset) {
      // preset already applied sizes in the parser; alphas come from here
    }
  }

  ExperimentContext ctx(cfg);
  if (args.command == "fluid") return cmd_fluid(ctx);
  if (args.command == "coeffs") return cmd_coeffs(ctx);
  if (args.command == "riccati") return cmd_riccati(ctx);
  if (args.command == "simulate") return cmd_simulate(ctx);
  if (args.command == "sde") return cmd_sde(ctx);
  if (args.command == "validate") return cmd_validate(ctx);
  if (args.command == "table1") return cmd_table1(ctx, alphas);
  throw ConfigError("unknown command " + args.command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation and controller synthesis for weakly interacting jump systems"};
  app.require_subcommand(1);

  CliArgs args;
  for (const char* name :
       {"fluid", "coeffs", "riccati", "simulate", "sde", "validate", "table1"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    sub->add_option("--seed", args.seed, "master seed (overrides config)");
    sub->add_option("--threads", args.threads, "worker threads (overrides config)");
    sub->add_option("--out", args.out_dir, "output directory (overrides config)");
    sub->callback([&args, name]() { args.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(args);
  } catch (const mfctrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mfctrl::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
