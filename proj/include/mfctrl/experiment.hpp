#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfctrl/config.hpp"
#include "mfctrl/coeffs.hpp"
#include "mfctrl/ctmc.hpp"
#include "mfctrl/fluid.hpp"
#include "mfctrl/riccati.hpp"
#include "mfctrl/sde.hpp"
#include "mfctrl/stats.hpp"
#include "mfctrl/validate.hpp"

namespace mfctrl {

inline const char* kVersion = "mfctrl 1.0.0";

inline ModelSpec build_model(const ExperimentConfig& cfg) {
  if (cfg.model == "lossnet") return build_lossnet_model(cfg.lossnet);
  return build_two_state_model(cfg.two_state);
}

// squared multiplicity of each reduced control coordinate in the full
// l-vector; the reduced control-cost matrix is R = alpha * diag(mult)
inline Eigen::VectorXd coord_multiplicity(const ModelSpec& spec) {
  Eigen::VectorXd mult(spec.control_dim);
  for (int c = 0; c < spec.control_dim; ++c) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(spec.control_dim);
    unit[c] = 1.0;
    mult[c] = spec.control_embed(unit).squaredNorm();
  }
  return mult;
}

inline Eigen::VectorXd resolve_x0(const ExperimentConfig& cfg, const ModelSpec& spec) {
  if (cfg.x0_policy == "uniform")
    return Eigen::VectorXd::Constant(spec.dim, 1.0 / spec.dim);
  if (cfg.x0_policy == "explicit") {
    if (static_cast<int>(cfg.x0_explicit.size()) != spec.dim)
      throw ConfigError("config: explicit x0 has wrong dimension");
    Eigen::VectorXd x0 =
        Eigen::Map<const Eigen::VectorXd>(cfg.x0_explicit.data(), spec.dim);
    if (!in_simplex(x0, 1e-6)) throw ConfigError("config: explicit x0 not in simplex");
    return x0 / x0.sum();
  }
  return find_fixed_point(spec);
}

inline Policy lqr_policy(const RiccatiSolution& sol) {
  Policy p;
  p.kind = Policy::Kind::Feedback;
  p.g = [&sol](double t, const Eigen::VectorXd& y, bool& clamped) {
    return feedback(sol, t, y, &clamped);
  };
  return p;
}

inline Policy zero_policy(int control_dim) {
  Policy p;
  p.kind = Policy::Kind::Feedback;
  p.g = [control_dim](double, const Eigen::VectorXd&, bool&) {
    return Eigen::VectorXd::Zero(control_dim).eval();
  };
  return p;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t x = master ^ (0x94d049bb133111ebULL * (salt + 1));
  return splitmix64(x);
}

// ---------------------------------------------------------------- output ---

namespace out {

inline void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

inline std::ofstream open(const std::string& dir, const std::string& name) {
  ensure_dir(dir);
  std::ofstream f(std::filesystem::path(dir) / name);
  if (!f) throw std::runtime_error("cannot open output file " + name + " in " + dir);
  f << std::setprecision(17);
  return f;
}

inline nlohmann::json stat_json(const CostStat& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"ci95", s.ci95}};
}

inline nlohmann::json summary_json(const RunSummary& s) {
  return {{"n_trials", s.n_trials},
          {"master_seed", s.master_seed},
          {"dev_cost", stat_json(s.dev_cost)},
          {"ctrl_cost", stat_json(s.ctrl_cost)},
          {"total_cost", stat_json(s.total_cost)},
          {"clamp_frequency", s.clamp_frequency},
          {"acceptance_ratio", s.acceptance_ratio},
          {"negative_rate_clamps", s.negative_rate_clamps}};
}

inline void write_trials_csv(const std::string& dir, const std::string& name,
                             const RunSummary& s) {
  auto f = open(dir, name);
  f << "trial,dev_cost,ctrl_cost,total\n";
  for (std::size_t i = 0; i < s.trials.size(); ++i) {
    const auto& t = s.trials[i];
    f << i << "," << t.dev_cost << "," << t.ctrl_cost << "," << t.dev_cost + t.ctrl_cost
      << "\n";
  }
}

inline void write_fluid_csv(const std::string& dir, const FluidPath& fluid) {
  auto f = open(dir, "fluid.csv");
  f << "t";
  for (int i = 0; i < fluid.node(0).size(); ++i) f << ",mu_" << i + 1;
  f << "\n";
  for (int n = 0; n < fluid.nodes(); ++n) {
    f << fluid.step() * n;
    for (int i = 0; i < fluid.node(n).size(); ++i) f << "," << fluid.node(n)[i];
    f << "\n";
  }
}

inline void write_matrix_grid_csv(const std::string& dir, const std::string& name,
                                  const MatrixGrid& g, int stride = 1) {
  auto f = open(dir, name);
  const auto& m0 = g.node(0);
  f << "t";
  for (int i = 0; i < m0.rows(); ++i)
    for (int j = 0; j < m0.cols(); ++j) f << ",m_" << i + 1 << "_" << j + 1;
  f << "\n";
  for (int n = 0; n < g.nodes(); n += stride) {
    f << g.step() * n;
    const auto& m = g.node(n);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) f << "," << m(i, j);
    f << "\n";
  }
}

inline void write_riccati_csv(const std::string& dir, const RiccatiSolution& sol,
                              int stride = 1) {
  auto f = open(dir, "riccati.csv");
  f << "t,k_spectral_norm,gain_norm,value_offset\n";
  for (int n = 0; n < sol.K.nodes(); n += stride) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sol.K.node(n));
    f << sol.step * n << "," << svd.singularValues()[0] << "," << sol.gain.node(n).norm()
      << "," << sol.value_offset[n] << "\n";
  }
}

}  // namespace out

// -------------------------------------------------------------- commands ---

struct ArmResult {
  std::string name;
  double alpha = 0.0;
  RunSummary summary;
  double riccati_value = 0.0;  // lqr arms only
};

struct ComparisonReport {
  std::vector<ArmResult> arms;  // arms[0] is uncontrolled
  std::vector<double> reduction_percent;  // per controlled arm
  GaussianDiagnostics diagnostics;        // uncontrolled arm, terminal time
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;
};

// Shared single-model context for all subcommands.
struct ExperimentContext {
  ExperimentConfig cfg;
  ModelSpec spec;
  Eigen::VectorXd x0;
  Eigen::VectorXi x_counts;
  FluidPath fluid;
  DiffusionCoeffs coeffs;

  explicit ExperimentContext(const ExperimentConfig& config)
      : cfg(config),
        spec(build_model(config)),
        x0(resolve_x0(config, spec)),
        x_counts(lattice_point(x0, config.n_particles)),
        fluid(solve_fluid(spec, x0, config.horizon, config.fluid_h)),
        coeffs(assemble_coeffs(spec, fluid)) {}

  CostModel cost(double alpha) const {
    return quadratic_cost(alpha, coord_multiplicity(spec));
  }

  RiccatiSolution riccati(double alpha) const {
    const Eigen::MatrixXd Qc = Eigen::MatrixXd::Identity(spec.dim, spec.dim);
    const Eigen::MatrixXd R =
        (alpha * coord_multiplicity(spec)).asDiagonal().toDenseMatrix();
    return solve_riccati(spec, coeffs, Qc, R, cfg.horizon, cfg.riccati_h);
  }

  Eigen::VectorXd v_n() const {
    const double n = static_cast<double>(cfg.n_particles);
    return std::sqrt(n) * (x_counts.cast<double>() / n - x0);
  }
};

inline std::vector<Eigen::VectorXd> terminal_deviations(const RunSummary& s,
                                                        const FluidPath& fluid, double T) {
  std::vector<Eigen::VectorXd> out;
  const Eigen::VectorXd mu_T = fluid.eval(T);
  for (const auto& tr : s.trials) {
    const double n = static_cast<double>(tr.n_particles);
    out.push_back(std::sqrt(n) * (tr.final_counts.cast<double>() / n - mu_T));
  }
  return out;
}

// Runs the uncontrolled arm plus one LQR arm per alpha, sharing the fluid
// solve and coefficient assembly, and emits the comparison report.
inline ComparisonReport run_table1(const ExperimentContext& ctx,
                                   const std::vector<double>& alphas, int parallelism) {
  const auto& cfg = ctx.cfg;
  SimModel sim(ctx.spec, cfg.n_particles);
  SimOptions opt;
  opt.quad_step = cfg.quad_step;

  ComparisonReport rep;
  rep.config_hash = cfg.config_hash;
  rep.master_seed = cfg.seed;

  ArmResult unc;
  unc.name = "uncontrolled";
  unc.summary = run_trials(sim, ctx.fluid, ctx.x_counts, uncontrolled_policy(), cfg.horizon,
                           cfg.n_trials, derive_seed(cfg.seed, 0), parallelism,
                           ctx.cost(0.0), opt);
  rep.arms.push_back(std::move(unc));

  std::vector<RiccatiSolution> sols;  // keep alive for the policies
  sols.reserve(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double alpha = alphas[i];
    sols.push_back(ctx.riccati(alpha));
    ArmResult arm;
    arm.name = "lqr_alpha_" + std::to_string(alpha);
    arm.alpha = alpha;
    arm.riccati_value = lqr_value(sols.back(), ctx.v_n());
    arm.summary = run_trials(sim, ctx.fluid, ctx.x_counts, lqr_policy(sols.back()),
                             cfg.horizon, cfg.n_trials, derive_seed(cfg.seed, i + 1),
                             parallelism, ctx.cost(alpha), opt);
    rep.arms.push_back(std::move(arm));
    const double unc_total = rep.arms[0].summary.total_cost.mean;
    rep.reduction_percent.push_back(
        100.0 * (1.0 - rep.arms.back().summary.total_cost.mean / unc_total));
  }

  if (rep.arms[0].summary.n_trials >= 100) {
    const GaussMarkovMoments moments = solve_moments(ctx.coeffs, ctx.v_n(), cfg.horizon);
    rep.diagnostics = gaussian_diagnostics(
        terminal_deviations(rep.arms[0].summary, ctx.fluid, cfg.horizon), moments,
        ctx.coeffs.Q, cfg.horizon);
  }
  return rep;
}

inline nlohmann::json report_json(const ComparisonReport& rep) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& arm : rep.arms) {
    nlohmann::json a = {{"name", arm.name}, {"summary", out::summary_json(arm.summary)}};
    if (arm.alpha > 0) {
      a["alpha"] = arm.alpha;
      a["riccati_value"] = arm.riccati_value;
    }
    arms.push_back(a);
  }
  nlohmann::json diag;
  if (rep.diagnostics.n_samples > 0) {
    diag = {{"n_samples", rep.diagnostics.n_samples},
            {"cov_frobenius_rel_error", rep.diagnostics.cov_frobenius_rel_error},
            {"mardia_kurtosis_stat", rep.diagnostics.mardia_kurtosis_stat},
            {"max_standardized_mean_error",
             rep.diagnostics.standardized_mean_error.cwiseAbs().maxCoeff()}};
  }
  return {{"version", kVersion},
          {"config_hash", rep.config_hash},
          {"master_seed", rep.master_seed},
          {"arms", arms},
          {"reduction_percent", rep.reduction_percent},
          {"gaussian_diagnostics", diag}};
}

// Human-readable cost table, rows named as in the published comparison.
inline std::string format_cost_table(const ComparisonReport& rep) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::setw(16) << "" ;
  for (const auto& arm : rep.arms) os << std::setw(24) << arm.name;
  os << "\n";
  const char* rows[] = {"Deviation Cost", "Control Cost", "Total Cost"};
  for (int r = 0; r < 3; ++r) {
    os << std::setw(16) << rows[r];
    for (const auto& arm : rep.arms) {
      const auto& s = arm.summary;
      const double v = r == 0   ? s.dev_cost.mean
                       : r == 1 ? s.ctrl_cost.mean
                                : s.total_cost.mean;
      os << std::setw(24) << v;
    }
    os << "\n";
  }
  for (std::size_t i = 0; i < rep.reduction_percent.size(); ++i)
    os << "reduction vs uncontrolled (" << rep.arms[i + 1].name
       << "): " << rep.reduction_percent[i] << "%\n";
  return os.str();
}

}  // namespace mfctrl
