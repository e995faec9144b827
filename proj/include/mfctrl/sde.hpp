#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mfctrl/coeffs.hpp"
#include "mfctrl/ctmc.hpp"
#include "mfctrl/rng.hpp"

namespace mfctrl {

// Per-step coefficient tables for Euler-Maruyama. When the step is a multiple
// of the coefficient grid step the tables alias grid nodes; otherwise they
// are interpolated once up front and shared read-only across paths.
class SdeCoeffTables {
 public:
  SdeCoeffTables(const DiffusionCoeffs& coeffs, double T, double h) : h_(h) {
    const int steps = static_cast<int>(std::round(T / h));
    const double ratio = h / coeffs.B.step();
    const int stride = static_cast<int>(std::round(ratio));
    const bool aligned = std::abs(ratio - stride) < 1e-9 && stride >= 1;
    B_.reserve(steps);
    beta_.reserve(steps);
    sigma_.reserve(steps);
    for (int i = 0; i < steps; ++i) {
      if (aligned && i * stride < coeffs.B.nodes()) {
        B_.push_back(coeffs.B.node(i * stride));
        beta_.push_back(coeffs.beta.node(i * stride));
        sigma_.push_back(coeffs.sigma.node(i * stride));
      } else {
        const double t = h * i;
        B_.push_back(coeffs.B.eval(t));
        beta_.push_back(coeffs.beta.eval(t));
        sigma_.push_back(coeffs.sigma.eval(t));
      }
    }
  }

  int steps() const { return static_cast<int>(B_.size()); }
  double step() const { return h_; }
  const Eigen::MatrixXd& B(int i) const { return B_[i]; }
  const Eigen::MatrixXd& beta(int i) const { return beta_[i]; }
  const Eigen::MatrixXd& sigma(int i) const { return sigma_[i]; }

 private:
  double h_;
  std::vector<Eigen::MatrixXd> B_, beta_, sigma_;
};

struct SdePath {
  std::vector<Eigen::VectorXd> v;  // length steps+1
  double step = 0.0;
  double dev_cost = 0.0;
  double ctrl_cost = 0.0;
};

// Euler-Maruyama for dV = [B(t)g(t,V) + beta(t)V]dt + sigma(t)dW with
// left-endpoint cost quadrature.
inline SdePath simulate_sde(const SdeCoeffTables& tab, const Policy& policy,
                            const Eigen::VectorXd& v0, const CostModel& cost, RngStream rng,
                            bool record_path = false) {
  const int d = static_cast<int>(v0.size());
  const double h = tab.step();
  const double sqh = std::sqrt(h);
  if (std::abs(v0.sum()) > 1e-8)
    throw std::invalid_argument("simulate_sde: v0 must satisfy v0 . 1 = 0");

  SdePath out;
  out.step = h;
  Eigen::VectorXd v = v0;
  Eigen::VectorXd xi(d), drift(d);
  if (record_path) out.v.push_back(v);

  const bool controlled = policy.kind == Policy::Kind::Feedback;
  for (int i = 0; i < tab.steps(); ++i) {
    const double t = h * i;
    double k2 = 0.0;
    drift.noalias() = tab.beta(i) * v;
    if (controlled) {
      bool clamped = false;
      const Eigen::VectorXd u = policy.g(t, v, clamped);
      drift.noalias() += tab.B(i) * u;
      if (cost.k2) k2 = cost.k2(u);
    }
    out.dev_cost += h * (cost.k1 ? cost.k1(v) : 0.0);
    out.ctrl_cost += h * k2;
    for (int c = 0; c < d; ++c) xi[c] = rng.normal();
    v += h * drift + sqh * (tab.sigma(i) * xi);
    if (record_path) out.v.push_back(v);
  }
  if (!record_path) out.v.push_back(v);  // terminal state always at v.back()
  return out;
}

struct SdeEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double dev_mean = 0.0;
  double ctrl_mean = 0.0;
  int n_paths = 0;
  double h = 0.0;
  std::vector<double> path_costs;
};

// Monte-Carlo estimate of the diffusion cost; same per-path stream and
// in-order aggregation contract as run_trials.
inline SdeEstimate estimate_J(const SdeCoeffTables& tab, const Policy& policy,
                              const Eigen::VectorXd& v0, const CostModel& cost, int n_paths,
                              std::uint64_t master_seed, int parallelism,
                              bool keep_paths = false) {
  if (n_paths < 2) throw std::invalid_argument("estimate_J: need n_paths >= 2");
  std::vector<double> costs(n_paths), devs(n_paths), ctrls(n_paths);
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n_paths) break;
      SdePath p = simulate_sde(tab, policy, v0, cost, RngStream(master_seed, i));
      devs[i] = p.dev_cost;
      ctrls[i] = p.ctrl_cost;
      costs[i] = p.dev_cost + p.ctrl_cost;
    }
  };
  const int threads = std::max(1, std::min(parallelism, n_paths));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int p = 0; p < threads; ++p) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SdeEstimate est;
  est.n_paths = n_paths;
  est.h = tab.step();
  const CostStat s = make_stat(costs);
  est.mean = s.mean;
  est.std_error = s.stddev / std::sqrt(static_cast<double>(n_paths));
  est.dev_mean = make_stat(devs).mean;
  est.ctrl_mean = make_stat(ctrls).mean;
  if (keep_paths) est.path_costs = std::move(costs);
  return est;
}

}  // namespace mfctrl
