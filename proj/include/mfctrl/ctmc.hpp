#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mfctrl/fluid.hpp"
#include "mfctrl/model.hpp"
#include "mfctrl/rng.hpp"

namespace mfctrl {

// Fenwick tree over nonnegative weights with prefix-sum sampling.
class WeightTree {
 public:
  explicit WeightTree(int n) : n_(n), tree_(n + 1, 0.0), w_(n, 0.0) {}

  void set(int i, double w) {
    const double delta = w - w_[i];
    w_[i] = w;
    for (int j = i + 1; j <= n_; j += j & (-j)) tree_[j] += delta;
  }

  double get(int i) const { return w_[i]; }
  double total() const {
    double s = 0.0;
    for (int j = n_; j > 0; j -= j & (-j)) s += tree_[j];
    return s;
  }

  // index i with prefix(i) <= x < prefix(i+1)
  int sample(double x) const {
    int pos = 0;
    int mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask > 0; mask >>= 1) {
      const int next = pos + mask;
      if (next <= n_ && tree_[next] < x) {
        x -= tree_[next];
        pos = next;
      }
    }
    return std::min(pos, n_ - 1);
  }

 private:
  int n_;
  std::vector<double> tree_;
  std::vector<double> w_;
};

struct Policy {
  enum class Kind { Uncontrolled, Feedback };
  Kind kind = Kind::Uncontrolled;
  // (t, y, clamped-flag) -> reduced control in the box
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, bool&)> g;
};

inline Policy uncontrolled_policy() { return Policy{Policy::Kind::Uncontrolled, {}}; }

struct CostModel {
  std::function<double(const Eigen::VectorXd&)> k1;   // deviation cost of V
  std::function<double(const Eigen::VectorXd&)> k2;   // control cost of reduced u
};

inline CostModel quadratic_cost(double alpha, const Eigen::VectorXd& coord_multiplicity) {
  CostModel c;
  c.k1 = [](const Eigen::VectorXd& v) { return v.squaredNorm(); };
  Eigen::VectorXd w = alpha * coord_multiplicity;
  c.k2 = [w](const Eigen::VectorXd& u) { return w.dot(u.cwiseProduct(u)); };
  return c;
}

struct SimOptions {
  double quad_step = 0.01;
  bool record_events = false;
};

struct EventRecord {
  double time;
  int transition;
};

struct TrajectoryRecord {
  int n_particles = 0;
  std::uint64_t stream_id = 0;
  Eigen::VectorXi initial_counts;
  Eigen::VectorXi final_counts;
  double dev_cost = 0.0;
  double ctrl_cost = 0.0;
  long proposed = 0;
  long accepted = 0;
  long policy_evals = 0;
  long clamped_evals = 0;
  long negative_rate_clamps = 0;
  std::vector<EventRecord> events;  // only when record_events
};

struct CostStat {
  double mean = 0.0;
  double stddev = 0.0;
  double ci95 = 0.0;
};

struct RunSummary {
  int n_trials = 0;
  std::uint64_t master_seed = 0;
  CostStat dev_cost, ctrl_cost, total_cost;
  double clamp_frequency = 0.0;
  double acceptance_ratio = 1.0;
  long negative_rate_clamps = 0;
  std::vector<TrajectoryRecord> trials;
};

// Precomputed read-only tables shared by all trials of one configuration.
class SimModel {
 public:
  SimModel(const ModelSpec& spec, int n_particles) : spec_(&spec), n_(n_particles) {
    flat_ = enumerate_transitions(spec);
    const int m = static_cast<int>(flat_.size());
    nets_.reserve(m);
    changed_coords_.resize(m);
    for (int i = 0; i < m; ++i) {
      nets_.push_back(flat_[i].nu->net);
      for (int c = 0; c < spec.dim; ++c)
        if (nets_[i][c] != 0) changed_coords_[i].push_back(c);
    }
    controlled_.assign(m, true);
    if (!spec.controlled.empty()) {
      if (static_cast<int>(spec.controlled.size()) != m)
        throw ModelError("SimModel: controlled flags size mismatch");
      for (int i = 0; i < m; ++i) controlled_[i] = spec.controlled[i];
    }
    coord_deps_.resize(spec.dim);
    if (!spec.rate_deps.empty()) {
      if (static_cast<int>(spec.rate_deps.size()) != m)
        throw ModelError("SimModel: rate_deps size mismatch");
      for (int i = 0; i < m; ++i)
        for (int c : spec.rate_deps[i]) coord_deps_[c].push_back(i);
    } else {
      for (int c = 0; c < spec.dim; ++c)
        for (int i = 0; i < m; ++i) coord_deps_[c].push_back(i);
    }

    const double sn = std::sqrt(static_cast<double>(n_particles));
    u_zero_ = spec.control_embed(Eigen::VectorXd::Zero(spec.control_dim)) / sn;
    // box corners in full (scaled) coordinates; rates of both bundled models
    // are affine in u, so the corner max is the exact supremum over the box
    const int ell = spec.control_dim;
    if (ell > 20) throw ModelError("SimModel: control_dim too large for corner bounds");
    for (int mask = 0; mask < (1 << ell); ++mask) {
      Eigen::VectorXd u(ell);
      for (int c = 0; c < ell; ++c)
        u[c] = (mask >> c) & 1 ? spec.control_box[c].hi : spec.control_box[c].lo;
      corners_scaled_.push_back(spec.control_embed(u) / sn);
    }
  }

  int transitions() const { return static_cast<int>(flat_.size()); }
  const ModelSpec& spec() const { return *spec_; }
  const std::vector<FlatTransition>& flat() const { return flat_; }
  const std::vector<Eigen::VectorXi>& nets() const { return nets_; }
  const std::vector<char>& controlled() const { return controlled_; }
  const std::vector<std::vector<int>>& coord_deps() const { return coord_deps_; }
  const std::vector<int>& changed_coords(int i) const { return changed_coords_[i]; }
  const Eigen::VectorXd& u_zero() const { return u_zero_; }
  const std::vector<Eigen::VectorXd>& corners_scaled() const { return corners_scaled_; }
  int n_particles() const { return n_; }

  double rate_at(const Eigen::VectorXd& r, const Eigen::VectorXd& u_scaled, int i) const {
    const auto& tr = flat_[i];
    return std::max(0.0, spec_->prelimit_rate(n_, r, u_scaled, tr.type, tr.jump));
  }

  // sup over the control box (exact rate when uncontrolled or thinning is off)
  double bound_at(const Eigen::VectorXd& r, int i, bool thinning) const {
    if (!thinning || !controlled_[i]) return rate_at(r, u_zero_, i);
    double best = 0.0;
    for (const auto& u : corners_scaled_) best = std::max(best, rate_at(r, u, i));
    return best;
  }

 private:
  const ModelSpec* spec_;
  int n_;
  std::vector<FlatTransition> flat_;
  std::vector<Eigen::VectorXi> nets_;
  std::vector<std::vector<int>> changed_coords_;
  std::vector<char> controlled_;
  std::vector<std::vector<int>> coord_deps_;
  Eigen::VectorXd u_zero_;
  std::vector<Eigen::VectorXd> corners_scaled_;
};

// Statistically exact trajectory of the N-particle empirical-measure CTMC via
// thinning: candidate events are proposed from per-transition bounds that are
// constant between state changes; a candidate for a controlled transition is
// accepted with probability rate/bound evaluated at the candidate time, using
// the fluid interpolation for V_N(t). Costs are accumulated online on a
// quad_step grid refined by accepted-event times.
inline TrajectoryRecord simulate_trajectory(const SimModel& sim, const FluidPath& fluid,
                                            const Eigen::VectorXi& x_counts,
                                            const Policy& policy, double T,
                                            const CostModel& cost, RngStream rng,
                                            std::uint64_t stream_id,
                                            const SimOptions& opt = {}) {
  const ModelSpec& spec = sim.spec();
  const int d = spec.dim;
  const int N = sim.n_particles();
  const double sqrtN = std::sqrt(static_cast<double>(N));
  if (x_counts.sum() != N)
    throw std::invalid_argument("simulate_trajectory: counts must sum to N");

  TrajectoryRecord out;
  out.n_particles = N;
  out.stream_id = stream_id;
  out.initial_counts = x_counts;

  Eigen::VectorXi counts = x_counts;
  Eigen::VectorXd r = counts.cast<double>() / static_cast<double>(N);

  const bool thinning = policy.kind == Policy::Kind::Feedback;
  const int m = sim.transitions();
  WeightTree tree(m);
  for (int i = 0; i < m; ++i) tree.set(i, sim.bound_at(r, i, thinning));
  double total = tree.total();

  Eigen::VectorXd mu_t(d), v(d);
  auto deviation = [&](double t) -> const Eigen::VectorXd& {
    fluid.eval_into(t, mu_t);
    v = sqrtN * (r - mu_t);
    return v;
  };
  auto eval_control = [&](double t, const Eigen::VectorXd& y) {
    bool clamped = false;
    Eigen::VectorXd u = policy.g(t, y, clamped);
    ++out.policy_evals;
    if (clamped) ++out.clamped_evals;
    return u;
  };

  // trapezoid accumulation state
  double cost_t = 0.0;
  double k1_prev, k2_prev;
  auto cost_values = [&](double t, double& c1, double& c2) {
    const Eigen::VectorXd& y = deviation(t);
    c1 = cost.k1 ? cost.k1(y) : 0.0;
    if (cost.k2 && thinning)
      c2 = cost.k2(eval_control(t, y));
    else
      c2 = 0.0;
  };
  cost_values(0.0, k1_prev, k2_prev);
  auto advance_cost = [&](double t_to) {
    while (cost_t < t_to - 1e-15) {
      const double next_quad =
          (std::floor(cost_t / opt.quad_step + 1e-12) + 1.0) * opt.quad_step;
      const double t_next = std::min(next_quad, t_to);
      double c1, c2;
      cost_values(t_next, c1, c2);
      const double dt = t_next - cost_t;
      out.dev_cost += 0.5 * dt * (k1_prev + c1);
      out.ctrl_cost += 0.5 * dt * (k2_prev + c2);
      k1_prev = c1;
      k2_prev = c2;
      cost_t = t_next;
    }
  };

  std::vector<int> touched;
  double t = 0.0;
  while (true) {
    if (total <= 0.0) break;
    t += rng.exponential(total);
    if (t >= T) break;
    const int i = tree.sample(rng.uniform() * total);
    ++out.proposed;

    if (thinning && sim.controlled()[i]) {
      const Eigen::VectorXd& y = deviation(t);
      const Eigen::VectorXd u_red = eval_control(t, y);
      Eigen::VectorXd u_scaled = spec.control_embed(u_red) / sqrtN;
      const auto& tr = sim.flat()[i];
      double rate = spec.prelimit_rate(N, r, u_scaled, tr.type, tr.jump);
      if (rate < 0.0) {
        ++out.negative_rate_clamps;
        rate = 0.0;
      }
      const double bound = tree.get(i);
      const double ratio = rate / bound;
      if (ratio > 1.0 + 1e-12)
        throw std::runtime_error("simulate_trajectory: thinning bound violated (ratio " +
                                 std::to_string(ratio) + ")");
      if (rng.uniform() >= ratio) continue;  // rejected candidate
    }

    // accept: integrate cost up to the jump with the pre-jump state
    advance_cost(t);
    ++out.accepted;
    if (opt.record_events) out.events.push_back({t, i});

    const Eigen::VectorXi& net = sim.nets()[i];
    for (int c : sim.changed_coords(i)) {
      counts[c] += net[c];
      if (counts[c] < 0)
        throw std::runtime_error(
            "simulate_trajectory: state went negative (rate does not vanish at boundary)");
      r[c] = static_cast<double>(counts[c]) / static_cast<double>(N);
    }
    // re-evaluate cost integrand at the post-jump state
    {
      double c1, c2;
      cost_values(t, c1, c2);
      k1_prev = c1;
      k2_prev = c2;
    }

    touched.clear();
    for (int c : sim.changed_coords(i)) {
      for (int dep : sim.coord_deps()[c]) touched.push_back(dep);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (int dep : touched) tree.set(dep, sim.bound_at(r, dep, thinning));
    total = tree.total();
  }
  advance_cost(T);
  out.final_counts = counts;
  return out;
}

// Offline cost recomputation from a recorded event log; oracle counterpart of
// the online accumulation in simulate_trajectory.
inline std::pair<double, double> accumulate_cost(const SimModel& sim,
                                                 const TrajectoryRecord& traj,
                                                 const FluidPath& fluid, const Policy& policy,
                                                 const CostModel& cost, double T,
                                                 double quad_step) {
  const int N = traj.n_particles;
  const double sqrtN = std::sqrt(static_cast<double>(N));
  Eigen::VectorXi counts = traj.initial_counts;
  Eigen::VectorXd r = counts.cast<double>() / static_cast<double>(N);

  std::vector<double> knots{0.0};
  for (const auto& ev : traj.events) knots.push_back(ev.time);
  knots.push_back(T);

  double dev = 0.0, ctrl = 0.0;
  auto values = [&](double t, double& c1, double& c2) {
    Eigen::VectorXd v = sqrtN * (r - fluid.eval(t));
    c1 = cost.k1 ? cost.k1(v) : 0.0;
    c2 = 0.0;
    if (cost.k2 && policy.kind == Policy::Kind::Feedback) {
      bool cl = false;
      c2 = cost.k2(policy.g(t, v, cl));
    }
  };

  std::size_t ev = 0;
  for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
    const double t0 = knots[s], t1 = knots[s + 1];
    double prev1, prev2, tcur = t0;
    values(t0, prev1, prev2);
    while (tcur < t1 - 1e-15) {
      const double next_quad = (std::floor(tcur / quad_step + 1e-12) + 1.0) * quad_step;
      const double tn = std::min(next_quad, t1);
      double c1, c2;
      values(tn, c1, c2);
      dev += 0.5 * (tn - tcur) * (prev1 + c1);
      ctrl += 0.5 * (tn - tcur) * (prev2 + c2);
      prev1 = c1;
      prev2 = c2;
      tcur = tn;
    }
    if (ev < traj.events.size()) {
      const Eigen::VectorXi& net = sim.nets()[traj.events[ev].transition];
      counts += net;
      r = counts.cast<double>() / static_cast<double>(N);
      ++ev;
    }
  }
  return {dev, ctrl};
}

inline CostStat make_stat(const std::vector<double>& xs) {
  CostStat s;
  const int n = static_cast<int>(xs.size());
  if (n == 0) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / n;
  if (n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (n - 1));
    s.ci95 = 1.96 * s.stddev / std::sqrt(static_cast<double>(n));
  }
  return s;
}

// Deterministic parallel Monte-Carlo harness: trial i always uses the stream
// derived from (master_seed, i), and aggregation runs in trial order, so the
// summary is identical for any parallelism level.
inline RunSummary run_trials(const SimModel& sim, const FluidPath& fluid,
                             const Eigen::VectorXi& x_counts, const Policy& policy, double T,
                             int n_trials, std::uint64_t master_seed, int parallelism,
                             const CostModel& cost, const SimOptions& opt = {},
                             bool keep_trials = true) {
  if (n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
  std::vector<TrajectoryRecord> results(n_trials);
  std::vector<std::string> errors(n_trials);
  std::atomic<int> next{0};

  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n_trials) break;
      try {
        results[i] = simulate_trajectory(sim, fluid, x_counts, policy, T, cost,
                                         RngStream(master_seed, i), i, opt);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const int threads = std::max(1, std::min(parallelism, n_trials));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int p = 0; p < threads; ++p) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (int i = 0; i < n_trials; ++i)
    if (!errors[i].empty())
      throw std::runtime_error("run_trials: trial " + std::to_string(i) + ": " + errors[i]);

  RunSummary sum;
  sum.n_trials = n_trials;
  sum.master_seed = master_seed;
  std::vector<double> dev, ctrl, tot;
  long proposed = 0, accepted = 0, pe = 0, ce = 0;
  for (const auto& tr : results) {
    dev.push_back(tr.dev_cost);
    ctrl.push_back(tr.ctrl_cost);
    tot.push_back(tr.dev_cost + tr.ctrl_cost);
    proposed += tr.proposed;
    accepted += tr.accepted;
    pe += tr.policy_evals;
    ce += tr.clamped_evals;
    sum.negative_rate_clamps += tr.negative_rate_clamps;
  }
  sum.dev_cost = make_stat(dev);
  sum.ctrl_cost = make_stat(ctrl);
  sum.total_cost = make_stat(tot);
  sum.acceptance_ratio = proposed > 0 ? static_cast<double>(accepted) / proposed : 1.0;
  sum.clamp_frequency = pe > 0 ? static_cast<double>(ce) / pe : 0.0;
  if (keep_trials) sum.trials = std::move(results);
  return sum;
}

// Nearest S_N lattice point to r (largest-remainder rounding).
inline Eigen::VectorXi lattice_point(const Eigen::VectorXd& r, int n_particles) {
  const int d = static_cast<int>(r.size());
  Eigen::VectorXi counts(d);
  std::vector<std::pair<double, int>> rem(d);
  int assigned = 0;
  for (int i = 0; i < d; ++i) {
    const double x = r[i] * n_particles;
    counts[i] = static_cast<int>(std::floor(x));
    assigned += counts[i];
    rem[i] = {x - std::floor(x), i};
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; k < n_particles - assigned; ++k) counts[rem[k].second] += 1;
  return counts;
}

}  // namespace mfctrl
