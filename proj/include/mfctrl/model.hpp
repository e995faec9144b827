#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfctrl {

constexpr double kSimplexTol = 1e-9;

// One jump vector nu = (I, J): I_x particles leave state x, J_y particles
// arrive in state y. net = sum_x (J_x - I_x) e_x is the aggregate move of
// the (unnormalized) empirical measure.
struct JumpVector {
  Eigen::VectorXi in;
  Eigen::VectorXi out;
  Eigen::VectorXi net;

  JumpVector() = default;
  JumpVector(Eigen::VectorXi in_, Eigen::VectorXi out_)
      : in(std::move(in_)), out(std::move(out_)) {
    net = out - in;
  }
};

// A transition type k: at most max_participants particles move per jump.
struct TransitionType {
  int id = 0;
  int max_participants = 1;
  std::vector<JumpVector> jumps;
};

struct TransitionRef {
  int type = 0;
  int jump = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Generic controlled jump-Markov model over a d-state per-particle space.
//
// Rates are user closures. base_rate is the N->infinity limit rate
// Gamma^k(r,nu); prelimit_rate is Gamma_N^k(r,u,nu) where u is the full
// l-dimensional control already scaled into Lambda_N (i.e. divided by
// sqrt(N)). Control is handled in reduced coordinates of dimension
// control_dim, expanded to the full vector by control_embed; coordinates of
// the full vector are indexed by the flat transition order of
// enumerate_transitions.
struct ModelSpec {
  int dim = 0;
  std::vector<TransitionType> types;

  std::function<double(const Eigen::VectorXd&, int, int)> base_rate;
  std::function<double(int, const Eigen::VectorXd&, const Eigen::VectorXd&, int, int)>
      prelimit_rate;
  std::function<double(int, int, const Eigen::VectorXd&)> h1;
  std::function<Eigen::VectorXd(int, int, const Eigen::VectorXd&)> h2;

  int control_dim = 0;
  std::vector<Interval> control_box;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> control_embed;
  std::vector<TransitionRef> nondegenerate_set;

  // Optional simulator hints, indexed by flat transition order.
  // controlled[i] == false means the prelimit rate of transition i does not
  // depend on the control; empty means "assume all controlled".
  std::vector<bool> controlled;
  // rate_deps[i]: state coordinates the prelimit rate of transition i reads.
  // Empty means "depends on everything".
  std::vector<std::vector<int>> rate_deps;

  std::string name;
};

struct FlatTransition {
  int type = 0;
  int jump = 0;
  const JumpVector* nu = nullptr;
};

inline bool in_simplex(const Eigen::VectorXd& r, double tol = kSimplexTol) {
  if (r.minCoeff() < -tol) return false;
  return std::abs(r.sum() - 1.0) <= tol * static_cast<double>(r.size() == 0 ? 1 : r.size());
}

// Flattens all (k, nu) pairs in deterministic order (types in stored order,
// jumps in stored order). This order defines the coordinate indexing of the
// full control vector everywhere downstream.
inline std::vector<FlatTransition> enumerate_transitions(const ModelSpec& spec) {
  std::vector<FlatTransition> flat;
  for (int k = 0; k < static_cast<int>(spec.types.size()); ++k) {
    const TransitionType& tt = spec.types[k];
    for (int j = 0; j < static_cast<int>(tt.jumps.size()); ++j) {
      const JumpVector& nu = tt.jumps[j];
      if (nu.in.size() != spec.dim || nu.out.size() != spec.dim) {
        throw ModelError("transition (k=" + std::to_string(k) + ", nu=" + std::to_string(j) +
                         "): jump vectors must have length d");
      }
      if (nu.in.minCoeff() < 0 || nu.out.minCoeff() < 0) {
        throw ModelError("transition (k=" + std::to_string(k) + ", nu=" + std::to_string(j) +
                         "): negative participant count");
      }
      const int total_in = nu.in.sum();
      const int total_out = nu.out.sum();
      if (total_in != total_out) {
        throw ModelError("transition (k=" + std::to_string(k) + ", nu=" + std::to_string(j) +
                         "): sum(I) != sum(J)");
      }
      if (total_in > tt.max_participants) {
        throw ModelError("transition (k=" + std::to_string(k) + ", nu=" + std::to_string(j) +
                         "): " + std::to_string(total_in) + " participants exceed n_k=" +
                         std::to_string(tt.max_participants));
      }
      if ((nu.out - nu.in).cwiseAbs().sum() == 0) {
        throw ModelError("transition (k=" + std::to_string(k) + ", nu=" + std::to_string(j) +
                         "): null jump (I == J)");
      }
      flat.push_back({k, j, &nu});
    }
  }
  return flat;
}

inline double eval_base_rate(const ModelSpec& spec, const Eigen::VectorXd& r, int type,
                             int jump) {
  if (!in_simplex(r)) throw ModelError("eval_base_rate: r is not a simplex point");
  const double g = spec.base_rate(r, type, jump);
  if (g < 0.0) {
    throw ModelError("eval_base_rate: model returned negative rate for (k=" +
                     std::to_string(type) + ", nu=" + std::to_string(jump) + ")");
  }
  return g;
}

// Gamma_N^k(r, u/sqrt(N), nu) with u = control_embed(u_reduced). Negative
// values (possible at tiny N when lambda + u/sqrt(N) < 0) are clamped to 0
// and counted in clamp_counter when provided.
inline double eval_prelimit_rate(const ModelSpec& spec, int n_particles,
                                 const Eigen::VectorXd& r, const Eigen::VectorXd& u_reduced,
                                 int type, int jump,
                                 std::atomic<long>* clamp_counter = nullptr) {
  if (n_particles < 1) throw ModelError("eval_prelimit_rate: N must be >= 1");
  const double n = static_cast<double>(n_particles);
  for (int i = 0; i < r.size(); ++i) {
    const double scaled = r[i] * n;
    if (std::abs(scaled - std::round(scaled)) > 1e-6 || r[i] < -kSimplexTol) {
      throw ModelError("eval_prelimit_rate: r is not a lattice point of S_N");
    }
  }
  Eigen::VectorXd u_full = spec.control_embed(u_reduced) / std::sqrt(n);
  double g = spec.prelimit_rate(n_particles, r, u_full, type, jump);
  if (g < 0.0) {
    if (clamp_counter) clamp_counter->fetch_add(1, std::memory_order_relaxed);
    g = 0.0;
  }
  return g;
}

}  // namespace mfctrl
