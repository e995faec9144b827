#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfctrl/model.hpp"

namespace mfctrl {

// F(r) = sum_k sum_nu Gamma^k(r, nu) e_nu, the law-of-large-numbers drift.
inline Eigen::VectorXd drift_F(const ModelSpec& spec, const Eigen::VectorXd& r) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(spec.dim);
  for (int k = 0; k < static_cast<int>(spec.types.size()); ++k) {
    const TransitionType& tt = spec.types[k];
    for (int j = 0; j < static_cast<int>(tt.jumps.size()); ++j) {
      const double g = spec.base_rate(r, k, j);
      f += g * tt.jumps[j].net.cast<double>();
    }
  }
  return f;
}

// Dense-grid solution of mu' = F(mu) with cubic Hermite interpolation
// between nodes. Immutable after solve.
class FluidPath {
 public:
  FluidPath(std::vector<Eigen::VectorXd> mu, std::vector<Eigen::VectorXd> f, double step)
      : mu_(std::move(mu)), f_(std::move(f)), h_(step) {}

  double horizon() const { return h_ * static_cast<double>(mu_.size() - 1); }
  double step() const { return h_; }
  int nodes() const { return static_cast<int>(mu_.size()); }
  const Eigen::VectorXd& node(int i) const { return mu_[i]; }
  const Eigen::VectorXd& node_drift(int i) const { return f_[i]; }

  Eigen::VectorXd eval(double t) const {
    Eigen::VectorXd out(mu_[0].size());
    eval_into(t, out);
    return out;
  }

  // Allocation-free evaluation for the simulator hot path.
  void eval_into(double t, Eigen::VectorXd& out) const {
    const double T = horizon();
    if (t < -1e-12 || t > T + 1e-12)
      throw std::invalid_argument("FluidPath::eval: t outside [0, T]");
    if (t <= 0.0) {
      out = mu_.front();
      return;
    }
    if (t >= T) {
      out = mu_.back();
      return;
    }
    const int i = std::min(static_cast<int>(t / h_), static_cast<int>(mu_.size()) - 2);
    const double s = (t - h_ * i) / h_;
    if (s <= 0.0) {
      out = mu_[i];
      return;
    }
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    out = h00 * mu_[i] + (h10 * h_) * f_[i] + h01 * mu_[i + 1] + (h11 * h_) * f_[i + 1];
  }

 private:
  std::vector<Eigen::VectorXd> mu_;
  std::vector<Eigen::VectorXd> f_;
  double h_;
};

inline FluidPath solve_fluid(const ModelSpec& spec, const Eigen::VectorXd& x0, double T,
                             double h) {
  if (T <= 0.0 || h <= 0.0 || h >= T)
    throw std::invalid_argument("solve_fluid: need 0 < h < T");
  if (!in_simplex(x0)) throw std::invalid_argument("solve_fluid: x0 not in simplex");

  const int steps = static_cast<int>(std::ceil(T / h - 1e-9));
  const double hh = T / steps;  // uniform grid covering [0, T] exactly

  std::vector<Eigen::VectorXd> mu, f;
  mu.reserve(steps + 1);
  f.reserve(steps + 1);
  Eigen::VectorXd r = x0;

  auto renormalize = [](Eigen::VectorXd& v) {
    // F conserves mass; this only absorbs rounding
    v = v.cwiseMax(-1e-12);
    v /= v.sum();
  };
  renormalize(r);

  for (int n = 0; n <= steps; ++n) {
    mu.push_back(r);
    f.push_back(drift_F(spec, r));
    if (n == steps) break;
    const Eigen::VectorXd& k1 = f.back();
    const Eigen::VectorXd k2 = drift_F(spec, r + 0.5 * hh * k1);
    const Eigen::VectorXd k3 = drift_F(spec, r + 0.5 * hh * k2);
    const Eigen::VectorXd k4 = drift_F(spec, r + hh * k3);
    r += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    renormalize(r);
  }
  return FluidPath(std::move(mu), std::move(f), hh);
}

// Damped fixed-point search for F(r*) = 0, used as the default initial
// condition policy. Long ODE integration followed by damped iteration.
inline Eigen::VectorXd find_fixed_point(const ModelSpec& spec,
                                        double tol = 1e-10, int max_iter = 20000) {
  const int d = spec.dim;
  Eigen::VectorXd r = Eigen::VectorXd::Constant(d, 1.0 / d);

  // damped Euler to get into the basin
  const double step = 0.05;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd f = drift_F(spec, r);
    if (f.lpNorm<Eigen::Infinity>() < tol) return r;
    r += step * f;
    r = r.cwiseMax(0.0);
    r /= r.sum();
  }

  // Newton with finite-difference Jacobian, stepping in the sum-zero subspace
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd f = drift_F(spec, r);
    if (f.lpNorm<Eigen::Infinity>() < tol) return r;
    Eigen::MatrixXd J(d, d);
    const double eps = 1e-7;
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd rp = r;
      rp[j] += eps;
      J.col(j) = (drift_F(spec, rp) - f) / eps;
    }
    // append the mass constraint so the step stays on the simplex hyperplane
    Eigen::MatrixXd A(d + 1, d);
    A.topRows(d) = J;
    A.row(d).setOnes();
    Eigen::VectorXd b(d + 1);
    b.head(d) = -f;
    b[d] = 0.0;
    const Eigen::VectorXd delta = A.colPivHouseholderQr().solve(b);
    r += delta;
    r = r.cwiseMax(0.0);
    r /= r.sum();
  }
  throw std::runtime_error("find_fixed_point: no convergence");
}

}  // namespace mfctrl
