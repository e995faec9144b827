#pragma once

#include <cmath>

#include "mfctrl/model.hpp"

namespace mfctrl::testing {

// Closed form for the scalar backward Riccati equation
//   -k'(t) = q + 2*beta*k - A*k^2,  k(T) = 0,  A = b^2 / r.
// With s = T - t the forward equation dk/ds = -A (k - kp)(k - km) has the
// Moebius solution below; kp/km are the roots of A k^2 - 2 beta k - q = 0.
inline double scalar_riccati(double q, double beta, double A, double T, double t) {
  const double disc = std::sqrt(beta * beta + A * q);
  const double kp = (beta + disc) / A;
  const double km = (beta - disc) / A;
  const double s = T - t;
  const double C = kp / km;
  const double E = std::exp(-A * (kp - km) * s);
  return (kp - km * C * E) / (1.0 - C * E);
}

// Simpson quadrature of f on [0, T] with n (even) intervals.
template <typename F>
double simpson(F f, double T, int n) {
  const double h = T / n;
  double s = f(0.0) + f(T);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(h * i);
  return s * h / 3.0;
}

// d=2 model with constant total jump rate N*lambda (lambda/2 in each
// direction, independent of the state), used for Poisson-exactness checks:
// the accepted-event count over [0,T] is exactly Poisson(N*lambda*T).
inline ModelSpec build_constant_rate_model(double lambda = 1.0) {
  ModelSpec spec;
  spec.name = "constant_rate";
  spec.dim = 2;
  Eigen::VectorXi e1(2), e2(2);
  e1 << 1, 0;
  e2 << 0, 1;
  TransitionType fwd, bwd;
  fwd.id = 0;
  fwd.max_participants = 1;
  fwd.jumps.emplace_back(e1, e2);
  bwd.id = 1;
  bwd.max_participants = 1;
  bwd.jumps.emplace_back(e2, e1);
  spec.types = {fwd, bwd};
  const double half = lambda / 2.0;
  spec.base_rate = [half](const Eigen::VectorXd&, int, int) { return half; };
  spec.prelimit_rate = [half](int n, const Eigen::VectorXd&, const Eigen::VectorXd&, int,
                              int) { return n * half; };
  spec.h1 = [](int, int, const Eigen::VectorXd&) { return 0.0; };
  spec.h2 = [](int, int, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(2).eval(); };
  spec.control_dim = 1;
  spec.control_box = {{0.0, 0.0}};
  spec.control_embed = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(2).eval();
  };
  spec.nondegenerate_set = {{0, 0}, {1, 0}};
  spec.controlled = {false, false};
  spec.rate_deps = {{0}, {1}};
  return spec;
}

}  // namespace mfctrl::testing
