#pragma once

#include "mfctrl/model.hpp"

namespace mfctrl {

// Minimal d=2 model: particles hop 1 -> 2 at rate lambda and 2 -> 1 at rate
// tau, with additive rate control on lambda only. Small enough that every
// limit quantity (fluid path, OU variance, scalar Riccati) has a closed form,
// so it serves as the oracle model throughout the test suite.
struct TwoStateParams {
  double lambda = 1.0;
  double tau = 1.0;
  double control_halfwidth = 5.0;  // D
};

inline ModelSpec build_two_state_model(const TwoStateParams& p = {}) {
  ModelSpec spec;
  spec.name = "two_state";
  spec.dim = 2;

  Eigen::VectorXi e1(2), e2(2);
  e1 << 1, 0;
  e2 << 0, 1;

  TransitionType fwd;  // 1 -> 2
  fwd.id = 0;
  fwd.max_participants = 1;
  fwd.jumps.emplace_back(e1, e2);
  TransitionType bwd;  // 2 -> 1
  bwd.id = 1;
  bwd.max_participants = 1;
  bwd.jumps.emplace_back(e2, e1);
  spec.types = {fwd, bwd};

  const double lambda = p.lambda;
  const double tau = p.tau;

  spec.base_rate = [lambda, tau](const Eigen::VectorXd& r, int type, int) {
    return type == 0 ? lambda * r[0] : tau * r[1];
  };
  // u_full is already in Lambda_N (scaled by 1/sqrt(N)); flat coordinate 0 is
  // the forward transition.
  spec.prelimit_rate = [lambda, tau](int n, const Eigen::VectorXd& r,
                                     const Eigen::VectorXd& u_full, int type, int) {
    const double dn = static_cast<double>(n);
    return type == 0 ? dn * r[0] * (lambda + u_full[0]) : dn * r[1] * tau;
  };
  spec.h1 = [](int type, int, const Eigen::VectorXd& r) {
    return type == 0 ? r[0] : 0.0;
  };
  spec.h2 = [lambda, tau](int type, int, const Eigen::VectorXd&) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
    if (type == 0)
      v[0] = lambda;
    else
      v[1] = tau;
    return v;
  };

  spec.control_dim = 1;
  spec.control_box = {{-p.control_halfwidth, p.control_halfwidth}};
  spec.control_embed = [](const Eigen::VectorXd& u) {
    Eigen::VectorXd full(2);
    full << u[0], 0.0;
    return full;
  };
  spec.nondegenerate_set = {{0, 0}, {1, 0}};
  spec.controlled = {true, false};
  spec.rate_deps = {{0}, {1}};
  return spec;
}

}  // namespace mfctrl
