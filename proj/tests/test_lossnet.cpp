#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfctrl/fluid.hpp"
#include "mfctrl/models/lossnet.hpp"
#include "mfctrl/rng.hpp"
#include "mfctrl/validate.hpp"

using namespace mfctrl;

TEST_CASE("state space: size and lexicographic order") {
  // default C=6, A1=A2=1: {(j,i): j+i<=6} has 28 states
  auto s28 = build_state_space(6, 1, 1);
  CHECK(s28.size() == 28);
  CHECK(s28.front() == std::make_pair(0, 0));
  CHECK(s28.back() == std::make_pair(6, 0));

  // C=2, A1=1, A2=2: {(0,0),(0,1),(1,0),(2,0)}
  auto s4 = build_state_space(2, 1, 2);
  REQUIRE(s4.size() == 4);
  CHECK(s4[0] == std::make_pair(0, 0));
  CHECK(s4[1] == std::make_pair(0, 1));
  CHECK(s4[2] == std::make_pair(1, 0));
  CHECK(s4[3] == std::make_pair(2, 0));

  CHECK(build_state_space(1, 1, 1).size() == 3);
}

TEST_CASE("parameter validation") {
  LossNetParams p;
  p.capacity = 1;
  p.a1 = 2;
  CHECK_THROWS_AS((void)build_lossnet_model(p), ModelError);
  p = {};
  p.lambda2 = 0.0;
  CHECK_THROWS_AS((void)build_lossnet_model(p), ModelError);
  p = {};
  p.control_halfwidth = -1.0;
  CHECK_THROWS_AS((void)build_lossnet_model(p), ModelError);
}

TEST_CASE("limit rates: closed-form spot checks at the uniform point") {
  ModelSpec spec = build_lossnet_model();  // C=6, all rates 1
  CHECK(spec.dim == 28);
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(28, 1.0 / 28);
  auto states = build_state_space(6, 1, 1);

  // class-1 entry from any admissible state: lambda1 * r_src = 1/28
  CHECK(eval_base_rate(spec, r, 0, 0) == doctest::Approx(1.0 / 28));
  // class-1 departures: j * tau1 * r_src; find the jump leaving (6,0)
  {
    int found = -1;
    for (int j = 0; j < static_cast<int>(spec.types[2].jumps.size()); ++j) {
      const auto& in = spec.types[2].jumps[j].in;
      int src = -1;
      for (int c = 0; c < 28; ++c)
        if (in[c] == 1) src = c;
      if (states[src] == std::make_pair(6, 0)) found = j;
    }
    REQUIRE(found >= 0);
    CHECK(eval_base_rate(spec, r, 2, found) == doctest::Approx(6.0 / 28));
  }
  // unsuccessful switch: mult * gamma * r_src * (blocked mass); 7 full states
  // (j+i=6) block class 1, so blocked mass = 7/28 = 1/4
  {
    const auto& in0 = spec.types[4].jumps[0].in;
    // the first switch jumps are the single-server (failed) ones
    CHECK(in0.sum() == 1);
    int src = -1;
    for (int c = 0; c < 28; ++c)
      if (in0[c] == 1) src = c;
    const double j_cnt = states[src].first;
    CHECK(eval_base_rate(spec, r, 4, 0) == doctest::Approx(j_cnt * 0.25 / 28));
  }
}

TEST_CASE("finite-N rates: switch factor N/(N-1) and entry control shift") {
  ModelSpec spec = build_lossnet_model();
  auto flat = enumerate_transitions(spec);
  const int N = 56;
  // lattice point: 2 particles in each of the 28 states
  Eigen::VectorXd r = Eigen::VectorXd::Constant(28, 2.0 / 56);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);

  for (std::size_t f = 0; f < flat.size(); ++f) {
    const double gn = eval_prelimit_rate(spec, N, r, zero, flat[f].type, flat[f].jump);
    const double g = eval_base_rate(spec, r, flat[f].type, flat[f].jump);
    if (flat[f].type <= 3) {
      CHECK(gn == doctest::Approx(N * g));  // entry/leave scale exactly with N
    } else {
      CHECK(gn == doctest::Approx(N * g * N / (N - 1.0)));
    }
  }

  // control shifts exactly the entry rates: lambda -> lambda + u_c / sqrt(N),
  // so the prelimit rate moves by N * r_src * u_c / sqrt(N) = sqrt(N) r_src u_c
  Eigen::VectorXd u(2);
  u << 0.5, -0.25;
  const double sn = std::sqrt(double(N));
  for (std::size_t f = 0; f < flat.size(); ++f) {
    const double gu = eval_prelimit_rate(spec, N, r, u, flat[f].type, flat[f].jump);
    const double g0 = eval_prelimit_rate(spec, N, r, zero, flat[f].type, flat[f].jump);
    if (flat[f].type == 0)
      CHECK(gu - g0 == doctest::Approx(sn * r[0] * 0.5));  // all sources have r=2/56
    else if (flat[f].type == 1)
      CHECK(gu - g0 == doctest::Approx(-sn * r[0] * 0.25));
    else
      CHECK(gu == g0);
  }
}

TEST_CASE("h2 is the gradient of the limit rate; h1 marks entry rates") {
  ModelSpec spec = build_lossnet_model();
  auto flat = enumerate_transitions(spec);
  RngStream rng(31, 0);
  Eigen::VectorXd r(spec.dim);
  for (int i = 0; i < spec.dim; ++i) r[i] = 0.5 + rng.uniform();
  r /= r.sum();

  const double eps = 1e-6;
  for (std::size_t f = 0; f < flat.size(); f += 7) {  // sample every 7th transition
    const auto& tr = flat[f];
    const Eigen::VectorXd h2 = spec.h2(tr.type, tr.jump, r);
    for (int c = 0; c < spec.dim; ++c) {
      Eigen::VectorXd rp = r, rm = r;
      rp[c] += eps;
      rm[c] -= eps;
      const double fd =
          (spec.base_rate(rp, tr.type, tr.jump) - spec.base_rate(rm, tr.type, tr.jump)) /
          (2 * eps);
      CHECK(h2[c] == doctest::Approx(fd).epsilon(1e-5));
    }
    // h1 = r_src exactly for entry transitions, 0 otherwise
    const double h1 = spec.h1(tr.type, tr.jump, r);
    if (tr.type <= 1) {
      CHECK(h1 > 0.0);
    } else {
      CHECK(h1 == 0.0);
    }
  }
}

TEST_CASE("structural conditions hold along the fixed-point fluid path") {
  ModelSpec spec = build_lossnet_model();
  Eigen::VectorXd x0 = find_fixed_point(spec);
  FluidPath fluid = solve_fluid(spec, x0, 2.0, 1e-2);
  ConditionReport rep = validate_conditions(spec, fluid);
  CHECK(rep.rate_growth.pass);
  CHECK(rep.drift_residual.pass);
  CHECK(rep.nondegeneracy.pass);
  CHECK(rep.lipschitz_estimate > 0.0);
}

TEST_CASE("benchmark configuration constants") {
  Table1Config cfg = table1_config();
  CHECK(cfg.n_particles == 10000);
  CHECK(cfg.horizon == 10.0);
  CHECK(cfg.n_trials == 128);
  REQUIRE(cfg.alphas.size() == 2);
  CHECK(cfg.alphas[0] == 0.01);
  CHECK(cfg.alphas[1] == 0.001);
  CHECK(cfg.params.capacity == 6);
  CHECK(cfg.params.control_halfwidth == 5.0);
  CHECK(cfg.x0_policy == "fixed_point");
}
