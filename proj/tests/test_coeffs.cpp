#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfctrl/coeffs.hpp"
#include "mfctrl/fluid.hpp"
#include "mfctrl/models/lossnet.hpp"
#include "mfctrl/models/two_state.hpp"

using namespace mfctrl;

namespace {

struct Ctx {
  ModelSpec spec;
  FluidPath fluid;
  DiffusionCoeffs co;
  Ctx(ModelSpec s, const Eigen::VectorXd& x0, double T, double h)
      : spec(std::move(s)), fluid(solve_fluid(spec, x0, T, h)), co(assemble_coeffs(spec, fluid)) {}
};

Ctx two_state_eq() {
  ModelSpec spec = build_two_state_model();
  Eigen::VectorXd x0(2);
  x0 << 0.5, 0.5;
  return Ctx(std::move(spec), x0, 1.0, 1e-3);
}

Ctx lossnet_fp() {
  ModelSpec spec = build_lossnet_model();
  Eigen::VectorXd x0 = find_fixed_point(spec);
  return Ctx(std::move(spec), x0, 1.0, 1e-2);
}

}  // namespace

TEST_CASE("build_Q: orthogonal with last column 1/sqrt(d)") {
  for (int d : {2, 4, 28}) {
    Eigen::MatrixXd Q = build_Q(d);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    CHECK((Q.transpose() * Q - I).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
    CHECK((Q.col(d - 1) - w).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS((void)build_Q(1), std::invalid_argument);
}

TEST_CASE("two_state hand-derived coefficients at equilibrium") {
  Ctx c = two_state_eq();
  Eigen::MatrixXd beta_oracle(2, 2);
  beta_oracle << -1, 1, 1, -1;
  Eigen::MatrixXd a_oracle(2, 2);
  a_oracle << 1, -1, -1, 1;
  for (int n : {0, c.co.beta.nodes() / 2, c.co.beta.nodes() - 1}) {
    CHECK((c.co.beta.node(n) - beta_oracle).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((c.co.a.node(n) - a_oracle).cwiseAbs().maxCoeff() <= 1e-12);
    // B = mu1 (-1, 1)'; reduced magnitude |q1' B| = sqrt(2) mu1 = 1/sqrt(2)
    const Eigen::MatrixXd B = c.co.B.node(n);
    CHECK(B(0, 0) == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(B(1, 0) == doctest::Approx(0.5).epsilon(1e-10));
    const double bhat = (c.co.Q.col(0).transpose() * B)(0, 0);
    CHECK(std::abs(bhat) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
    // alpha = 2 (scalar), sigma = (1/sqrt(2)) [[1,-1],[-1,1]] up to sign-free sigma sigma'
    CHECK(c.co.alpha.node(n)(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
    Eigen::MatrixXd sig_oracle(2, 2);
    sig_oracle << 1, -1, -1, 1;
    sig_oracle /= std::sqrt(2.0);
    CHECK((c.co.sigma.node(n) - sig_oracle).cwiseAbs().maxCoeff() <= 1e-9);
    // reduced beta_hat = q1' beta q1 = -2
    const double bh = (c.co.Q.col(0).transpose() * beta_oracle * c.co.Q.col(0))(0, 0);
    CHECK(bh == doctest::Approx(-2.0).epsilon(1e-12));
  }
}

TEST_CASE("coefficient identities on every grid node (both models)") {
  for (const Ctx& c : {two_state_eq(), lossnet_fp()}) {
    const int d = c.spec.dim;
    for (int n = 0; n < c.co.a.nodes(); ++n) {
      const Eigen::MatrixXd& a = c.co.a.node(n);
      const Eigen::MatrixXd& sig = c.co.sigma.node(n);
      CHECK((sig * sig.transpose() - a).cwiseAbs().maxCoeff() <= 1e-8);
      // degeneracy direction: a 1 = 0, 1' a = 0
      CHECK((a * Eigen::VectorXd::Ones(d)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((Eigen::RowVectorXd::Ones(d) * a).cwiseAbs().maxCoeff() <= 1e-12);
      // zero block of Q' a Q
      const Eigen::MatrixXd qaq = c.co.Q.transpose() * a * c.co.Q;
      CHECK(qaq.row(d - 1).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(qaq.col(d - 1).cwiseAbs().maxCoeff() <= 1e-10);
      // alpha PSD and alpha_sqrt^2 = alpha
      const Eigen::MatrixXd& asq = c.co.alpha_sqrt.node(n);
      CHECK((asq * asq - c.co.alpha.node(n)).cwiseAbs().maxCoeff() <= 1e-8);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.co.alpha.node(n));
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }
}

TEST_CASE("lossnet: nondegenerate alpha floor and B structure") {
  Ctx c = lossnet_fp();
  double floor = 1e300;
  for (int n = 0; n < c.co.alpha.nodes(); ++n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.co.alpha.node(n));
    floor = std::min(floor, es.eigenvalues().minCoeff());
  }
  CHECK(floor > 0.0);  // Condition-2.8 consequence on the fluid path

  // B has exactly 2 reduced columns; column 1 = sum over entry-1 transitions
  // of mu^{j,i} e_nu
  const auto flat = enumerate_transitions(c.spec);
  const Eigen::VectorXd mu = c.fluid.node(0);
  Eigen::VectorXd col1 = Eigen::VectorXd::Zero(c.spec.dim);
  for (std::size_t f = 0; f < flat.size(); ++f) {
    if (flat[f].type != 0) continue;  // entry transitions of class 1 are type 0
    col1 += c.spec.h1(flat[f].type, flat[f].jump, mu) * flat[f].nu->net.cast<double>();
  }
  REQUIRE(c.co.B.node(0).cols() == 2);
  CHECK((c.co.B.node(0).col(0) - col1).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("solve_moments: OU variance oracle and no-noise degenerate case") {
  Ctx c = two_state_eq();
  GaussMarkovMoments mom = solve_moments(c.co, Eigen::VectorXd::Zero(2), 1.0);
  // Var(q1 . V(1)) = (1 - e^{-4}) / 2
  const Eigen::VectorXd q1 = c.co.Q.col(0);
  const double var_hat = (q1.transpose() * mom.cov.eval(1.0) * q1)(0, 0);
  const double oracle = 0.5 * (1.0 - std::exp(-4.0));  // 0.49084218...
  CHECK(var_hat == doctest::Approx(oracle).epsilon(1e-7));
  // Var(V_1(1)) = (1 - e^{-4})/4
  CHECK(mom.cov.eval(1.0)(0, 0) == doctest::Approx(oracle / 2.0).epsilon(1e-7));
  // mean stays 0 from v0 = 0
  CHECK(mom.mean.eval(1.0).cwiseAbs().maxCoeff() <= 1e-14);

  // nonzero v0: mean follows e^{beta t} v0; q1 component decays like e^{-2t}
  Eigen::VectorXd v0(2);
  v0 << 0.3, -0.3;
  GaussMarkovMoments mom2 = solve_moments(c.co, v0, 1.0);
  const double m_hat0 = q1.dot(v0);
  const double m_hat1 = q1.dot(mom2.mean.eval(1.0).col(0));
  CHECK(m_hat1 == doctest::Approx(m_hat0 * std::exp(-2.0)).epsilon(1e-7));
}

TEST_CASE("MatrixGrid interpolation: exact at nodes, smooth between") {
  std::vector<Eigen::MatrixXd> vals;
  for (int i = 0; i <= 10; ++i) {
    Eigen::MatrixXd m(1, 1);
    const double t = 0.1 * i;
    m << t * t * t;  // cubic is reproduced exactly by Catmull-Rom away from ends
    vals.push_back(m);
  }
  MatrixGrid g(std::move(vals), 0.1);
  CHECK(g.eval(0.5)(0, 0) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(std::abs(g.eval(0.55)(0, 0) - 0.55 * 0.55 * 0.55) <= 2e-3);
  CHECK(g.eval(1.0)(0, 0) == doctest::Approx(1.0));
  CHECK(g.eval(-1.0)(0, 0) == doctest::Approx(0.0));  // clamps to front
}
