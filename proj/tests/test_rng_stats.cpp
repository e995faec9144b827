#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfctrl/coeffs.hpp"
#include "mfctrl/fluid.hpp"
#include "mfctrl/models/two_state.hpp"
#include "mfctrl/rng.hpp"
#include "mfctrl/stats.hpp"

using namespace mfctrl;

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  bool same_c = true, same_d = true;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    if (x != c.next_u64()) same_c = false;
    if (x != d.next_u64()) same_d = false;
  }
  CHECK_FALSE(same_c);
  CHECK_FALSE(same_d);
}

TEST_CASE("uniform lies in (0,1) with the right first two moments") {
  RngStream r(7, 3);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    s += u;
    ss += u * u;
  }
  const double mean = s / n;
  const double var = ss / n - mean * mean;
  CHECK(std::abs(mean - 0.5) <= 4.0 / std::sqrt(12.0 * n));
  CHECK(var == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("normal and exponential moments") {
  RngStream r(11, 0);
  const int n = 200000;
  double s = 0.0, ss = 0.0, s4 = 0.0, e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
    s4 += z * z * z * z;
    e += r.exponential(2.0);
  }
  CHECK(std::abs(s / n) <= 4.0 / std::sqrt(double(n)));
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
  CHECK(e / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gaussian diagnostics accept exact Gaussian samples") {
  ModelSpec spec = build_two_state_model();
  Eigen::VectorXd x0(2);
  x0 << 0.5, 0.5;
  FluidPath fluid = solve_fluid(spec, x0, 1.0, 1e-3);
  DiffusionCoeffs co = assemble_coeffs(spec, fluid);
  GaussMarkovMoments mom = solve_moments(co, Eigen::VectorXd::Zero(2), 1.0);

  // draw exact samples from N(0, Sigma(1)) supported on the zero-sum line
  const double sd = std::sqrt(mom.cov.eval(1.0)(0, 0));
  RngStream rng(5, 0);
  std::vector<Eigen::VectorXd> samples;
  for (int i = 0; i < 4000; ++i) {
    const double z = sd * rng.normal();
    Eigen::VectorXd v(2);
    v << z, -z;
    samples.push_back(v);
  }
  GaussianDiagnostics diag = gaussian_diagnostics(samples, mom, co.Q, 1.0);
  CHECK(diag.n_samples == 4000);
  CHECK(diag.standardized_mean_error.cwiseAbs().maxCoeff() <= 4.0);
  CHECK(diag.cov_frobenius_rel_error <= 0.1);
  CHECK_FALSE(diag.reduced_cov_singular);
  CHECK(std::abs(diag.mardia_kurtosis_stat) <= 4.0);

  // far-off samples are flagged by the diagnostics
  for (auto& v : samples) v *= 3.0;
  GaussianDiagnostics bad = gaussian_diagnostics(samples, mom, co.Q, 1.0);
  CHECK(bad.cov_frobenius_rel_error > 1.0);

  samples.resize(50);
  CHECK_THROWS_AS((void)gaussian_diagnostics(samples, mom, co.Q, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)gaussian_diagnostics(samples, mom, co.Q, 1.0, false),
                  std::invalid_argument);
}
