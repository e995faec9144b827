#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfctrl/coeffs.hpp"

namespace mfctrl {

struct GaussianDiagnostics {
  int n_samples = 0;
  Eigen::VectorXd standardized_mean_error;  // per coordinate, in units of SE
  double cov_frobenius_rel_error = 0.0;     // vs the moment-ODE covariance
  double mardia_kurtosis_stat = 0.0;        // standardized; ~N(0,1) under normality
  bool reduced_cov_singular = false;
};

// Compares terminal-time samples of the uncontrolled fluctuation process with
// the Gauss-Markov moments. Samples must come from the uncontrolled arm; the
// moment ODEs say nothing about controlled dynamics.
inline GaussianDiagnostics gaussian_diagnostics(const std::vector<Eigen::VectorXd>& samples,
                                                const GaussMarkovMoments& moments,
                                                const Eigen::MatrixXd& Q, double T,
                                                bool uncontrolled_arm = true) {
  if (!uncontrolled_arm)
    throw std::invalid_argument(
        "gaussian_diagnostics: moments are only valid for the uncontrolled arm");
  const int n = static_cast<int>(samples.size());
  if (n < 100) throw std::invalid_argument("gaussian_diagnostics: need at least 100 samples");
  const int d = static_cast<int>(samples[0].size());

  const Eigen::VectorXd m_ref = moments.mean.eval(T);
  const Eigen::MatrixXd S_ref = moments.cov.eval(T);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) mean += s;
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : samples) {
    const Eigen::VectorXd c = s - mean;
    cov += c * c.transpose();
  }
  cov /= (n - 1);

  GaussianDiagnostics diag;
  diag.n_samples = n;
  diag.standardized_mean_error.resize(d);
  for (int i = 0; i < d; ++i) {
    const double se = std::sqrt(std::max(S_ref(i, i), 1e-300) / n);
    diag.standardized_mean_error[i] = (mean[i] - m_ref[i]) / se;
  }
  diag.cov_frobenius_rel_error = (cov - S_ref).norm() / std::max(S_ref.norm(), 1e-300);

  // Mardia kurtosis on the (d-1)-dimensional reduced coordinates
  const Eigen::MatrixXd Qr = Q.leftCols(d - 1);
  std::vector<Eigen::VectorXd> red(n);
  Eigen::VectorXd rmean = Eigen::VectorXd::Zero(d - 1);
  for (int i = 0; i < n; ++i) {
    red[i] = Qr.transpose() * samples[i];
    rmean += red[i];
  }
  rmean /= n;
  Eigen::MatrixXd rcov = Eigen::MatrixXd::Zero(d - 1, d - 1);
  for (const auto& s : red) {
    const Eigen::VectorXd c = s - rmean;
    rcov += c * c.transpose();
  }
  rcov /= (n - 1);
  Eigen::LDLT<Eigen::MatrixXd> fac(rcov);
  if (fac.info() != Eigen::Success || !fac.isPositive()) {
    diag.reduced_cov_singular = true;
    return diag;
  }
  const int p = d - 1;
  double b2 = 0.0;
  for (const auto& s : red) {
    const Eigen::VectorXd c = s - rmean;
    const double q = c.dot(fac.solve(c));
    b2 += q * q;
  }
  b2 /= n;
  const double expect = static_cast<double>(p) * (p + 2);
  const double var = 8.0 * p * (p + 2) / static_cast<double>(n);
  diag.mardia_kurtosis_stat = (b2 - expect) / std::sqrt(var);
  return diag;
}

}  // namespace mfctrl
