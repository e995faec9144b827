#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfctrl/coeffs.hpp"

namespace mfctrl {

// Backward Riccati solution for the limit LQR
//   -K' = Qc + beta'K + K beta - K B R^-1 B' K,  K(T) = 0,
// stored on the forward grid together with the gain G(t) = R^-1 B(t)' K(t)
// and the value offset c(t) = int_t^T Tr(sigma sigma' K) ds.
struct RiccatiSolution {
  MatrixGrid K;     // d x d symmetric PSD
  MatrixGrid gain;  // l_eff x d
  std::vector<double> value_offset;  // c at grid nodes
  Eigen::MatrixXd Qc;
  Eigen::MatrixXd R;
  std::vector<Interval> control_box;
  double step = 0.0;

  double offset_at(double t) const {
    const int n = static_cast<int>(value_offset.size());
    const double pos = t / step;
    const int i = std::min(static_cast<int>(pos), n - 2);
    const double s = pos - i;
    return (1.0 - s) * value_offset[i] + s * value_offset[i + 1];
  }
};

inline RiccatiSolution solve_riccati(const ModelSpec& spec, const DiffusionCoeffs& coeffs,
                                     const Eigen::MatrixXd& Qc, const Eigen::MatrixXd& R,
                                     double T, double h) {
  const int d = static_cast<int>(Qc.rows());
  Eigen::LLT<Eigen::MatrixXd> rfac(R);
  if (rfac.info() != Eigen::Success)
    throw std::invalid_argument("solve_riccati: R must be symmetric positive definite");
  const Eigen::MatrixXd Rinv = rfac.solve(Eigen::MatrixXd::Identity(R.rows(), R.cols()));

  const int steps = static_cast<int>(std::round(T / h));
  std::vector<Eigen::MatrixXd> Kg(steps + 1);
  Kg[steps] = Eigen::MatrixXd::Zero(d, d);

  auto rhs = [&](double t, const Eigen::MatrixXd& K) -> Eigen::MatrixXd {
    const Eigen::MatrixXd beta = coeffs.beta.eval(t);
    const Eigen::MatrixXd B = coeffs.B.eval(t);
    return -(Qc + beta.transpose() * K + K * beta - K * B * Rinv * B.transpose() * K);
  };

  Eigen::MatrixXd K = Kg[steps];
  for (int i = steps; i > 0; --i) {
    const double t = h * i;
    const Eigen::MatrixXd k1 = rhs(t, K);
    const Eigen::MatrixXd k2 = rhs(t - 0.5 * h, K - 0.5 * h * k1);
    const Eigen::MatrixXd k3 = rhs(t - 0.5 * h, K - 0.5 * h * k2);
    const Eigen::MatrixXd k4 = rhs(t - h, K - h * k3);
    K -= (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    K = 0.5 * (K + K.transpose());
    if (K.norm() > 1e12) throw std::runtime_error("solve_riccati: K diverged");
    Kg[i - 1] = K;
  }

  RiccatiSolution sol;
  sol.Qc = Qc;
  sol.R = R;
  sol.control_box = spec.control_box;
  sol.step = h;

  std::vector<Eigen::MatrixXd> Gg(steps + 1);
  std::vector<double> tr(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = h * i;
    Gg[i] = Rinv * coeffs.B.eval(t).transpose() * Kg[i];
    const Eigen::MatrixXd ssp = coeffs.sigma.eval(t);
    tr[i] = (ssp * ssp.transpose() * Kg[i]).trace();
  }
  sol.value_offset.assign(steps + 1, 0.0);
  for (int i = steps - 1; i >= 0; --i)
    sol.value_offset[i] = sol.value_offset[i + 1] + 0.5 * h * (tr[i] + tr[i + 1]);

  sol.K = MatrixGrid(std::move(Kg), h);
  sol.gain = MatrixGrid(std::move(Gg), h);
  return sol;
}

// clamp(-G(t) y) onto the control box, coordinate-wise; continuous in (t, y).
inline Eigen::VectorXd feedback(const RiccatiSolution& sol, double t, const Eigen::VectorXd& y,
                                bool* clamped = nullptr) {
  Eigen::VectorXd u = -(sol.gain.eval(t) * y);
  bool hit = false;
  for (int c = 0; c < u.size(); ++c) {
    const Interval& box = sol.control_box[c];
    if (u[c] < box.lo) {
      u[c] = box.lo;
      hit = true;
    } else if (u[c] > box.hi) {
      u[c] = box.hi;
      hit = true;
    }
  }
  if (clamped) *clamped = hit;
  return u;
}

// v0' K(0) v0 + c(0): the diffusion value under the (unclamped) LQR feedback.
inline double lqr_value(const RiccatiSolution& sol, const Eigen::VectorXd& v0) {
  if (std::abs(v0.sum()) > 1e-8)
    throw std::invalid_argument("lqr_value: v0 must satisfy v0 . 1 = 0");
  return v0.dot(sol.K.node(0) * v0) + sol.value_offset[0];
}

}  // namespace mfctrl
