#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfctrl/fluid.hpp"
#include "mfctrl/model.hpp"

namespace mfctrl {

// Uniform-step grid of matrices with piecewise-cubic (Catmull-Rom)
// interpolation; slopes are central differences, one-sided at the ends.
class MatrixGrid {
 public:
  MatrixGrid() = default;
  MatrixGrid(std::vector<Eigen::MatrixXd> vals, double step)
      : vals_(std::move(vals)), h_(step) {}

  double step() const { return h_; }
  int nodes() const { return static_cast<int>(vals_.size()); }
  const Eigen::MatrixXd& node(int i) const { return vals_[i]; }
  double horizon() const { return h_ * static_cast<double>(vals_.size() - 1); }

  Eigen::MatrixXd eval(double t) const {
    const int n = nodes();
    if (t <= 0.0) return vals_.front();
    if (t >= horizon() - 1e-15) return vals_.back();
    const int i = std::min(static_cast<int>(t / h_), n - 2);
    const double s = (t - h_ * i) / h_;
    const Eigen::MatrixXd m0 = slope(i);
    const Eigen::MatrixXd m1 = slope(i + 1);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * vals_[i] + (s3 - 2 * s2 + s) * m0 +
           (-2 * s3 + 3 * s2) * vals_[i + 1] + (s3 - s2) * m1;
  }

 private:
  Eigen::MatrixXd slope(int i) const {
    const int n = nodes();
    if (i == 0) return vals_[1] - vals_[0];
    if (i == n - 1) return vals_[n - 1] - vals_[n - 2];
    return 0.5 * (vals_[i + 1] - vals_[i - 1]);
  }

  std::vector<Eigen::MatrixXd> vals_;
  double h_ = 0.0;
};

// Fixed orthogonal matrix with last column 1/sqrt(d), built from a single
// Householder reflection mapping e_d to 1/sqrt(d) (deterministic; the
// remaining columns are whatever the reflection produces).
inline Eigen::MatrixXd build_Q(int d) {
  if (d < 2) throw std::invalid_argument("build_Q: need d >= 2");
  Eigen::VectorXd w = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v[d - 1] = 1.0;
  v -= w;
  const double vv = v.squaredNorm();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(d, d) - (2.0 / vv) * (v * v.transpose());
  return Q;
}

// All deterministic coefficients of the limit diffusion on a shared uniform
// time grid. Immutable after assembly.
struct DiffusionCoeffs {
  Eigen::MatrixXd Q;     // d x d, last column 1/sqrt(d)
  MatrixGrid B;          // d x l_eff, eta(t, u) = B(t) u in reduced coordinates
  MatrixGrid beta;       // d x d
  MatrixGrid a;          // d x d PSD, a = sum Gamma e_nu e_nu'
  MatrixGrid alpha;      // (d-1) x (d-1), upper-left block of Q' a Q
  MatrixGrid alpha_sqrt; // symmetric PSD square root of alpha
  MatrixGrid sigma;      // d x d, sigma sigma' = a
};

inline Eigen::MatrixXd symmetric_sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  // clamp -1e-14 rounding before sqrt
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline DiffusionCoeffs assemble_coeffs(const ModelSpec& spec, const FluidPath& fluid) {
  const int d = spec.dim;
  const int ell_eff = spec.control_dim;
  const auto flat = enumerate_transitions(spec);

  // reduced-coordinate index of each flat transition (via control_embed of
  // unit vectors); -1 when no coordinate reaches it
  std::vector<int> coord_of(flat.size(), -1);
  for (int c = 0; c < ell_eff; ++c) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(ell_eff);
    unit[c] = 1.0;
    const Eigen::VectorXd full = spec.control_embed(unit);
    for (std::size_t i = 0; i < flat.size(); ++i)
      if (full[static_cast<int>(i)] != 0.0) coord_of[i] = c;
  }

  const Eigen::MatrixXd Q = build_Q(d);
  const int n = fluid.nodes();
  std::vector<Eigen::MatrixXd> Bg(n), betag(n), ag(n), alphag(n), asqg(n), sigmag(n);

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& mu = fluid.node(i);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(d, ell_eff);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t f = 0; f < flat.size(); ++f) {
      const auto& tr = flat[f];
      const Eigen::VectorXd e = tr.nu->net.cast<double>();
      const int c = coord_of[f];
      if (c >= 0) {
        Eigen::VectorXd unit = Eigen::VectorXd::Zero(ell_eff);
        unit[c] = 1.0;
        const double scale = spec.control_embed(unit)[static_cast<int>(f)];
        B.col(c) += scale * spec.h1(tr.type, tr.jump, mu) * e;
      }
      beta += e * spec.h2(tr.type, tr.jump, mu).transpose();
      a += spec.base_rate(mu, tr.type, tr.jump) * (e * e.transpose());
    }
    const Eigen::MatrixXd qaq = Q.transpose() * a * Q;
    const double zero_block = std::max(qaq.row(d - 1).cwiseAbs().maxCoeff(),
                                       qaq.col(d - 1).cwiseAbs().maxCoeff());
    if (zero_block > 1e-8)
      throw ModelError("assemble_coeffs: Q'aQ zero-block residual " +
                       std::to_string(zero_block) + " (some e_nu has nonzero sum?)");
    const Eigen::MatrixXd alpha = qaq.topLeftCorner(d - 1, d - 1);
    const Eigen::MatrixXd asq = symmetric_sqrt_psd(alpha);
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(d, d);
    padded.topLeftCorner(d - 1, d - 1) = asq;
    Bg[i] = B;
    betag[i] = beta;
    ag[i] = a;
    alphag[i] = alpha;
    asqg[i] = asq;
    sigmag[i] = Q * padded * Q.transpose();
  }

  DiffusionCoeffs out;
  out.Q = Q;
  const double h = fluid.step();
  out.B = MatrixGrid(std::move(Bg), h);
  out.beta = MatrixGrid(std::move(betag), h);
  out.a = MatrixGrid(std::move(ag), h);
  out.alpha = MatrixGrid(std::move(alphag), h);
  out.alpha_sqrt = MatrixGrid(std::move(asqg), h);
  out.sigma = MatrixGrid(std::move(sigmag), h);
  return out;
}

// Mean and covariance of the uncontrolled limit diffusion:
// m' = beta m, S' = beta S + S beta' + a.
struct GaussMarkovMoments {
  MatrixGrid mean;  // d x 1
  MatrixGrid cov;   // d x d
};

inline GaussMarkovMoments solve_moments(const DiffusionCoeffs& coeffs,
                                        const Eigen::VectorXd& v0, double T) {
  if (std::abs(v0.sum()) > 1e-8)
    throw std::invalid_argument("solve_moments: v0 must satisfy v0 . 1 = 0");
  const double h = coeffs.beta.step();
  const int steps = static_cast<int>(std::round(T / h));
  const int d = static_cast<int>(v0.size());

  std::vector<Eigen::MatrixXd> mg, Sg;
  mg.reserve(steps + 1);
  Sg.reserve(steps + 1);
  Eigen::MatrixXd m = v0;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);

  auto rhs = [&](double t, const Eigen::MatrixXd& mm, const Eigen::MatrixXd& SS,
                 Eigen::MatrixXd& dm, Eigen::MatrixXd& dS) {
    const Eigen::MatrixXd beta = coeffs.beta.eval(t);
    dm = beta * mm;
    dS = beta * SS + SS * beta.transpose() + coeffs.a.eval(t);
  };

  Eigen::MatrixXd km1, kS1, km2, kS2, km3, kS3, km4, kS4;
  for (int i = 0; i <= steps; ++i) {
    mg.push_back(m);
    Sg.push_back(S);
    if (i == steps) break;
    const double t = h * i;
    rhs(t, m, S, km1, kS1);
    rhs(t + 0.5 * h, m + 0.5 * h * km1, S + 0.5 * h * kS1, km2, kS2);
    rhs(t + 0.5 * h, m + 0.5 * h * km2, S + 0.5 * h * kS2, km3, kS3);
    rhs(t + h, m + h * km3, S + h * kS3, km4, kS4);
    m += (h / 6.0) * (km1 + 2 * km2 + 2 * km3 + km4);
    S += (h / 6.0) * (kS1 + 2 * kS2 + 2 * kS3 + kS4);
    S = 0.5 * (S + S.transpose());
  }
  GaussMarkovMoments out;
  out.mean = MatrixGrid(std::move(mg), h);
  out.cov = MatrixGrid(std::move(Sg), h);
  return out;
}

}  // namespace mfctrl
