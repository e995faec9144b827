#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mfctrl/ctmc.hpp"
#include "mfctrl/fluid.hpp"
#include "mfctrl/model.hpp"
#include "mfctrl/rng.hpp"

namespace mfctrl {

struct ConditionCheck {
  bool pass = false;
  double stat = 0.0;
  std::string witness;
};

struct ConditionReport {
  ConditionCheck rate_growth;    // sqrt(N)|Gamma_N/N - Gamma| / (1 + |y|) stays bounded in N
  ConditionCheck drift_residual; // |sqrt(N)(Gamma_N/N - Gamma) - h1 u - h2.y| vanishes
  ConditionCheck nondegeneracy;  // span{e_nu} = V_{d-1} and rates bounded below on the path
  double lipschitz_estimate = 0.0;  // finite-difference spot check of Gamma
  bool all_pass() const {
    return rate_growth.pass && drift_residual.pass && nondegeneracy.pass;
  }
};

// Finite-sample checks of the structural conditions on the model: these are
// sampled evidence on a lattice of (N, y, u), not proofs.
inline ConditionReport validate_conditions(const ModelSpec& spec, const FluidPath& fluid,
                                           std::uint64_t seed = 12345) {
  ConditionReport rep;
  const auto flat = enumerate_transitions(spec);
  const int d = spec.dim;
  RngStream rng(seed, 0);

  const std::vector<int> n_lattice{64, 256, 1024, 4096};
  const int n_time_samples = 9;
  const int n_perturb = 8;

  // control corners plus zero
  std::vector<Eigen::VectorXd> controls;
  controls.push_back(Eigen::VectorXd::Zero(spec.control_dim));
  for (int mask = 0; mask < (1 << spec.control_dim); ++mask) {
    Eigen::VectorXd u(spec.control_dim);
    for (int c = 0; c < spec.control_dim; ++c)
      u[c] = (mask >> c) & 1 ? spec.control_box[c].hi : spec.control_box[c].lo;
    controls.push_back(u);
  }

  std::vector<double> growth_per_n(n_lattice.size(), 0.0);
  std::vector<double> resid_per_n(n_lattice.size(), 0.0);
  std::string growth_wit, resid_wit;

  for (std::size_t ni = 0; ni < n_lattice.size(); ++ni) {
    const int N = n_lattice[ni];
    const double sn = std::sqrt(static_cast<double>(N));
    for (int ts = 0; ts < n_time_samples; ++ts) {
      const double t = fluid.horizon() * ts / (n_time_samples - 1);
      const Eigen::VectorXd xi = fluid.eval(t);
      for (int pp = 0; pp < n_perturb; ++pp) {
        Eigen::VectorXi counts = lattice_point(xi, N);
        // a few random single-particle moves away from the fluid point
        for (int mv = 0; mv < pp; ++mv) {
          const int from = static_cast<int>(rng.uniform() * d);
          const int to = static_cast<int>(rng.uniform() * d);
          if (counts[from] > 0 && from != to) {
            counts[from] -= 1;
            counts[to] += 1;
          }
        }
        const Eigen::VectorXd r = counts.cast<double>() / static_cast<double>(N);
        const Eigen::VectorXd y = sn * (r - xi);
        for (const auto& u : controls) {
          const Eigen::VectorXd u_full = spec.control_embed(u);
          const Eigen::VectorXd u_scaled = u_full / sn;
          for (std::size_t f = 0; f < flat.size(); ++f) {
            const auto& tr = flat[f];
            const double gn =
                std::max(0.0, spec.prelimit_rate(N, r, u_scaled, tr.type, tr.jump));
            const double g = spec.base_rate(xi, tr.type, tr.jump);
            const double diff = sn * (gn / N - g);
            const double growth = std::abs(diff) / (1.0 + y.lpNorm<1>());
            if (growth > growth_per_n[ni]) {
              growth_per_n[ni] = growth;
              if (ni + 1 == n_lattice.size()) {
                std::ostringstream os;
                os << "N=" << N << " t=" << t << " transition=" << f;
                growth_wit = os.str();
              }
            }
            const double H = spec.h1(tr.type, tr.jump, xi) * u_full[static_cast<int>(f)] +
                             spec.h2(tr.type, tr.jump, xi).dot(y);
            const double resid = std::abs(diff - H);
            if (resid > resid_per_n[ni]) {
              resid_per_n[ni] = resid;
              if (ni + 1 == n_lattice.size()) {
                std::ostringstream os;
                os << "N=" << N << " t=" << t << " transition=" << f;
                resid_wit = os.str();
              }
            }
          }
        }
      }
    }
  }

  rep.rate_growth.stat = growth_per_n.back();
  // bounded in N: the statistic must not grow from the smallest to the
  // largest lattice N
  rep.rate_growth.pass = growth_per_n.back() <= 2.0 * growth_per_n.front() + 1e-9;
  rep.rate_growth.witness = rep.rate_growth.pass ? "" : growth_wit;

  rep.drift_residual.stat = resid_per_n.back();
  rep.drift_residual.pass =
      resid_per_n.back() <= 1e-8 || resid_per_n.back() <= 0.6 * resid_per_n.front();
  rep.drift_residual.witness = rep.drift_residual.pass ? "" : resid_wit;

  // Condition on the nondegenerate transition set
  {
    const int m = static_cast<int>(spec.nondegenerate_set.size());
    ConditionCheck& c = rep.nondegeneracy;
    if (m == 0) {
      c.pass = false;
      c.witness = "nondegenerate set is empty (rank 0 != d-1)";
    } else {
      Eigen::MatrixXd E(d, m);
      for (int i = 0; i < m; ++i) {
        const auto& ref = spec.nondegenerate_set[i];
        E.col(i) = spec.types[ref.type].jumps[ref.jump].net.cast<double>();
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(E);
      qr.setThreshold(1e-10);
      const int rank = static_cast<int>(qr.rank());
      double kappa = std::numeric_limits<double>::infinity();
      double t_min = 0.0;
      int nu_min = -1;
      for (int node = 0; node < fluid.nodes(); ++node) {
        const Eigen::VectorXd& mu = fluid.node(node);
        for (int i = 0; i < m; ++i) {
          const auto& ref = spec.nondegenerate_set[i];
          const double g = spec.base_rate(mu, ref.type, ref.jump);
          if (g < kappa) {
            kappa = g;
            t_min = fluid.step() * node;
            nu_min = i;
          }
        }
      }
      c.stat = kappa;
      c.pass = rank == d - 1 && kappa > 0.0;
      if (!c.pass) {
        std::ostringstream os;
        if (rank != d - 1)
          os << "rank " << rank << " != d-1 = " << d - 1;
        else
          os << "kappa(T) = " << kappa << " attained at t=" << t_min << " nondeg-index "
             << nu_min;
        c.witness = os.str();
      }
    }
  }

  // Lipschitz spot check of the limit rates (informational)
  {
    double worst = 0.0;
    for (int s = 0; s < 64; ++s) {
      Eigen::VectorXd r1(d), r2(d);
      for (int i = 0; i < d; ++i) {
        r1[i] = rng.uniform();
        r2[i] = rng.uniform();
      }
      r1 /= r1.sum();
      r2 = r1 + 1e-4 * (r2 / r2.sum() - r1);
      r2 = r2.cwiseMax(0.0);
      r2 /= r2.sum();
      const double dist = (r1 - r2).norm();
      if (dist < 1e-12) continue;
      for (std::size_t f = 0; f < flat.size(); ++f) {
        const auto& tr = flat[f];
        const double slope =
            std::abs(spec.base_rate(r1, tr.type, tr.jump) - spec.base_rate(r2, tr.type, tr.jump)) /
            dist;
        worst = std::max(worst, slope);
      }
    }
    rep.lipschitz_estimate = worst;
  }
  return rep;
}

}  // namespace mfctrl
