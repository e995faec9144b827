#pragma once

#include <cmath>
#include <memory>

#include "mfctrl/model.hpp"

namespace mfctrl {

// Two-class finite-capacity loss network: N identical servers of capacity C,
// class-k jobs need A_k units, arrive per server at rate lambda_k, are served
// at rate tau_k, and after an Exp(gamma_k) holding time attempt to move to a
// uniformly chosen server (rejected and lost if it lacks room). The
// per-server state is (j, i) = (#class-1 jobs, #class-2 jobs).
struct LossNetParams {
  int capacity = 6;    // C
  int a1 = 1;
  int a2 = 1;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double tau1 = 1.0;
  double tau2 = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double control_halfwidth = 5.0;  // D, arrival-rate control box half width

  void check() const {
    if (capacity < 1 || a1 < 1 || a2 < 1 || capacity < a1 || capacity < a2)
      throw ModelError("lossnet: need C >= max(A1, A2) >= 1");
    if (lambda1 <= 0 || lambda2 <= 0 || tau1 <= 0 || tau2 <= 0 || gamma1 <= 0 || gamma2 <= 0)
      throw ModelError("lossnet: all rates must be > 0");
    if (control_halfwidth < 0) throw ModelError("lossnet: D must be >= 0");
  }
};

// {(j,i): j*A1 + i*A2 <= C} in lexicographic order.
inline std::vector<std::pair<int, int>> build_state_space(int capacity, int a1, int a2) {
  std::vector<std::pair<int, int>> states;
  for (int j = 0; a1 * j <= capacity; ++j)
    for (int i = 0; a1 * j + a2 * i <= capacity; ++i) states.emplace_back(j, i);
  return states;
}

namespace detail {

enum class LossKind { Entry, Leave, SwitchFail, SwitchOk };

struct LossJumpInfo {
  LossKind kind = LossKind::Entry;
  int cls = 0;       // 1 or 2
  int src = 0;       // source state index
  int tgt = -1;      // destination-server state index (SwitchOk only)
  double mult = 1.0; // per-server job count (j or i) for Leave/Switch
};

struct LossNetTables {
  LossNetParams p;
  std::vector<std::pair<int, int>> states;
  std::vector<std::vector<LossJumpInfo>> info;  // per type, per jump
  std::vector<int> flat_offset;                 // per type
  std::vector<int> blocked1, blocked2;          // states without room for class 1/2
  Eigen::VectorXd blocked1_mask, blocked2_mask;
};

}  // namespace detail

inline ModelSpec build_lossnet_model(const LossNetParams& params = {}) {
  params.check();
  auto tab = std::make_shared<detail::LossNetTables>();
  tab->p = params;
  tab->states = build_state_space(params.capacity, params.a1, params.a2);
  const int d = static_cast<int>(tab->states.size());

  auto index_of = [&](int j, int i) -> int {
    for (int s = 0; s < d; ++s)
      if (tab->states[s] == std::make_pair(j, i)) return s;
    return -1;
  };
  auto unit = [&](int s) {
    Eigen::VectorXi v = Eigen::VectorXi::Zero(d);
    v[s] = 1;
    return v;
  };

  tab->blocked1_mask = Eigen::VectorXd::Zero(d);
  tab->blocked2_mask = Eigen::VectorXd::Zero(d);
  for (int s = 0; s < d; ++s) {
    const auto [j, i] = tab->states[s];
    const int used = j * params.a1 + i * params.a2;
    if (used + params.a1 > params.capacity) {
      tab->blocked1.push_back(s);
      tab->blocked1_mask[s] = 1.0;
    }
    if (used + params.a2 > params.capacity) {
      tab->blocked2.push_back(s);
      tab->blocked2_mask[s] = 1.0;
    }
  }

  ModelSpec spec;
  spec.name = "lossnet";
  spec.dim = d;
  using detail::LossJumpInfo;
  using detail::LossKind;

  // Type order: E1, E2, L1, L2, C1, C2. Within C^i the single-server
  // (unsuccessful switch) jumps come first, then the two-server pairs.
  spec.types.resize(6);
  tab->info.resize(6);
  for (int cls = 1; cls <= 2; ++cls) {
    TransitionType& entry = spec.types[cls - 1];
    entry.id = cls - 1;
    entry.max_participants = 1;
    for (int s = 0; s < d; ++s) {
      const auto [j, i] = tab->states[s];
      const int t = cls == 1 ? index_of(j + 1, i) : index_of(j, i + 1);
      if (t < 0) continue;
      entry.jumps.emplace_back(unit(s), unit(t));
      tab->info[cls - 1].push_back({LossKind::Entry, cls, s, -1, 1.0});
    }

    TransitionType& leave = spec.types[1 + cls];
    leave.id = 1 + cls;
    leave.max_participants = 1;
    for (int s = 0; s < d; ++s) {
      const auto [j, i] = tab->states[s];
      const int cnt = cls == 1 ? j : i;
      if (cnt == 0) continue;
      const int t = cls == 1 ? index_of(j - 1, i) : index_of(j, i - 1);
      leave.jumps.emplace_back(unit(s), unit(t));
      tab->info[1 + cls].push_back({LossKind::Leave, cls, s, -1, double(cnt)});
    }

    TransitionType& sw = spec.types[3 + cls];
    sw.id = 3 + cls;
    sw.max_participants = 2;
    for (int s = 0; s < d; ++s) {
      const auto [j, i] = tab->states[s];
      const int cnt = cls == 1 ? j : i;
      if (cnt == 0) continue;
      const int t = cls == 1 ? index_of(j - 1, i) : index_of(j, i - 1);
      sw.jumps.emplace_back(unit(s), unit(t));
      tab->info[3 + cls].push_back({LossKind::SwitchFail, cls, s, -1, double(cnt)});
    }
    for (int s = 0; s < d; ++s) {
      const auto [j, i] = tab->states[s];
      const int cnt = cls == 1 ? j : i;
      if (cnt == 0) continue;
      const int t = cls == 1 ? index_of(j - 1, i) : index_of(j, i - 1);
      for (int s2 = 0; s2 < d; ++s2) {
        const auto [j2, i2] = tab->states[s2];
        const int t2 = cls == 1 ? index_of(j2 + 1, i2) : index_of(j2, i2 + 1);
        if (t2 < 0) continue;
        // a swap that exchanges the two states leaves the empirical measure
        // fixed; drop it (e_nu = 0, contributes nothing to any coefficient)
        if (t == s2 && t2 == s) continue;
        sw.jumps.emplace_back(unit(s) + unit(s2), unit(t) + unit(t2));
        tab->info[3 + cls].push_back({LossKind::SwitchOk, cls, s, s2, double(cnt)});
      }
    }
  }

  tab->flat_offset.resize(6);
  int off = 0;
  for (int k = 0; k < 6; ++k) {
    tab->flat_offset[k] = off;
    off += static_cast<int>(spec.types[k].jumps.size());
  }

  const LossNetParams p = params;
  auto rates = [p](int cls, double lam_shift = 0.0) {
    return cls == 1 ? std::array<double, 3>{p.lambda1 + lam_shift, p.tau1, p.gamma1}
                    : std::array<double, 3>{p.lambda2 + lam_shift, p.tau2, p.gamma2};
  };

  spec.base_rate = [tab, rates](const Eigen::VectorXd& r, int type, int jump) {
    const LossJumpInfo& ji = tab->info[type][jump];
    const auto [lam, tau, gam] = rates(ji.cls);
    switch (ji.kind) {
      case LossKind::Entry:
        return r[ji.src] * lam;
      case LossKind::Leave:
        return ji.mult * r[ji.src] * tau;
      case LossKind::SwitchFail: {
        const auto& mask = ji.cls == 1 ? tab->blocked1_mask : tab->blocked2_mask;
        return ji.mult * r[ji.src] * gam * mask.dot(r);
      }
      case LossKind::SwitchOk:
        return ji.mult * r[ji.src] * gam * r[ji.tgt];
    }
    return 0.0;
  };

  spec.prelimit_rate = [tab, rates](int n, const Eigen::VectorXd& r,
                                    const Eigen::VectorXd& u_full, int type, int jump) {
    const LossJumpInfo& ji = tab->info[type][jump];
    const double dn = static_cast<double>(n);
    const auto [lam, tau, gam] = rates(ji.cls);
    switch (ji.kind) {
      case LossKind::Entry: {
        const double u = u_full[tab->flat_offset[type] + jump];
        return dn * r[ji.src] * (lam + u);
      }
      case LossKind::Leave:
        return ji.mult * dn * r[ji.src] * tau;
      case LossKind::SwitchFail: {
        if (n < 2) return 0.0;
        const auto& mask = ji.cls == 1 ? tab->blocked1_mask : tab->blocked2_mask;
        return ji.mult * dn * r[ji.src] * gam * dn * mask.dot(r) / (dn - 1.0);
      }
      case LossKind::SwitchOk: {
        if (n < 2) return 0.0;
        // a pair jump within one state needs two particles there
        if (ji.tgt == ji.src && dn * r[ji.src] < 1.5) return 0.0;
        return ji.mult * dn * r[ji.src] * gam * dn * r[ji.tgt] / (dn - 1.0);
      }
    }
    return 0.0;
  };

  spec.h1 = [tab](int type, int jump, const Eigen::VectorXd& r) {
    const LossJumpInfo& ji = tab->info[type][jump];
    return ji.kind == LossKind::Entry ? r[ji.src] : 0.0;
  };

  spec.h2 = [tab, rates](int type, int jump, const Eigen::VectorXd& r) {
    const LossJumpInfo& ji = tab->info[type][jump];
    const int d = static_cast<int>(r.size());
    const auto [lam, tau, gam] = rates(ji.cls);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    switch (ji.kind) {
      case LossKind::Entry:
        v[ji.src] = lam;
        break;
      case LossKind::Leave:
        v[ji.src] = ji.mult * tau;
        break;
      case LossKind::SwitchFail: {
        const auto& mask = ji.cls == 1 ? tab->blocked1_mask : tab->blocked2_mask;
        v = ji.mult * gam * (r[ji.src] * mask);
        v[ji.src] += ji.mult * gam * mask.dot(r);
        break;
      }
      case LossKind::SwitchOk:
        v[ji.tgt] += ji.mult * gam * r[ji.src];
        v[ji.src] += ji.mult * gam * r[ji.tgt];
        break;
    }
    return v;
  };

  spec.control_dim = 2;
  spec.control_box = {{-p.control_halfwidth, p.control_halfwidth},
                      {-p.control_halfwidth, p.control_halfwidth}};
  const int n_e1 = static_cast<int>(spec.types[0].jumps.size());
  const int n_e2 = static_cast<int>(spec.types[1].jumps.size());
  const int ell = off;
  spec.control_embed = [n_e1, n_e2, ell](const Eigen::VectorXd& u) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(ell);
    full.head(n_e1).setConstant(u[0]);
    full.segment(n_e1, n_e2).setConstant(u[1]);
    return full;
  };

  // Entry and departure jumps: their limit rates stay bounded below along
  // fluid paths with interior initial condition, and their e_nu span V_{d-1}.
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < static_cast<int>(spec.types[k].jumps.size()); ++j)
      spec.nondegenerate_set.push_back({k, j});

  for (int k = 0; k < 6; ++k) {
    for (int j = 0; j < static_cast<int>(spec.types[k].jumps.size()); ++j) {
      const LossJumpInfo& ji = tab->info[k][j];
      spec.controlled.push_back(ji.kind == LossKind::Entry);
      std::vector<int> deps{ji.src};
      if (ji.kind == LossKind::SwitchOk && ji.tgt != ji.src) deps.push_back(ji.tgt);
      if (ji.kind == LossKind::SwitchFail) {
        const auto& blocked = ji.cls == 1 ? tab->blocked1 : tab->blocked2;
        for (int b : blocked)
          if (b != ji.src) deps.push_back(b);
      }
      spec.rate_deps.push_back(std::move(deps));
    }
  }
  return spec;
}

// The published benchmark configuration: N=10000, T=10, C=6, A1=A2=1, all
// rates 1, 128 trials, cost weights alpha in {0.01, 0.001}, D=5, initial
// condition at the fluid fixed point.
struct Table1Config {
  LossNetParams params;
  int n_particles = 10000;
  double horizon = 10.0;
  int n_trials = 128;
  std::vector<double> alphas{0.01, 0.001};
  std::string x0_policy = "fixed_point";
};

inline Table1Config table1_config() {
  Table1Config cfg;
  cfg.params = LossNetParams{};  // C=6, A1=A2=1, all rates 1, D=5
  return cfg;
}

}  // namespace mfctrl
