#include "ailfm/power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ailfm/errors.hpp"

namespace ailfm::power {

VfTable::VfTable(std::vector<VfLevel> levels) : levels_(std::move(levels)) {
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!(levels_[i].freq_ghz > 0.0) || !(levels_[i].voltage > 0.0)) {
      throw ConfigError("V/f levels must have positive frequency and voltage");
    }
    if (i > 0 && (levels_[i].freq_ghz <= levels_[i - 1].freq_ghz ||
                  levels_[i].voltage <= levels_[i - 1].voltage)) {
      throw ConfigError("V/f table must be strictly ascending");
    }
  }
}

VfTable VfTable::defaults() {
  return VfTable({{1.0, 0.7}, {1.5, 0.8}, {2.0, 0.9}, {2.5, 1.0}, {3.0, 1.1}});
}

PowerParams PowerParams::calibrated(const VfLevel& top, double dynamic_w) {
  PowerParams p;
  p.c_eff = dynamic_w / (top.voltage * top.voltage * top.freq_ghz * 1e9);
  return p;
}

double core_power(const PowerParams& p, const VfLevel& level, double activity, double temp_c) {
  if (!(activity >= 0.0 && activity <= 1.0)) {
    throw std::invalid_argument("activity must lie in [0, 1]");
  }
  const double dynamic = p.c_eff * level.voltage * level.voltage * level.freq_ghz * 1e9 * activity;
  const double leakage = p.p_leak0 * std::exp(p.gamma * (temp_c - p.t_ref));
  return dynamic + leakage;
}

PowerBudget compute_power_budget(const thermal::TransientSolver& solver,
                                 std::span<const arch::CoreId> active, const thermal::Vec& t_now,
                                 double t_th, const thermal::Vec& background,
                                 const BudgetOptions& opts) {
  PowerBudget out;
  if (active.empty()) return out;
  if (!(t_th > solver.ambient())) throw std::invalid_argument("T_th must exceed ambient");

  const auto n = static_cast<Eigen::Index>(solver.size());
  thermal::Vec bg = background.size() == 0 ? thermal::Vec::Zero(n) : background;
  thermal::Vec unit = thermal::Vec::Zero(n);
  for (arch::CoreId c : active) {
    const auto j = static_cast<Eigen::Index>(c);
    if (j >= n) throw std::out_of_range("active core id out of range");
    bg[j] = 0.0;
    unit[j] = 1.0;
  }
  // Rise after k steps is affine in s: base_k + s * per_watt_k.
  thermal::Vec base = t_now.array() - solver.ambient();
  thermal::Vec per_watt = thermal::Vec::Zero(n);
  const thermal::Vec amb = thermal::Vec::Constant(n, solver.ambient());
  double s = std::numeric_limits<double>::infinity();
  for (int k = 0; k < std::max(1, opts.lookahead); ++k) {
    base = solver.step(base + amb, bg).array() - solver.ambient();
    per_watt = solver.step(per_watt + amb, unit).array() - solver.ambient();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double headroom = t_th - solver.ambient() - base[i];
      if (per_watt[i] > 0.0) {
        s = std::min(s, headroom / per_watt[i]);
      } else if (headroom < 0.0) {
        s = -1.0;
      }
    }
  }
  if (s < 0.0) {
    out.emergency = true;
    s = 0.0;
  }
  s = std::min(s, opts.s_max);
  out.uniform_w = s;
  for (arch::CoreId c : active) out.per_core[c] = s;
  return out;
}

PowerBudget compute_power_budget(const thermal::ThermalNetwork& net,
                                 std::span<const arch::CoreId> active, const thermal::Vec& t_now,
                                 double t_th, double dt) {
  return compute_power_budget(thermal::TransientSolver(net, dt), active, t_now, t_th);
}

std::size_t select_vf_index(const VfTable& table, const PowerParams& params, double budget_w,
                            double activity, double temp_c) {
  if (table.empty()) throw std::invalid_argument("empty V/f table");
  for (std::size_t i = table.size(); i-- > 0;) {
    if (core_power(params, table[i], activity, temp_c) <= budget_w) return i;
  }
  return 0;
}

VfLevel select_vf(const VfTable& table, const PowerParams& params, double budget_w,
                  double activity, double temp_c) {
  return table[select_vf_index(table, params, budget_w, activity, temp_c)];
}

}  // namespace ailfm::power
