#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "ailfm/arch.hpp"
#include "ailfm/thermal.hpp"

namespace ailfm::power {

struct VfLevel {
  double freq_ghz = 0.0;
  double voltage = 0.0;
};

/// V/f operating points, strictly ascending in both frequency and voltage.
class VfTable {
 public:
  VfTable() = default;
  explicit VfTable(std::vector<VfLevel> levels);

  static VfTable defaults();

  std::size_t size() const { return levels_.size(); }
  bool empty() const { return levels_.empty(); }
  const VfLevel& operator[](std::size_t i) const { return levels_[i]; }
  const VfLevel& top() const { return levels_.back(); }
  const VfLevel& bottom() const { return levels_.front(); }
  const std::vector<VfLevel>& levels() const { return levels_; }

 private:
  std::vector<VfLevel> levels_;
};

struct PowerParams {
  double c_eff = 0.0;  // F
  double p_leak0 = 0.3;
  double gamma = 0.02;  // 1/K
  double t_ref = 45.0;

  /// c_eff chosen so that `top` at full activity dissipates `dynamic_w`.
  static PowerParams calibrated(const VfLevel& top, double dynamic_w = 4.5);
};

double core_power(const PowerParams& params, const VfLevel& level, double activity, double temp_c);

struct BudgetOptions {
  double s_max = 10.0;
  /// Number of future epochs (at constant power) that must stay below T_th.
  int lookahead = 1;
};

struct PowerBudget {
  std::map<arch::CoreId, double> per_core;  // empty when no core is active
  double uniform_w = 0.0;
  bool emergency = false;
};

/// Largest uniform per-active-core power keeping the next implicit-Euler
/// step at or below `t_th`. `background` (may be empty) is the fixed power
/// of non-active nodes. The one-step map is affine in the uniform power, so
/// the bound is solved exactly per node rather than searched.
PowerBudget compute_power_budget(const thermal::TransientSolver& solver,
                                 std::span<const arch::CoreId> active, const thermal::Vec& t_now,
                                 double t_th, const thermal::Vec& background = {},
                                 const BudgetOptions& opts = {});

PowerBudget compute_power_budget(const thermal::ThermalNetwork& net,
                                 std::span<const arch::CoreId> active, const thermal::Vec& t_now,
                                 double t_th, double dt);

/// Highest level whose power fits the budget; the lowest level otherwise.
std::size_t select_vf_index(const VfTable& table, const PowerParams& params, double budget_w,
                            double activity, double temp_c);

VfLevel select_vf(const VfTable& table, const PowerParams& params, double budget_w,
                  double activity, double temp_c);

}  // namespace ailfm::power
