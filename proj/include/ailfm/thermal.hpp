#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <span>

#include "ailfm/arch.hpp"

namespace ailfm::thermal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ThermalParams {
  double g_lat = 0.3;   // W/K between in-layer neighbours
  double g_vert = 0.6;  // W/K between stacked neighbours
  double g_sink = 2.5;  // W/K from each top-layer node to ambient
  double cap = 0.005;   // J/K per node
  double t_amb = 45.0;  // deg C
};

/// RC network over core nodes. G is a symmetric M-matrix, so the
/// steady-state factorization is computed once at build time.
class ThermalNetwork {
 public:
  ThermalNetwork(Mat g, Vec c, ThermalParams params);

  std::size_t size() const { return static_cast<std::size_t>(c_.size()); }
  const Mat& conductance() const { return g_; }
  const Vec& capacitance() const { return c_; }
  double ambient() const { return params_.t_amb; }
  const ThermalParams& params() const { return params_; }

  /// Rise above ambient for a power vector: G^{-1} P.
  Vec steady_rise(const Vec& power) const;

 private:
  Mat g_;
  Vec c_;
  ThermalParams params_;
  Eigen::LLT<Mat> g_llt_;
};

ThermalNetwork build_rc_network(const arch::ChipTopology& topo, const ThermalParams& params);

Vec steady_state(const ThermalNetwork& net, const Vec& power);

/// Single implicit-Euler step. Refactorizes; use TransientSolver for loops.
Vec transient_step(const ThermalNetwork& net, const Vec& temp, const Vec& power, double dt);

/// Cached implicit-Euler operator (diag(C)/dt + G) for a fixed dt.
/// Also exposes its dense inverse, the one-step power-to-temperature response.
class TransientSolver {
 public:
  TransientSolver(const ThermalNetwork& net, double dt);

  double dt() const { return dt_; }
  double ambient() const { return t_amb_; }
  std::size_t size() const { return static_cast<std::size_t>(c_over_dt_.size()); }

  Vec step(const Vec& temp, const Vec& power) const;

  /// Next-step temperature when every node dissipates nothing.
  Vec free_response(const Vec& temp) const;

  /// Column j holds the next-step rise per watt injected at node j.
  const Mat& response() const { return response_; }
  const Vec& c_over_dt() const { return c_over_dt_; }

 private:
  double dt_;
  double t_amb_;
  Vec c_over_dt_;
  Eigen::LLT<Mat> llt_;
  Mat response_;
};

double peak_temperature(std::span<const double> temps);
double peak_temperature(const Vec& temps);

/// Bisects g_sink until uniform `per_core_w` on every core yields a
/// steady-state peak of `target_c` within `tol_c`.
ThermalParams calibrate_sink(const arch::ChipTopology& topo, ThermalParams params,
                             double per_core_w = 2.0, double target_c = 80.0,
                             double tol_c = 0.5);

}  // namespace ailfm::thermal
