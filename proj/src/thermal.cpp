#include "ailfm/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ailfm/errors.hpp"

namespace ailfm::thermal {

ThermalNetwork::ThermalNetwork(Mat g, Vec c, ThermalParams params)
    : g_(std::move(g)), c_(std::move(c)), params_(params), g_llt_(g_) {
  if (g_llt_.info() != Eigen::Success) {
    throw std::logic_error("conductance matrix is not positive definite");
  }
}

Vec ThermalNetwork::steady_rise(const Vec& power) const { return g_llt_.solve(power); }

ThermalNetwork build_rc_network(const arch::ChipTopology& topo, const ThermalParams& p) {
  if (!(p.g_lat > 0.0) || !(p.g_vert > 0.0) || !(p.g_sink > 0.0) || !(p.cap > 0.0)) {
    throw ConfigError("thermal conductances and capacitance must be positive");
  }
  const auto n = static_cast<Eigen::Index>(topo.core_count());
  Mat g = Mat::Zero(n, n);
  for (arch::CoreId i = 0; i < topo.core_count(); ++i) {
    const auto ci = topo.coord(i);
    for (arch::CoreId j : topo.neighbors(i)) {
      if (j < i) continue;
      const double gij = topo.coord(j).z == ci.z ? p.g_lat : p.g_vert;
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      g(a, b) -= gij;
      g(b, a) -= gij;
      g(a, a) += gij;
      g(b, b) += gij;
    }
    if (topo.is_top_layer(i)) g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += p.g_sink;
  }
  return ThermalNetwork(std::move(g), Vec::Constant(n, p.cap), p);
}

namespace {
void check_size(const ThermalNetwork& net, const Vec& v, const char* what) {
  if (static_cast<std::size_t>(v.size()) != net.size()) {
    throw std::invalid_argument(std::string(what) + " length does not match node count");
  }
}
}  // namespace

Vec steady_state(const ThermalNetwork& net, const Vec& power) {
  check_size(net, power, "power");
  if ((power.array() < 0.0).any()) throw std::invalid_argument("power must be non-negative");
  return net.steady_rise(power).array() + net.ambient();
}

Vec transient_step(const ThermalNetwork& net, const Vec& temp, const Vec& power, double dt) {
  return TransientSolver(net, dt).step(temp, power);
}

TransientSolver::TransientSolver(const ThermalNetwork& net, double dt)
    : dt_(dt), t_amb_(net.ambient()), c_over_dt_(net.capacitance() / dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  Mat a = net.conductance();
  a.diagonal() += c_over_dt_;
  llt_.compute(a);
  if (llt_.info() != Eigen::Success) throw std::logic_error("transient operator not SPD");
  response_ = llt_.solve(Mat::Identity(a.rows(), a.cols()));
}

Vec TransientSolver::step(const Vec& temp, const Vec& power) const {
  if (temp.size() != c_over_dt_.size() || power.size() != c_over_dt_.size()) {
    throw std::invalid_argument("state length does not match node count");
  }
  Vec rhs = c_over_dt_.cwiseProduct((temp.array() - t_amb_).matrix()) + power;
  return llt_.solve(rhs).array() + t_amb_;
}

Vec TransientSolver::free_response(const Vec& temp) const {
  Vec rhs = c_over_dt_.cwiseProduct((temp.array() - t_amb_).matrix());
  return llt_.solve(rhs).array() + t_amb_;
}

double peak_temperature(std::span<const double> temps) {
  if (temps.empty()) throw std::invalid_argument("peak of empty temperature vector");
  return *std::max_element(temps.begin(), temps.end());
}

double peak_temperature(const Vec& temps) {
  return peak_temperature(std::span<const double>(temps.data(), static_cast<std::size_t>(temps.size())));
}

ThermalParams calibrate_sink(const arch::ChipTopology& topo, ThermalParams params,
                             double per_core_w, double target_c, double tol_c) {
  if (!(target_c > params.t_amb)) throw CalibrationError("target peak must exceed ambient");
  const Vec p = Vec::Constant(static_cast<Eigen::Index>(topo.core_count()), per_core_w);
  auto peak_for = [&](double g_sink) {
    ThermalParams q = params;
    q.g_sink = g_sink;
    return peak_temperature(steady_state(build_rc_network(topo, q), p));
  };
  // Peak falls monotonically as the sink leg strengthens.
  double lo = 1e-6, hi = 1e3;
  if (peak_for(hi) > target_c || peak_for(lo) < target_c) {
    throw CalibrationError("target peak unreachable within g_sink bracket");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double pk = peak_for(mid);
    if (std::abs(pk - target_c) <= tol_c * 0.01) {
      params.g_sink = mid;
      return params;
    }
    (pk > target_c ? lo : hi) = mid;
  }
  params.g_sink = std::sqrt(lo * hi);
  if (std::abs(peak_for(params.g_sink) - target_c) > tol_c) {
    throw CalibrationError("g_sink calibration did not converge");
  }
  return params;
}

}  // namespace ailfm::thermal
