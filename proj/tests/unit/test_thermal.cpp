#include <random>

#include "doctest.h"

#include "ailfm/errors.hpp"
#include "ailfm/thermal.hpp"

using namespace ailfm;
using namespace ailfm::thermal;

namespace {

// Independent dense construction of G from coordinates.
Mat dense_g(const arch::ChipTopology& t, const ThermalParams& p) {
  const auto n = static_cast<Eigen::Index>(t.core_count());
  Mat g = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto a = t.coord(static_cast<arch::CoreId>(i)), b = t.coord(static_cast<arch::CoreId>(j));
      const int d = std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z);
      if (d != 1) continue;
      g(i, j) = a.z == b.z ? -p.g_lat : -p.g_vert;
    }
    g(i, i) = -g.row(i).sum() + (t.coord(static_cast<arch::CoreId>(i)).z == t.nz() - 1 ? p.g_sink : 0.0);
  }
  return g;
}

Vec random_power(std::mt19937_64& rng, Eigen::Index n, double hi = 5.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  Vec p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = u(rng);
  return p;
}

}  // namespace

TEST_SUITE("thermal") {

TEST_CASE("network matches an independent dense construction") {
  const arch::ChipTopology t(4, 4, 4, 1.0, 128);
  const ThermalParams p;
  const auto net = build_rc_network(t, p);
  CHECK((net.conductance() - dense_g(t, p)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((net.conductance() - net.conductance().transpose()).cwiseAbs().maxCoeff() == 0.0);
  int off = 0;
  for (Eigen::Index j = 0; j < 64; ++j) off += j != 0 && net.conductance()(0, j) < 0.0;
  CHECK(off == 3);
  CHECK((net.capacitance().array() == p.cap).all());
}

TEST_CASE("single node") {
  const arch::ChipTopology t(1, 1, 1, 1.0, 1);
  ThermalParams p;
  p.g_sink = 1.0;
  const auto net = build_rc_network(t, p);
  CHECK(net.conductance()(0, 0) == 1.0);
  CHECK(steady_state(net, Vec::Constant(1, 5.0))[0] == doctest::Approx(50.0));
  p.g_sink = 0.0;
  CHECK_THROWS(build_rc_network(t, p));
}

TEST_CASE("steady state: zero power, dense residual, monotonicity") {
  const arch::ChipTopology t(4, 4, 4, 1.0, 128);
  const auto net = build_rc_network(t, {});
  CHECK((steady_state(net, Vec::Zero(64)).array() - 45.0).abs().maxCoeff() < 1e-9);
  std::mt19937_64 rng(11);
  const Mat g = dense_g(t, {});
  for (int k = 0; k < 20; ++k) {
    const Vec p = random_power(rng, 64);
    const Vec dense = g.fullPivLu().solve(p);
    const Vec s = steady_state(net, p);
    CHECK((g * (s.array() - 45.0).matrix() - p).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(((s.array() - 45.0).matrix() - dense).cwiseAbs().maxCoeff() < 1e-9);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Vec p = random_power(rng, 64);
    Vec q = p;
    for (Eigen::Index i = 0; i < 64; ++i) q[i] += u(rng) < 0.5 ? u(rng) : 0.0;
    CHECK(((steady_state(net, q) - steady_state(net, p)).array() >= -1e-12).all());
  }
}

TEST_CASE("implicit Euler: fixed point, large-dt limit, monotone approach") {
  const arch::ChipTopology t(4, 4, 4, 1.0, 128);
  const auto net = build_rc_network(t, {});
  std::mt19937_64 rng(5);
  const Vec p = random_power(rng, 64, 3.0);
  const Vec ss = steady_state(net, p);
  CHECK((transient_step(net, ss, p, 1e-3) - ss).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((transient_step(net, Vec::Constant(64, 45.0), p, 1e6) - ss).cwiseAbs().maxCoeff() < 1e-3);

  // Independent dense evaluation of one step.
  const double dt = 1e-3;
  const Mat a = dense_g(t, {}) + Mat(net.capacitance().asDiagonal()) / dt;
  const Vec t0 = Vec::Constant(64, 50.0);
  const Vec rhs = (net.capacitance().array() / dt * (t0.array() - 45.0)).matrix() + p;
  const Vec expect = (a.fullPivLu().solve(rhs).array() + 45.0).matrix();
  CHECK((transient_step(net, t0, p, dt) - expect).cwiseAbs().maxCoeff() < 1e-9);

  const TransientSolver solver(net, dt);
  CHECK((solver.step(t0, p) - expect).cwiseAbs().maxCoeff() < 1e-9);
  Vec temp = Vec::Constant(64, 45.0);
  double last = peak_temperature(temp);
  for (int k = 0; k < 500; ++k) {
    temp = solver.step(temp, p);
    const double pk = peak_temperature(temp);
    CHECK(pk >= last - 1e-12);
    CHECK(pk <= peak_temperature(ss) + 1e-9);
    last = pk;
  }
}

TEST_CASE("response columns are the per-watt one-step rise") {
  const arch::ChipTopology t(2, 2, 2, 1.0, 8);
  const auto net = build_rc_network(t, {});
  const TransientSolver solver(net, 1e-3);
  const Vec amb = Vec::Constant(8, 45.0);
  for (Eigen::Index j = 0; j < 8; ++j) {
    Vec p = Vec::Zero(8);
    p[j] = 1.0;
    CHECK(((solver.step(amb, p) - amb) - solver.response().col(j)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("peak temperature") {
  CHECK(peak_temperature(Vec::Constant(3, 45.0)) == 45.0);
  const std::vector<double> v{60, 72.5, 71};
  CHECK(peak_temperature(v) == 72.5);
  CHECK_THROWS(peak_temperature(std::span<const double>{}));
}

TEST_CASE("stacking raises the peak at equal uniform power") {
  const ThermalParams p;
  const auto cube = build_rc_network(arch::ChipTopology(4, 4, 4, 1.0, 128), p);
  const auto flat = build_rc_network(arch::ChipTopology(8, 8, 1, 1.0, 128), p);
  const Vec power = Vec::Constant(64, 2.0);
  CHECK(peak_temperature(steady_state(cube, power)) > peak_temperature(steady_state(flat, power)));
}

TEST_CASE("sink calibration hits the target") {
  const arch::ChipTopology t(4, 4, 4, 1.0, 128);
  const auto cal = calibrate_sink(t, {}, 2.0, 80.0);
  const auto net = build_rc_network(t, cal);
  CHECK(peak_temperature(steady_state(net, Vec::Constant(64, 2.0))) == doctest::Approx(80.0).epsilon(0.5 / 80));
  ThermalParams p;
  CHECK_THROWS_AS(calibrate_sink(t, p, 2.0, 40.0), CalibrationError);
}

}
