#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "doctest.h"

#include "ailfm/arch.hpp"

using namespace ailfm::arch;

namespace {

// Brute force over explicit coordinates, no shared helpers.
double brute_amd(int nx, int ny, int nz, int x, int y, int z) {
  double total = 0.0;
  for (int a = 0; a < nx; ++a)
    for (int b = 0; b < ny; ++b)
      for (int c = 0; c < nz; ++c) total += std::abs(a - x) + std::abs(b - y) + std::abs(c - z);
  return total / (nx * ny * nz);
}

}  // namespace

TEST_SUITE("arch") {

TEST_CASE("ids run x-fastest") {
  const ChipTopology t(4, 4, 4, 1.0, 128);
  CHECK(t.core_count() == 64);
  CHECK(t.id({1, 2, 3}) == 1 + 4 * 2 + 16 * 3);
  for (CoreId i = 0; i < t.core_count(); ++i) CHECK(t.id(t.coord(i)) == i);
  CHECK_THROWS(t.coord(64));
}

TEST_CASE("AMD matches brute force on several grids") {
  for (auto [nx, ny, nz] : {std::array{4, 4, 4}, std::array{8, 8, 1}, std::array{3, 5, 2}, std::array{1, 1, 1}}) {
    const auto t = build_topology(nx, ny, nz, 1.0, 16);
    for (CoreId i = 0; i < t.core_count(); ++i) {
      const auto c = t.coord(i);
      CHECK(amd(t, i) == doctest::Approx(brute_amd(nx, ny, nz, c.x, c.y, c.z)).epsilon(1e-15));
    }
  }
}

TEST_CASE("4x4x4 spans exactly [3.0, 4.5]; corners are the maxima") {
  const auto t = build_topology(4, 4, 4, 1.0, 128);
  const auto& a = t.amd_table();
  CHECK(*std::min_element(a.begin(), a.end()) == 3.0);
  CHECK(*std::max_element(a.begin(), a.end()) == 4.5);
  int at_max = 0, at_min = 0;
  for (CoreId i = 0; i < t.core_count(); ++i) {
    const auto c = t.coord(i);
    const bool corner = (c.x == 0 || c.x == 3) && (c.y == 0 || c.y == 3) && (c.z == 0 || c.z == 3);
    const bool inner = c.x > 0 && c.x < 3 && c.y > 0 && c.y < 3 && c.z > 0 && c.z < 3;
    if (a[i] == 4.5) {
      ++at_max;
      CHECK(corner);
    }
    if (a[i] == 3.0) {
      ++at_min;
      CHECK(inner);
    }
  }
  CHECK(at_max == 8);
  CHECK(at_min == 8);
}

TEST_CASE("AMD is invariant under the cube's symmetries") {
  const auto t = build_topology(4, 4, 4, 1.0, 128);
  const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (CoreId i = 0; i < t.core_count(); ++i) {
    const auto c = t.coord(i);
    const std::array<int, 3> v{c.x, c.y, c.z};
    for (const auto& p : perms) {
      for (int flips = 0; flips < 8; ++flips) {
        std::array<int, 3> w{v[p[0]], v[p[1]], v[p[2]]};
        for (int k = 0; k < 3; ++k)
          if (flips & (1 << k)) w[k] = 3 - w[k];
        CHECK(t.amd(t.id({w[0], w[1], w[2]})) == t.amd(i));
      }
    }
  }
}

TEST_CASE("3D stacking lowers the mean AMD at equal core count") {
  const auto cube = build_topology(4, 4, 4, 1.0, 128);
  const auto flat = build_topology(8, 8, 1, 1.0, 128);
  double cube_sum = 0.0, flat_sum = 0.0;
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 4; ++z) cube_sum += brute_amd(4, 4, 4, x, y, z);
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) flat_sum += brute_amd(8, 8, 1, x, y, 0);
  CHECK(mean_amd(cube) == doctest::Approx(cube_sum / 64));
  CHECK(mean_amd(flat) == doctest::Approx(flat_sum / 64));
  CHECK(mean_amd(cube) < mean_amd(flat));
}

TEST_CASE("neighbours and hops") {
  const auto t = build_topology(4, 4, 4, 1.0, 128);
  CHECK(t.neighbors(t.id({0, 0, 0})).size() == 3);
  CHECK(t.neighbors(t.id({1, 1, 1})).size() == 6);
  CHECK(manhattan_hops(t, t.id({0, 0, 0}), t.id({3, 3, 3})) == 9);
  for (CoreId n : t.neighbors(t.id({2, 1, 3}))) CHECK(t.hops(n, t.id({2, 1, 3})) == 1);
}

TEST_CASE("LLC latency proxy") {
  const auto t = build_topology(4, 4, 4, 1.0, 128);
  CHECK(avg_llc_latency(t, t.id({1, 1, 1}), 8.0, 2.0) == doctest::Approx(14.0));
  CHECK(avg_llc_latency(t, t.id({0, 0, 0}), 8.0, 2.0) == doctest::Approx(17.0));
  for (CoreId i = 0; i < t.core_count(); ++i) CHECK(avg_llc_latency(t, i, 8.0, 0.0) == 8.0);
}

}
