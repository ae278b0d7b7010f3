#include "ailfm/arch.hpp"

#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ailfm/errors.hpp"

namespace ailfm::arch {

ChipTopology::ChipTopology(int nx, int ny, int nz, double pitch_mm, int memory_banks)
    : nx_(nx), ny_(ny), nz_(nz), pitch_mm_(pitch_mm), banks_(memory_banks) {
  if (nx < 1 || ny < 1 || nz < 1) {
    throw ConfigError("topology dimensions must be >= 1");
  }
  if (!(pitch_mm > 0.0)) throw ConfigError("pitch_mm must be positive");
  if (memory_banks < 0) throw ConfigError("memory bank count must be non-negative");

  const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
  amd_.assign(n, 0.0);
  // Hop sums are separable per axis.
  auto axis_sum = [](int len, int pos) {
    long s = 0;
    for (int j = 0; j < len; ++j) s += std::abs(pos - j);
    return s;
  };
  for (CoreId i = 0; i < n; ++i) {
    const Coord c = coord(i);
    const double total = static_cast<double>(axis_sum(nx, c.x)) * ny * nz +
                         static_cast<double>(axis_sum(ny, c.y)) * nx * nz +
                         static_cast<double>(axis_sum(nz, c.z)) * nx * ny;
    amd_[i] = total / static_cast<double>(n);
  }
}

void ChipTopology::check(CoreId id) const {
  if (id >= amd_.size()) {
    throw std::out_of_range("core id " + std::to_string(id) + " out of range");
  }
}

Coord ChipTopology::coord(CoreId id) const {
  check(id);
  const int i = static_cast<int>(id);
  return {i % nx_, (i / nx_) % ny_, i / (nx_ * ny_)};
}

bool ChipTopology::contains(const Coord& c) const {
  return c.x >= 0 && c.x < nx_ && c.y >= 0 && c.y < ny_ && c.z >= 0 && c.z < nz_;
}

CoreId ChipTopology::id(const Coord& c) const {
  if (!contains(c)) throw std::out_of_range("coordinate outside topology");
  return static_cast<CoreId>(c.x + nx_ * c.y + nx_ * ny_ * c.z);
}

int ChipTopology::hops(CoreId a, CoreId b) const {
  const Coord ca = coord(a);
  const Coord cb = coord(b);
  return std::abs(ca.x - cb.x) + std::abs(ca.y - cb.y) + std::abs(ca.z - cb.z);
}

double ChipTopology::amd(CoreId core) const {
  check(core);
  return amd_[core];
}

std::vector<CoreId> ChipTopology::neighbors(CoreId core) const {
  const Coord c = coord(core);
  static constexpr std::array<std::array<int, 3>, 6> kSteps{
      {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
  std::vector<CoreId> out;
  for (const auto& s : kSteps) {
    const Coord n{c.x + s[0], c.y + s[1], c.z + s[2]};
    if (contains(n)) out.push_back(id(n));
  }
  return out;
}

ChipTopology build_topology(int nx, int ny, int nz, double pitch_mm, int banks) {
  return ChipTopology(nx, ny, nz, pitch_mm, banks);
}

int manhattan_hops(const ChipTopology& topo, CoreId a, CoreId b) { return topo.hops(a, b); }

double amd(const ChipTopology& topo, CoreId core) { return topo.amd(core); }

double avg_llc_latency(const ChipTopology& topo, CoreId core, double base_ns, double hop_ns) {
  if (base_ns < 0.0 || hop_ns < 0.0) {
    throw std::invalid_argument("latency parameters must be non-negative");
  }
  return base_ns + hop_ns * topo.amd(core);
}

double mean_amd(const ChipTopology& topo) {
  const auto& t = topo.amd_table();
  return std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
}

}  // namespace ailfm::arch
