#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace ailfm::arch {

using CoreId = std::size_t;

struct Coord {
  int x = 0;
  int y = 0;
  int z = 0;
  bool operator==(const Coord&) const = default;
};

/// 3D grid of homogeneous cores. Core ids run x-fastest:
/// id = x + nx*y + nx*ny*z. Memory banks are recorded but carry no geometry.
class ChipTopology {
 public:
  ChipTopology(int nx, int ny, int nz, double pitch_mm, int memory_banks);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  double pitch_mm() const { return pitch_mm_; }
  int memory_banks() const { return banks_; }
  std::size_t core_count() const { return amd_.size(); }

  Coord coord(CoreId id) const;
  CoreId id(const Coord& c) const;
  bool contains(const Coord& c) const;

  int hops(CoreId a, CoreId b) const;
  double amd(CoreId core) const;
  const std::vector<double>& amd_table() const { return amd_; }

  /// Face-adjacent cores (up to 6).
  std::vector<CoreId> neighbors(CoreId core) const;

  bool is_top_layer(CoreId core) const { return coord(core).z == nz_ - 1; }

 private:
  void check(CoreId id) const;

  int nx_, ny_, nz_;
  double pitch_mm_;
  int banks_;
  std::vector<double> amd_;
};

ChipTopology build_topology(int nx, int ny, int nz, double pitch_mm, int banks);

int manhattan_hops(const ChipTopology& topo, CoreId a, CoreId b);

double amd(const ChipTopology& topo, CoreId core);

/// Affine S-NUCA latency proxy: base + per-hop cost times AMD.
double avg_llc_latency(const ChipTopology& topo, CoreId core, double base_ns, double hop_ns);

double mean_amd(const ChipTopology& topo);

}  // namespace ailfm::arch
