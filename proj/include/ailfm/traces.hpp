#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ailfm/sim.hpp"

namespace ailfm::sim {

/// Operating-point sweep used to build the Oracle's training data.
struct TraceConfig {
  std::vector<std::string> models{"vit-base", "bert-base", "llama3.2-1b"};
  std::vector<double> amd_levels{3.0, 3.5, 4.0, 4.5};
  std::vector<double> budgets_w = linspace(1.0, 5.5, 10);
  double t_th = 70.0;
  int seq_len = 256;
  int slices = 200;
  int median_slice = 100;
  /// Background heater cores (lowest ids other than the pinned core).
  int heater_cores = 0;
  double heater_w = 1.2;
  double amd_tolerance = 0.25;

  static std::vector<double> linspace(double lo, double hi, int count);
};

struct OperatingPoint {
  std::string model;
  KernelType kernel = KernelType::Embedding;
  double amd_level = 0.0;
  CoreId core = 0;
  double amd = 0.0;
  double budget_w = 0.0;
};

struct TraceRow {
  std::string model;
  KernelType kernel = KernelType::Embedding;
  double amd = 0.0;
  double budget_w = 0.0;
  int slice = 0;
  double ips = 0.0;
  double mpki = 0.0;
  double t_peak_c = 0.0;
};

struct TraceRun {
  OperatingPoint op;
  std::vector<TraceRow> slices;
  /// Temperatures at the start of the median slice; empty when loaded from CSV.
  thermal::Vec median_temp;
};

struct TraceDataset {
  std::vector<TraceRun> runs;

  std::size_t row_count() const;
  void write_csv(const std::string& path) const;
  static TraceDataset read_csv(const std::string& path);
};

/// Nearest-AMD core (lowest id on ties); ConfigError beyond `tolerance`.
CoreId core_for_amd(const arch::ChipTopology& topo, double level, double tolerance);

std::vector<OperatingPoint> operating_points(const Platform& platform, const TraceConfig& cfg,
                                             const std::string& model, KernelType kernel);

TraceRun run_trace(const Platform& platform, const TraceConfig& cfg, const OperatingPoint& op);

/// Every model x kernel x operating point, sorted by (model, kernel, amd, budget).
TraceDataset collect_traces(const Platform& platform, const TraceConfig& cfg);

struct LabeledSample {
  KernelType kernel = KernelType::Embedding;
  std::string model;
  StateVec x_src{};
  StateVec x_dst{};
  double utility = 0.0;
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;

  std::vector<LabeledSample> for_kernel(KernelType k) const;
  void write_csv(const std::string& path) const;
  static LabeledDataset read_csv(const std::string& path);
};

/// Relative instruction gain over `horizon` epochs of moving the pinned
/// kernel from `src` (state `src_temp`) to `dst`, against staying. Every
/// move except to the identical operating point pays the cold start.
double label_utility(const Platform& platform, const TraceConfig& cfg, const OperatingPoint& src,
                     const thermal::Vec& src_temp, const OperatingPoint& dst, int horizon,
                     std::uint64_t seed);

/// Pairs each operating point's median slice with every other point of the
/// same model and kernel and labels the pair by paired rollout.
LabeledDataset build_training_set(const Platform& platform, const TraceConfig& cfg,
                                  const TraceDataset& traces, int horizon, std::uint64_t seed);

}  // namespace ailfm::sim
