#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ailfm/oracle.hpp"
#include "ailfm/policy.hpp"
#include "ailfm/sim.hpp"
#include "ailfm/traces.hpp"

namespace ailfm::harness {

inline constexpr int kSchemaVersion = 1;

struct WorkloadSpec {
  std::string model = "vit-base";
  int seq_len = 256;
  int blocks = 0;  // 0 = the model's configured block count
};

struct EvaluationSpec {
  std::vector<double> t_th{75.0, 85.0};
  std::vector<int> seq_lens{128, 256, 512, 1024};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> schedulers{"ailfm", "dlfm", "coldest", "stay"};
  std::string reference = "ailfm";
  /// Instructions are also totalled over this many leading epochs.
  int window_epochs = 150;
};

struct OutputPaths {
  std::string traces = "traces.csv";
  std::string dataset = "dataset.csv";
  std::string oracle = "oracle.model";
  std::string policy = "policy.model";
  std::string dlfm = "dlfm.model";
  std::string report_json = "report.json";
  std::string report_csv = "report.csv";
};

struct ExperimentConfig {
  sim::SimParams sim;
  std::string profile_csv;  // optional override of the built-in anchors
  sim::TraceConfig traces;
  int label_horizon = 20;
  oracle::FitOptions oracle;
  std::uint64_t oracle_seed = 7;
  policy::LoopConfig policy;
  double dropout = 0.1;
  double coldest_margin_c = 2.0;
  int pipelines = 8;
  int max_epochs = 2000;
  std::vector<WorkloadSpec> workloads{WorkloadSpec{}};
  double train_t_th = 75.0;
  std::uint64_t train_seed_base = 1000;
  EvaluationSpec evaluation;
  OutputPaths outputs;
};

/// Parses a config JSON document; missing keys keep their defaults, unknown
/// keys and invalid values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Schedulers

using PipelineDecider =
    std::function<sim::Decision(const sim::SimState&, std::size_t, std::span<const sim::CoreId>)>;

/// Migrate to the coldest idle 6-neighbour once the core reaches T_th - margin.
sim::Decision coldest_neighbor_decision(const sim::SimState& state, std::size_t pipeline,
                                        std::span<const sim::CoreId> assignment, double margin_c);

struct Artifacts {
  std::optional<oracle::MoGpr> mogpr;
  std::optional<policy::PolicyNet> ailfm;
  std::optional<policy::PolicyNet> dlfm;
};

/// Names: stay, coldest, oracle, ailfm, dlfm. Missing artifacts raise FitError.
PipelineDecider make_scheduler(const std::string& name, const ExperimentConfig& cfg, const Artifacts& art);

// ---------------------------------------------------------------------------
// Pipeline stages

std::shared_ptr<const sim::Platform> make_platform(const ExperimentConfig& cfg);
sim::Workload make_workload(const ExperimentConfig& cfg, const sim::Platform& plat, const WorkloadSpec& w);

/// Training episodes cycle through the configured workloads.
policy::EpisodeFactory training_episodes(const ExperimentConfig& cfg,
                                         std::shared_ptr<const sim::Platform> plat);

sim::EpisodeTrace run_baseline_coldest(const ExperimentConfig& cfg, std::uint64_t seed);

struct DlfmRun {
  policy::LoopResult training;
  sim::EpisodeTrace trace;
};
DlfmRun run_baseline_dlfm(const ExperimentConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string scheduler;
  std::string workload;
  double t_th = 0.0;
  int seq_len = 0;
  std::uint64_t seed = 0;
  double exec_time_s = 0.0;
  double normalized_exec_time = 0.0;
  double t_peak_max = 0.0;
  double t_peak_mean = 0.0;
  double t_peak_q1 = 0.0;
  double t_peak_median = 0.0;
  double t_peak_q3 = 0.0;
  double violation_pct = 0.0;
  double queries_per_epoch = 0.0;
  double o_mig_s = 0.0;
  double o_dvfs_s = 0.0;
  double decision_latency_us = 0.0;
  double window_instructions = 0.0;
  double total_instructions = 0.0;
  int epochs = 0;
  int migrations = 0;
  int safe_overrides = 0;
  bool truncated = false;
};

/// One episode with wall-clock timing around every decide call.
ReportRow run_scheduled_episode(const ExperimentConfig& cfg, std::shared_ptr<const sim::Platform> plat,
                                const std::string& scheduler, const PipelineDecider& decide,
                                const WorkloadSpec& workload, double t_th, std::uint64_t seed,
                                sim::EpisodeTrace* trace_out = nullptr);

/// Per-epoch CSV (one row per active pipeline) plus a summary JSON.
void write_episode_trace(const sim::EpisodeTrace& trace, const std::string& csv_path,
                         const std::string& summary_path);

/// Full sweep: schedulers x workloads x T_th x L x seeds, normalized to the
/// reference scheduler's row of the same cell.
/// With `trace_dir`, every episode's trace is written there as well.
std::vector<ReportRow> evaluate(const ExperimentConfig& cfg, const Artifacts& art,
                                const std::string& trace_dir = "");

void normalize(std::vector<ReportRow>& rows, const std::string& reference);
void write_report_json(const std::vector<ReportRow>& rows, const ExperimentConfig& cfg,
                       const std::string& path);
void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path);
std::vector<ReportRow> read_report_json(const std::string& path);

/// Exit codes: 0 ok, 2 config error, 3 calibration failure, 4 fit/training failure.
int cli(int argc, const char* const* argv);

}  // namespace ailfm::harness
