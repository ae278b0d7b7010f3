#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ailfm/arch.hpp"
#include "ailfm/perf.hpp"
#include "ailfm/power.hpp"
#include "ailfm/thermal.hpp"

namespace ailfm::sim {

using arch::CoreId;
using perf::KernelType;

/// Everything needed to build a platform. Plain data, filled from config.
struct SimParams {
  int nx = 4, ny = 4, nz = 4;
  double pitch_mm = 3.414;
  int memory_banks = 128;

  thermal::ThermalParams thermal;
  bool calibrate_thermal = true;
  double calibration_power_w = 2.0;
  double calibration_target_c = 80.0;

  power::VfTable vf = power::VfTable::defaults();
  double dynamic_top_w = 4.5;
  double p_leak0 = 0.3;
  double gamma = 0.02;
  double t_ref = 45.0;
  double s_max = 10.0;
  int budget_lookahead = 5;
  /// Fixed power drawn by cores that host no pipeline (co-running tenants).
  double background_w = 1.2;

  perf::KernelProfile profile = perf::KernelProfile::defaults();
  perf::WarmupParams warmup;

  double epoch_s = 1e-3;
  int horizon_epochs = 20;
  /// Budget features saturate at the top of the trace sweep.
  double feature_budget_cap = 5.5;
};

/// Immutable topology, thermal network and epoch solver shared by states.
class Platform {
 public:
  explicit Platform(SimParams params);

  const SimParams& params() const { return params_; }
  const arch::ChipTopology& topology() const { return topo_; }
  const thermal::ThermalNetwork& network() const { return net_; }
  const thermal::TransientSolver& solver() const { return solver_; }
  const power::PowerParams& power_params() const { return power_; }
  const power::VfTable& vf() const { return params_.vf; }
  const perf::KernelProfile& profile() const { return params_.profile; }
  std::size_t core_count() const { return topo_.core_count(); }
  double f_max() const { return params_.vf.top().freq_ghz; }

  /// Steady-state temperature with every core at the background power.
  thermal::Vec background_steady_state() const;

  /// Rise after k+1 epochs per watt held constant at each node (column j),
  /// for k < budget_lookahead.
  const std::vector<thermal::Mat>& multi_step_response() const { return multi_step_; }

 private:
  SimParams params_;
  arch::ChipTopology topo_;
  thermal::ThermalNetwork net_;
  thermal::TransientSolver solver_;
  power::PowerParams power_;
  std::vector<thermal::Mat> multi_step_;
};

std::shared_ptr<const Platform> make_platform(const SimParams& params);

struct KernelTask {
  KernelType type;
  double instructions;
};

struct Workload {
  std::string model;
  int seq_len = 0;
  int blocks = 0;
  double model_scale = 1.0;
  std::vector<KernelTask> kernels;

  double total_instructions() const;
};

/// Embedding, blocks x (Attention, FFN), LM head. Attention cost grows with
/// L^2, the rest with L; the ViT-like default (12 blocks, L = 256) takes
/// about 200 epochs at 3 GHz on an AMD-3.5 core. `blocks <= 0` uses the
/// model's configured block count.
Workload build_workload(const perf::KernelProfile& profile, const std::string& model, int seq_len,
                        int blocks = 0, double epoch_s = 1e-3);

struct Decision {
  enum class Kind : std::uint8_t { Stay, Migrate };
  Kind kind = Kind::Stay;
  CoreId target = 0;
  double predicted_utility = 0.0;
  bool queried = false;
  bool safe_override = false;
  bool force_min_vf = false;

  static Decision stay() { return {}; }
  static Decision migrate(CoreId target, double utility) {
    Decision d;
    d.kind = Kind::Migrate;
    d.target = target;
    d.predicted_utility = utility;
    return d;
  }
  bool is_migrate() const { return kind == Kind::Migrate; }
};

struct Pipeline {
  std::shared_ptr<const Workload> workload;
  std::size_t kernel_index = 0;
  double remaining = 0.0;
  CoreId core = 0;
  perf::WarmupState warmup;
  bool done = false;
  double completion_s = 0.0;
  double instructions_done = 0.0;
  /// Last-epoch counters.
  double ips = 0.0;
  double mpki = 0.0;
  double budget_w = 0.0;
  double freq_ghz = 0.0;

  KernelType kernel() const;
  double model_scale() const { return workload ? workload->model_scale : 1.0; }
};

struct SimState {
  std::shared_ptr<const Platform> platform;
  thermal::Vec temp;
  std::vector<Pipeline> pipelines;
  std::int64_t epoch = 0;
  double t_th = 75.0;
  std::uint64_t seed = 0;
  std::mt19937_64 rng;

  double time_s() const { return static_cast<double>(epoch) * platform->params().epoch_s; }
  double peak() const { return thermal::peak_temperature(temp); }
  bool finished() const;
  bool core_busy(CoreId core) const;
  std::vector<CoreId> active_cores() const;
  std::vector<CoreId> idle_cores() const;
  /// Core assignment per pipeline (done pipelines included).
  std::vector<CoreId> assignment() const;
};

/// Pipelines on seeded, distinct random cores; temperatures at the
/// background steady state. Each pipeline runs its own copy of `workload`.
SimState make_state(std::shared_ptr<const Platform> platform, const Workload& workload,
                    int pipelines, double t_th, std::uint64_t seed);

SimState make_state(std::shared_ptr<const Platform> platform,
                    std::vector<std::shared_ptr<const Workload>> workloads,
                    std::vector<CoreId> placement, double t_th, std::uint64_t seed);

struct PipelineRecord {
  std::size_t pipeline = 0;
  KernelType kernel = KernelType::Embedding;
  CoreId core = 0;
  double amd = 0.0;
  double freq_ghz = 0.0;
  double budget_w = 0.0;
  double ips = 0.0;
  double mpki = 0.0;
  double instructions = 0.0;
  double active_s = 0.0;
  double cold_factor = 1.0;
  std::int64_t warmup = perf::WarmupState::kNever;
  Decision decision;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double time_s = 0.0;
  std::vector<PipelineRecord> pipelines;  // active pipelines only
  double t_peak = 0.0;
  double budget_w = 0.0;
  bool emergency = false;
  double instructions = 0.0;
  int queries = 0;
  int safe_overrides = 0;
};

struct TraceSummary {
  double exec_time_s = 0.0;  // completion time of the last pipeline
  double o_mig_s = 0.0;
  double o_dvfs_s = 0.0;
  int epochs = 0;
  int violations = 0;
  bool truncated = false;
  double total_instructions = 0.0;
  int queries = 0;
  int decisions = 0;
  int migrations = 0;
  int safe_overrides = 0;
};

struct EpisodeTrace {
  std::vector<EpochRecord> records;
  TraceSummary summary;
};

/// Applies decisions (indexed by pipeline), budgets, V/f, one thermal step
/// and instruction progress. Throws DecisionError on an occupied target.
EpochRecord step_epoch(SimState& state, std::span<const Decision> decisions);

using DecideFn = std::function<std::vector<Decision>(const SimState&)>;

/// Always-stay decisions.
std::vector<Decision> stay_all(const SimState& state);

EpisodeTrace run_episode(SimState state, const DecideFn& decide, int max_epochs);

/// Recomputes the summary from records (overheads averaged over the
/// pipelines active in each epoch).
TraceSummary summarize(const std::vector<EpochRecord>& records, double t_th, double f_max,
                       double epoch_s, const std::vector<Pipeline>& final_pipelines, bool truncated);

// ---------------------------------------------------------------------------
// Candidate evaluation shared by the Oracle, the learned policy and baselines.

using StateVec = std::array<double, 4>;  // [IPS, MPKI, AMD, budget]

struct Candidate {
  CoreId core = 0;
  StateVec x_dst{};
  double budget_w = 0.0;
  double peak_c = 0.0;
  bool safe = false;
};

struct DecisionContext {
  std::size_t pipeline = 0;
  KernelType expected = KernelType::Embedding;
  double observed_ips = 0.0;
  double observed_mpki = 0.0;
  StateVec x_src{};
  double t_peak = 0.0;
  double t_th = 0.0;
  double stay_peak = 0.0;
  bool stay_safe = true;
  std::vector<Candidate> candidates;  // idle cores, ascending id
};

/// Predicted one-step outcome of moving `pipeline` to `dst` (or staying when
/// dst equals its current core), given the tentative `assignment`.
struct MoveOutcome {
  double budget_w = 0.0;
  double freq_ghz = 0.0;
  double peak_c = 0.0;
  bool safe = false;
};

MoveOutcome predict_move(const SimState& state, std::span<const CoreId> assignment,
                         std::size_t pipeline, CoreId dst);

/// Same prediction as predict_move, but shares the stay trajectory across
/// candidates and updates it by response columns (O(n) per candidate).
class MovePredictor {
 public:
  MovePredictor(const SimState& state, std::span<const CoreId> assignment);

  MoveOutcome predict(std::size_t pipeline, CoreId dst) const;

 private:
  const SimState& state_;
  std::vector<CoreId> active_;   // cores of active pipelines
  std::vector<std::size_t> slot_;  // pipeline -> index in active_, or npos
  std::vector<thermal::Vec> base_;      // stay rise after k+1 epochs, background only
  std::vector<thermal::Vec> per_watt_;  // stay rise per uniform watt on active cores
  thermal::Vec free_rise_;              // next rise with zero power
  thermal::Vec bg_rise_;                // next rise from the stay background
};

/// Warm (no cold start) profile prediction of [I, C, A, B] at `core` under budget.
StateVec predicted_state_vec(const SimState& state, std::size_t pipeline, CoreId core,
                             double budget_w);

DecisionContext build_decision_context(const SimState& state, std::size_t pipeline,
                                       std::span<const CoreId> assignment);

/// Shared selection rule. With a safe Stay: keep safe candidates with
/// utility > 0 and take the argmax (lowest id on ties), else Stay. With an
/// unsafe Stay: best safe candidate regardless of sign, else Stay at the
/// minimum V/f. Both fallbacks are flagged as safe overrides.
Decision select_action(const DecisionContext& ctx, std::span<const double> utilities);

/// Realized utility of `decisions[pipeline]` taken in `before`: the
/// pipeline's instructions over `horizon` epochs against the counterfactual
/// where it stays (later epochs all-stay in both branches).
double realized_utility(const SimState& before, std::span<const Decision> decisions,
                        std::size_t pipeline, int horizon);

/// Runs `per_pipeline` for each active pipeline in index order, threading the
/// tentative assignment so later pipelines never target claimed cores.
std::vector<Decision> decide_all(
    const SimState& state,
    const std::function<Decision(const SimState&, std::size_t, std::span<const CoreId>)>& per_pipeline);

}  // namespace ailfm::sim
