#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ailfm/oracle.hpp"
#include "ailfm/sim.hpp"

namespace ailfm::policy {

using perf::KernelType;

inline constexpr std::size_t kInputs = 10;
inline constexpr std::size_t kOutputs = 5;  // 4 kernel logits + utility

/// [I_src, C_src, A_src, B_src, I_dst, C_dst, A_dst, B_dst, T_peak, T_th]
using Features = std::array<double, kInputs>;

Features make_features(const sim::StateVec& src, const sim::StateVec& dst, double t_peak, double t_th);

/// Fully connected ReLU net. weights[l] is in x out; the utility output is
/// trained on standardized targets (util_mean, util_scale).
struct PolicyNet {
  std::vector<int> widths;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double dropout = 0.1;
  std::array<double, kInputs> in_mean{};
  std::array<double, kInputs> in_scale{1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  double util_mean = 0.0;
  double util_scale = 1.0;

  std::size_t layers() const { return weights.size(); }
  std::size_t parameter_count() const;
  Eigen::VectorXd standardize(const Features& f) const;

  void save(const std::string& path) const;
  static PolicyNet load(const std::string& path);
};

/// He-uniform weights, zero biases.
PolicyNet init_policy(std::uint64_t seed, double dropout = 0.1,
                      std::vector<int> widths = {10, 64, 32, 32, 5});

/// Deterministic pass; returns the raw 5-vector (utility in standardized units).
Eigen::VectorXd forward(const PolicyNet& net, const Features& f);

/// Dropout pass: hidden units drop with probability p, survivors scale by
/// 1/(1-p). Masks are a pure function of `mask_seed`.
Eigen::VectorXd forward(const PolicyNet& net, const Features& f, std::uint64_t mask_seed);

/// De-standardized utility from a deterministic pass.
double predict_utility(const PolicyNet& net, const Features& f);

struct McEstimate {
  double mean = 0.0;      // utility, de-standardized
  double variance = 0.0;  // unbiased, standardized output units
};

McEstimate mc_uncertainty(const PolicyNet& net, const Features& f, int n_passes, std::uint64_t seed);

struct PolicyResult {
  sim::Decision decision;
  bool queried = false;
  double uncertainty = 0.0;
  std::size_t probe = static_cast<std::size_t>(-1);  // candidate whose uncertainty was gated
  std::vector<double> utilities;                       // net predictions per candidate
  oracle::OracleResult oracle;                         // filled when queried
};

struct GateOptions {
  double tau = 0.15;
  int mc_passes = 20;
  std::uint64_t seed = 0;
};

/// Net utilities for every candidate; MC uncertainty at the best (safe if
/// any) candidate gates between the autonomous rule and the Oracle.
PolicyResult decide(const PolicyNet& net, const oracle::MoGpr& mogpr, const sim::DecisionContext& ctx,
                    const GateOptions& gate);

sim::Decision decide(const PolicyNet& net, const oracle::MoGpr& mogpr, const sim::SimState& state,
                     std::size_t pipeline, std::span<const sim::CoreId> assignment,
                     const GateOptions& gate);

// ---------------------------------------------------------------------------
// Training

struct OracleSample {
  Features x{};
  KernelType kernel = KernelType::Embedding;
  double utility = 0.0;
};

struct AgentSample {
  Features x{};
  KernelType kernel = KernelType::Embedding;
  double utility = 0.0;
  bool success = false;
};

struct TrainingPools {
  std::vector<OracleSample> oracle;
  std::vector<AgentSample> agent;
};

struct WeightedSample {
  Features x{};
  KernelType kernel = KernelType::Embedding;
  double utility = 0.0;
  double weight = 1.0;
};

struct TrainHyper {
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 50;
  int batch = 32;
  double lambda = 0.5;
  bool train_dropout = true;
  std::uint64_t seed = 0;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
};

/// Mean over the batch of weight * (CE(logits, kernel) + (u - u_target)^2),
/// targets standardized with the net's stats. Dropout masks come from
/// `mask_seeds` (one per sample) when given, otherwise the pass is deterministic.
double loss_and_gradients(const PolicyNet& net, std::span<const WeightedSample> batch, Gradients* grads,
                          std::span<const std::uint64_t> mask_seeds = {});

/// Sets input and utility standardization from the samples.
void fit_standardization(PolicyNet& net, std::span<const WeightedSample> samples);

/// Momentum mini-batch descent; returns the mean loss per epoch.
std::vector<double> fit(PolicyNet& net, std::span<const WeightedSample> samples, const TrainHyper& hyper);

/// Supervised oracle term plus lambda-weighted successful agent actions.
/// Throws TrainingError when D_oracle is empty.
std::vector<double> train(PolicyNet& net, const TrainingPools& pools, const TrainHyper& hyper);

// ---------------------------------------------------------------------------
// Active imitation and the direct-learning baseline

/// Builds the training episode for (round, episode).
using EpisodeFactory = std::function<sim::SimState(int round, int episode)>;

struct LoopConfig {
  int rounds = 5;
  int episodes_per_round = 2;
  int max_epochs = 2000;
  int horizon = 20;
  double dropout = 0.1;
  GateOptions gate;
  TrainHyper hyper;
  /// Extra random candidates labelled by the Oracle per query.
  int oracle_extra_candidates = 7;
  double epsilon = 0.2;
  double epsilon_decay = 0.9;
  std::uint64_t seed = 0;
};

struct RoundStats {
  int round = 0;
  int decisions = 0;
  int queries = 0;
  double queries_per_epoch = 0.0;  // queries per active pipeline-decision
  int epochs = 0;
  int violations = 0;
  double violation_pct = 0.0;
  double final_loss = 0.0;
  std::size_t oracle_pool = 0;
  std::size_t agent_pool = 0;
  double epsilon = 0.0;
};

struct LoopResult {
  PolicyNet net;
  TrainingPools pools;
  std::vector<RoundStats> rounds;
};

/// DAgger-style loop: round 1 follows the Oracle everywhere, later rounds
/// query only above the uncertainty threshold.
LoopResult active_il_loop(const oracle::MoGpr& mogpr, const EpisodeFactory& episodes,
                          const LoopConfig& cfg);

/// Same net trained only on self-collected realized utilities with
/// epsilon-greedy exploration; never queries the Oracle.
LoopResult dlfm_loop(const EpisodeFactory& episodes, const LoopConfig& cfg);

/// Greedy decision of a net without gating (used by DLFM at run time).
sim::Decision net_decision(const PolicyNet& net, const sim::DecisionContext& ctx);

}  // namespace ailfm::policy
