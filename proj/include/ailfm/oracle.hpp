#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ailfm/sim.hpp"
#include "ailfm/traces.hpp"

namespace ailfm::oracle {

using perf::KernelType;
using sim::StateVec;

struct RouterSample {
  KernelType kernel = KernelType::Embedding;
  double ips = 0.0;
  double mpki = 0.0;
};

/// Unit-norm score weights over standardized (IPS, MPKI) plus class means
/// of the score.
struct RouterWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double ips_mean = 0.0, ips_scale = 1.0;
  double mpki_mean = 0.0, mpki_scale = 1.0;
  std::array<double, perf::kKernelCount> class_mean{};
  std::array<bool, perf::kKernelCount> present{};
  double fisher_ratio = 0.0;
  /// Fewer than two distinguishable classes: routing passes the expected kernel through.
  bool degenerate = true;

  double score(double ips, double mpki) const;
};

std::vector<RouterSample> router_samples(const sim::TraceDataset& traces);
std::vector<RouterSample> router_samples(const sim::LabeledDataset& data);

RouterWeights fit_router(std::span<const RouterSample> samples);

struct Route {
  KernelType kernel = KernelType::Embedding;
  std::array<double, perf::kKernelCount> gate{};
};

/// Nearest class mean of the score; exact ties go to `expected`.
Route route(const RouterWeights& router, double ips, double mpki, KernelType expected);

double routing_accuracy(const RouterWeights& router, std::span<const RouterSample> samples);

struct GpHyper {
  double sigma_f = 1.0;
  double lengthscale = 1.0;
  double sigma_n = 1e-2;
};

struct FitOptions {
  int cap = 1000;
  std::vector<double> sigma_f_grid{0.5, 1.0, 2.0};
  std::vector<double> lengthscale_grid{0.5, 1.0, 2.0};
  std::vector<double> sigma_n_grid{1e-3, 1e-2, 1e-1};
};

/// Squared-exponential GP over standardized [x_src, x_dst].
struct GpExpert {
  KernelType kernel = KernelType::Embedding;
  Eigen::MatrixXd x;  // n x 8, standardized
  Eigen::VectorXd y;  // standardized targets
  std::array<double, 8> x_mean{}, x_scale{};
  double y_mean = 0.0, y_scale = 1.0;
  GpHyper hyper;
  double jitter = 0.0;
  double log_ml = 0.0;
  Eigen::MatrixXd chol;  // lower factor of K + (sigma_n^2 + jitter) I
  Eigen::VectorXd alpha;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

double se_kernel(const GpHyper& h, std::span<const double> a, std::span<const double> b);

/// Samples of other kernels are ignored. Throws FitError with fewer than two
/// samples or when every grid point stays non-PD after jitter escalation.
GpExpert fit_expert(KernelType kernel, std::span<const sim::LabeledSample> samples,
                    const FitOptions& opts, std::uint64_t seed);

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
  double mean_std = 0.0;      // standardized units
  double variance_std = 0.0;  // standardized units
};

GpPrediction gp_predict(const GpExpert& expert, const StateVec& x_src, const StateVec& x_dst);

/// One x_src against many destinations; triangular solves share one pass.
std::vector<GpPrediction> gp_predict_batch(const GpExpert& expert, const StateVec& x_src,
                                           std::span<const StateVec> x_dst);

struct MoGpr {
  RouterWeights router;
  std::array<GpExpert, perf::kKernelCount> experts;

  const GpExpert& expert(KernelType k) const { return experts[perf::index_of(k)]; }

  void save(const std::string& path) const;
  static MoGpr load(const std::string& path);
};

MoGpr fit_mogpr(const sim::LabeledDataset& data, std::span<const RouterSample> router_data,
                const FitOptions& opts, std::uint64_t seed);

struct OracleResult {
  sim::Decision decision;
  KernelType routed = KernelType::Embedding;
  std::vector<GpPrediction> predictions;  // per candidate
};

/// Posterior utilities for the context's candidates under the routed expert.
OracleResult oracle_evaluate(const MoGpr& mogpr, const sim::DecisionContext& ctx);

sim::Decision oracle_decision(const MoGpr& mogpr, const sim::SimState& state, std::size_t pipeline,
                              std::span<const sim::CoreId> assignment);
sim::Decision oracle_decision(const MoGpr& mogpr, const sim::SimState& state, std::size_t pipeline);

}  // namespace ailfm::oracle
