#pragma once

#include <memory>

#include "ailfm/oracle.hpp"
#include "ailfm/sim.hpp"

namespace fixtures {

inline std::shared_ptr<const ailfm::sim::Platform> platform() {
  static const auto p = ailfm::sim::make_platform({});
  return p;
}

// One model, experts capped at 300: enough for decision checks, fits in about a second.
inline const ailfm::oracle::MoGpr& small_mogpr() {
  static const ailfm::oracle::MoGpr m = [] {
    ailfm::sim::TraceConfig cfg;
    cfg.models = {"vit-base"};
    const auto traces = ailfm::sim::collect_traces(*platform(), cfg);
    const auto data = ailfm::sim::build_training_set(*platform(), cfg, traces, 20, 1);
    ailfm::oracle::FitOptions opts;
    opts.cap = 300;
    return ailfm::oracle::fit_mogpr(data, ailfm::oracle::router_samples(traces), opts, 7);
  }();
  return m;
}

inline ailfm::sim::Workload vit(int len = 256) {
  return ailfm::sim::build_workload(platform()->profile(), "vit-base", len);
}

}  // namespace fixtures
