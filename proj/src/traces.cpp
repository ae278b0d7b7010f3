#include "ailfm/traces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include "ailfm/csv.hpp"
#include "ailfm/errors.hpp"

namespace ailfm::sim {

std::vector<double> TraceConfig::linspace(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
  }
  return out;
}

namespace {

thermal::Vec heater_power(const Platform& plat, const TraceConfig& cfg, CoreId pinned) {
  const auto n = static_cast<Eigen::Index>(plat.core_count());
  thermal::Vec bg = thermal::Vec::Zero(n);
  int placed = 0;
  for (CoreId c = 0; c < plat.core_count() && placed < cfg.heater_cores; ++c) {
    if (c == pinned) continue;
    bg[static_cast<Eigen::Index>(c)] = cfg.heater_w;
    ++placed;
  }
  return bg;
}

double kernel_instructions(const Platform& plat, const TraceConfig& cfg, const OperatingPoint& op) {
  const auto w = build_workload(plat.profile(), op.model, cfg.seq_len, 0, plat.params().epoch_s);
  for (const auto& k : w.kernels) {
    if (k.type == op.kernel) return k.instructions;
  }
  throw ConfigError("workload lacks kernel");
}

struct EpochPoint {
  double budget_w;
  double freq_ghz;
  double power_w;
};

/// Budget, V/f and power of the pinned core for one epoch at a fixed
/// operating-point budget, capped by the thermal budget.
EpochPoint pinned_epoch(const Platform& plat, const TraceConfig& cfg, CoreId core, double op_budget,
                        const thermal::Vec& temp, const thermal::Vec& heaters) {
  const std::array<CoreId, 1> active{core};
  const auto& prm = plat.params();
  const auto th = power::compute_power_budget(plat.solver(), active, temp, cfg.t_th, heaters,
                                              {prm.s_max, prm.budget_lookahead});
  const double b = std::min(op_budget, th.uniform_w);
  const double t_core = temp[static_cast<Eigen::Index>(core)];
  const auto lvl = power::select_vf_index(plat.vf(), plat.power_params(), b, 1.0, t_core);
  return {b, plat.vf()[lvl].freq_ghz, power::core_power(plat.power_params(), plat.vf()[lvl], 1.0, t_core)};
}

}  // namespace

std::size_t TraceDataset::row_count() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.slices.size();
  return n;
}

void TraceDataset::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  csv::write_row(out, {"model", "kernel", "amd", "budget_w", "slice", "ips", "mpki", "t_peak_c"});
  for (const auto& run : runs) {
    for (const auto& r : run.slices) {
      csv::write_row(out, {r.model, std::string(perf::to_string(r.kernel)), csv::num(r.amd),
                           csv::num(r.budget_w), std::to_string(r.slice), csv::num(r.ips),
                           csv::num(r.mpki), csv::num(r.t_peak_c)});
    }
  }
}

TraceDataset TraceDataset::read_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows.front().size() != 8 || rows.front()[0] != "model") {
    throw ConfigError(path + ": not a traces.csv file");
  }
  TraceDataset ds;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 8) throw ConfigError(path + ": malformed row " + std::to_string(i));
    TraceRow r{f[0], perf::kernel_from_string(f[1]), std::stod(f[2]), std::stod(f[3]),
               std::stoi(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
    if (ds.runs.empty() || r.slice == 0) {
      TraceRun run;
      run.op.model = r.model;
      run.op.kernel = r.kernel;
      run.op.amd = r.amd;
      run.op.amd_level = r.amd;
      run.op.budget_w = r.budget_w;
      ds.runs.push_back(std::move(run));
    }
    ds.runs.back().slices.push_back(std::move(r));
  }
  return ds;
}

CoreId core_for_amd(const arch::ChipTopology& topo, double level, double tolerance) {
  CoreId best = 0;
  double gap = std::abs(topo.amd(0) - level);
  for (CoreId c = 1; c < topo.core_count(); ++c) {
    const double g = std::abs(topo.amd(c) - level);
    if (g < gap) {
      gap = g;
      best = c;
    }
  }
  if (gap > tolerance) {
    throw ConfigError("no core within " + csv::num(tolerance) + " of AMD " + csv::num(level));
  }
  return best;
}

std::vector<OperatingPoint> operating_points(const Platform& platform, const TraceConfig& cfg,
                                             const std::string& model, KernelType kernel) {
  std::vector<OperatingPoint> ops;
  for (double level : cfg.amd_levels) {
    const CoreId core = core_for_amd(platform.topology(), level, cfg.amd_tolerance);
    for (double b : cfg.budgets_w) {
      ops.push_back({model, kernel, level, core, platform.topology().amd(core), b});
    }
  }
  return ops;
}

TraceRun run_trace(const Platform& plat, const TraceConfig& cfg, const OperatingPoint& op) {
  if (cfg.slices < 1 || cfg.median_slice < 0 || cfg.median_slice >= cfg.slices) {
    throw ConfigError("invalid slice configuration");
  }
  const double dt = plat.params().epoch_s;
  const double scale = plat.profile().model(op.model).scale;
  const thermal::Vec heaters = heater_power(plat, cfg, op.core);
  const auto n = static_cast<Eigen::Index>(plat.core_count());
  thermal::Vec temp = thermal::steady_state(plat.network(), heaters);

  struct Segment {
    double t0, t1, ips, mpki, peak0, peak1;
    thermal::Vec temp0, temp1;
  };
  std::vector<Segment> segs;
  double remaining = kernel_instructions(plat, cfg, op);
  double t = 0.0;
  const double mk = perf::mpki(plat.profile(), op.kernel, op.amd);
  while (remaining > 0.0) {
    const auto ep = pinned_epoch(plat, cfg, op.core, op.budget_w, temp, heaters);
    const double ips = perf::ips_at(plat.profile(), op.kernel, op.amd, ep.freq_ghz, scale);
    const double span = std::min(dt, remaining / ips);
    thermal::Vec pw = heaters;
    pw[static_cast<Eigen::Index>(op.core)] = ep.power_w;
    thermal::Vec next = plat.solver().step(temp, pw);
    // Partial final epoch: interpolate the end state.
    if (span < dt) next = temp + (next - temp) * (span / dt);
    segs.push_back({t, t + span, ips, mk, thermal::peak_temperature(temp),
                    thermal::peak_temperature(next), temp, next});
    remaining -= ips * span;
    if (remaining < 1e-6 * ips * dt) remaining = 0.0;
    t += span;
    temp = std::move(next);
  }
  (void)n;

  TraceRun run;
  run.op = op;
  const double total = t;
  const double width = total / cfg.slices;
  std::size_t k = 0;
  for (int s = 0; s < cfg.slices; ++s) {
    const double a = s * width, b = (s + 1) * width;
    while (k + 1 < segs.size() && segs[k].t1 <= a) ++k;
    double instr = 0.0, miss = 0.0;
    for (std::size_t j = k; j < segs.size() && segs[j].t0 < b; ++j) {
      const double ov = std::min(b, segs[j].t1) - std::max(a, segs[j].t0);
      if (ov <= 0.0) continue;
      instr += segs[j].ips * ov;
      miss += segs[j].ips * ov * segs[j].mpki;
    }
    // Peak at the slice end, linear within the segment.
    std::size_t e = k;
    while (e + 1 < segs.size() && segs[e].t1 < b) ++e;
    const auto& se = segs[e];
    const double frac = se.t1 > se.t0 ? std::clamp((b - se.t0) / (se.t1 - se.t0), 0.0, 1.0) : 1.0;
    const double peak = se.peak0 + frac * (se.peak1 - se.peak0);
    run.slices.push_back({op.model, op.kernel, op.amd, op.budget_w, s, instr / width,
                          instr > 0.0 ? miss / instr : mk, peak});
    if (s == cfg.median_slice) {
      const auto& sa = segs[k];
      const double fa = sa.t1 > sa.t0 ? std::clamp((a - sa.t0) / (sa.t1 - sa.t0), 0.0, 1.0) : 0.0;
      run.median_temp = sa.temp0 + (sa.temp1 - sa.temp0) * fa;
    }
  }
  return run;
}

TraceDataset collect_traces(const Platform& platform, const TraceConfig& cfg) {
  TraceDataset ds;
  auto models = cfg.models;
  std::sort(models.begin(), models.end());
  for (const auto& m : models) {
    for (auto k : perf::kAllKernels) {
      auto ops = operating_points(platform, cfg, m, k);
      std::sort(ops.begin(), ops.end(), [](const OperatingPoint& a, const OperatingPoint& b) {
        return std::tie(a.amd, a.budget_w) < std::tie(b.amd, b.budget_w);
      });
      for (const auto& op : ops) ds.runs.push_back(run_trace(platform, cfg, op));
    }
  }
  return ds;
}

std::vector<LabeledSample> LabeledDataset::for_kernel(KernelType k) const {
  std::vector<LabeledSample> out;
  for (const auto& s : samples) {
    if (s.kernel == k) out.push_back(s);
  }
  return out;
}

void LabeledDataset::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  csv::write_row(out, {"kernel", "i_src", "c_src", "a_src", "b_src", "i_dst", "c_dst", "a_dst",
                       "b_dst", "utility"});
  for (const auto& s : samples) {
    std::vector<std::string> f{std::string(perf::to_string(s.kernel))};
    for (double v : s.x_src) f.push_back(csv::num(v));
    for (double v : s.x_dst) f.push_back(csv::num(v));
    f.push_back(csv::num(s.utility));
    csv::write_row(out, f);
  }
}

LabeledDataset LabeledDataset::read_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows.front().size() != 10 || rows.front()[0] != "kernel") {
    throw ConfigError(path + ": not a dataset.csv file");
  }
  LabeledDataset ds;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 10) throw ConfigError(path + ": malformed row " + std::to_string(i));
    LabeledSample s;
    s.kernel = perf::kernel_from_string(f[0]);
    for (int j = 0; j < 4; ++j) {
      s.x_src[j] = std::stod(f[1 + j]);
      s.x_dst[j] = std::stod(f[5 + j]);
    }
    s.utility = std::stod(f[9]);
    ds.samples.push_back(s);
  }
  return ds;
}

namespace {

double rollout_instructions(const Platform& plat, const TraceConfig& cfg, const OperatingPoint& op,
                            CoreId core, double amd, const thermal::Vec& start, bool migrated,
                            int horizon) {
  const double dt = plat.params().epoch_s;
  const double scale = plat.profile().model(op.model).scale;
  const auto& wp = plat.params().warmup;
  // Heaters stay where the source run placed them.
  thermal::Vec heaters = heater_power(plat, cfg, op.core);
  heaters[static_cast<Eigen::Index>(core)] = 0.0;
  thermal::Vec temp = start;
  perf::WarmupState warm;
  if (migrated) warm.on_migration();
  double instr = 0.0;
  for (int e = 0; e < horizon; ++e) {
    const auto ep = pinned_epoch(plat, cfg, core, op.budget_w, temp, heaters);
    const double ips = perf::ips_at(plat.profile(), op.kernel, amd, ep.freq_ghz, scale) *
                       perf::cold_start_factor(warm.epochs_since_migration, wp.delta, wp.tau_w);
    instr += ips * dt;
    thermal::Vec pw = heaters;
    pw[static_cast<Eigen::Index>(core)] = ep.power_w;
    temp = plat.solver().step(temp, pw);
    warm.advance();
  }
  return instr;
}

double move_instructions(const Platform& platform, const TraceConfig& cfg, const OperatingPoint& src,
                         const thermal::Vec& src_temp, const OperatingPoint& dst, int horizon) {
  OperatingPoint moved = src;
  moved.budget_w = dst.budget_w;
  // Equal-AMD points share a pinned core but stand for distinct cores of
  // that class, so only the identical point skips the cold start.
  const bool migrated = dst.core != src.core || dst.budget_w != src.budget_w;
  return rollout_instructions(platform, cfg, moved, dst.core, dst.amd, src_temp, migrated, horizon);
}

}  // namespace

double label_utility(const Platform& platform, const TraceConfig& cfg, const OperatingPoint& src,
                     const thermal::Vec& src_temp, const OperatingPoint& dst, int horizon,
                     std::uint64_t /*seed*/) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const double stay =
      rollout_instructions(platform, cfg, src, src.core, src.amd, src_temp, false, horizon);
  const double move = move_instructions(platform, cfg, src, src_temp, dst, horizon);
  return (move - stay) / stay;
}

LabeledDataset build_training_set(const Platform& platform, const TraceConfig& cfg,
                                  const TraceDataset& traces, int horizon, std::uint64_t /*seed*/) {
  // Group runs by (model, kernel); each group is one model's operating points.
  std::map<std::pair<std::string, int>, std::vector<const TraceRun*>> groups;
  for (const auto& r : traces.runs) {
    groups[{r.op.model, static_cast<int>(perf::index_of(r.op.kernel))}].push_back(&r);
  }
  LabeledDataset ds;
  for (const auto& [key, runs] : groups) {
    std::vector<OperatingPoint> ops;
    std::vector<thermal::Vec> temps;
    std::vector<StateVec> reps;
    for (const TraceRun* r : runs) {
      OperatingPoint op = r->op;
      op.core = core_for_amd(platform.topology(), op.amd_level, cfg.amd_tolerance);
      op.amd = platform.topology().amd(op.core);
      thermal::Vec t = r->median_temp;
      if (t.size() == 0) t = run_trace(platform, cfg, op).median_temp;
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(cfg.median_slice), r->slices.size() - 1);
      const auto& s = r->slices[idx];
      reps.push_back({s.ips, s.mpki, s.amd, s.budget_w});
      ops.push_back(op);
      temps.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const double stay = rollout_instructions(platform, cfg, ops[i], ops[i].core, ops[i].amd,
                                               temps[i], false, horizon);
      for (std::size_t d = 0; d < ops.size(); ++d) {
        if (i == d) continue;
        LabeledSample smp;
        smp.kernel = ops[i].kernel;
        smp.model = ops[i].model;
        smp.x_src = reps[i];
        smp.x_dst = reps[d];
        smp.utility = (move_instructions(platform, cfg, ops[i], temps[i], ops[d], horizon) - stay) / stay;
        ds.samples.push_back(smp);
      }
    }
  }
  return ds;
}

}  // namespace ailfm::sim
