#include "ailfm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ailfm/errors.hpp"

namespace ailfm::sim {

namespace {

constexpr double kPeakEps = 1e-9;
constexpr double kViolationEps = 1e-6;
constexpr double kTieTolerance = 1e-12;

thermal::ThermalParams effective_thermal(const SimParams& p, const arch::ChipTopology& topo) {
  if (!p.calibrate_thermal) return p.thermal;
  return thermal::calibrate_sink(topo, p.thermal, p.calibration_power_w, p.calibration_target_c);
}

power::PowerParams make_power(const SimParams& p) {
  if (p.vf.empty()) throw ConfigError("empty V/f table");
  auto pp = power::PowerParams::calibrated(p.vf.top(), p.dynamic_top_w);
  pp.p_leak0 = p.p_leak0;
  pp.gamma = p.gamma;
  pp.t_ref = p.t_ref;
  if (!(pp.c_eff > 0.0) || !(pp.p_leak0 > 0.0) || !(pp.gamma > 0.0)) {
    throw ConfigError("power parameters must be positive");
  }
  return pp;
}

}  // namespace

Platform::Platform(SimParams params)
    : params_(std::move(params)),
      topo_(params_.nx, params_.ny, params_.nz, params_.pitch_mm, params_.memory_banks),
      net_(thermal::build_rc_network(topo_, effective_thermal(params_, topo_))),
      solver_(net_, params_.epoch_s),
      power_(make_power(params_)) {
  params_.thermal = net_.params();
  params_.calibrate_thermal = false;
  params_.profile.validate();
  if (params_.vf.top().freq_ghz > perf::kReferenceGhz) {
    throw ConfigError("V/f table exceeds the 3 GHz reference frequency");
  }
  if (params_.horizon_epochs < 1) throw ConfigError("horizon must be >= 1 epoch");
  if (params_.background_w < 0.0) throw ConfigError("background power must be non-negative");
  if (params_.budget_lookahead < 1) throw ConfigError("budget lookahead must be >= 1");

  const thermal::Mat& r = solver_.response();
  const thermal::Mat m = r * solver_.c_over_dt().asDiagonal();
  multi_step_.push_back(r);
  for (int k = 1; k < params_.budget_lookahead; ++k) {
    multi_step_.push_back(m * multi_step_.back() + r);
  }
}

thermal::Vec Platform::background_steady_state() const {
  const auto n = static_cast<Eigen::Index>(core_count());
  return thermal::steady_state(net_, thermal::Vec::Constant(n, params_.background_w));
}

std::shared_ptr<const Platform> make_platform(const SimParams& params) {
  return std::make_shared<const Platform>(params);
}

double Workload::total_instructions() const {
  return std::accumulate(kernels.begin(), kernels.end(), 0.0,
                         [](double acc, const KernelTask& k) { return acc + k.instructions; });
}

Workload build_workload(const perf::KernelProfile& profile, const std::string& model, int seq_len,
                        int blocks, double epoch_s) {
  if (seq_len <= 0) throw ConfigError("sequence length must be positive");
  const auto& spec = profile.model(model);
  if (blocks <= 0) blocks = spec.blocks;
  // Relative execution-time weights at L = 256; 12 blocks sum to 30.4 units.
  constexpr double kEmbed = 2.0, kAttn = 1.0, kFfn = 1.2, kHead = 2.0;
  constexpr double kReferenceUnits = kEmbed + kHead + 12 * (kAttn + kFfn);
  const double unit_s = 200.0 * epoch_s / kReferenceUnits;
  const double lin = seq_len / 256.0;
  auto instr = [&](KernelType k, double weight, double scale) {
    return weight * unit_s * perf::ips_at(profile, k, 3.5, perf::kReferenceGhz, spec.scale) * scale;
  };

  Workload w;
  w.model = model;
  w.seq_len = seq_len;
  w.blocks = blocks;
  w.model_scale = spec.scale;
  w.kernels.push_back({KernelType::Embedding, instr(KernelType::Embedding, kEmbed, lin)});
  for (int b = 0; b < blocks; ++b) {
    w.kernels.push_back({KernelType::Attention, instr(KernelType::Attention, kAttn, lin * lin)});
    w.kernels.push_back({KernelType::FFN, instr(KernelType::FFN, kFfn, lin)});
  }
  w.kernels.push_back({KernelType::LMHead, instr(KernelType::LMHead, kHead, lin)});
  return w;
}

KernelType Pipeline::kernel() const {
  const auto& ks = workload->kernels;
  return ks[std::min(kernel_index, ks.size() - 1)].type;
}

bool SimState::finished() const {
  return std::all_of(pipelines.begin(), pipelines.end(), [](const Pipeline& p) { return p.done; });
}

bool SimState::core_busy(CoreId core) const {
  return std::any_of(pipelines.begin(), pipelines.end(),
                     [&](const Pipeline& p) { return !p.done && p.core == core; });
}

std::vector<CoreId> SimState::active_cores() const {
  std::vector<CoreId> out;
  for (const auto& p : pipelines) {
    if (!p.done) out.push_back(p.core);
  }
  return out;
}

std::vector<CoreId> SimState::idle_cores() const {
  std::vector<CoreId> out;
  for (CoreId c = 0; c < platform->core_count(); ++c) {
    if (!core_busy(c)) out.push_back(c);
  }
  return out;
}

std::vector<CoreId> SimState::assignment() const {
  std::vector<CoreId> out;
  out.reserve(pipelines.size());
  for (const auto& p : pipelines) out.push_back(p.core);
  return out;
}

SimState make_state(std::shared_ptr<const Platform> platform,
                    std::vector<std::shared_ptr<const Workload>> workloads,
                    std::vector<CoreId> placement, double t_th, std::uint64_t seed) {
  if (workloads.size() != placement.size()) {
    throw ConfigError("one placement per workload required");
  }
  if (!(t_th > platform->network().ambient())) throw ConfigError("T_th must exceed ambient");
  std::vector<bool> used(platform->core_count(), false);
  SimState s;
  s.platform = platform;
  s.temp = platform->background_steady_state();
  s.t_th = t_th;
  s.seed = seed;
  s.rng.seed(seed);
  for (std::size_t i = 0; i < workloads.size(); ++i) {
    const CoreId c = placement[i];
    if (c >= used.size() || used[c]) throw ConfigError("invalid or duplicate placement");
    used[c] = true;
    Pipeline p;
    p.workload = std::move(workloads[i]);
    p.core = c;
    p.done = p.workload->kernels.empty();
    p.remaining = p.done ? 0.0 : p.workload->kernels.front().instructions;
    s.pipelines.push_back(std::move(p));
  }
  return s;
}

SimState make_state(std::shared_ptr<const Platform> platform, const Workload& workload,
                    int pipelines, double t_th, std::uint64_t seed) {
  if (pipelines < 1 || static_cast<std::size_t>(pipelines) > platform->core_count()) {
    throw ConfigError("pipeline count must lie in [1, core count]");
  }
  std::vector<CoreId> cores(platform->core_count());
  std::iota(cores.begin(), cores.end(), CoreId{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with explicit draws keeps placement portable.
  for (std::size_t i = 0; i < static_cast<std::size_t>(pipelines); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (cores.size() - i));
    std::swap(cores[i], cores[j]);
  }
  cores.resize(static_cast<std::size_t>(pipelines));
  auto shared = std::make_shared<const Workload>(workload);
  std::vector<std::shared_ptr<const Workload>> ws(cores.size(), shared);
  return make_state(std::move(platform), std::move(ws), std::move(cores), t_th, seed);
}

EpochRecord step_epoch(SimState& state, std::span<const Decision> decisions) {
  const Platform& plat = *state.platform;
  const SimParams& prm = plat.params();
  const double dt = prm.epoch_s;
  if (!decisions.empty() && decisions.size() != state.pipelines.size()) {
    throw DecisionError("one decision per pipeline required");
  }

  EpochRecord rec;
  rec.epoch = state.epoch;
  rec.time_s = state.time_s();

  // Migrations.
  std::vector<bool> occupied(plat.core_count(), false);
  for (const auto& p : state.pipelines) {
    if (!p.done) occupied[p.core] = true;
  }
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    auto& p = state.pipelines[i];
    const auto& d = decisions[i];
    if (p.done || !d.is_migrate() || d.target == p.core) continue;
    if (d.target >= plat.core_count()) throw DecisionError("migration target out of range");
    if (occupied[d.target]) throw DecisionError("migration to an occupied core");
    occupied[p.core] = false;
    occupied[d.target] = true;
    p.core = d.target;
    p.warmup.on_migration();
  }

  std::vector<std::size_t> act;
  std::vector<CoreId> cores;
  for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
    if (!state.pipelines[i].done) {
      act.push_back(i);
      cores.push_back(state.pipelines[i].core);
    }
  }
  const auto n = static_cast<Eigen::Index>(plat.core_count());
  thermal::Vec bg = thermal::Vec::Constant(n, prm.background_w);
  for (CoreId c : cores) bg[static_cast<Eigen::Index>(c)] = 0.0;

  const auto budget =
      power::compute_power_budget(plat.solver(), cores, state.temp, state.t_th, bg, {prm.s_max, prm.budget_lookahead});
  rec.budget_w = budget.uniform_w;
  rec.emergency = budget.emergency;

  thermal::Vec pw = bg;
  std::vector<double> freq(act.size());
  for (std::size_t k = 0; k < act.size(); ++k) {
    const auto& p = state.pipelines[act[k]];
    const double t_core = state.temp[static_cast<Eigen::Index>(p.core)];
    const bool force_min = !decisions.empty() && decisions[act[k]].force_min_vf;
    const std::size_t lvl =
        force_min ? 0 : power::select_vf_index(plat.vf(), plat.power_params(), budget.uniform_w, 1.0, t_core);
    freq[k] = plat.vf()[lvl].freq_ghz;
    pw[static_cast<Eigen::Index>(p.core)] =
        power::core_power(plat.power_params(), plat.vf()[lvl], 1.0, t_core);
  }
  thermal::Vec next = plat.solver().step(state.temp, pw);

  const auto& wp = prm.warmup;
  for (std::size_t k = 0; k < act.size(); ++k) {
    auto& p = state.pipelines[act[k]];
    PipelineRecord pr;
    pr.pipeline = act[k];
    pr.kernel = p.kernel();
    pr.core = p.core;
    pr.amd = plat.topology().amd(p.core);
    pr.freq_ghz = freq[k];
    pr.budget_w = budget.uniform_w;
    pr.warmup = p.warmup.epochs_since_migration;
    pr.cold_factor = perf::cold_start_factor(pr.warmup, wp.delta, wp.tau_w);
    if (!decisions.empty()) pr.decision = decisions[act[k]];
    const double inflate = perf::mpki_inflation(pr.warmup, wp.delta_m, wp.tau_w);

    double left = dt, instr = 0.0, miss_weighted = 0.0;
    while (left > 0.0 && !p.done) {
      const KernelType kt = p.kernel();
      const double ips =
          perf::ips_at(plat.profile(), kt, pr.amd, freq[k], p.model_scale()) * pr.cold_factor;
      const double mk = perf::mpki(plat.profile(), kt, pr.amd) * inflate;
      const double can = ips * left;
      if (can < p.remaining) {
        p.remaining -= can;
        instr += can;
        miss_weighted += mk * can;
        left = 0.0;
      } else {
        instr += p.remaining;
        miss_weighted += mk * p.remaining;
        left -= p.remaining / ips;
        ++p.kernel_index;
        if (p.kernel_index >= p.workload->kernels.size()) {
          p.done = true;
          p.remaining = 0.0;
          p.completion_s = rec.time_s + (dt - left);
        } else {
          p.remaining = p.workload->kernels[p.kernel_index].instructions;
        }
      }
    }
    pr.instructions = instr;
    pr.active_s = dt - left;
    pr.ips = instr / dt;
    pr.mpki = instr > 0.0 ? miss_weighted / instr : perf::mpki(plat.profile(), pr.kernel, pr.amd);
    p.instructions_done += instr;
    p.ips = pr.ips;
    p.mpki = pr.mpki;
    p.budget_w = budget.uniform_w;
    p.freq_ghz = freq[k];
    rec.instructions += instr;
    if (pr.decision.queried) ++rec.queries;
    if (pr.decision.safe_override) ++rec.safe_overrides;
    rec.pipelines.push_back(pr);
  }
  for (auto& p : state.pipelines) p.warmup.advance();

  state.temp = std::move(next);
  ++state.epoch;
  rec.t_peak = state.peak();
  return rec;
}

std::vector<Decision> stay_all(const SimState& state) {
  return std::vector<Decision>(state.pipelines.size(), Decision::stay());
}

TraceSummary summarize(const std::vector<EpochRecord>& records, double t_th, double f_max,
                       double epoch_s, const std::vector<Pipeline>& final_pipelines, bool truncated) {
  TraceSummary s;
  s.truncated = truncated;
  s.epochs = static_cast<int>(records.size());
  for (const auto& r : records) {
    if (r.t_peak > t_th + kViolationEps) ++s.violations;
    s.total_instructions += r.instructions;
    s.queries += r.queries;
    s.safe_overrides += r.safe_overrides;
    if (r.pipelines.empty()) continue;
    double mig = 0.0, dvfs = 0.0;
    for (const auto& p : r.pipelines) {
      mig += p.active_s * (1.0 - p.cold_factor);
      dvfs += p.active_s * (1.0 - p.freq_ghz / f_max);
      ++s.decisions;
      if (p.decision.is_migrate()) ++s.migrations;
    }
    s.o_mig_s += mig / static_cast<double>(r.pipelines.size());
    s.o_dvfs_s += dvfs / static_cast<double>(r.pipelines.size());
  }
  if (truncated) {
    s.exec_time_s = static_cast<double>(records.size()) * epoch_s;
  } else {
    for (const auto& p : final_pipelines) s.exec_time_s = std::max(s.exec_time_s, p.completion_s);
  }
  return s;
}

EpisodeTrace run_episode(SimState state, const DecideFn& decide, int max_epochs) {
  EpisodeTrace tr;
  while (!state.finished() && state.epoch < max_epochs) {
    const auto decisions = decide ? decide(state) : stay_all(state);
    tr.records.push_back(step_epoch(state, decisions));
  }
  const auto& prm = state.platform->params();
  tr.summary = summarize(tr.records, state.t_th, state.platform->f_max(), prm.epoch_s,
                         state.pipelines, !state.finished());
  return tr;
}

// ---------------------------------------------------------------------------

MoveOutcome predict_move(const SimState& state, std::span<const CoreId> assignment,
                         std::size_t pipeline, CoreId dst) {
  const Platform& plat = *state.platform;
  const auto& prm = plat.params();
  const auto n = static_cast<Eigen::Index>(plat.core_count());
  std::vector<CoreId> cores;
  cores.reserve(assignment.size());
  for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
    if (state.pipelines[i].done) continue;
    cores.push_back(i == pipeline ? dst : assignment[i]);
  }
  thermal::Vec bg = thermal::Vec::Constant(n, prm.background_w);
  for (CoreId c : cores) bg[static_cast<Eigen::Index>(c)] = 0.0;
  const auto budget =
      power::compute_power_budget(plat.solver(), cores, state.temp, state.t_th, bg, {prm.s_max, prm.budget_lookahead});

  MoveOutcome out;
  out.budget_w = budget.uniform_w;
  thermal::Vec pw = bg;
  for (CoreId c : cores) {
    const double t_core = state.temp[static_cast<Eigen::Index>(c)];
    const auto lvl = power::select_vf_index(plat.vf(), plat.power_params(), budget.uniform_w, 1.0, t_core);
    pw[static_cast<Eigen::Index>(c)] = power::core_power(plat.power_params(), plat.vf()[lvl], 1.0, t_core);
    if (c == dst) out.freq_ghz = plat.vf()[lvl].freq_ghz;
  }
  out.peak_c = thermal::peak_temperature(plat.solver().step(state.temp, pw));
  out.safe = out.peak_c <= state.t_th + kPeakEps;
  return out;
}

MovePredictor::MovePredictor(const SimState& state, std::span<const CoreId> assignment)
    : state_(state), slot_(state.pipelines.size(), std::string::npos) {
  const Platform& plat = *state.platform;
  const auto& prm = plat.params();
  const auto& solver = plat.solver();
  const auto n = static_cast<Eigen::Index>(plat.core_count());
  for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
    if (state.pipelines[i].done) continue;
    slot_[i] = active_.size();
    active_.push_back(assignment[i]);
  }
  thermal::Vec bg = thermal::Vec::Constant(n, prm.background_w);
  thermal::Vec unit = thermal::Vec::Zero(n);
  for (CoreId c : active_) {
    bg[static_cast<Eigen::Index>(c)] = 0.0;
    unit[static_cast<Eigen::Index>(c)] = 1.0;
  }
  const double amb = solver.ambient();
  const thermal::Vec amb_v = thermal::Vec::Constant(n, amb);
  thermal::Vec base = state.temp.array() - amb;
  thermal::Vec pw = thermal::Vec::Zero(n);
  for (int k = 0; k < prm.budget_lookahead; ++k) {
    base = solver.step(base + amb_v, bg).array() - amb;
    pw = solver.step(pw + amb_v, unit).array() - amb;
    base_.push_back(base);
    per_watt_.push_back(pw);
  }
  free_rise_ = solver.free_response(state.temp).array() - amb;
  bg_rise_ = solver.response() * bg;
}

MoveOutcome MovePredictor::predict(std::size_t pipeline, CoreId dst) const {
  const std::size_t slot = slot_.at(pipeline);
  if (slot == std::string::npos) throw std::invalid_argument("pipeline is not active");
  const Platform& plat = *state_.platform;
  const auto& prm = plat.params();
  const auto& solver = plat.solver();
  const auto& ms = plat.multi_step_response();
  const auto n = static_cast<Eigen::Index>(plat.core_count());
  const CoreId src = active_[slot];
  const auto js = static_cast<Eigen::Index>(src);
  const auto jd = static_cast<Eigen::Index>(dst);
  const bool moved = src != dst;
  if (moved && std::find(active_.begin(), active_.end(), dst) != active_.end()) {
    throw DecisionError("destination core is occupied");
  }
  const double headroom0 = state_.t_th - solver.ambient();
  const double bgw = prm.background_w;

  double s = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < base_.size(); ++k) {
    const auto& b = base_[k];
    const auto& p = per_watt_[k];
    for (Eigen::Index i = 0; i < n; ++i) {
      double bi = b[i], pi = p[i];
      if (moved) {
        const double d = ms[k](i, jd) - ms[k](i, js);
        bi -= bgw * d;
        pi += d;
      }
      const double headroom = headroom0 - bi;
      if (pi > 0.0) {
        s = std::min(s, headroom / pi);
      } else if (headroom < 0.0) {
        s = -1.0;
      }
    }
  }
  if (s < 0.0) s = 0.0;
  s = std::min(s, prm.s_max);

  MoveOutcome out;
  out.budget_w = s;
  const auto& r = solver.response();
  thermal::Vec rise = free_rise_ + bg_rise_;
  if (moved) rise += bgw * (r.col(js) - r.col(jd));
  for (std::size_t a = 0; a < active_.size(); ++a) {
    const CoreId c = a == slot ? dst : active_[a];
    const double t_core = state_.temp[static_cast<Eigen::Index>(c)];
    const auto lvl = power::select_vf_index(plat.vf(), plat.power_params(), s, 1.0, t_core);
    const double p = power::core_power(plat.power_params(), plat.vf()[lvl], 1.0, t_core);
    rise += p * r.col(static_cast<Eigen::Index>(c));
    if (a == slot) out.freq_ghz = plat.vf()[lvl].freq_ghz;
  }
  out.peak_c = rise.maxCoeff() + solver.ambient();
  out.safe = out.peak_c <= state_.t_th + kPeakEps;
  return out;
}

StateVec predicted_state_vec(const SimState& state, std::size_t pipeline, CoreId core,
                             double budget_w) {
  const Platform& plat = *state.platform;
  const auto& p = state.pipelines.at(pipeline);
  const double amd = plat.topology().amd(core);
  const double t_core = state.temp[static_cast<Eigen::Index>(core)];
  const auto f = power::select_vf(plat.vf(), plat.power_params(), budget_w, 1.0, t_core).freq_ghz;
  const KernelType k = p.kernel();
  return {perf::ips_at(plat.profile(), k, amd, f, p.model_scale()), perf::mpki(plat.profile(), k, amd),
          amd, std::min(budget_w, plat.params().feature_budget_cap)};
}

DecisionContext build_decision_context(const SimState& state, std::size_t pipeline,
                                       std::span<const CoreId> assignment) {
  const auto& p = state.pipelines.at(pipeline);
  DecisionContext ctx;
  ctx.pipeline = pipeline;
  ctx.expected = p.kernel();
  ctx.t_peak = state.peak();
  ctx.t_th = state.t_th;

  const CoreId src = assignment[pipeline];
  const MovePredictor predictor(state, assignment);
  const auto stay = predictor.predict(pipeline, src);
  ctx.stay_peak = stay.peak_c;
  ctx.stay_safe = stay.safe;
  ctx.x_src = predicted_state_vec(state, pipeline, src, stay.budget_w);
  if (p.ips > 0.0) {
    ctx.observed_ips = p.ips;
    ctx.observed_mpki = p.mpki;
  } else {
    ctx.observed_ips = ctx.x_src[0];
    ctx.observed_mpki = ctx.x_src[1];
  }

  std::vector<bool> taken(state.platform->core_count(), false);
  for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
    if (!state.pipelines[i].done) taken[assignment[i]] = true;
  }
  for (CoreId c = 0; c < taken.size(); ++c) {
    if (taken[c]) continue;
    const auto mv = predictor.predict(pipeline, c);
    Candidate cand;
    cand.core = c;
    cand.budget_w = mv.budget_w;
    cand.peak_c = mv.peak_c;
    cand.safe = mv.safe;
    cand.x_dst = predicted_state_vec(state, pipeline, c, mv.budget_w);
    ctx.candidates.push_back(cand);
  }
  return ctx;
}

Decision select_action(const DecisionContext& ctx, std::span<const double> utilities) {
  if (utilities.size() != ctx.candidates.size()) {
    throw std::invalid_argument("one utility per candidate required");
  }
  const auto eligible = [&](std::size_t i) {
    return ctx.candidates[i].safe && (!ctx.stay_safe || utilities[i] > 0.0);
  };
  std::optional<double> top;
  for (std::size_t i = 0; i < ctx.candidates.size(); ++i) {
    if (eligible(i) && (!top || utilities[i] > *top)) top = utilities[i];
  }
  // Lowest core id among values equal to the maximum up to rounding, so the
  // choice does not depend on how the utilities were summed.
  std::optional<std::size_t> best;
  if (top) {
    const double floor = *top - kTieTolerance * std::max(1.0, std::abs(*top));
    for (std::size_t i = 0; i < ctx.candidates.size() && !best; ++i) {
      if (eligible(i) && utilities[i] >= floor) best = i;
    }
  }
  if (best) {
    Decision d = Decision::migrate(ctx.candidates[*best].core, utilities[*best]);
    d.safe_override = !ctx.stay_safe;
    return d;
  }
  Decision d = Decision::stay();
  if (!ctx.stay_safe) {
    d.safe_override = true;
    d.force_min_vf = true;
  }
  return d;
}

double realized_utility(const SimState& before, std::span<const Decision> decisions,
                        std::size_t pipeline, int horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!decisions[pipeline].is_migrate()) return 0.0;
  const auto run = [&](std::vector<Decision> first) {
    SimState s = before;
    const double start = s.pipelines[pipeline].instructions_done;
    step_epoch(s, first);
    for (int e = 1; e < horizon && !s.finished(); ++e) step_epoch(s, stay_all(s));
    return s.pipelines[pipeline].instructions_done - start;
  };
  std::vector<Decision> acted(decisions.begin(), decisions.end());
  std::vector<Decision> stayed = acted;
  stayed[pipeline] = Decision::stay();
  // Moves into cores that stay occupied in the counterfactual are cancelled,
  // which can in turn keep further cores occupied.
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<bool> held(before.platform->core_count(), false);
    for (std::size_t i = 0; i < before.pipelines.size(); ++i) {
      if (!before.pipelines[i].done && !stayed[i].is_migrate()) held[before.pipelines[i].core] = true;
    }
    for (auto& d : stayed) {
      if (d.is_migrate() && held[d.target]) {
        d = Decision::stay();
        changed = true;
      }
    }
  }
  const double a = run(std::move(acted));
  const double b = run(std::move(stayed));
  return b > 0.0 ? (a - b) / b : 0.0;
}

std::vector<Decision> decide_all(
    const SimState& state,
    const std::function<Decision(const SimState&, std::size_t, std::span<const CoreId>)>& per_pipeline) {
  std::vector<CoreId> assign = state.assignment();
  std::vector<Decision> out(state.pipelines.size(), Decision::stay());
  for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
    if (state.pipelines[i].done) continue;
    out[i] = per_pipeline(state, i, assign);
    if (out[i].is_migrate()) assign[i] = out[i].target;
  }
  return out;
}

}  // namespace ailfm::sim
