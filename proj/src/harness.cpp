#include "ailfm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ailfm/csv.hpp"
#include "ailfm/errors.hpp"

namespace ailfm::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

namespace {

/// Reads known keys of one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("invalid value for " + name_ + "." + key);
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  Section sub(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), name_ + "." + key);
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown key " + name_ + "." + item.key());
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty() || base_dir == ".") return path;
  return (fs::path(base_dir) / p).string();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, "config");
  int version = 0;
  top.get("schema_version", version);
  if (version != kSchemaVersion) {
    throw ConfigError("config schema_version must be " + std::to_string(kSchemaVersion));
  }
  auto& sp = cfg.sim;
  if (top.has("topology")) {
    auto s = top.sub("topology");
    s.get("nx", sp.nx);
    s.get("ny", sp.ny);
    s.get("nz", sp.nz);
    s.get("pitch_mm", sp.pitch_mm);
    s.get("memory_banks", sp.memory_banks);
    s.finish();
  }
  if (top.has("thermal")) {
    auto s = top.sub("thermal");
    s.get("g_lat", sp.thermal.g_lat);
    s.get("g_vert", sp.thermal.g_vert);
    s.get("g_sink", sp.thermal.g_sink);
    s.get("cap", sp.thermal.cap);
    s.get("t_amb", sp.thermal.t_amb);
    s.get("calibrate", sp.calibrate_thermal);
    s.get("calibration_power_w", sp.calibration_power_w);
    s.get("calibration_target_c", sp.calibration_target_c);
    s.finish();
  }
  if (top.has("power")) {
    auto s = top.sub("power");
    if (s.has("vf")) {
      std::vector<std::array<double, 2>> rows;
      s.get("vf", rows);
      std::vector<power::VfLevel> levels;
      for (const auto& r : rows) levels.push_back({r[0], r[1]});
      sp.vf = power::VfTable(levels);
    }
    s.get("dynamic_top_w", sp.dynamic_top_w);
    s.get("p_leak0", sp.p_leak0);
    s.get("gamma", sp.gamma);
    s.get("t_ref", sp.t_ref);
    s.get("s_max", sp.s_max);
    s.get("budget_lookahead", sp.budget_lookahead);
    s.get("background_w", sp.background_w);
    s.finish();
  }
  if (top.has("perf")) {
    auto s = top.sub("perf");
    s.get("profile_csv", cfg.profile_csv);
    cfg.profile_csv = resolve(base_dir, cfg.profile_csv);
    s.get("beta_mem", sp.profile.beta_mem);
    if (s.has("models")) {
      const auto& m = s.raw("models");
      if (!m.is_object()) throw ConfigError("perf.models must be an object");
      for (const auto& item : m.items()) {
        Section ms(item.value(), "perf.models." + item.key());
        perf::ModelSpec spec;
        ms.get("scale", spec.scale);
        ms.get("blocks", spec.blocks);
        ms.finish();
        sp.profile.models[item.key()] = spec;
      }
    }
    if (s.has("warmup")) {
      auto w = s.sub("warmup");
      w.get("delta", sp.warmup.delta);
      w.get("delta_mpki", sp.warmup.delta_m);
      w.get("tau_w", sp.warmup.tau_w);
      w.finish();
    }
    s.finish();
  }
  if (top.has("sim")) {
    auto s = top.sub("sim");
    s.get("epoch_s", sp.epoch_s);
    s.get("horizon_epochs", sp.horizon_epochs);
    s.get("feature_budget_cap", sp.feature_budget_cap);
    s.get("pipelines", cfg.pipelines);
    s.get("max_epochs", cfg.max_epochs);
    s.finish();
  }
  if (top.has("traces")) {
    auto s = top.sub("traces");
    auto& t = cfg.traces;
    s.get("models", t.models);
    s.get("amd_levels", t.amd_levels);
    s.get("budgets_w", t.budgets_w);
    s.get("t_th", t.t_th);
    s.get("seq_len", t.seq_len);
    s.get("slices", t.slices);
    s.get("median_slice", t.median_slice);
    s.get("heater_cores", t.heater_cores);
    s.get("heater_w", t.heater_w);
    s.get("amd_tolerance", t.amd_tolerance);
    s.get("label_horizon", cfg.label_horizon);
    s.finish();
  }
  if (top.has("oracle")) {
    auto s = top.sub("oracle");
    s.get("cap", cfg.oracle.cap);
    s.get("sigma_f_grid", cfg.oracle.sigma_f_grid);
    s.get("lengthscale_grid", cfg.oracle.lengthscale_grid);
    s.get("sigma_n_grid", cfg.oracle.sigma_n_grid);
    s.get("seed", cfg.oracle_seed);
    s.finish();
  }
  if (top.has("policy")) {
    auto s = top.sub("policy");
    auto& p = cfg.policy;
    s.get("tau", p.gate.tau);
    s.get("mc_passes", p.gate.mc_passes);
    s.get("dropout", cfg.dropout);
    s.get("lambda", p.hyper.lambda);
    s.get("lr", p.hyper.lr);
    s.get("momentum", p.hyper.momentum);
    s.get("batch", p.hyper.batch);
    s.get("epochs", p.hyper.epochs);
    s.get("rounds", p.rounds);
    s.get("episodes_per_round", p.episodes_per_round);
    s.get("oracle_extra_candidates", p.oracle_extra_candidates);
    s.get("seed", p.seed);
    s.get("train_t_th", cfg.train_t_th);
    s.get("train_seed_base", cfg.train_seed_base);
    s.finish();
  }
  if (top.has("dlfm")) {
    auto s = top.sub("dlfm");
    s.get("epsilon", cfg.policy.epsilon);
    s.get("epsilon_decay", cfg.policy.epsilon_decay);
    s.finish();
  }
  if (top.has("baselines")) {
    auto s = top.sub("baselines");
    s.get("coldest_margin_c", cfg.coldest_margin_c);
    s.finish();
  }
  if (top.has("workloads")) {
    const auto& arr = top.raw("workloads");
    if (!arr.is_array()) throw ConfigError("workloads must be an array");
    cfg.workloads.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section ws(arr[i], "workloads[" + std::to_string(i) + "]");
      WorkloadSpec w;
      ws.get("model", w.model);
      ws.get("seq_len", w.seq_len);
      ws.get("blocks", w.blocks);
      ws.finish();
      cfg.workloads.push_back(w);
    }
  }
  if (top.has("evaluation")) {
    auto s = top.sub("evaluation");
    auto& e = cfg.evaluation;
    s.get("t_th", e.t_th);
    s.get("seq_lens", e.seq_lens);
    s.get("seeds", e.seeds);
    s.get("schedulers", e.schedulers);
    s.get("reference", e.reference);
    s.get("window_epochs", e.window_epochs);
    s.finish();
  }
  if (top.has("outputs")) {
    auto s = top.sub("outputs");
    auto& o = cfg.outputs;
    s.get("traces", o.traces);
    s.get("dataset", o.dataset);
    s.get("oracle", o.oracle);
    s.get("policy", o.policy);
    s.get("dlfm", o.dlfm);
    s.get("report_json", o.report_json);
    s.get("report_csv", o.report_csv);
    s.finish();
  }
  top.finish();
  for (auto* p : {&cfg.outputs.traces, &cfg.outputs.dataset, &cfg.outputs.oracle, &cfg.outputs.policy,
                  &cfg.outputs.dlfm, &cfg.outputs.report_json, &cfg.outputs.report_csv}) {
    *p = resolve(base_dir, *p);
  }
  cfg.policy.max_epochs = cfg.max_epochs;
  cfg.policy.horizon = sp.horizon_epochs;
  cfg.policy.dropout = cfg.dropout;
  cfg.label_horizon = cfg.label_horizon > 0 ? cfg.label_horizon : sp.horizon_epochs;
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = fs::path(path).parent_path();
  return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

void validate(const ExperimentConfig& cfg) {
  const auto& sp = cfg.sim;
  if (sp.nx < 1 || sp.ny < 1 || sp.nz < 1) throw ConfigError("topology dimensions must be >= 1");
  if (cfg.pipelines < 1 || cfg.pipelines > sp.nx * sp.ny * sp.nz) {
    throw ConfigError("pipelines must lie in [1, core count]");
  }
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(sp.epoch_s > 0.0)) throw ConfigError("epoch_s must be positive");
  if (!cfg.profile_csv.empty() && !fs::exists(cfg.profile_csv)) {
    throw ConfigError("profile file not found: " + cfg.profile_csv);
  }
  const auto& e = cfg.evaluation;
  if (e.seeds.empty()) throw ConfigError("evaluation.seeds must not be empty");
  if (e.t_th.empty()) throw ConfigError("evaluation.t_th must not be empty");
  for (double t : e.t_th) {
    if (!(t > sp.thermal.t_amb)) throw ConfigError("every T_th must exceed ambient");
  }
  if (!(cfg.train_t_th > sp.thermal.t_amb)) throw ConfigError("train_t_th must exceed ambient");
  if (!(cfg.traces.t_th > sp.thermal.t_amb)) throw ConfigError("traces.t_th must exceed ambient");
  for (int l : e.seq_lens) {
    if (l < 1) throw ConfigError("sequence lengths must be positive");
  }
  if (cfg.workloads.empty()) throw ConfigError("workloads must not be empty");
  for (const auto& w : cfg.workloads) {
    if (!sp.profile.models.count(w.model)) throw ConfigError("unknown model " + w.model);
    if (w.seq_len < 1) throw ConfigError("workload seq_len must be positive");
  }
  for (const auto& m : cfg.traces.models) {
    if (!sp.profile.models.count(m)) throw ConfigError("unknown trace model " + m);
  }
  static const std::set<std::string> known{"stay", "coldest", "oracle", "ailfm", "dlfm"};
  for (const auto& s : e.schedulers) {
    if (!known.count(s)) throw ConfigError("unknown scheduler " + s);
  }
  if (e.window_epochs < 1) throw ConfigError("window_epochs must be >= 1");
  if (!(cfg.policy.gate.tau >= 0.0)) throw ConfigError("tau must be non-negative");
  if (cfg.policy.gate.mc_passes < 2) throw ConfigError("mc_passes must be >= 2");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (cfg.policy.rounds < 1 || cfg.policy.episodes_per_round < 1) {
    throw ConfigError("rounds and episodes_per_round must be >= 1");
  }
}

std::string config_to_json(const ExperimentConfig& cfg) {
  const auto& sp = cfg.sim;
  json vf = json::array();
  for (const auto& l : sp.vf.levels()) vf.push_back({l.freq_ghz, l.voltage});
  json models = json::object();
  for (const auto& [name, m] : sp.profile.models) models[name] = {{"scale", m.scale}, {"blocks", m.blocks}};
  json workloads = json::array();
  for (const auto& w : cfg.workloads) {
    workloads.push_back({{"model", w.model}, {"seq_len", w.seq_len}, {"blocks", w.blocks}});
  }
  const auto& p = cfg.policy;
  json j = {
      {"schema_version", kSchemaVersion},
      {"topology",
       {{"nx", sp.nx}, {"ny", sp.ny}, {"nz", sp.nz}, {"pitch_mm", sp.pitch_mm}, {"memory_banks", sp.memory_banks}}},
      {"thermal",
       {{"g_lat", sp.thermal.g_lat},
        {"g_vert", sp.thermal.g_vert},
        {"g_sink", sp.thermal.g_sink},
        {"cap", sp.thermal.cap},
        {"t_amb", sp.thermal.t_amb},
        {"calibrate", sp.calibrate_thermal},
        {"calibration_power_w", sp.calibration_power_w},
        {"calibration_target_c", sp.calibration_target_c}}},
      {"power",
       {{"vf", vf},
        {"dynamic_top_w", sp.dynamic_top_w},
        {"p_leak0", sp.p_leak0},
        {"gamma", sp.gamma},
        {"t_ref", sp.t_ref},
        {"s_max", sp.s_max},
        {"budget_lookahead", sp.budget_lookahead},
        {"background_w", sp.background_w}}},
      {"perf",
       {{"profile_csv", cfg.profile_csv},
        {"beta_mem", sp.profile.beta_mem},
        {"models", models},
        {"warmup", {{"delta", sp.warmup.delta}, {"delta_mpki", sp.warmup.delta_m}, {"tau_w", sp.warmup.tau_w}}}}},
      {"sim",
       {{"epoch_s", sp.epoch_s},
        {"horizon_epochs", sp.horizon_epochs},
        {"feature_budget_cap", sp.feature_budget_cap},
        {"pipelines", cfg.pipelines},
        {"max_epochs", cfg.max_epochs}}},
      {"traces",
       {{"models", cfg.traces.models},
        {"amd_levels", cfg.traces.amd_levels},
        {"budgets_w", cfg.traces.budgets_w},
        {"t_th", cfg.traces.t_th},
        {"seq_len", cfg.traces.seq_len},
        {"slices", cfg.traces.slices},
        {"median_slice", cfg.traces.median_slice},
        {"heater_cores", cfg.traces.heater_cores},
        {"heater_w", cfg.traces.heater_w},
        {"amd_tolerance", cfg.traces.amd_tolerance},
        {"label_horizon", cfg.label_horizon}}},
      {"oracle",
       {{"cap", cfg.oracle.cap},
        {"sigma_f_grid", cfg.oracle.sigma_f_grid},
        {"lengthscale_grid", cfg.oracle.lengthscale_grid},
        {"sigma_n_grid", cfg.oracle.sigma_n_grid},
        {"seed", cfg.oracle_seed}}},
      {"policy",
       {{"tau", p.gate.tau},
        {"mc_passes", p.gate.mc_passes},
        {"dropout", cfg.dropout},
        {"lambda", p.hyper.lambda},
        {"lr", p.hyper.lr},
        {"momentum", p.hyper.momentum},
        {"batch", p.hyper.batch},
        {"epochs", p.hyper.epochs},
        {"rounds", p.rounds},
        {"episodes_per_round", p.episodes_per_round},
        {"oracle_extra_candidates", p.oracle_extra_candidates},
        {"seed", p.seed},
        {"train_t_th", cfg.train_t_th},
        {"train_seed_base", cfg.train_seed_base}}},
      {"dlfm", {{"epsilon", p.epsilon}, {"epsilon_decay", p.epsilon_decay}}},
      {"baselines", {{"coldest_margin_c", cfg.coldest_margin_c}}},
      {"workloads", workloads},
      {"evaluation",
       {{"t_th", cfg.evaluation.t_th},
        {"seq_lens", cfg.evaluation.seq_lens},
        {"seeds", cfg.evaluation.seeds},
        {"schedulers", cfg.evaluation.schedulers},
        {"reference", cfg.evaluation.reference},
        {"window_epochs", cfg.evaluation.window_epochs}}},
      {"outputs",
       {{"traces", cfg.outputs.traces},
        {"dataset", cfg.outputs.dataset},
        {"oracle", cfg.outputs.oracle},
        {"policy", cfg.outputs.policy},
        {"dlfm", cfg.outputs.dlfm},
        {"report_json", cfg.outputs.report_json},
        {"report_csv", cfg.outputs.report_csv}}}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Schedulers

sim::Decision coldest_neighbor_decision(const sim::SimState& state, std::size_t pipeline,
                                        std::span<const sim::CoreId> assignment, double margin_c) {
  const sim::CoreId core = assignment[pipeline];
  if (state.temp[static_cast<Eigen::Index>(core)] < state.t_th - margin_c) return sim::Decision::stay();
  std::vector<bool> taken(state.platform->core_count(), false);
  for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
    if (!state.pipelines[i].done) taken[assignment[i]] = true;
  }
  std::optional<sim::CoreId> best;
  for (sim::CoreId nb : state.platform->topology().neighbors(core)) {
    if (taken[nb]) continue;
    const double t = state.temp[static_cast<Eigen::Index>(nb)];
    if (!best || t < state.temp[static_cast<Eigen::Index>(*best)] ||
        (t == state.temp[static_cast<Eigen::Index>(*best)] && nb < *best)) {
      best = nb;
    }
  }
  return best ? sim::Decision::migrate(*best, 0.0) : sim::Decision::stay();
}

PipelineDecider make_scheduler(const std::string& name, const ExperimentConfig& cfg, const Artifacts& art) {
  if (name == "stay") {
    return [](const sim::SimState&, std::size_t, std::span<const sim::CoreId>) { return sim::Decision::stay(); };
  }
  if (name == "coldest") {
    const double margin = cfg.coldest_margin_c;
    return [margin](const sim::SimState& s, std::size_t i, std::span<const sim::CoreId> a) {
      return coldest_neighbor_decision(s, i, a, margin);
    };
  }
  if (name == "oracle") {
    if (!art.mogpr) throw FitError("oracle scheduler needs an oracle model");
    const auto* m = &*art.mogpr;
    return [m](const sim::SimState& s, std::size_t i, std::span<const sim::CoreId> a) {
      return oracle::oracle_decision(*m, s, i, a);
    };
  }
  if (name == "ailfm") {
    if (!art.mogpr || !art.ailfm) throw FitError("ailfm scheduler needs policy and oracle models");
    const auto* m = &*art.mogpr;
    const auto* net = &*art.ailfm;
    auto gate = cfg.policy.gate;
    gate.seed = cfg.policy.seed;
    return [m, net, gate](const sim::SimState& s, std::size_t i, std::span<const sim::CoreId> a) {
      policy::GateOptions g = gate;
      g.seed = gate.seed ^ (s.seed * 0x9e3779b97f4a7c15ULL);
      return policy::decide(*net, *m, s, i, a, g);
    };
  }
  if (name == "dlfm") {
    if (!art.dlfm) throw FitError("dlfm scheduler needs a dlfm model");
    const auto* net = &*art.dlfm;
    return [net](const sim::SimState& s, std::size_t i, std::span<const sim::CoreId> a) {
      return policy::net_decision(*net, sim::build_decision_context(s, i, a));
    };
  }
  throw ConfigError("unknown scheduler " + name);
}

// ---------------------------------------------------------------------------
// Stages

std::shared_ptr<const sim::Platform> make_platform(const ExperimentConfig& cfg) {
  sim::SimParams p = cfg.sim;
  if (!cfg.profile_csv.empty()) p.profile = perf::load_profile_csv(cfg.profile_csv, p.profile);
  return sim::make_platform(p);
}

sim::Workload make_workload(const ExperimentConfig& cfg, const sim::Platform& plat, const WorkloadSpec& w) {
  return sim::build_workload(plat.profile(), w.model, w.seq_len, w.blocks, cfg.sim.epoch_s);
}

policy::EpisodeFactory training_episodes(const ExperimentConfig& cfg,
                                         std::shared_ptr<const sim::Platform> plat) {
  std::vector<sim::Workload> ws;
  for (const auto& w : cfg.workloads) ws.push_back(make_workload(cfg, *plat, w));
  const int per_round = cfg.policy.episodes_per_round;
  return [plat, ws, per_round, pipes = cfg.pipelines, tth = cfg.train_t_th,
          base = cfg.train_seed_base](int round, int episode) {
    const auto k = static_cast<std::size_t>(round * per_round + episode);
    return sim::make_state(plat, ws[k % ws.size()], pipes, tth, base + k);
  };
}

namespace {

sim::EpisodeTrace run_with(const ExperimentConfig& cfg, std::shared_ptr<const sim::Platform> plat,
                           const PipelineDecider& decide, const WorkloadSpec& w, double t_th,
                           std::uint64_t seed) {
  auto state = sim::make_state(plat, make_workload(cfg, *plat, w), cfg.pipelines, t_th, seed);
  return sim::run_episode(
      std::move(state), [&](const sim::SimState& s) { return sim::decide_all(s, decide); }, cfg.max_epochs);
}

}  // namespace

sim::EpisodeTrace run_baseline_coldest(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto plat = make_platform(cfg);
  return run_with(cfg, plat, make_scheduler("coldest", cfg, {}), cfg.workloads.front(), cfg.train_t_th, seed);
}

DlfmRun run_baseline_dlfm(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto plat = make_platform(cfg);
  DlfmRun out;
  out.training = policy::dlfm_loop(training_episodes(cfg, plat), cfg.policy);
  Artifacts art;
  art.dlfm = out.training.net;
  out.trace = run_with(cfg, plat, make_scheduler("dlfm", cfg, art), cfg.workloads.front(), cfg.train_t_th, seed);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ReportRow run_scheduled_episode(const ExperimentConfig& cfg, std::shared_ptr<const sim::Platform> plat,
                                const std::string& scheduler, const PipelineDecider& decide,
                                const WorkloadSpec& workload, double t_th, std::uint64_t seed,
                                sim::EpisodeTrace* trace_out) {
  using Clock = std::chrono::steady_clock;
  double spent_us = 0.0;
  int decisions = 0;
  const PipelineDecider timed = [&](const sim::SimState& s, std::size_t i, std::span<const sim::CoreId> a) {
    const auto t0 = Clock::now();
    auto d = decide(s, i, a);
    spent_us += std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
    ++decisions;
    return d;
  };
  const auto trace = run_with(cfg, plat, timed, workload, t_th, seed);

  ReportRow r;
  r.scheduler = scheduler;
  r.workload = workload.model;
  r.t_th = t_th;
  r.seq_len = workload.seq_len;
  r.seed = seed;
  const auto& s = trace.summary;
  r.exec_time_s = s.exec_time_s;
  r.o_mig_s = s.o_mig_s;
  r.o_dvfs_s = s.o_dvfs_s;
  r.epochs = s.epochs;
  r.migrations = s.migrations;
  r.safe_overrides = s.safe_overrides;
  r.truncated = s.truncated;
  r.total_instructions = s.total_instructions;
  r.violation_pct = s.epochs > 0 ? 100.0 * s.violations / s.epochs : 0.0;
  r.queries_per_epoch = s.decisions > 0 ? static_cast<double>(s.queries) / s.decisions : 0.0;
  r.decision_latency_us = decisions > 0 ? spent_us / decisions : 0.0;
  std::vector<double> peaks;
  for (std::size_t e = 0; e < trace.records.size(); ++e) {
    peaks.push_back(trace.records[e].t_peak);
    if (static_cast<int>(e) < cfg.evaluation.window_epochs) r.window_instructions += trace.records[e].instructions;
  }
  if (!peaks.empty()) {
    r.t_peak_max = *std::max_element(peaks.begin(), peaks.end());
    double sum = 0.0;
    for (double p : peaks) sum += p;
    r.t_peak_mean = sum / static_cast<double>(peaks.size());
    r.t_peak_q1 = quantile(peaks, 0.25);
    r.t_peak_median = quantile(peaks, 0.5);
    r.t_peak_q3 = quantile(peaks, 0.75);
  }
  if (trace_out) *trace_out = trace;
  return r;
}

void normalize(std::vector<ReportRow>& rows, const std::string& reference) {
  if (rows.empty()) return;
  std::string ref = reference;
  if (std::none_of(rows.begin(), rows.end(), [&](const ReportRow& r) { return r.scheduler == ref; })) {
    ref = rows.front().scheduler;
  }
  std::map<std::tuple<std::string, double, int, std::uint64_t>, double> base;
  for (const auto& r : rows) {
    if (r.scheduler == ref) base[{r.workload, r.t_th, r.seq_len, r.seed}] = r.exec_time_s;
  }
  for (auto& r : rows) {
    const auto it = base.find({r.workload, r.t_th, r.seq_len, r.seed});
    r.normalized_exec_time = it != base.end() && it->second > 0.0 ? r.exec_time_s / it->second : 0.0;
  }
}

std::vector<ReportRow> evaluate(const ExperimentConfig& cfg, const Artifacts& art, const std::string& trace_dir) {
  if (!trace_dir.empty()) fs::create_directories(trace_dir);
  const auto plat = make_platform(cfg);
  std::vector<std::pair<std::string, PipelineDecider>> scheds;
  for (const auto& name : cfg.evaluation.schedulers) scheds.emplace_back(name, make_scheduler(name, cfg, art));
  std::vector<ReportRow> rows;
  for (const auto& base : cfg.workloads) {
    std::vector<int> lens = cfg.evaluation.seq_lens;
    if (lens.empty()) lens.push_back(base.seq_len);
    for (double tth : cfg.evaluation.t_th) {
      for (int len : lens) {
        WorkloadSpec w = base;
        w.seq_len = len;
        for (auto seed : cfg.evaluation.seeds) {
          for (const auto& [name, decide] : scheds) {
            sim::EpisodeTrace trace;
            rows.push_back(run_scheduled_episode(cfg, plat, name, decide, w, tth, seed,
                                                 trace_dir.empty() ? nullptr : &trace));
            if (!trace_dir.empty()) {
              std::ostringstream stem;
              stem << name << '_' << w.model << "_tth" << tth << "_L" << len << "_s" << seed;
              const auto base_path = (fs::path(trace_dir) / stem.str()).string();
              write_episode_trace(trace, base_path + ".csv", base_path + ".json");
            }
          }
        }
      }
    }
  }
  normalize(rows, cfg.evaluation.reference);
  return rows;
}

namespace {

json row_json(const ReportRow& r) {
  return {{"scheduler", r.scheduler},
          {"workload", r.workload},
          {"t_th", r.t_th},
          {"seq_len", r.seq_len},
          {"seed", r.seed},
          {"exec_time_s", r.exec_time_s},
          {"normalized_exec_time", r.normalized_exec_time},
          {"t_peak_max", r.t_peak_max},
          {"t_peak_mean", r.t_peak_mean},
          {"t_peak_q1", r.t_peak_q1},
          {"t_peak_median", r.t_peak_median},
          {"t_peak_q3", r.t_peak_q3},
          {"violation_pct", r.violation_pct},
          {"queries_per_epoch", r.queries_per_epoch},
          {"o_mig_s", r.o_mig_s},
          {"o_dvfs_s", r.o_dvfs_s},
          {"decision_latency_us", r.decision_latency_us},
          {"window_instructions", r.window_instructions},
          {"total_instructions", r.total_instructions},
          {"epochs", r.epochs},
          {"migrations", r.migrations},
          {"safe_overrides", r.safe_overrides},
          {"truncated", r.truncated}};
}

const std::vector<std::string> kCsvColumns{
    "scheduler",   "workload",          "t_th",          "seq_len",       "seed",
    "exec_time_s", "normalized_exec_time", "t_peak_max", "t_peak_mean",   "t_peak_q1",
    "t_peak_median", "t_peak_q3",       "violation_pct", "queries_per_epoch", "o_mig_s",
    "o_dvfs_s",    "decision_latency_us", "window_instructions", "total_instructions", "epochs",
    "migrations",  "safe_overrides",    "truncated"};

}  // namespace

void write_report_json(const std::vector<ReportRow>& rows, const ExperimentConfig& cfg, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["reference_scheduler"] = cfg.evaluation.reference;
  j["window_epochs"] = cfg.evaluation.window_epochs;
  j["rows"] = json::array();
  for (const auto& r : rows) j["rows"].push_back(row_json(r));

  // Medians over seeds per (scheduler, workload, T_th, L).
  std::map<std::tuple<std::string, std::string, double, int>, std::vector<const ReportRow*>> cells;
  for (const auto& r : rows) cells[{r.scheduler, r.workload, r.t_th, r.seq_len}].push_back(&r);
  j["medians"] = json::array();
  for (const auto& [key, rs] : cells) {
    auto med = [&](auto get) {
      std::vector<double> v;
      for (const auto* r : rs) v.push_back(get(*r));
      return quantile(v, 0.5);
    };
    j["medians"].push_back({{"scheduler", std::get<0>(key)},
                            {"workload", std::get<1>(key)},
                            {"t_th", std::get<2>(key)},
                            {"seq_len", std::get<3>(key)},
                            {"seeds", rs.size()},
                            {"exec_time_s", med([](const ReportRow& r) { return r.exec_time_s; })},
                            {"window_instructions", med([](const ReportRow& r) { return r.window_instructions; })},
                            {"violation_pct", med([](const ReportRow& r) { return r.violation_pct; })},
                            {"queries_per_epoch", med([](const ReportRow& r) { return r.queries_per_epoch; })},
                            {"t_peak_max", med([](const ReportRow& r) { return r.t_peak_max; })}});
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  csv::write_row(out, kCsvColumns);
  for (const auto& r : rows) {
    const json j = row_json(r);
    std::vector<std::string> f;
    for (const auto& c : kCsvColumns) {
      const auto& v = j.at(c);
      if (v.is_string()) {
        f.push_back(v.get<std::string>());
      } else if (v.is_boolean()) {
        f.push_back(v.get<bool>() ? "true" : "false");
      } else if (v.is_number_float()) {
        f.push_back(csv::num(v.get<double>()));
      } else {
        f.push_back(v.dump());
      }
    }
    csv::write_row(out, f);
  }
}

std::vector<ReportRow> read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<ReportRow> rows;
  try {
    const json j = json::parse(in);
    for (const auto& o : j.at("rows")) {
      ReportRow r;
      r.scheduler = o.at("scheduler").get<std::string>();
      r.workload = o.at("workload").get<std::string>();
      r.t_th = o.at("t_th").get<double>();
      r.seq_len = o.at("seq_len").get<int>();
      r.seed = o.at("seed").get<std::uint64_t>();
      r.exec_time_s = o.at("exec_time_s").get<double>();
      r.normalized_exec_time = o.at("normalized_exec_time").get<double>();
      r.t_peak_max = o.at("t_peak_max").get<double>();
      r.t_peak_mean = o.at("t_peak_mean").get<double>();
      r.t_peak_q1 = o.at("t_peak_q1").get<double>();
      r.t_peak_median = o.at("t_peak_median").get<double>();
      r.t_peak_q3 = o.at("t_peak_q3").get<double>();
      r.violation_pct = o.at("violation_pct").get<double>();
      r.queries_per_epoch = o.at("queries_per_epoch").get<double>();
      r.o_mig_s = o.at("o_mig_s").get<double>();
      r.o_dvfs_s = o.at("o_dvfs_s").get<double>();
      r.decision_latency_us = o.at("decision_latency_us").get<double>();
      r.window_instructions = o.at("window_instructions").get<double>();
      r.total_instructions = o.at("total_instructions").get<double>();
      r.epochs = o.at("epochs").get<int>();
      r.migrations = o.at("migrations").get<int>();
      r.safe_overrides = o.at("safe_overrides").get<int>();
      r.truncated = o.at("truncated").get<bool>();
      rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return rows;
}

}  // namespace ailfm::harness

namespace ailfm::harness {

void write_episode_trace(const sim::EpisodeTrace& trace, const std::string& csv_path,
                         const std::string& summary_path) {
  {
    std::ofstream out(csv_path);
    if (!out) throw ConfigError("cannot write " + csv_path);
    csv::write_row(out, {"epoch", "time_s", "t_peak", "budget_w", "pipeline", "kernel", "core", "amd", "freq_ghz",
                         "ips", "mpki", "instructions", "decision", "target", "queried"});
    for (const auto& e : trace.records) {
      for (const auto& p : e.pipelines) {
        csv::write_row(out, {std::to_string(e.epoch), csv::num(e.time_s), csv::num(e.t_peak),
                             csv::num(p.budget_w), std::to_string(p.pipeline), std::string(perf::to_string(p.kernel)),
                             std::to_string(p.core), csv::num(p.amd), csv::num(p.freq_ghz), csv::num(p.ips),
                             csv::num(p.mpki), csv::num(p.instructions),
                             p.decision.is_migrate() ? "migrate" : "stay",
                             p.decision.is_migrate() ? std::to_string(p.decision.target) : "",
                             p.decision.queried ? "true" : "false"});
      }
    }
  }
  const auto& s = trace.summary;
  const json j = {{"exec_time_s", s.exec_time_s},     {"o_mig_s", s.o_mig_s},
                  {"o_dvfs_s", s.o_dvfs_s},           {"epochs", s.epochs},
                  {"violations", s.violations},       {"truncated", s.truncated},
                  {"total_instructions", s.total_instructions}, {"queries", s.queries},
                  {"decisions", s.decisions},         {"migrations", s.migrations},
                  {"safe_overrides", s.safe_overrides}};
  std::ofstream out(summary_path);
  if (!out) throw ConfigError("cannot write " + summary_path);
  out << j.dump(2) << '\n';
}

}  // namespace ailfm::harness
