#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ailfm/errors.hpp"
#include "ailfm/harness.hpp"

namespace ailfm::harness {

namespace fs = std::filesystem;

namespace {

ExperimentConfig config_from(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig cfg;
    validate(cfg);
    return cfg;
  }
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return load_config(path);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw FitError(std::string("missing ") + what + " file: " + path);
}

void print_rounds(const char* name, const policy::LoopResult& r) {
  for (const auto& s : r.rounds) {
    std::cout << name << " round " << s.round << ": decisions " << s.decisions << ", queries " << s.queries
              << ", queries/decision " << s.queries_per_epoch << ", violation% " << s.violation_pct
              << ", loss " << s.final_loss << ", |D_oracle| " << s.oracle_pool << ", |D_agent| "
              << s.agent_pool << '\n';
  }
}

void stage_traces(const ExperimentConfig& cfg, const std::string& out) {
  const auto plat = make_platform(cfg);
  const auto traces = sim::collect_traces(*plat, cfg.traces);
  traces.write_csv(out);
  std::cout << "wrote " << traces.row_count() << " trace rows (" << traces.runs.size() << " runs) to " << out
            << '\n';
}

void stage_oracle(const ExperimentConfig& cfg, const std::string& traces_path, const std::string& dataset_path,
                  const std::string& out) {
  const auto plat = make_platform(cfg);
  sim::TraceDataset traces;
  if (fs::exists(traces_path)) {
    traces = sim::TraceDataset::read_csv(traces_path);
  } else {
    traces = sim::collect_traces(*plat, cfg.traces);
    traces.write_csv(traces_path);
  }
  const auto data = sim::build_training_set(*plat, cfg.traces, traces, cfg.label_horizon, cfg.oracle_seed);
  data.write_csv(dataset_path);
  const auto router_data = oracle::router_samples(traces);
  const auto mogpr = oracle::fit_mogpr(data, router_data, cfg.oracle, cfg.oracle_seed);
  mogpr.save(out);
  std::cout << "wrote " << data.samples.size() << " labelled pairs to " << dataset_path << '\n';
  std::cout << "routing accuracy " << oracle::routing_accuracy(mogpr.router, router_data) << '\n';
  for (const auto& e : mogpr.experts) {
    std::cout << "expert " << perf::to_string(e.kernel) << ": n " << e.size() << ", sigma_f " << e.hyper.sigma_f
              << ", l " << e.hyper.lengthscale << ", sigma_n " << e.hyper.sigma_n << ", log ML " << e.log_ml
              << '\n';
  }
  std::cout << "wrote " << out << '\n';
}

void stage_policy(const ExperimentConfig& cfg, const std::string& oracle_path, const std::string& out,
                  const std::string& dlfm_out) {
  require_file(oracle_path, "oracle model");
  const auto mogpr = oracle::MoGpr::load(oracle_path);
  const auto plat = make_platform(cfg);
  const auto episodes = training_episodes(cfg, plat);
  const auto ail = policy::active_il_loop(mogpr, episodes, cfg.policy);
  print_rounds("ailfm", ail);
  ail.net.save(out);
  std::cout << "wrote " << out << '\n';
  if (!dlfm_out.empty()) {
    const auto dl = policy::dlfm_loop(episodes, cfg.policy);
    print_rounds("dlfm", dl);
    dl.net.save(dlfm_out);
    std::cout << "wrote " << dlfm_out << '\n';
  }
}

Artifacts load_artifacts(const ExperimentConfig& cfg, const std::string& oracle_path,
                         const std::string& policy_path, const std::string& dlfm_path) {
  Artifacts art;
  bool need_oracle = false, need_policy = false, need_dlfm = false;
  for (const auto& s : cfg.evaluation.schedulers) {
    need_oracle |= s == "oracle" || s == "ailfm";
    need_policy |= s == "ailfm";
    need_dlfm |= s == "dlfm";
  }
  if (need_oracle) {
    require_file(oracle_path, "oracle model");
    art.mogpr = oracle::MoGpr::load(oracle_path);
  }
  if (need_policy) {
    require_file(policy_path, "policy model");
    art.ailfm = policy::PolicyNet::load(policy_path);
  }
  if (need_dlfm) {
    require_file(dlfm_path, "dlfm model");
    art.dlfm = policy::PolicyNet::load(dlfm_path);
  }
  return art;
}

void stage_evaluate(const ExperimentConfig& cfg, const Artifacts& art, const std::string& json_out,
                    const std::string& csv_out, const std::string& trace_dir) {
  const auto rows = evaluate(cfg, art, trace_dir);
  write_report_json(rows, cfg, json_out);
  if (!csv_out.empty()) write_report_csv(rows, csv_out);
  std::cout << "wrote " << rows.size() << " report rows to " << json_out << '\n';
}

}  // namespace

int cli(int argc, const char* const* argv) {
  CLI::App app{"Thermal- and kernel-aware scheduling on a simulated 3D many-core chip", "ailfm"};
  app.require_subcommand(1);
  std::string config_path;

  auto* cal = app.add_subcommand("calibrate-thermal", "Fit g_sink so uniform load hits the target peak");
  cal->add_option("--config", config_path, "config.json");
  std::string cal_out;
  cal->add_option("--out", cal_out, "write the calibrated config here");

  auto* col = app.add_subcommand("collect-traces", "Sweep operating points and record per-slice counters");
  col->add_option("--config", config_path, "config.json");
  std::string traces_out;
  col->add_option("--out", traces_out, "traces.csv");

  auto* tor = app.add_subcommand("train-oracle", "Label operating-point pairs and fit the MoGPR Oracle");
  tor->add_option("--config", config_path, "config.json");
  std::string tor_traces, tor_dataset, tor_out;
  tor->add_option("--traces", tor_traces, "traces.csv (collected if absent)");
  tor->add_option("--dataset", tor_dataset, "dataset.csv output");
  tor->add_option("--out", tor_out, "oracle.model");

  auto* tpo = app.add_subcommand("train-policy", "Active imitation against the Oracle, plus the DLFM baseline");
  tpo->add_option("--config", config_path, "config.json");
  std::string tpo_oracle, tpo_out, tpo_dlfm;
  bool no_dlfm = false;
  tpo->add_option("--oracle", tpo_oracle, "oracle.model");
  tpo->add_option("--out", tpo_out, "policy.model");
  tpo->add_option("--dlfm-out", tpo_dlfm, "dlfm.model");
  tpo->add_flag("--no-dlfm", no_dlfm, "skip the DLFM baseline");

  auto* ev = app.add_subcommand("evaluate", "Run the evaluation sweep and write reports");
  ev->add_option("--config", config_path, "config.json");
  std::string ev_oracle, ev_policy, ev_dlfm, ev_out, ev_csv, ev_traces;
  std::vector<double> ev_tth;
  std::vector<int> ev_len;
  std::vector<std::uint64_t> ev_seeds;
  std::vector<std::string> ev_sched;
  ev->add_option("--oracle", ev_oracle, "oracle.model");
  ev->add_option("--policy", ev_policy, "policy.model");
  ev->add_option("--dlfm", ev_dlfm, "dlfm.model");
  ev->add_option("--tth", ev_tth, "T_th values (deg C)");
  ev->add_option("--seq-len", ev_len, "sequence lengths");
  ev->add_option("--seeds", ev_seeds, "evaluation seeds");
  ev->add_option("--schedulers", ev_sched, "stay, coldest, oracle, ailfm, dlfm");
  ev->add_option("--out", ev_out, "report.json");
  ev->add_option("--csv", ev_csv, "report.csv");
  ev->add_option("--trace-dir", ev_traces, "per-episode CSV and summary JSON");

  auto* cmp = app.add_subcommand("compare", "Every stage end to end into one directory");
  cmp->add_option("--config", config_path, "config.json");
  std::string cmp_dir = ".";
  cmp->add_option("--out-dir", cmp_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cerr << app.help();
    return 2;
  }

  try {
    auto cfg = config_from(config_path);
    const auto& out = cfg.outputs;
    if (*cal) {
      const auto plat = make_platform(cfg);
      const auto& tp = plat->network().params();
      const thermal::Vec uniform = thermal::Vec::Constant(static_cast<Eigen::Index>(plat->core_count()),
                                                          cfg.sim.calibration_power_w);
      const double peak = thermal::peak_temperature(thermal::steady_state(plat->network(), uniform));
      std::cout << "g_sink " << tp.g_sink << " W/K, uniform " << cfg.sim.calibration_power_w << " W peak "
                << peak << " C\n";
      if (!cal_out.empty()) {
        // Edit the document as written so relative paths keep their meaning.
        nlohmann::json doc;
        if (config_path.empty()) {
          doc = nlohmann::json::parse(config_to_json(ExperimentConfig{}));
        } else {
          std::ifstream in(config_path);
          doc = nlohmann::json::parse(in);
        }
        doc["thermal"]["g_sink"] = tp.g_sink;
        doc["thermal"]["calibrate"] = false;
        std::ofstream f(cal_out);
        if (!f) throw ConfigError("cannot write " + cal_out);
        f << doc.dump(2) << '\n';
      }
    } else if (*col) {
      stage_traces(cfg, traces_out.empty() ? out.traces : traces_out);
    } else if (*tor) {
      stage_oracle(cfg, tor_traces.empty() ? out.traces : tor_traces, tor_dataset.empty() ? out.dataset : tor_dataset,
                   tor_out.empty() ? out.oracle : tor_out);
    } else if (*tpo) {
      stage_policy(cfg, tpo_oracle.empty() ? out.oracle : tpo_oracle, tpo_out.empty() ? out.policy : tpo_out,
                   no_dlfm ? "" : (tpo_dlfm.empty() ? out.dlfm : tpo_dlfm));
    } else if (*ev) {
      if (!ev_tth.empty()) cfg.evaluation.t_th = ev_tth;
      if (!ev_len.empty()) cfg.evaluation.seq_lens = ev_len;
      if (!ev_seeds.empty()) cfg.evaluation.seeds = ev_seeds;
      if (!ev_sched.empty()) {
        cfg.evaluation.schedulers = ev_sched;
        if (std::find(ev_sched.begin(), ev_sched.end(), cfg.evaluation.reference) == ev_sched.end()) {
          cfg.evaluation.reference = ev_sched.front();
        }
      }
      validate(cfg);
      const auto art = load_artifacts(cfg, ev_oracle.empty() ? out.oracle : ev_oracle,
                                      ev_policy.empty() ? out.policy : ev_policy, ev_dlfm.empty() ? out.dlfm : ev_dlfm);
      stage_evaluate(cfg, art, ev_out.empty() ? out.report_json : ev_out, ev_csv.empty() ? out.report_csv : ev_csv,
                     ev_traces);
    } else if (*cmp) {
      fs::create_directories(cmp_dir);
      auto in_dir = [&](const std::string& p) { return (fs::path(cmp_dir) / fs::path(p).filename()).string(); };
      const auto traces = in_dir(out.traces), dataset = in_dir(out.dataset), oracle = in_dir(out.oracle),
                 pol = in_dir(out.policy), dlfm = in_dir(out.dlfm);
      stage_traces(cfg, traces);
      stage_oracle(cfg, traces, dataset, oracle);
      stage_policy(cfg, oracle, pol, dlfm);
      const auto art = load_artifacts(cfg, oracle, pol, dlfm);
      stage_evaluate(cfg, art, in_dir(out.report_json), in_dir(out.report_csv), "");
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration failure: " << e.what() << '\n';
    return 3;
  } catch (const FitError& e) {
    std::cerr << "fit failure: " << e.what() << '\n';
    return 4;
  } catch (const TrainingError& e) {
    std::cerr << "training failure: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace ailfm::harness
