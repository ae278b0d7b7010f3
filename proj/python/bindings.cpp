#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "ailfm/errors.hpp"
#include "ailfm/harness.hpp"

namespace py = pybind11;
using namespace ailfm;

namespace {

py::dict row_dict(const harness::ReportRow& r) {
  py::dict d;
  d["scheduler"] = r.scheduler;
  d["workload"] = r.workload;
  d["t_th"] = r.t_th;
  d["seq_len"] = r.seq_len;
  d["seed"] = r.seed;
  d["exec_time_s"] = r.exec_time_s;
  d["normalized_exec_time"] = r.normalized_exec_time;
  d["t_peak_max"] = r.t_peak_max;
  d["t_peak_mean"] = r.t_peak_mean;
  d["t_peak_q1"] = r.t_peak_q1;
  d["t_peak_median"] = r.t_peak_median;
  d["t_peak_q3"] = r.t_peak_q3;
  d["violation_pct"] = r.violation_pct;
  d["queries_per_epoch"] = r.queries_per_epoch;
  d["o_mig_s"] = r.o_mig_s;
  d["o_dvfs_s"] = r.o_dvfs_s;
  d["decision_latency_us"] = r.decision_latency_us;
  d["window_instructions"] = r.window_instructions;
  d["total_instructions"] = r.total_instructions;
  d["epochs"] = r.epochs;
  d["migrations"] = r.migrations;
  d["safe_overrides"] = r.safe_overrides;
  d["truncated"] = r.truncated;
  return d;
}

harness::Artifacts load_artifacts(const std::optional<std::string>& oracle_path,
                                  const std::optional<std::string>& policy_path,
                                  const std::optional<std::string>& dlfm_path) {
  harness::Artifacts art;
  if (oracle_path) art.mogpr = oracle::MoGpr::load(*oracle_path);
  if (policy_path) art.ailfm = policy::PolicyNet::load(*policy_path);
  if (dlfm_path) art.dlfm = policy::PolicyNet::load(*dlfm_path);
  return art;
}

policy::Features to_features(const std::vector<double>& v) {
  if (v.size() != policy::kInputs) throw py::value_error("expected 10 features");
  policy::Features f;
  std::copy(v.begin(), v.end(), f.begin());
  return f;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the ailfm simulator, Oracle and migration policy";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def("kernels", [] {
    std::vector<std::string> out;
    for (auto k : perf::kAllKernels) out.emplace_back(perf::to_string(k));
    return out;
  });

  m.def(
      "amd_table",
      [](int nx, int ny, int nz) { return arch::build_topology(nx, ny, nz, 1.0, 128).amd_table(); },
      py::arg("nx") = 4, py::arg("ny") = 4, py::arg("nz") = 4, "Per-core AMD in id order (x fastest)");
  m.def(
      "mean_amd", [](int nx, int ny, int nz) { return arch::mean_amd(arch::build_topology(nx, ny, nz, 1.0, 128)); },
      py::arg("nx") = 4, py::arg("ny") = 4, py::arg("nz") = 4);

  m.def(
      "ips_at",
      [](const std::string& kernel, double amd, double freq_ghz) {
        return perf::ips_at(perf::KernelProfile::defaults(), perf::kernel_from_string(kernel), amd, freq_ghz);
      },
      py::arg("kernel"), py::arg("amd"), py::arg("freq_ghz") = 3.0);
  m.def(
      "mpki",
      [](const std::string& kernel, double amd) {
        return perf::mpki(perf::KernelProfile::defaults(), perf::kernel_from_string(kernel), amd);
      },
      py::arg("kernel"), py::arg("amd"));

  m.def(
      "steady_state",
      [](const Eigen::VectorXd& power, int nx, int ny, int nz, double g_lat, double g_vert, double g_sink,
         double t_amb) {
        thermal::ThermalParams p;
        p.g_lat = g_lat;
        p.g_vert = g_vert;
        p.g_sink = g_sink;
        p.t_amb = t_amb;
        const auto net = thermal::build_rc_network(arch::ChipTopology(nx, ny, nz, 1.0, 128), p);
        if (power.size() != static_cast<Eigen::Index>(net.size())) throw py::value_error("power size mismatch");
        return Eigen::VectorXd(thermal::steady_state(net, power));
      },
      py::arg("power"), py::arg("nx") = 4, py::arg("ny") = 4, py::arg("nz") = 4, py::arg("g_lat") = 0.3,
      py::arg("g_vert") = 0.6, py::arg("g_sink") = 2.5, py::arg("t_amb") = 45.0,
      "Steady-state temperatures (deg C) for per-core power (W)");

  m.def(
      "parse_config", [](const std::string& text) { return harness::config_to_json(harness::parse_config(text)); },
      py::arg("text"), "Validate a config document and return it with every default filled in");
  m.def("config_to_json", [] { return harness::config_to_json(harness::ExperimentConfig{}); },
        "The default config");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"ailfm"};
        for (const auto& a : args) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return harness::cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Run a CLI subcommand; returns the exit code");

  m.def(
      "run_episode",
      [](const std::string& config, const std::string& scheduler, const std::string& model, int seq_len,
         double t_th, std::uint64_t seed, std::optional<std::string> oracle_path,
         std::optional<std::string> policy_path, std::optional<std::string> dlfm_path) {
        const auto cfg = harness::parse_config(config);
        const auto art = load_artifacts(oracle_path, policy_path, dlfm_path);
        harness::ReportRow row;
        {
          py::gil_scoped_release release;
          const auto plat = harness::make_platform(cfg);
          const auto decide = harness::make_scheduler(scheduler, cfg, art);
          row = harness::run_scheduled_episode(cfg, plat, scheduler, decide, {model, seq_len, 0}, t_th, seed);
        }
        return row_dict(row);
      },
      py::arg("config") = "{\"schema_version\": 1}", py::arg("scheduler") = "stay", py::arg("model") = "vit-base",
      py::arg("seq_len") = 256, py::arg("t_th") = 75.0, py::arg("seed") = 1, py::arg("oracle") = py::none(),
      py::arg("policy") = py::none(), py::arg("dlfm") = py::none(), "One episode; returns its report row");

  m.def(
      "evaluate",
      [](const std::string& config, std::optional<std::string> oracle_path, std::optional<std::string> policy_path,
         std::optional<std::string> dlfm_path) {
        const auto cfg = harness::parse_config(config);
        const auto art = load_artifacts(oracle_path, policy_path, dlfm_path);
        std::vector<harness::ReportRow> rows;
        {
          py::gil_scoped_release release;
          rows = harness::evaluate(cfg, art);
        }
        py::list out;
        for (const auto& r : rows) out.append(row_dict(r));
        return out;
      },
      py::arg("config"), py::arg("oracle") = py::none(), py::arg("policy") = py::none(), py::arg("dlfm") = py::none(),
      "Evaluation sweep from a config document; returns normalized report rows");

  py::class_<policy::PolicyNet>(m, "PolicyNet")
      .def_static("load", &policy::PolicyNet::load, py::arg("path"))
      .def_static(
          "init", [](std::uint64_t seed, double dropout) { return policy::init_policy(seed, dropout); },
          py::arg("seed") = 0, py::arg("dropout") = 0.1)
      .def("save", &policy::PolicyNet::save, py::arg("path"))
      .def_property_readonly("widths", [](const policy::PolicyNet& n) { return n.widths; })
      .def_property_readonly("dropout", [](const policy::PolicyNet& n) { return n.dropout; })
      .def("parameter_count", &policy::PolicyNet::parameter_count)
      .def(
          "predict_utility",
          [](const policy::PolicyNet& n, const std::vector<double>& f) {
            return policy::predict_utility(n, to_features(f));
          },
          py::arg("features"))
      .def(
          "mc_uncertainty",
          [](const policy::PolicyNet& n, const std::vector<double>& f, int passes, std::uint64_t seed) {
            const auto e = policy::mc_uncertainty(n, to_features(f), passes, seed);
            return py::make_tuple(e.mean, e.variance);
          },
          py::arg("features"), py::arg("passes") = 20, py::arg("seed") = 0,
          "(mean utility, variance) over dropout passes");
}
