#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "ailfm/errors.hpp"
#include "ailfm/harness.hpp"
#include "fixtures.hpp"

using namespace ailfm;
using namespace ailfm::harness;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ailfm_h_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "ailfm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli(static_cast<int>(argv.size()), argv.data());
}

// Runs one pipeline to its coldest-neighbour trigger under a fixed temperature field.
sim::SimState one_pipeline(double t_th) {
  auto w = std::make_shared<const sim::Workload>(fixtures::vit());
  const auto& topo = fixtures::platform()->topology();
  return sim::make_state(fixtures::platform(), {w}, {topo.id({1, 1, 1})}, t_th, 1);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config parsing") {
  const auto cfg = parse_config(R"({"schema_version": 1, "sim": {"pipelines": 4}, "policy": {"tau": 0.2}})");
  CHECK(cfg.pipelines == 4);
  CHECK(cfg.policy.gate.tau == 0.2);
  CHECK(cfg.evaluation.seq_lens == std::vector<int>{128, 256, 512, 1024});
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "sim": {"pipelines": "x"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "evaluation": {"t_th": [40]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "evaluation": {"seeds": []}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 1, "perf": {"profile_csv": "/nonexistent.csv"}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

  // Serialized defaults parse back to the same document.
  const auto text = config_to_json(ExperimentConfig{});
  CHECK(config_to_json(parse_config(text)) == text);
}

TEST_CASE("coldest-neighbour baseline") {
  auto cold = one_pipeline(75.0);
  cold.temp.setConstant(45.0);
  CHECK_FALSE(coldest_neighbor_decision(cold, 0, cold.assignment(), 2.0).is_migrate());

  auto s = one_pipeline(75.0);
  const auto& topo = s.platform->topology();
  const auto src = topo.id({1, 1, 1});
  s.temp.setConstant(70.0);
  s.temp[static_cast<Eigen::Index>(src)] = 73.0;
  s.temp[static_cast<Eigen::Index>(topo.id({2, 1, 1}))] = 60.0;
  s.temp[static_cast<Eigen::Index>(topo.id({1, 2, 1}))] = 55.0;
  auto d = coldest_neighbor_decision(s, 0, s.assignment(), 2.0);
  REQUIRE(d.is_migrate());
  CHECK(d.target == topo.id({1, 2, 1}));

  // Every neighbour busy: stay.
  std::vector<std::shared_ptr<const sim::Workload>> ws;
  std::vector<sim::CoreId> place{src};
  for (auto nb : topo.neighbors(src)) place.push_back(nb);
  for (std::size_t i = 0; i < place.size(); ++i) ws.push_back(std::make_shared<const sim::Workload>(fixtures::vit()));
  auto full = sim::make_state(fixtures::platform(), ws, place, 75.0, 1);
  full.temp.setConstant(80.0);
  CHECK_FALSE(coldest_neighbor_decision(full, 0, full.assignment(), 2.0).is_migrate());

  ExperimentConfig cfg;
  const auto tr = run_baseline_coldest(cfg, 1);
  CHECK_FALSE(tr.records.empty());
  for (const auto& p : tr.records.front().pipelines) CHECK_FALSE(p.decision.is_migrate());
}

TEST_CASE("reports: normalization, bounds, JSON and CSV") {
  ExperimentConfig cfg;
  cfg.evaluation.t_th = {75.0};
  cfg.evaluation.seq_lens = {128, 256};
  cfg.evaluation.seeds = {1, 2};
  cfg.evaluation.schedulers = {"coldest", "stay"};
  cfg.evaluation.reference = "coldest";
  const auto rows = evaluate(cfg, {});
  REQUIRE(rows.size() == 8);
  for (const auto& r : rows) {
    if (r.scheduler == "coldest") CHECK(r.normalized_exec_time == 1.0);
    CHECK(r.violation_pct >= 0.0);
    CHECK(r.violation_pct <= 100.0);
    CHECK(r.o_mig_s >= 0.0);
    CHECK(r.o_dvfs_s >= 0.0);
    CHECK(r.o_mig_s <= r.exec_time_s);
    CHECK(r.o_dvfs_s <= r.exec_time_s);
    CHECK(r.queries_per_epoch == 0.0);
    CHECK(r.t_peak_q1 <= r.t_peak_median);
    CHECK(r.t_peak_median <= r.t_peak_q3);
    CHECK(r.t_peak_q3 <= r.t_peak_max);
  }
  const auto stay = std::find_if(rows.begin(), rows.end(), [](const ReportRow& r) { return r.scheduler == "stay"; });
  const auto tr = run_episode(sim::make_state(make_platform(cfg), make_workload(cfg, *make_platform(cfg), {"vit-base", stay->seq_len, 0}), 8, 75.0, stay->seed), nullptr, 2000);
  CHECK(stay->violation_pct == doctest::Approx(100.0 * tr.summary.violations / tr.summary.epochs));

  TempDir dir;
  write_report_json(rows, cfg, dir.file("r.json"));
  write_report_csv(rows, dir.file("r.csv"));
  const auto back = read_report_json(dir.file("r.json"));
  REQUIRE(back.size() == rows.size());
  CHECK(back[3].exec_time_s == rows[3].exec_time_s);
  CHECK(back[3].window_instructions == rows[3].window_instructions);
  std::ifstream csv(dir.file("r.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("scheduler,workload,t_th,seq_len,seed,exec_time_s,normalized_exec_time", 0) == 0);

  // Re-running gives identical rows apart from wall-clock latency.
  const auto again = evaluate(cfg, {});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].exec_time_s == rows[i].exec_time_s);
    CHECK(again[i].t_peak_mean == rows[i].t_peak_mean);
    CHECK(again[i].window_instructions == rows[i].window_instructions);
  }
}

TEST_CASE("missing artifacts are fit failures") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(make_scheduler("ailfm", cfg, {}), FitError);
  CHECK_THROWS_AS(make_scheduler("dlfm", cfg, {}), FitError);
  CHECK_THROWS_AS(make_scheduler("oracle", cfg, {}), FitError);
  CHECK_THROWS_AS(make_scheduler("magic", cfg, {}), ConfigError);
}

TEST_CASE("CLI exit codes and outputs") {
  TempDir dir;
  CHECK(run({}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"collect-traces", "--bogus"}) == 2);
  CHECK(run({"evaluate", "--config", dir.file("missing.json")}) == 2);
  write(dir.file("bad.json"), R"({"schema_version": 1, "topology": {"nx": 0}})");
  CHECK(run({"collect-traces", "--config", dir.file("bad.json")}) == 2);
  write(dir.file("hot.json"),
        R"({"schema_version": 1, "thermal": {"calibrate": true, "calibration_target_c": 40}})");
  CHECK(run({"calibrate-thermal", "--config", dir.file("hot.json")}) == 3);
  write(dir.file("far.json"), R"({"schema_version": 1, "thermal": {"calibration_target_c": 46}})");
  CHECK(run({"calibrate-thermal", "--config", dir.file("far.json")}) == 3);

  CHECK(run({"calibrate-thermal", "--out", dir.file("cal.json")}) == 0);
  const auto cal = load_config(dir.file("cal.json"));
  CHECK_FALSE(cal.sim.calibrate_thermal);
  CHECK(cal.sim.thermal.g_sink == doctest::Approx(make_platform(ExperimentConfig{})->network().params().g_sink));

  // Relative paths in the written config still resolve next to it.
  std::filesystem::create_directories(dir.file("sub"));
  write(dir.file("rel.json"), R"({"schema_version": 1, "outputs": {"traces": "x.csv"}})");
  CHECK(run({"calibrate-thermal", "--config", dir.file("rel.json"), "--out", dir.file("sub/rel.json")}) == 0);
  const auto rel = load_config(dir.file("sub/rel.json"));
  CHECK(std::filesystem::path(rel.outputs.traces) == std::filesystem::path(dir.file("sub")) / "x.csv");
  CHECK_FALSE(rel.sim.calibrate_thermal);

  write(dir.file("one.json"), R"({"schema_version": 1, "traces": {"models": ["vit-base"]}})");
  CHECK(run({"collect-traces", "--config", dir.file("one.json"), "--out", dir.file("t.csv")}) == 0);
  std::ifstream t(dir.file("t.csv"));
  int lines = 0;
  for (std::string l; std::getline(t, l);) ++lines;
  CHECK(lines == 1 + 1 * 4 * 40 * 200);

  CHECK(run({"evaluate", "--policy", dir.file("nope.model"), "--oracle", dir.file("nope.model"), "--tth", "75",
             "--seq-len", "256", "--out", dir.file("r.json")}) == 4);
  CHECK(run({"train-policy", "--oracle", dir.file("nope.model"), "--out", dir.file("p.model")}) == 4);

  CHECK(run({"evaluate", "--schedulers", "stay", "--schedulers", "coldest", "--tth", "75", "--seq-len", "256",
             "--seeds", "1", "--out", dir.file("r.json"), "--csv", dir.file("r.csv"), "--trace-dir",
             dir.file("eps")}) == 0);
  std::ifstream rj(dir.file("r.json"));
  const auto j = nlohmann::json::parse(rj);
  REQUIRE(j.at("rows").size() == 2);
  for (const char* key : {"exec_time_s", "normalized_exec_time", "t_peak_max", "t_peak_mean", "t_peak_q1",
                          "t_peak_median", "t_peak_q3", "violation_pct", "queries_per_epoch", "o_mig_s", "o_dvfs_s",
                          "decision_latency_us"})
    CHECK(j["rows"][0].contains(key));
  CHECK(j["rows"][0]["normalized_exec_time"] == 1.0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir.file("eps"))) files += e.is_regular_file();
  CHECK(files == 4);
}

}
