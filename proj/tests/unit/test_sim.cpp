#include <algorithm>
#include <random>

#include "doctest.h"

#include "ailfm/errors.hpp"
#include "ailfm/sim.hpp"

using namespace ailfm;
using namespace ailfm::sim;

namespace {

std::shared_ptr<const Platform> platform() {
  static const auto p = make_platform({});
  return p;
}

Workload vit(int len = 256) { return build_workload(platform()->profile(), "vit-base", len); }

// Moves every active pipeline to the lowest-id free core, threading claims.
Decision lowest_free(const SimState& s, std::size_t i, std::span<const CoreId> a) {
  std::vector<bool> taken(s.platform->core_count(), false);
  for (std::size_t q = 0; q < s.pipelines.size(); ++q)
    if (!s.pipelines[q].done) taken[a[q]] = true;
  for (CoreId c = 0; c < taken.size(); ++c)
    if (!taken[c]) return Decision::migrate(c, 0.0);
  return Decision::stay();
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("workload structure and scaling") {
  const auto w = vit();
  REQUIRE(w.kernels.size() == 26);
  CHECK(w.kernels.front().type == KernelType::Embedding);
  CHECK(w.kernels.back().type == KernelType::LMHead);
  for (int b = 0; b < 12; ++b) {
    CHECK(w.kernels[1 + 2 * b].type == KernelType::Attention);
    CHECK(w.kernels[2 + 2 * b].type == KernelType::FFN);
  }
  const auto w2 = vit(512);
  CHECK(w2.kernels[1].instructions == doctest::Approx(4.0 * w.kernels[1].instructions));
  CHECK(w2.kernels[2].instructions == doctest::Approx(2.0 * w.kernels[2].instructions));
  CHECK(w2.kernels[0].instructions == doctest::Approx(2.0 * w.kernels[0].instructions));
  CHECK(w2.kernels[25].instructions == doctest::Approx(2.0 * w.kernels[25].instructions));
  CHECK_THROWS_AS(vit(0), ConfigError);
  CHECK_THROWS_AS(build_workload(platform()->profile(), "gpt-9", 256), ConfigError);
  CHECK(build_workload(platform()->profile(), "vit-base", 256, 3).kernels.size() == 8);
}

TEST_CASE("default workload takes about 200 epochs at 3 GHz on an AMD-3.5 core") {
  const auto w = vit();
  double epochs = 0.0;
  for (const auto& k : w.kernels) epochs += k.instructions / perf::ips_at(platform()->profile(), k.type, 3.5, 3.0) / 1e-3;
  CHECK(epochs == doctest::Approx(200.0).epsilon(1e-9));
}

TEST_CASE("cold chip with a high threshold runs at the top frequency") {
  auto s = make_state(platform(), vit(), 1, 1000.0, 1);
  const auto rec = step_epoch(s, stay_all(s));
  REQUIRE(rec.pipelines.size() == 1);
  CHECK(rec.pipelines[0].freq_ghz == 3.0);
}

TEST_CASE("migration resets warmup and rejects occupied targets") {
  auto s = make_state(platform(), vit(), 2, 75.0, 3);
  const auto idle = s.idle_cores();
  std::vector<Decision> d{Decision::migrate(idle.front(), 0.0), Decision::stay()};
  auto rec = step_epoch(s, d);
  CHECK(rec.pipelines[0].warmup == 0);
  CHECK(rec.pipelines[0].cold_factor == doctest::Approx(0.75));
  CHECK(s.pipelines[0].core == idle.front());
  rec = step_epoch(s, stay_all(s));
  CHECK(rec.pipelines[0].warmup == 1);
  CHECK(rec.pipelines[1].warmup == perf::WarmupState::kNever);
  std::vector<Decision> clash{Decision::migrate(s.pipelines[1].core, 0.0), Decision::stay()};
  CHECK_THROWS_AS(step_epoch(s, clash), DecisionError);
}

TEST_CASE("identical seeds and decisions give bit-identical traces") {
  const DecideFn f = [](const SimState& s) { return decide_all(s, lowest_free); };
  const auto a = run_episode(make_state(platform(), vit(), 8, 75.0, 9), f, 400);
  const auto b = run_episode(make_state(platform(), vit(), 8, 75.0, 9), f, 400);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t e = 0; e < a.records.size(); ++e) {
    CHECK(a.records[e].t_peak == b.records[e].t_peak);
    CHECK(a.records[e].instructions == b.records[e].instructions);
  }
  CHECK(a.summary.exec_time_s == b.summary.exec_time_s);
}

TEST_CASE("overheads vanish without migrations or throttling") {
  const auto tr = run_episode(make_state(platform(), vit(), 4, 1000.0, 2), nullptr, 2000);
  CHECK_FALSE(tr.summary.truncated);
  CHECK(tr.summary.o_mig_s == 0.0);
  CHECK(tr.summary.o_dvfs_s == 0.0);
}

TEST_CASE("a lower threshold never speeds the same policy up") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto m75 = run_episode(make_state(platform(), vit(), 8, 75.0, seed), nullptr, 4000).summary.exec_time_s;
    const auto m85 = run_episode(make_state(platform(), vit(), 8, 85.0, seed), nullptr, 4000).summary.exec_time_s;
    CHECK(m75 >= m85);
  }
}

TEST_CASE("empty workload finishes at once") {
  Workload w;
  w.model = "none";
  auto s = make_state(platform(), {std::make_shared<const Workload>(w)}, {0}, 75.0, 1);
  const auto tr = run_episode(std::move(s), nullptr, 10);
  CHECK(tr.summary.exec_time_s == 0.0);
  CHECK(tr.records.empty());
}

TEST_CASE("always-stay respects the threshold and conserves instructions") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto w = vit();
    const auto tr = run_episode(make_state(platform(), w, 8, 75.0, seed), nullptr, 4000);
    REQUIRE_FALSE(tr.summary.truncated);
    for (const auto& r : tr.records) CHECK(r.t_peak <= 75.0 + 0.1);
    CHECK(tr.summary.total_instructions == doctest::Approx(8 * w.total_instructions()).epsilon(1e-12));
    CHECK(tr.summary.o_mig_s <= tr.summary.exec_time_s);
    CHECK(tr.summary.o_dvfs_s <= tr.summary.exec_time_s);
    double sum = 0.0;
    for (const auto& r : tr.records)
      for (const auto& p : r.pipelines) sum += p.instructions;
    CHECK(sum == doctest::Approx(tr.summary.total_instructions).epsilon(1e-12));
  }
}

TEST_CASE("truncation is flagged") {
  const auto tr = run_episode(make_state(platform(), vit(), 8, 75.0, 1), nullptr, 10);
  CHECK(tr.summary.truncated);
  CHECK(tr.summary.epochs == 10);
}

TEST_CASE("decide_all threads claims so targets never collide") {
  auto s = make_state(platform(), vit(), 8, 75.0, 4);
  const auto d = decide_all(s, lowest_free);
  std::vector<CoreId> targets;
  for (const auto& x : d) {
    REQUIRE(x.is_migrate());
    targets.push_back(x.target);
  }
  std::sort(targets.begin(), targets.end());
  CHECK(std::adjacent_find(targets.begin(), targets.end()) == targets.end());
  CHECK_NOTHROW(step_epoch(s, d));
}

TEST_CASE("incremental move prediction matches the direct one") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    auto s = make_state(platform(), vit(), 8, 75.0, 100 + k);
    const int warm = static_cast<int>(rng() % 120);
    for (int e = 0; e < warm; ++e) step_epoch(s, stay_all(s));
    const auto a = s.assignment();
    const MovePredictor mp(s, a);
    for (std::size_t i = 0; i < s.pipelines.size(); ++i) {
      if (s.pipelines[i].done) continue;
      const auto stay_fast = mp.predict(i, a[i]);
      const auto stay_slow = predict_move(s, a, i, a[i]);
      CHECK(stay_fast.peak_c == doctest::Approx(stay_slow.peak_c).epsilon(1e-12));
      for (CoreId c : s.idle_cores()) {
        const auto f = mp.predict(i, c);
        const auto g = predict_move(s, a, i, c);
        CHECK(f.peak_c == doctest::Approx(g.peak_c).epsilon(1e-12));
        CHECK(f.budget_w == doctest::Approx(g.budget_w).epsilon(1e-12));
        CHECK(f.freq_ghz == g.freq_ghz);
        CHECK(f.safe == g.safe);
      }
      const CoreId other = a[(i + 1) % a.size()];
      if (other != a[i] && !s.pipelines[(i + 1) % a.size()].done) CHECK_THROWS_AS(mp.predict(i, other), DecisionError);
    }
  }
}

TEST_CASE("select_action rules") {
  DecisionContext ctx;
  ctx.stay_safe = true;
  for (CoreId c : {3, 5, 9}) {
    Candidate cand;
    cand.core = c;
    cand.safe = true;
    ctx.candidates.push_back(cand);
  }
  std::vector<double> u{0.05, 0.12, 0.12};
  auto d = select_action(ctx, u);
  CHECK(d.is_migrate());
  CHECK(d.target == 5);
  u = {-0.1, -0.2, 0.0};
  CHECK_FALSE(select_action(ctx, u).is_migrate());
  ctx.candidates[1].safe = false;
  u = {0.05, 0.12, 0.01};
  CHECK(select_action(ctx, u).target == 3);
  ctx.stay_safe = false;
  u = {-0.3, 0.5, -0.1};
  d = select_action(ctx, u);
  CHECK(d.target == 9);
  CHECK(d.safe_override);
  for (auto& c : ctx.candidates) c.safe = false;
  d = select_action(ctx, u);
  CHECK_FALSE(d.is_migrate());
  CHECK(d.force_min_vf);
  ctx.candidates.clear();
  ctx.stay_safe = true;
  CHECK_FALSE(select_action(ctx, std::vector<double>{}).is_migrate());
}

TEST_CASE("realized utility: staying is zero, a move has a sign") {
  auto s = make_state(platform(), vit(), 8, 75.0, 6);
  for (int e = 0; e < 40; ++e) step_epoch(s, stay_all(s));
  const auto stay = stay_all(s);
  CHECK(realized_utility(s, stay, 0, 20) == 0.0);
  auto d = stay;
  d[0] = Decision::migrate(s.idle_cores().front(), 0.0);
  const double u = realized_utility(s, d, 0, 20);
  CHECK(std::isfinite(u));
  CHECK(u != 0.0);
}

}
