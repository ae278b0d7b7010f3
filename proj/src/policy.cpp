#include "ailfm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"

#include "ailfm/errors.hpp"

namespace ailfm::policy {

using json = nlohmann::json;

namespace {

constexpr int kModelVersion = 1;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return mix(a ^ mix(b)); }

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Per hidden layer keep-scale vectors (0 or 1/(1-p)) drawn in layer order.
std::vector<Eigen::VectorXd> draw_masks(const PolicyNet& net, std::uint64_t mask_seed) {
  std::vector<Eigen::VectorXd> masks;
  std::mt19937_64 rng(mask_seed);
  const double keep = net.dropout > 0.0 ? 1.0 / (1.0 - net.dropout) : 1.0;
  for (std::size_t l = 0; l + 1 < net.layers(); ++l) {
    Eigen::VectorXd m(net.widths[l + 1]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = unit_draw(rng) < net.dropout ? 0.0 : keep;
    masks.push_back(std::move(m));
  }
  return masks;
}

Eigen::VectorXd run(const PolicyNet& net, const Features& f, const std::vector<Eigen::VectorXd>* masks) {
  Eigen::VectorXd a = net.standardize(f);
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Eigen::VectorXd z = net.weights[l].transpose() * a + net.biases[l];
    if (l + 1 == net.layers()) return z;
    a = z.cwiseMax(0.0);
    if (masks) a = a.cwiseProduct((*masks)[l]);
  }
  return a;
}

Eigen::MatrixXd run_batch(const PolicyNet& net, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Eigen::MatrixXd z = (net.weights[l].transpose() * a).colwise() + net.biases[l];
    if (l + 1 == net.layers()) return z;
    a = z.cwiseMax(0.0);
  }
  return a;
}

}  // namespace

Features make_features(const sim::StateVec& src, const sim::StateVec& dst, double t_peak, double t_th) {
  return {src[0], src[1], src[2], src[3], dst[0], dst[1], dst[2], dst[3], t_peak, t_th};
}

std::size_t PolicyNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layers(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

Eigen::VectorXd PolicyNet::standardize(const Features& f) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(kInputs));
  for (std::size_t i = 0; i < kInputs; ++i) {
    v[static_cast<Eigen::Index>(i)] = (f[i] - in_mean[i]) / in_scale[i];
  }
  return v;
}

PolicyNet init_policy(std::uint64_t seed, double dropout, std::vector<int> widths) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (widths.size() < 2 || widths.front() != static_cast<int>(kInputs) ||
      widths.back() != static_cast<int>(kOutputs)) {
    throw std::invalid_argument("widths must start at 10 and end at 5");
  }
  PolicyNet net;
  net.widths = widths;
  net.dropout = dropout;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    if (in < 1 || out < 1) throw std::invalid_argument("layer widths must be positive");
    const double bound = std::sqrt(6.0 / in);
    Eigen::MatrixXd w(in, out);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * unit_draw(rng) - 1.0) * bound;
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return net;
}

Eigen::VectorXd forward(const PolicyNet& net, const Features& f) { return run(net, f, nullptr); }

Eigen::VectorXd forward(const PolicyNet& net, const Features& f, std::uint64_t mask_seed) {
  const auto masks = draw_masks(net, mask_seed);
  return run(net, f, &masks);
}

double predict_utility(const PolicyNet& net, const Features& f) {
  return forward(net, f)[4] * net.util_scale + net.util_mean;
}

McEstimate mc_uncertainty(const PolicyNet& net, const Features& f, int n_passes, std::uint64_t seed) {
  if (n_passes < 2) throw std::invalid_argument("at least two MC passes required");
  std::vector<double> u(static_cast<std::size_t>(n_passes));
  for (int i = 0; i < n_passes; ++i) u[static_cast<std::size_t>(i)] = forward(net, f, mix(seed, static_cast<std::uint64_t>(i)))[4];
  // Shifted sums: identical passes give exactly zero variance.
  const double shift = u.front();
  double s1 = 0.0, s2 = 0.0;
  for (double v : u) {
    s1 += v - shift;
    s2 += (v - shift) * (v - shift);
  }
  const double n = n_passes;
  const double mean = shift + s1 / n;
  const double var = std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0));
  return {mean * net.util_scale + net.util_mean, var};
}

// ---------------------------------------------------------------------------
// Decisions

namespace {

std::vector<double> candidate_utilities(const PolicyNet& net, const sim::DecisionContext& ctx,
                                        std::vector<Features>& feats) {
  const auto m = static_cast<Eigen::Index>(ctx.candidates.size());
  feats.clear();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(kInputs), m);
  for (Eigen::Index c = 0; c < m; ++c) {
    feats.push_back(make_features(ctx.x_src, ctx.candidates[static_cast<std::size_t>(c)].x_dst, ctx.t_peak, ctx.t_th));
    x.col(c) = net.standardize(feats.back());
  }
  const Eigen::MatrixXd out = run_batch(net, x);
  std::vector<double> u(static_cast<std::size_t>(m));
  for (Eigen::Index c = 0; c < m; ++c) u[static_cast<std::size_t>(c)] = out(4, c) * net.util_scale + net.util_mean;
  return u;
}

}  // namespace

sim::Decision net_decision(const PolicyNet& net, const sim::DecisionContext& ctx) {
  std::vector<Features> feats;
  return sim::select_action(ctx, candidate_utilities(net, ctx, feats));
}

PolicyResult decide(const PolicyNet& net, const oracle::MoGpr& mogpr, const sim::DecisionContext& ctx,
                    const GateOptions& gate) {
  if (!(gate.tau >= 0.0)) throw std::invalid_argument("tau must be non-negative");
  PolicyResult r;
  std::vector<Features> feats;
  r.utilities = candidate_utilities(net, ctx, feats);
  for (int pass = 0; pass < 2 && r.probe == static_cast<std::size_t>(-1); ++pass) {
    for (std::size_t c = 0; c < ctx.candidates.size(); ++c) {
      if (pass == 0 && !ctx.candidates[c].safe) continue;
      if (r.probe == static_cast<std::size_t>(-1) || r.utilities[c] > r.utilities[r.probe]) r.probe = c;
    }
  }
  if (r.probe != static_cast<std::size_t>(-1)) {
    r.uncertainty = mc_uncertainty(net, feats[r.probe], gate.mc_passes, gate.seed).variance;
    if (r.uncertainty > gate.tau) {
      r.oracle = oracle::oracle_evaluate(mogpr, ctx);
      r.decision = r.oracle.decision;
      r.queried = true;
      return r;
    }
  }
  r.decision = sim::select_action(ctx, r.utilities);
  r.decision.queried = false;
  return r;
}

sim::Decision decide(const PolicyNet& net, const oracle::MoGpr& mogpr, const sim::SimState& state,
                     std::size_t pipeline, std::span<const sim::CoreId> assignment,
                     const GateOptions& gate) {
  GateOptions g = gate;
  g.seed = mix(mix(gate.seed, static_cast<std::uint64_t>(state.epoch)), pipeline);
  return decide(net, mogpr, sim::build_decision_context(state, pipeline, assignment), g).decision;
}

// ---------------------------------------------------------------------------
// Training

double loss_and_gradients(const PolicyNet& net, std::span<const WeightedSample> batch, Gradients* grads,
                          std::span<const std::uint64_t> mask_seeds) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  if (b == 0) return 0.0;
  if (!mask_seeds.empty() && mask_seeds.size() != batch.size()) {
    throw std::invalid_argument("one mask seed per sample required");
  }
  const std::size_t nl = net.layers();
  std::vector<Eigen::MatrixXd> acts{Eigen::MatrixXd(static_cast<Eigen::Index>(kInputs), b)};
  std::vector<Eigen::MatrixXd> pre, masks;
  for (Eigen::Index i = 0; i < b; ++i) acts[0].col(i) = net.standardize(batch[static_cast<std::size_t>(i)].x);
  for (std::size_t l = 0; l + 1 < nl; ++l) masks.emplace_back(Eigen::MatrixXd::Ones(net.widths[l + 1], b));
  if (!mask_seeds.empty()) {
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto m = draw_masks(net, mask_seeds[static_cast<std::size_t>(i)]);
      for (std::size_t l = 0; l + 1 < nl; ++l) masks[l].col(i) = m[l];
    }
  }
  for (std::size_t l = 0; l < nl; ++l) {
    Eigen::MatrixXd z = (net.weights[l].transpose() * acts.back()).colwise() + net.biases[l];
    pre.push_back(z);
    if (l + 1 < nl) acts.push_back(z.cwiseMax(0.0).cwiseProduct(masks[l]));
  }

  const Eigen::MatrixXd& out = pre.back();
  Eigen::MatrixXd dz(out.rows(), b);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    const Eigen::Vector4d logits = out.col(i).head<4>();
    const double mx = logits.maxCoeff();
    const Eigen::Vector4d e = (logits.array() - mx).exp();
    const double z = e.sum();
    const auto k = static_cast<Eigen::Index>(perf::index_of(s.kernel));
    const double ce = -(logits[k] - mx - std::log(z));
    const double target = (s.utility - net.util_mean) / net.util_scale;
    const double diff = out(4, i) - target;
    loss += s.weight * (ce + diff * diff);
    Eigen::Vector4d g = e / z;
    g[k] -= 1.0;
    dz.col(i).head<4>() = s.weight * inv_b * g;
    dz(4, i) = s.weight * inv_b * 2.0 * diff;
  }
  loss *= inv_b;
  if (!grads) return loss;

  grads->dw.assign(nl, {});
  grads->db.assign(nl, {});
  for (std::size_t l = nl; l-- > 0;) {
    grads->dw[l] = acts[l] * dz.transpose();
    grads->db[l] = dz.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd da = net.weights[l] * dz;
    dz = da.cwiseProduct(masks[l - 1]).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

void fit_standardization(PolicyNet& net, std::span<const WeightedSample> samples) {
  if (samples.empty()) return;
  const double n = static_cast<double>(samples.size());
  for (std::size_t j = 0; j < kInputs; ++j) {
    double m = 0.0;
    for (const auto& s : samples) m += s.x[j];
    m /= n;
    double ss = 0.0;
    for (const auto& s : samples) ss += (s.x[j] - m) * (s.x[j] - m);
    const double sd = std::sqrt(ss / n);
    net.in_mean[j] = m;
    net.in_scale[j] = sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 1.0;
  }
  double m = 0.0;
  for (const auto& s : samples) m += s.utility;
  m /= n;
  double ss = 0.0;
  for (const auto& s : samples) ss += (s.utility - m) * (s.utility - m);
  const double sd = std::sqrt(ss / n);
  net.util_mean = m;
  net.util_scale = sd > 1e-12 ? sd : 1.0;
}

std::vector<double> fit(PolicyNet& net, std::span<const WeightedSample> samples, const TrainHyper& hyper) {
  if (hyper.batch < 1 || hyper.epochs < 0 || !(hyper.lr > 0.0)) throw ConfigError("invalid training hyperparameters");
  std::vector<double> history;
  if (samples.empty()) return history;
  std::vector<Eigen::MatrixXd> vw;
  std::vector<Eigen::VectorXd> vb;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    vw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    vb.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix(hyper.seed, 0x7472));
  std::vector<WeightedSample> batch;
  std::vector<std::uint64_t> seeds;
  Gradients g;
  for (int ep = 0; ep < hyper.epochs; ++ep) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch));
      batch.clear();
      seeds.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(samples[order[i]]);
        if (hyper.train_dropout && net.dropout > 0.0) seeds.push_back(rng());
      }
      total += loss_and_gradients(net, batch, &g, seeds);
      ++steps;
      for (std::size_t l = 0; l < net.layers(); ++l) {
        vw[l] = hyper.momentum * vw[l] - hyper.lr * g.dw[l];
        vb[l] = hyper.momentum * vb[l] - hyper.lr * g.db[l];
        net.weights[l] += vw[l];
        net.biases[l] += vb[l];
      }
    }
    history.push_back(total / steps);
  }
  for (const auto& w : net.weights) {
    if (!w.allFinite()) throw TrainingError("training diverged (non-finite weights)");
  }
  return history;
}

std::vector<double> train(PolicyNet& net, const TrainingPools& pools, const TrainHyper& hyper) {
  if (pools.oracle.empty()) throw TrainingError("D_oracle is empty");
  std::vector<WeightedSample> samples;
  samples.reserve(pools.oracle.size() + pools.agent.size());
  for (const auto& s : pools.oracle) samples.push_back({s.x, s.kernel, s.utility, 1.0});
  if (hyper.lambda > 0.0) {
    for (const auto& s : pools.agent) {
      if (s.success) samples.push_back({s.x, s.kernel, s.utility, hyper.lambda});
    }
  }
  fit_standardization(net, samples);
  return fit(net, samples, hyper);
}

// ---------------------------------------------------------------------------
// Loops

namespace {

struct EpisodeTally {
  int decisions = 0;
  int queries = 0;
  int epochs = 0;
  int violations = 0;
};

void tally_epoch(EpisodeTally& t, const sim::EpochRecord& rec, double t_th) {
  ++t.epochs;
  if (rec.t_peak > t_th + 1e-6) ++t.violations;
}

void finish_stats(RoundStats& st, const EpisodeTally& t) {
  st.decisions = t.decisions;
  st.queries = t.queries;
  st.epochs = t.epochs;
  st.violations = t.violations;
  st.queries_per_epoch = t.decisions > 0 ? static_cast<double>(t.queries) / t.decisions : 0.0;
  st.violation_pct = t.epochs > 0 ? 100.0 * t.violations / t.epochs : 0.0;
}

void add_oracle_samples(TrainingPools& pools, const sim::DecisionContext& ctx,
                        const oracle::OracleResult& orc, int extra, std::mt19937_64& rng) {
  const auto& cands = ctx.candidates;
  if (cands.empty()) return;
  std::size_t best = 0;
  for (std::size_t c = 1; c < cands.size(); ++c) {
    if (orc.predictions[c].mean > orc.predictions[best].mean) best = c;
  }
  if (orc.decision.is_migrate()) {
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (cands[c].core == orc.decision.target) best = c;
    }
  }
  std::vector<std::size_t> picks{best};
  std::vector<std::size_t> rest;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    if (c != best) rest.push_back(c);
  }
  for (int i = 0; i < extra && !rest.empty(); ++i) {
    std::uniform_int_distribution<std::size_t> d(0, rest.size() - 1);
    const std::size_t j = d(rng);
    picks.push_back(rest[j]);
    rest[j] = rest.back();
    rest.pop_back();
  }
  for (std::size_t c : picks) {
    pools.oracle.push_back({make_features(ctx.x_src, cands[c].x_dst, ctx.t_peak, ctx.t_th), orc.routed,
                            orc.predictions[c].mean});
  }
}

const sim::Candidate* find_candidate(const sim::DecisionContext& ctx, sim::CoreId core) {
  for (const auto& c : ctx.candidates) {
    if (c.core == core) return &c;
  }
  return nullptr;
}

}  // namespace

LoopResult active_il_loop(const oracle::MoGpr& mogpr, const EpisodeFactory& episodes,
                          const LoopConfig& cfg) {
  if (cfg.rounds < 1 || cfg.episodes_per_round < 1) throw ConfigError("rounds and episodes must be >= 1");
  LoopResult res;
  res.net = init_policy(cfg.seed, cfg.dropout);
  std::mt19937_64 rng(mix(cfg.seed, 0x6f72));

  struct Pending {
    std::size_t pipeline;
    Features x;
    KernelType kernel;
  };

  for (int r = 0; r < cfg.rounds; ++r) {
    EpisodeTally tally;
    for (int e = 0; e < cfg.episodes_per_round; ++e) {
      sim::SimState state = episodes(r, e);
      while (!state.finished() && state.epoch < cfg.max_epochs) {
        auto assign = state.assignment();
        std::vector<sim::Decision> decisions(state.pipelines.size(), sim::Decision::stay());
        std::vector<Pending> pending;
        for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
          if (state.pipelines[i].done) continue;
          const auto ctx = sim::build_decision_context(state, i, assign);
          sim::Decision d;
          ++tally.decisions;
          if (r == 0) {
            const auto orc = oracle::oracle_evaluate(mogpr, ctx);
            add_oracle_samples(res.pools, ctx, orc, cfg.oracle_extra_candidates, rng);
            d = orc.decision;
            ++tally.queries;
          } else {
            GateOptions g = cfg.gate;
            g.seed = mix(mix(mix(cfg.seed, static_cast<std::uint64_t>(r * 7919 + e)),
                             static_cast<std::uint64_t>(state.epoch)), i);
            const auto pr = decide(res.net, mogpr, ctx, g);
            d = pr.decision;
            if (pr.queried) {
              add_oracle_samples(res.pools, ctx, pr.oracle, cfg.oracle_extra_candidates, rng);
              ++tally.queries;
            } else if (d.is_migrate()) {
              const auto* c = find_candidate(ctx, d.target);
              pending.push_back({i, make_features(ctx.x_src, c->x_dst, ctx.t_peak, ctx.t_th), ctx.expected});
            } else {
              res.pools.agent.push_back({make_features(ctx.x_src, ctx.x_src, ctx.t_peak, ctx.t_th),
                                         ctx.expected, 0.0, false});
            }
          }
          decisions[i] = d;
          if (d.is_migrate()) assign[i] = d.target;
        }
        if (!pending.empty()) {
          const sim::SimState before = state;
          for (const auto& p : pending) {
            const double ru = sim::realized_utility(before, decisions, p.pipeline, cfg.horizon);
            res.pools.agent.push_back({p.x, p.kernel, ru, ru > 0.0});
          }
        }
        tally_epoch(tally, sim::step_epoch(state, decisions), state.t_th);
      }
    }
    TrainHyper h = cfg.hyper;
    h.seed = mix(cfg.seed, static_cast<std::uint64_t>(r + 1));
    const auto hist = train(res.net, res.pools, h);
    RoundStats st;
    st.round = r + 1;
    finish_stats(st, tally);
    st.final_loss = hist.empty() ? 0.0 : hist.back();
    st.oracle_pool = res.pools.oracle.size();
    st.agent_pool = res.pools.agent.size();
    res.rounds.push_back(st);
  }
  return res;
}

LoopResult dlfm_loop(const EpisodeFactory& episodes, const LoopConfig& cfg) {
  if (cfg.rounds < 1 || cfg.episodes_per_round < 1) throw ConfigError("rounds and episodes must be >= 1");
  LoopResult res;
  res.net = init_policy(cfg.seed, cfg.dropout);
  std::mt19937_64 rng(mix(cfg.seed, 0x646c));
  std::vector<WeightedSample> samples;
  double eps = cfg.epsilon;

  struct Pending {
    std::size_t pipeline;
    Features x;
    KernelType kernel;
  };

  for (int r = 0; r < cfg.rounds; ++r) {
    EpisodeTally tally;
    for (int e = 0; e < cfg.episodes_per_round; ++e) {
      sim::SimState state = episodes(r, e);
      while (!state.finished() && state.epoch < cfg.max_epochs) {
        auto assign = state.assignment();
        std::vector<sim::Decision> decisions(state.pipelines.size(), sim::Decision::stay());
        std::vector<Pending> pending;
        for (std::size_t i = 0; i < state.pipelines.size(); ++i) {
          if (state.pipelines[i].done) continue;
          const auto ctx = sim::build_decision_context(state, i, assign);
          ++tally.decisions;
          sim::Decision d;
          std::vector<std::size_t> safe;
          for (std::size_t c = 0; c < ctx.candidates.size(); ++c) {
            if (ctx.candidates[c].safe) safe.push_back(c);
          }
          if (!safe.empty() && unit_draw(rng) < eps) {
            std::uniform_int_distribution<std::size_t> pick(0, safe.size() - 1);
            const auto& c = ctx.candidates[safe[pick(rng)]];
            d = sim::Decision::migrate(c.core, 0.0);
          } else {
            d = net_decision(res.net, ctx);
          }
          if (d.is_migrate()) {
            const auto* c = find_candidate(ctx, d.target);
            pending.push_back({i, make_features(ctx.x_src, c->x_dst, ctx.t_peak, ctx.t_th), ctx.expected});
          }
          decisions[i] = d;
          if (d.is_migrate()) assign[i] = d.target;
        }
        if (!pending.empty()) {
          const sim::SimState before = state;
          for (const auto& p : pending) {
            samples.push_back({p.x, p.kernel, sim::realized_utility(before, decisions, p.pipeline, cfg.horizon), 1.0});
          }
        }
        tally_epoch(tally, sim::step_epoch(state, decisions), state.t_th);
      }
    }
    TrainHyper h = cfg.hyper;
    h.seed = mix(cfg.seed, static_cast<std::uint64_t>(r + 1));
    std::vector<double> hist;
    if (!samples.empty()) {
      fit_standardization(res.net, samples);
      hist = fit(res.net, samples, h);
    }
    RoundStats st;
    st.round = r + 1;
    finish_stats(st, tally);
    st.final_loss = hist.empty() ? 0.0 : hist.back();
    st.agent_pool = samples.size();
    st.epsilon = eps;
    res.rounds.push_back(st);
    eps *= cfg.epsilon_decay;
  }
  for (const auto& s : samples) res.pools.agent.push_back({s.x, s.kernel, s.utility, s.utility > 0.0});
  return res;
}

// ---------------------------------------------------------------------------
// Persistence

void PolicyNet::save(const std::string& path) const {
  json j;
  j["format"] = "ailfm-policy";
  j["version"] = kModelVersion;
  j["widths"] = widths;
  j["dropout"] = dropout;
  j["in_mean"] = in_mean;
  j["in_scale"] = in_scale;
  j["util_mean"] = util_mean;
  j["util_scale"] = util_scale;
  j["layers"] = json::array();
  for (std::size_t l = 0; l < layers(); ++l) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights[l].cols(); ++c) w.push_back(weights[l](r, c));
    }
    j["layers"].push_back({{"rows", weights[l].rows()},
                           {"cols", weights[l].cols()},
                           {"weights", w},
                           {"bias", std::vector<double>(biases[l].data(), biases[l].data() + biases[l].size())}});
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump();
}

PolicyNet PolicyNet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  PolicyNet net;
  try {
    const json j = json::parse(in);
    if (j.at("format") != "ailfm-policy") throw ConfigError(path + ": not a policy model");
    if (j.at("version").get<int>() != kModelVersion) throw ConfigError(path + ": unsupported version");
    net.widths = j.at("widths").get<std::vector<int>>();
    net.dropout = j.at("dropout").get<double>();
    net.in_mean = j.at("in_mean").get<std::array<double, kInputs>>();
    net.in_scale = j.at("in_scale").get<std::array<double, kInputs>>();
    net.util_mean = j.at("util_mean").get<double>();
    net.util_scale = j.at("util_scale").get<double>();
    const auto& ls = j.at("layers");
    if (net.widths.size() != ls.size() + 1) throw ConfigError(path + ": layer count mismatch");
    for (std::size_t l = 0; l < ls.size(); ++l) {
      const auto rows = ls[l].at("rows").get<Eigen::Index>();
      const auto cols = ls[l].at("cols").get<Eigen::Index>();
      const auto w = ls[l].at("weights").get<std::vector<double>>();
      const auto b = ls[l].at("bias").get<std::vector<double>>();
      if (rows != net.widths[l] || cols != net.widths[l + 1] ||
          w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(cols)) {
        throw ConfigError(path + ": layer shape mismatch");
      }
      net.weights.emplace_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), rows, cols));
      net.biases.emplace_back(Eigen::Map<const Eigen::VectorXd>(b.data(), cols));
    }
  } catch (const json::exception& err) {
    throw ConfigError(path + ": " + err.what());
  }
  return net;
}

}  // namespace ailfm::policy
