#include "ailfm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <tuple>

#include "json.hpp"

#include "ailfm/errors.hpp"

namespace ailfm::oracle {

using json = nlohmann::json;

namespace {

constexpr int kModelVersion = 1;

struct Moments {
  double mean = 0.0;
  double scale = 1.0;
};

template <typename Get>
Moments moments(std::size_t n, Get get) {
  Moments m;
  if (n == 0) return m;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += get(i);
  m.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (get(i) - m.mean) * (get(i) - m.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  m.scale = sd > 1e-12 * std::max(1.0, std::abs(m.mean)) ? sd : 1.0;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Router

double RouterWeights::score(double ips, double mpki) const {
  return lambda1 * (ips - ips_mean) / ips_scale + lambda2 * (mpki - mpki_mean) / mpki_scale;
}

std::vector<RouterSample> router_samples(const sim::TraceDataset& traces) {
  std::vector<RouterSample> out;
  out.reserve(traces.row_count());
  for (const auto& run : traces.runs) {
    for (const auto& r : run.slices) out.push_back({r.kernel, r.ips, r.mpki});
  }
  return out;
}

std::vector<RouterSample> router_samples(const sim::LabeledDataset& data) {
  std::vector<RouterSample> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples) out.push_back({s.kernel, s.x_src[0], s.x_src[1]});
  return out;
}

RouterWeights fit_router(std::span<const RouterSample> samples) {
  // Canonical order so the sums, and hence the argmax, ignore input order.
  std::vector<RouterSample> rows(samples.begin(), samples.end());
  std::sort(rows.begin(), rows.end(), [](const RouterSample& a, const RouterSample& b) {
    return std::tuple(perf::index_of(a.kernel), a.ips, a.mpki) <
           std::tuple(perf::index_of(b.kernel), b.ips, b.mpki);
  });

  RouterWeights w;
  const auto mi = moments(rows.size(), [&](std::size_t i) { return rows[i].ips; });
  const auto mc = moments(rows.size(), [&](std::size_t i) { return rows[i].mpki; });
  w.ips_mean = mi.mean;
  w.ips_scale = mi.scale;
  w.mpki_mean = mc.mean;
  w.mpki_scale = mc.scale;

  std::array<std::size_t, perf::kKernelCount> count{};
  for (const auto& r : rows) ++count[perf::index_of(r.kernel)];
  int classes = 0;
  for (std::size_t k = 0; k < count.size(); ++k) {
    w.present[k] = count[k] > 0;
    classes += w.present[k] ? 1 : 0;
  }
  if (classes < 2) {
    w.degenerate = true;
    return w;
  }

  std::vector<double> zi(rows.size()), zc(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    zi[i] = (rows[i].ips - w.ips_mean) / w.ips_scale;
    zc[i] = (rows[i].mpki - w.mpki_mean) / w.mpki_scale;
  }

  double best = -1.0;
  for (int deg = -89; deg <= 90; ++deg) {
    const double th = deg * std::numbers::pi / 180.0;
    const double l1 = deg == 90 ? 0.0 : std::cos(th);
    const double l2 = deg == 90 ? 1.0 : std::sin(th);
    std::array<double, perf::kKernelCount> sum{};
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double s = l1 * zi[i] + l2 * zc[i];
      sum[perf::index_of(rows[i].kernel)] += s;
      total += s;
    }
    const double grand = total / static_cast<double>(rows.size());
    std::array<double, perf::kKernelCount> mean{};
    double between = 0.0;
    for (std::size_t k = 0; k < mean.size(); ++k) {
      if (!w.present[k]) continue;
      mean[k] = sum[k] / static_cast<double>(count[k]);
      between += static_cast<double>(count[k]) * (mean[k] - grand) * (mean[k] - grand);
    }
    double within = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double d = l1 * zi[i] + l2 * zc[i] - mean[perf::index_of(rows[i].kernel)];
      within += d * d;
    }
    const double ratio = within > 0.0 ? between / within : (between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (ratio > best) {
      best = ratio;
      w.lambda1 = l1;
      w.lambda2 = l2;
      w.class_mean = mean;
    }
  }
  w.fisher_ratio = best;

  // Coincident class means cannot be told apart.
  w.degenerate = !(best > 0.0);
  for (std::size_t a = 0; a < count.size() && !w.degenerate; ++a) {
    for (std::size_t b = a + 1; b < count.size(); ++b) {
      if (w.present[a] && w.present[b] && w.class_mean[a] == w.class_mean[b]) w.degenerate = true;
    }
  }
  return w;
}

Route route(const RouterWeights& router, double ips, double mpki, KernelType expected) {
  Route r;
  r.kernel = expected;
  if (!router.degenerate) {
    const double s = router.score(ips, mpki);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < perf::kKernelCount; ++k) {
      if (!router.present[k]) continue;
      const double d = std::abs(s - router.class_mean[k]);
      const KernelType kt = perf::kAllKernels[k];
      if (d < best || (d == best && kt == expected)) {
        best = d;
        r.kernel = kt;
      }
    }
  }
  r.gate[perf::index_of(r.kernel)] = 1.0;
  return r;
}

double routing_accuracy(const RouterWeights& router, std::span<const RouterSample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t hit = 0;
  // The expected kernel is deliberately withheld (Embedding) so ties do not leak labels.
  for (const auto& s : samples) {
    if (route(router, s.ips, s.mpki, KernelType::Embedding).kernel == s.kernel) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// GP experts

double se_kernel(const GpHyper& h, std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return h.sigma_f * h.sigma_f * std::exp(-d2 / (2.0 * h.lengthscale * h.lengthscale));
}

namespace {

std::array<double, 8> concat(const StateVec& a, const StateVec& b) {
  return {a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]};
}

void standardize(const GpExpert& e, std::array<double, 8>& v) {
  for (std::size_t j = 0; j < 8; ++j) v[j] = (v[j] - e.x_mean[j]) / e.x_scale[j];
}

}  // namespace

GpExpert fit_expert(KernelType kernel, std::span<const sim::LabeledSample> samples,
                    const FitOptions& opts, std::uint64_t seed) {
  std::vector<const sim::LabeledSample*> pool;
  for (const auto& s : samples) {
    if (s.kernel == kernel) pool.push_back(&s);
  }
  if (pool.size() < 2) throw FitError("GP expert needs at least two samples");
  if (opts.cap < 2) throw ConfigError("expert cap must be >= 2");
  if (opts.sigma_f_grid.empty() || opts.lengthscale_grid.empty() || opts.sigma_n_grid.empty()) {
    throw ConfigError("empty hyperparameter grid");
  }
  if (pool.size() > static_cast<std::size_t>(opts.cap)) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `cap` slots become a uniform subset.
    for (std::size_t i = 0; i < static_cast<std::size_t>(opts.cap); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(static_cast<std::size_t>(opts.cap));
    std::sort(idx.begin(), idx.end());
    std::vector<const sim::LabeledSample*> sub;
    for (auto i : idx) sub.push_back(pool[i]);
    pool = std::move(sub);
  }

  const auto n = static_cast<Eigen::Index>(pool.size());
  GpExpert e;
  e.kernel = kernel;
  std::vector<std::array<double, 8>> raw;
  for (const auto* s : pool) raw.push_back(concat(s->x_src, s->x_dst));
  for (std::size_t j = 0; j < 8; ++j) {
    const auto m = moments(raw.size(), [&](std::size_t i) { return raw[i][j]; });
    e.x_mean[j] = m.mean;
    e.x_scale[j] = m.scale;
  }
  const auto my = moments(pool.size(), [&](std::size_t i) { return pool[i]->utility; });
  e.y_mean = my.mean;
  e.y_scale = my.scale;
  e.x.resize(n, 8);
  e.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto v = raw[static_cast<std::size_t>(i)];
    standardize(e, v);
    for (Eigen::Index j = 0; j < 8; ++j) e.x(i, j) = v[static_cast<std::size_t>(j)];
    e.y[i] = (pool[static_cast<std::size_t>(i)]->utility - e.y_mean) / e.y_scale;
  }

  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = (e.x.row(i) - e.x.row(j)).squaredNorm();
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }

  bool found = false;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (double ell : opts.lengthscale_grid) {
    const Eigen::MatrixXd unit = (-d2.array() / (2.0 * ell * ell)).exp().matrix();
    for (double sf : opts.sigma_f_grid) {
      for (double sn : opts.sigma_n_grid) {
        Eigen::MatrixXd k = sf * sf * unit;
        k.diagonal().array() += sn * sn;
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        double jitter = 0.0;
        for (double j = 1e-8; llt.info() != Eigen::Success && j <= 1e-4 * (1 + 1e-9); j *= 10.0) {
          Eigen::MatrixXd kj = k;
          kj.diagonal().array() += j;
          llt.compute(kj);
          jitter = j;
        }
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd l = llt.matrixL();
        const Eigen::VectorXd alpha = llt.solve(e.y);
        const double lml = -0.5 * e.y.dot(alpha) - l.diagonal().array().log().sum() -
                           0.5 * static_cast<double>(n) * log2pi;
        if (!found || lml > e.log_ml) {
          found = true;
          e.log_ml = lml;
          e.hyper = {sf, ell, sn};
          e.jitter = jitter;
          e.chol = std::move(l);
          e.alpha = alpha;
        }
      }
    }
  }
  if (!found) throw FitError("kernel matrix not positive definite after jitter 1e-4");
  return e;
}

std::vector<GpPrediction> gp_predict_batch(const GpExpert& e, const StateVec& x_src,
                                           std::span<const StateVec> x_dst) {
  const auto n = static_cast<Eigen::Index>(e.size());
  const auto m = static_cast<Eigen::Index>(x_dst.size());
  std::vector<GpPrediction> out(x_dst.size());
  if (m == 0) return out;
  Eigen::MatrixXd ks(n, m);
  const double sf2 = e.hyper.sigma_f * e.hyper.sigma_f;
  const double inv2l2 = 1.0 / (2.0 * e.hyper.lengthscale * e.hyper.lengthscale);
  for (Eigen::Index c = 0; c < m; ++c) {
    auto v = concat(x_src, x_dst[static_cast<std::size_t>(c)]);
    standardize(e, v);
    const Eigen::Map<const Eigen::RowVectorXd> q(v.data(), 8);
    for (Eigen::Index i = 0; i < n; ++i) {
      ks(i, c) = sf2 * std::exp(-(e.x.row(i) - q).squaredNorm() * inv2l2);
    }
  }
  const Eigen::VectorXd mu = ks.transpose() * e.alpha;
  const Eigen::MatrixXd v = e.chol.triangularView<Eigen::Lower>().solve(ks);
  for (Eigen::Index c = 0; c < m; ++c) {
    auto& p = out[static_cast<std::size_t>(c)];
    p.mean_std = mu[c];
    p.variance_std = std::max(0.0, sf2 - v.col(c).squaredNorm());
    p.mean = p.mean_std * e.y_scale + e.y_mean;
    p.variance = p.variance_std * e.y_scale * e.y_scale;
  }
  return out;
}

GpPrediction gp_predict(const GpExpert& expert, const StateVec& x_src, const StateVec& x_dst) {
  const std::array<StateVec, 1> one{x_dst};
  return gp_predict_batch(expert, x_src, one).front();
}

MoGpr fit_mogpr(const sim::LabeledDataset& data, std::span<const RouterSample> router_data,
                const FitOptions& opts, std::uint64_t seed) {
  MoGpr m;
  m.router = fit_router(router_data);
  for (auto k : perf::kAllKernels) {
    m.experts[perf::index_of(k)] = fit_expert(k, data.samples, opts, seed + perf::index_of(k));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Decisions

OracleResult oracle_evaluate(const MoGpr& mogpr, const sim::DecisionContext& ctx) {
  OracleResult r;
  r.routed = route(mogpr.router, ctx.observed_ips, ctx.observed_mpki, ctx.expected).kernel;
  std::vector<StateVec> dst;
  dst.reserve(ctx.candidates.size());
  for (const auto& c : ctx.candidates) dst.push_back(c.x_dst);
  r.predictions = gp_predict_batch(mogpr.expert(r.routed), ctx.x_src, dst);
  std::vector<double> mu;
  mu.reserve(dst.size());
  for (const auto& p : r.predictions) mu.push_back(p.mean);
  r.decision = sim::select_action(ctx, mu);
  r.decision.queried = true;
  return r;
}

sim::Decision oracle_decision(const MoGpr& mogpr, const sim::SimState& state, std::size_t pipeline,
                              std::span<const sim::CoreId> assignment) {
  if (state.pipelines.at(pipeline).done) throw std::invalid_argument("pipeline is not active");
  return oracle_evaluate(mogpr, sim::build_decision_context(state, pipeline, assignment)).decision;
}

sim::Decision oracle_decision(const MoGpr& mogpr, const sim::SimState& state, std::size_t pipeline) {
  const auto assign = state.assignment();
  return oracle_decision(mogpr, state, pipeline, assign);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  }
  return flat;
}

json expert_json(const GpExpert& e) {
  const auto n = e.chol.rows();
  std::vector<double> packed;
  packed.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) packed.push_back(e.chol(i, j));
  }
  return {{"kernel", perf::to_string(e.kernel)},
          {"n", e.size()},
          {"x_mean", e.x_mean},
          {"x_scale", e.x_scale},
          {"y_mean", e.y_mean},
          {"y_scale", e.y_scale},
          {"sigma_f", e.hyper.sigma_f},
          {"lengthscale", e.hyper.lengthscale},
          {"sigma_n", e.hyper.sigma_n},
          {"jitter", e.jitter},
          {"log_ml", e.log_ml},
          {"x", matrix_json(e.x)},
          {"y", std::vector<double>(e.y.data(), e.y.data() + e.y.size())},
          {"alpha", std::vector<double>(e.alpha.data(), e.alpha.data() + e.alpha.size())},
          {"cholesky_lower_packed", packed}};
}

GpExpert expert_from_json(const json& j) {
  GpExpert e;
  e.kernel = perf::kernel_from_string(j.at("kernel").get<std::string>());
  const auto n = j.at("n").get<Eigen::Index>();
  e.x_mean = j.at("x_mean").get<std::array<double, 8>>();
  e.x_scale = j.at("x_scale").get<std::array<double, 8>>();
  e.y_mean = j.at("y_mean").get<double>();
  e.y_scale = j.at("y_scale").get<double>();
  e.hyper = {j.at("sigma_f").get<double>(), j.at("lengthscale").get<double>(),
             j.at("sigma_n").get<double>()};
  e.jitter = j.at("jitter").get<double>();
  e.log_ml = j.at("log_ml").get<double>();
  const auto x = j.at("x").get<std::vector<double>>();
  const auto y = j.at("y").get<std::vector<double>>();
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  const auto packed = j.at("cholesky_lower_packed").get<std::vector<double>>();
  const auto nn = static_cast<std::size_t>(n);
  if (x.size() != nn * 8 || y.size() != nn || alpha.size() != nn || packed.size() != nn * (nn + 1) / 2) {
    throw ConfigError("oracle.model: expert array sizes do not match n");
  }
  e.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 8, Eigen::RowMajor>>(x.data(), n, 8);
  e.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  e.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), n);
  e.chol = Eigen::MatrixXd::Zero(n, n);
  std::size_t p = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c <= i; ++c) e.chol(i, c) = packed[p++];
  }
  return e;
}

}  // namespace

void MoGpr::save(const std::string& path) const {
  json j;
  j["format"] = "ailfm-oracle";
  j["version"] = kModelVersion;
  const auto& r = router;
  std::vector<std::string> present;
  for (auto k : perf::kAllKernels) {
    if (r.present[perf::index_of(k)]) present.emplace_back(perf::to_string(k));
  }
  j["router"] = {{"lambda1", r.lambda1},     {"lambda2", r.lambda2},     {"ips_mean", r.ips_mean},
                 {"ips_scale", r.ips_scale}, {"mpki_mean", r.mpki_mean}, {"mpki_scale", r.mpki_scale},
                 {"class_mean", r.class_mean}, {"present", present},     {"fisher_ratio", r.fisher_ratio},
                 {"degenerate", r.degenerate}};
  j["experts"] = json::array();
  for (const auto& e : experts) j["experts"].push_back(expert_json(e));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump();
}

MoGpr MoGpr::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  MoGpr m;
  try {
    const json j = json::parse(in);
    if (j.at("format") != "ailfm-oracle") throw ConfigError(path + ": not an oracle model");
    if (j.at("version").get<int>() != kModelVersion) throw ConfigError(path + ": unsupported version");
    const auto& r = j.at("router");
    m.router.lambda1 = r.at("lambda1").get<double>();
    m.router.lambda2 = r.at("lambda2").get<double>();
    m.router.ips_mean = r.at("ips_mean").get<double>();
    m.router.ips_scale = r.at("ips_scale").get<double>();
    m.router.mpki_mean = r.at("mpki_mean").get<double>();
    m.router.mpki_scale = r.at("mpki_scale").get<double>();
    m.router.class_mean = r.at("class_mean").get<std::array<double, perf::kKernelCount>>();
    m.router.fisher_ratio = r.at("fisher_ratio").get<double>();
    m.router.degenerate = r.at("degenerate").get<bool>();
    for (const auto& name : r.at("present")) {
      m.router.present[perf::index_of(perf::kernel_from_string(name.get<std::string>()))] = true;
    }
    const auto& ex = j.at("experts");
    if (ex.size() != perf::kKernelCount) throw ConfigError(path + ": expected four experts");
    std::array<bool, perf::kKernelCount> seen{};
    for (const auto& ej : ex) {
      auto e = expert_from_json(ej);
      const auto k = perf::index_of(e.kernel);
      if (seen[k]) throw ConfigError(path + ": duplicate expert");
      seen[k] = true;
      m.experts[k] = std::move(e);
    }
  } catch (const json::exception& err) {
    throw ConfigError(path + ": " + err.what());
  }
  return m;
}

}  // namespace ailfm::oracle
