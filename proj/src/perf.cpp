#include "ailfm/perf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ailfm/csv.hpp"
#include "ailfm/errors.hpp"

namespace ailfm::perf {

namespace {
constexpr std::array<std::string_view, kKernelCount> kNames{"embedding", "attention", "ffn",
                                                            "lm_head"};

template <typename Get>
double interpolate(const std::array<Anchor, 4>& row, double amd, Get get) {
  if (amd <= kAnchorAmd.front()) return get(row.front());
  if (amd >= kAnchorAmd.back()) return get(row.back());
  std::size_t k = 0;
  while (amd >= kAnchorAmd[k + 1]) ++k;
  const double t = (amd - kAnchorAmd[k]) / (kAnchorAmd[k + 1] - kAnchorAmd[k]);
  const double a = get(row[k]);
  return a + t * (get(row[k + 1]) - a);
}
}  // namespace

std::string_view to_string(KernelType k) { return kNames.at(index_of(k)); }

KernelType kernel_from_index(std::size_t i) {
  if (i >= kKernelCount) throw std::out_of_range("kernel index out of range");
  return static_cast<KernelType>(i);
}

KernelType kernel_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kKernelCount; ++i) {
    if (kNames[i] == s) return kernel_from_index(i);
  }
  if (s == "lmhead" || s == "lm-head") return KernelType::LMHead;
  if (s == "self-attention") return KernelType::Attention;
  throw ConfigError("unknown kernel '" + std::string(s) + "'");
}

KernelProfile KernelProfile::defaults() {
  KernelProfile p;
  // IPS at 3 GHz and LLC MPKI for AMD 3.0 / 3.5 / 4.0 / 4.5 (ViT-base).
  p.anchors[index_of(KernelType::Embedding)] = {{{6.23e9, 10}, {6.01e9, 13}, {5.82e9, 17}, {5.51e9, 22}}};
  p.anchors[index_of(KernelType::Attention)] = {{{7.92e9, 21}, {6.83e9, 25}, {6.03e9, 32}, {5.10e9, 46}}};
  p.anchors[index_of(KernelType::FFN)] = {{{6.59e9, 7}, {6.42e9, 7}, {6.21e9, 9}, {6.14e9, 11}}};
  p.anchors[index_of(KernelType::LMHead)] = {{{5.77e9, 11}, {5.29e9, 15}, {4.94e9, 19}, {4.36e9, 37}}};
  p.models = {{"vit-base", {1.0, 12}},
              {"bert-base", {1.04, 12}},
              {"llama3.2-1b", {0.92, 16}},
              {"gemma-2b", {0.88, 18}},
              {"deepseek-2.4b", {0.85, 27}}};
  return p;
}

const ModelSpec& KernelProfile::model(std::string_view name) const {
  auto it = models.find(name);
  if (it == models.end()) throw ConfigError("unknown model '" + std::string(name) + "'");
  return it->second;
}

void KernelProfile::validate() const {
  if (!(beta_mem >= 0.0)) throw ConfigError("beta_mem must be non-negative");
  for (const auto& row : anchors) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!(row[k].ips_3ghz > 0.0) || !(row[k].mpki > 0.0)) {
        throw ConfigError("profile anchors must be positive");
      }
      if (k > 0 && (row[k].ips_3ghz > row[k - 1].ips_3ghz || row[k].mpki < row[k - 1].mpki)) {
        throw ConfigError("profile IPS must not rise and MPKI must not fall with AMD");
      }
    }
  }
  for (const auto& [name, m] : models) {
    if (!(m.scale > 0.0) || m.blocks < 1) throw ConfigError("bad model spec for " + name);
  }
}

KernelProfile load_profile_csv(const std::string& path, KernelProfile base) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows.front().size() < 4 || rows.front()[0] != "kernel") {
    throw ConfigError(path + ": expected header kernel,amd,ips_3ghz,mpki");
  }
  std::array<std::array<bool, 4>, kKernelCount> seen{};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < 4) throw ConfigError(path + ": short row");
    const auto k = index_of(kernel_from_string(row[0]));
    const double a = std::stod(row[1]);
    auto it = std::find(kAnchorAmd.begin(), kAnchorAmd.end(), a);
    if (it == kAnchorAmd.end()) throw ConfigError(path + ": AMD must be one of 3.0/3.5/4.0/4.5");
    const auto j = static_cast<std::size_t>(it - kAnchorAmd.begin());
    base.anchors[k][j] = {std::stod(row[2]), std::stod(row[3])};
    seen[k][j] = true;
  }
  for (const auto& s : seen) {
    if (std::find(s.begin(), s.end(), false) != s.end()) {
      throw ConfigError(path + ": missing anchor rows");
    }
  }
  base.validate();
  return base;
}

void write_profile_csv(const KernelProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  csv::write_row(out, {"kernel", "amd", "ips_3ghz", "mpki"});
  for (auto k : kAllKernels) {
    for (std::size_t j = 0; j < kAnchorAmd.size(); ++j) {
      const auto& a = profile.anchors[index_of(k)][j];
      csv::write_row(out, {std::string(to_string(k)), csv::num(kAnchorAmd[j]), csv::num(a.ips_3ghz),
                           csv::num(a.mpki)});
    }
  }
}

double mpki(const KernelProfile& profile, KernelType kernel, double amd) {
  return interpolate(profile.anchors[index_of(kernel)], amd, [](const Anchor& a) { return a.mpki; });
}

double ips_at(const KernelProfile& profile, KernelType kernel, double amd, double freq_ghz,
              double model_scale) {
  if (!(freq_ghz > 0.0) || freq_ghz > kReferenceGhz) {
    throw std::invalid_argument("frequency must lie in (0, 3.0] GHz");
  }
  const double ips3 =
      interpolate(profile.anchors[index_of(kernel)], amd, [](const Anchor& a) { return a.ips_3ghz; }) *
      model_scale;
  if (freq_ghz == kReferenceGhz) return ips3;
  const double m = std::clamp(profile.beta_mem * mpki(profile, kernel, amd), 0.0, 0.9);
  const double t3 = 1.0 / ips3;
  const double t = (1.0 - m) * t3 * (kReferenceGhz / freq_ghz) + m * t3;
  return 1.0 / t;
}

double cold_start_factor(std::int64_t j, double delta, double tau_w) {
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  if (!(tau_w > 0.0)) throw std::invalid_argument("tau_w must be positive");
  if (j == WarmupState::kNever) return 1.0;
  return 1.0 - delta * std::exp(-static_cast<double>(j) / tau_w);
}

double mpki_inflation(std::int64_t j, double delta_m, double tau_w) {
  if (j == WarmupState::kNever) return 1.0;
  return 1.0 + delta_m * std::exp(-static_cast<double>(j) / tau_w);
}

Observation observe(const KernelProfile& profile, KernelType kernel, double amd, double freq_ghz,
                    const WarmupState& warmup, const WarmupParams& params, double model_scale) {
  const auto j = warmup.epochs_since_migration;
  return {ips_at(profile, kernel, amd, freq_ghz, model_scale) *
              cold_start_factor(j, params.delta, params.tau_w),
          mpki(profile, kernel, amd) * mpki_inflation(j, params.delta_m, params.tau_w)};
}

}  // namespace ailfm::perf
