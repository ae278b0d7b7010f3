#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace ailfm::perf {

enum class KernelType : std::uint8_t { Embedding = 0, Attention = 1, FFN = 2, LMHead = 3 };

inline constexpr std::size_t kKernelCount = 4;
inline constexpr std::array<KernelType, kKernelCount> kAllKernels{
    KernelType::Embedding, KernelType::Attention, KernelType::FFN, KernelType::LMHead};

constexpr std::size_t index_of(KernelType k) { return static_cast<std::size_t>(k); }
std::string_view to_string(KernelType k);
KernelType kernel_from_string(std::string_view s);
KernelType kernel_from_index(std::size_t i);

inline constexpr std::array<double, 4> kAnchorAmd{3.0, 3.5, 4.0, 4.5};
inline constexpr double kReferenceGhz = 3.0;

struct Anchor {
  double ips_3ghz = 0.0;
  double mpki = 0.0;
};

struct ModelSpec {
  double scale = 1.0;  // multiplicative IPS scale relative to the ViT anchors
  int blocks = 12;
};

/// Measured (IPS, MPKI) anchors per kernel at four AMD levels, the
/// memory-boundedness coefficient, and per-model IPS scales.
struct KernelProfile {
  std::array<std::array<Anchor, 4>, kKernelCount> anchors{};
  double beta_mem = 0.02;
  std::map<std::string, ModelSpec, std::less<>> models;

  /// Anchors from the ViT-base characterization, five model specs.
  static KernelProfile defaults();

  const ModelSpec& model(std::string_view name) const;
  void validate() const;
};

/// Reads `kernel,amd,ips_3ghz,mpki` rows; any missing anchor is an error.
KernelProfile load_profile_csv(const std::string& path, KernelProfile base = KernelProfile::defaults());
void write_profile_csv(const KernelProfile& profile, const std::string& path);

double mpki(const KernelProfile& profile, KernelType kernel, double amd);

/// IPS at frequency `freq_ghz`. The compute share scales with frequency and
/// the memory share m = clamp(beta_mem * MPKI, 0, 0.9) does not.
double ips_at(const KernelProfile& profile, KernelType kernel, double amd, double freq_ghz,
              double model_scale = 1.0);

struct WarmupParams {
  double delta = 0.25;   // initial IPS loss after migration
  double delta_m = 1.0;  // initial MPKI inflation
  double tau_w = 3.0;    // decay constant, epochs
};

struct WarmupState {
  static constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();
  std::int64_t epochs_since_migration = kNever;

  bool never_migrated() const { return epochs_since_migration == kNever; }
  void on_migration() { epochs_since_migration = 0; }
  void advance() {
    if (!never_migrated()) ++epochs_since_migration;
  }
};

double cold_start_factor(std::int64_t epochs_since_migration, double delta, double tau_w);
double mpki_inflation(std::int64_t epochs_since_migration, double delta_m, double tau_w);

struct Observation {
  double ips_eff = 0.0;
  double mpki_eff = 0.0;
};

Observation observe(const KernelProfile& profile, KernelType kernel, double amd, double freq_ghz,
                    const WarmupState& warmup, const WarmupParams& params, double model_scale = 1.0);

}  // namespace ailfm::perf
