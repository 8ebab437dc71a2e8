#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "smdn/features.hpp"
#include "smdn/mdn.hpp"
#include "smdn/stochastic.hpp"

namespace smdn::dataset {

inline constexpr std::uint32_t kFormatVersion = 1;

// Seed domains keep training, validation and held-out draws disjoint.
enum class Domain : std::uint64_t { kTraining = 0, kValidation = 1, kHoldout = 2 };

struct GenerationConfig {
  features::Regime regime = features::Regime::kTimeVarying;
  stochastic::ScenarioConfig scenario;
  std::size_t level = 5;
  bool time_augmented = false;
  std::size_t n1 = 200;  // maturities
  std::size_t n2 = 100;  // scenarios per maturity
  std::size_t n_targets = 30;

  void validate() const;
  features::FeatureLayout layout() const;
  nlohmann::json to_json() const;
};

// FNV-1a over a canonical serialisation of (config, seed, domain).
std::uint64_t config_digest(const GenerationConfig& config, std::uint64_t seed, Domain domain);

struct Dataset {
  features::Regime regime = features::Regime::kTimeVarying;
  std::uint32_t n_assets = 0;
  std::uint32_t level = 0;
  std::uint32_t n_targets = 0;
  std::uint32_t feature_dim = 0;
  bool time_augmented = false;
  std::uint64_t digest = 0;
  // Row-major records of feature_dim features followed by n_targets targets.
  std::vector<float> records;

  std::size_t stride() const { return feature_dim + n_targets; }
  std::size_t count() const { return stride() == 0 ? 0 : records.size() / stride(); }
  std::span<const float> x(std::size_t i) const { return {records.data() + i * stride(), feature_dim}; }
  std::span<const float> y(std::size_t i) const { return {records.data() + i * stride() + feature_dim, n_targets}; }
  features::FeatureLayout layout() const;

  bool operator==(const Dataset&) const = default;
};

using Scenario = std::variant<stochastic::GbmScenarioTV, stochastic::GbmScenarioLV>;

// Scenario behind record (i, m): maturity drawn per i, parameters and paths
// per (i, m), all from streams keyed by (seed, domain, i, m).
Scenario scenario_for(const GenerationConfig& config, std::uint64_t seed, Domain domain, std::size_t i,
                      std::size_t m);
// Key of the Monte Carlo paths behind record (i, m).
rng::StreamKey paths_key(std::uint64_t seed, Domain domain, std::size_t i, std::size_t m);

// Basket weights used for targets: fixed for TV, per-scenario for LV.
std::vector<double> basket_weights(const GenerationConfig& config, const Scenario& scenario);

features::FeatureVector assemble(const Scenario& scenario, std::size_t level, bool time_augmented);

// n1 n2 records in (i, m) order, parallel over records.
Dataset generate(const GenerationConfig& config, std::uint64_t seed, Domain domain = Domain::kTraining);
Dataset generate_tv(std::size_t n1, std::size_t n2, std::size_t M, GenerationConfig config, std::uint64_t seed);
Dataset generate_lv(std::size_t n1, std::size_t n2, std::size_t M, GenerationConfig config, std::uint64_t seed);

// Promoted to doubles for training.
struct TrainingArrays {
  std::vector<double> features;
  std::vector<double> targets;
  std::size_t dim = 0;
  std::size_t n_targets = 0;

  mdn::DataView view() const { return {features, targets, dim, n_targets}; }
};

// Copies records [begin, end), standardising features when a standardiser is given.
TrainingArrays to_training_arrays(const Dataset& data, const features::Standardizer* standardizer,
                                  std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1));

// Binary layout: 8-byte magic "MDNSET1\0"; u32 version, regime, N, l, M,
// feature_dim, flags; u64 record count; u64 config digest; then records as
// f32. Little-endian throughout.
void write(const Dataset& data, std::ostream& out);
Dataset read(std::istream& in);

void save(const Dataset& data, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

// Sidecar manifest `<path>.json` with the full generation config and seed.
void write_manifest(const std::filesystem::path& dataset_path, const GenerationConfig& config, std::uint64_t seed,
                    Domain domain, const Dataset& data);

}  // namespace smdn::dataset
