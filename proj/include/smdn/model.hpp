#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>

#include "json.hpp"
#include "smdn/features.hpp"
#include "smdn/mdn.hpp"

namespace smdn::model {

inline constexpr std::uint32_t kFormatVersion = 1;

// A trained network together with everything inference needs.
struct Model {
  mdn::MdnParams params;
  features::FeatureLayout layout;
  features::Standardizer standardizer;
  // Free-form provenance: training config, dataset digest, history length.
  nlohmann::json metadata = nlohmann::json::object();
  // Present when the file doubles as a training checkpoint.
  std::optional<mdn::TrainState> train_state;

  // Standardises raw features and runs the network.
  mdn::MixtureParams predict(std::span<const double> raw_features) const;
};

// Layout: "SMDN", u32 version, length-prefixed JSON header (network config,
// feature layout, metadata), standardiser means and scales, weights, then an
// optional training-state block. All numbers little-endian, reals as f64.
void write(const Model& model, std::ostream& out);
Model read(std::istream& in);

void save(const Model& model, const std::filesystem::path& path);
Model load(const std::filesystem::path& path);

}  // namespace smdn::model
