#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "smdn/stochastic.hpp"

namespace smdn::features {

enum class Regime { kTimeVarying, kLocalVol };

std::string_view regime_name(Regime regime);
Regime parse_regime(std::string_view name);

struct FeatureGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Maps index ranges of a flat feature vector to named groups.
//
// Time-varying volatility:
//   r_mean*T | q_mean*T (N) | sigma_mean*sqrt(T) (N) | r_sig*T (l) | q_sig*T (N*l)
//   | sigma_sig*T (N*l) | chol*sqrt(T) (N(N+1)/2) | T
// Local volatility:
//   w*T (N) | r_mean*T | q_mean*T (N) | r_sig*T (l) | q_sig*T (N*l) | a_loc*T (N)
//   | b_loc*T (N) | c_loc*T (N) | chol*sqrt(T) (N(N+1)/2) | T
//
// With time augmentation each signature block holds 2 + 4 + ... + 2^l values
// per path instead of l.
class FeatureLayout {
 public:
  FeatureLayout() = default;
  FeatureLayout(Regime regime, std::size_t n_assets, std::size_t level, bool time_augmented = false);

  Regime regime() const { return regime_; }
  std::size_t n_assets() const { return n_assets_; }
  std::size_t level() const { return level_; }
  bool time_augmented() const { return time_augmented_; }
  std::size_t dim() const { return dim_; }
  std::size_t signature_width() const;
  const std::vector<FeatureGroup>& groups() const { return groups_; }

  const FeatureGroup& group(std::string_view name) const;
  std::span<const double> slice(std::span<const double> values, std::string_view name) const;

  // Layout whose dimension equals dim, trying the plain then the time-augmented form.
  static FeatureLayout for_dimension(Regime regime, std::size_t n_assets, std::size_t level, std::size_t dim);

  nlohmann::json to_json() const;
  static FeatureLayout from_json(const nlohmann::json& j);

  bool operator==(const FeatureLayout& other) const {
    return regime_ == other.regime_ && n_assets_ == other.n_assets_ && level_ == other.level_ &&
           time_augmented_ == other.time_augmented_;
  }

 private:
  void add(std::string name, std::size_t size);

  Regime regime_ = Regime::kTimeVarying;
  std::size_t n_assets_ = 0;
  std::size_t level_ = 0;
  bool time_augmented_ = false;
  std::size_t dim_ = 0;
  std::vector<FeatureGroup> groups_;
};

std::size_t expected_dimension(Regime regime, std::size_t n_assets, std::size_t level, bool time_augmented = false);

struct FeatureVector {
  std::vector<double> values;
  FeatureLayout layout;

  Regime regime() const { return layout.regime(); }
};

FeatureVector assemble_tv(const stochastic::GbmScenarioTV& scenario, std::size_t level, bool time_augment = false);
FeatureVector assemble_lv(const stochastic::GbmScenarioLV& scenario, std::size_t level, bool time_augment = false);

// Per-feature affine map x -> (x - mean) / scale fitted on a training set.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> scale);

  static Standardizer identity(std::size_t dim);
  // rows: row-major count x dim. Zero-variance features keep scale 1.
  static Standardizer fit(std::span<const double> rows, std::size_t dim);
  static Standardizer fit(std::span<const float> rows, std::size_t stride, std::size_t dim);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

  void apply_inplace(std::span<double> x) const;
  std::vector<double> apply(std::span<const double> x) const;

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace smdn::features
