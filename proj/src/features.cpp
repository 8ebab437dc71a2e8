#include "smdn/features.hpp"

#include <cmath>
#include <numeric>

#include "smdn/error.hpp"
#include "smdn/signature.hpp"

namespace smdn::features {

namespace {

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

class Builder {
 public:
  explicit Builder(const FeatureLayout& layout) : layout_(layout) { values_.reserve(layout.dim()); }

  void push(double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite feature value");
    values_.push_back(v);
  }
  void push_all(std::span<const double> v, double scale) {
    for (double x : v) push(x * scale);
  }

  FeatureVector finish() && {
    if (values_.size() != layout_.dim()) throw NumericError("feature assembly produced the wrong length");
    return {std::move(values_), layout_};
  }

 private:
  const FeatureLayout& layout_;
  std::vector<double> values_;
};

std::vector<double> path_signature(const stochastic::RatePath& path, double T, std::size_t level, bool augment) {
  const auto samples = path.restricted(T);
  if (augment) return signature::time_augmented_features(samples, path.dt, T, level);
  return signature::scalar_signature_features(samples, level);
}

double path_mean(const stochastic::RatePath& path, double T) { return mean_of(path.restricted(T)); }

}  // namespace

std::string_view regime_name(Regime regime) { return regime == Regime::kTimeVarying ? "tv" : "lv"; }

Regime parse_regime(std::string_view name) {
  if (name == "tv") return Regime::kTimeVarying;
  if (name == "lv") return Regime::kLocalVol;
  throw InvalidInput("unknown regime '" + std::string(name) + "' (expected tv or lv)");
}

FeatureLayout::FeatureLayout(Regime regime, std::size_t n_assets, std::size_t level, bool time_augmented)
    : regime_(regime), n_assets_(n_assets), level_(level), time_augmented_(time_augmented) {
  if (n_assets == 0 || level == 0) throw InvalidInput("layout needs positive asset count and level");
  const std::size_t n = n_assets;
  const std::size_t sig = signature_width();
  if (regime == Regime::kTimeVarying) {
    add("r_mean", 1);
    add("q_mean", n);
    add("sigma_mean", n);
    add("r_sig", sig);
    add("q_sig", n * sig);
    add("sigma_sig", n * sig);
  } else {
    add("w", n);
    add("r_mean", 1);
    add("q_mean", n);
    add("r_sig", sig);
    add("q_sig", n * sig);
    add("a_loc", n);
    add("b_loc", n);
    add("c_loc", n);
  }
  add("chol", n * (n + 1) / 2);
  add("maturity", 1);
}

std::size_t FeatureLayout::signature_width() const {
  return time_augmented_ ? signature::coefficient_count(2, level_) : level_;
}

void FeatureLayout::add(std::string name, std::size_t size) {
  groups_.push_back({std::move(name), dim_, size});
  dim_ += size;
}

const FeatureGroup& FeatureLayout::group(std::string_view name) const {
  for (const auto& g : groups_)
    if (g.name == name) return g;
  throw InvalidInput("unknown feature group '" + std::string(name) + "'");
}

std::span<const double> FeatureLayout::slice(std::span<const double> values, std::string_view name) const {
  if (values.size() != dim_) throw InvalidInput("feature vector length does not match layout");
  const auto& g = group(name);
  return values.subspan(g.offset, g.size);
}

FeatureLayout FeatureLayout::for_dimension(Regime regime, std::size_t n_assets, std::size_t level, std::size_t dim) {
  for (bool augmented : {false, true}) {
    if (expected_dimension(regime, n_assets, level, augmented) == dim) return {regime, n_assets, level, augmented};
  }
  throw InvalidInput("feature dimension " + std::to_string(dim) + " does not match regime " +
                     std::string(regime_name(regime)) + " with N=" + std::to_string(n_assets) +
                     ", l=" + std::to_string(level) + " (expected " +
                     std::to_string(expected_dimension(regime, n_assets, level)) + ")");
}

nlohmann::json FeatureLayout::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : groups_) groups.push_back({{"name", g.name}, {"offset", g.offset}, {"size", g.size}});
  return {{"regime", regime_name(regime_)}, {"n_assets", n_assets_},    {"level", level_},
          {"time_augmented", time_augmented_}, {"dim", dim_}, {"groups", groups}};
}

FeatureLayout FeatureLayout::from_json(const nlohmann::json& j) {
  FeatureLayout layout(parse_regime(j.at("regime").get<std::string>()), j.at("n_assets").get<std::size_t>(),
                       j.at("level").get<std::size_t>(), j.value("time_augmented", false));
  if (j.contains("dim") && j.at("dim").get<std::size_t>() != layout.dim()) {
    throw InvalidInput("layout descriptor dim disagrees with its regime formula");
  }
  return layout;
}

std::size_t expected_dimension(Regime regime, std::size_t n_assets, std::size_t level, bool time_augmented) {
  return FeatureLayout(regime, n_assets, level, time_augmented).dim();
}

FeatureVector assemble_tv(const stochastic::GbmScenarioTV& s, std::size_t level, bool time_augment) {
  s.validate();
  const std::size_t n = s.n_assets();
  const FeatureLayout layout(Regime::kTimeVarying, n, level, time_augment);
  const double T = s.maturity;
  const double root_t = std::sqrt(T);
  Builder b(layout);
  b.push(path_mean(s.r, T) * T);
  for (const auto& q : s.q) b.push(path_mean(q, T) * T);
  for (const auto& sig : s.sigma) b.push(path_mean(sig, T) * root_t);
  b.push_all(path_signature(s.r, T, level, time_augment), T);
  for (const auto& q : s.q) b.push_all(path_signature(q, T, level, time_augment), T);
  for (const auto& sig : s.sigma) b.push_all(path_signature(sig, T, level, time_augment), T);
  b.push_all(s.chol.lower_triangle(), root_t);
  b.push(T);
  return std::move(b).finish();
}

FeatureVector assemble_lv(const stochastic::GbmScenarioLV& s, std::size_t level, bool time_augment) {
  s.validate();
  const std::size_t n = s.n_assets();
  const FeatureLayout layout(Regime::kLocalVol, n, level, time_augment);
  const double T = s.maturity;
  Builder b(layout);
  b.push_all(s.weights, T);
  b.push(path_mean(s.r, T) * T);
  for (const auto& q : s.q) b.push(path_mean(q, T) * T);
  b.push_all(path_signature(s.r, T, level, time_augment), T);
  for (const auto& q : s.q) b.push_all(path_signature(q, T, level, time_augment), T);
  for (const auto& v : s.vol) b.push(v.a_loc * T);
  for (const auto& v : s.vol) b.push(v.b_loc * T);
  for (const auto& v : s.vol) b.push(v.c_loc * T);
  b.push_all(s.chol.lower_triangle(), std::sqrt(T));
  b.push(T);
  return std::move(b).finish();
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw InvalidInput("standardizer mean/scale length mismatch");
  for (double s : scale_)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidInput("standardizer scale must be positive");
}

Standardizer Standardizer::identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

namespace {

template <class T>
Standardizer fit_rows(std::span<const T> rows, std::size_t stride, std::size_t dim) {
  if (stride < dim || rows.empty() || rows.size() % stride != 0) throw InvalidInput("bad standardizer input shape");
  const std::size_t count = rows.size() / stride;
  std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
  // Welford, one pass per feature column in record order.
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double x = static_cast<double>(rows[r * stride + c]);
      const double d = x - mean[c];
      mean[c] += d / static_cast<double>(r + 1);
      m2[c] += d * (x - mean[c]);
    }
  }
  std::vector<double> scale(dim, 1.0);
  for (std::size_t c = 0; c < dim; ++c) {
    const double var = count > 1 ? m2[c] / static_cast<double>(count - 1) : 0.0;
    const double sd = std::sqrt(var);
    scale[c] = sd > 1e-12 * std::max(1.0, std::abs(mean[c])) ? sd : 1.0;
  }
  return {std::move(mean), std::move(scale)};
}

}  // namespace

Standardizer Standardizer::fit(std::span<const double> rows, std::size_t dim) { return fit_rows(rows, dim, dim); }

Standardizer Standardizer::fit(std::span<const float> rows, std::size_t stride, std::size_t dim) {
  return fit_rows(rows, stride, dim);
}

void Standardizer::apply_inplace(std::span<double> x) const {
  if (x.size() != mean_.size()) throw InvalidInput("standardizer dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - mean_[i]) / scale_[i];
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  apply_inplace(out);
  return out;
}

}  // namespace smdn::features
