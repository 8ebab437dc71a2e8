#include "smdn/dataset.hpp"

#include <cstring>
#include <exception>
#include <fstream>
#include <optional>
#include <string>

#include "binary_io.hpp"
#include "smdn/error.hpp"

namespace smdn::dataset {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'N', 'S', 'E', 'T', '1', '\0'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json cir_json(const stochastic::CirParams& p) {
  return {{"a", p.a}, {"b", p.b}, {"c", p.c}, {"x0", {p.x0_lo, p.x0_hi}}};
}

}  // namespace

void GenerationConfig::validate() const {
  if (n1 == 0 || n2 == 0 || n_targets == 0) throw InvalidInput("n1, n2 and M must be at least 1");
  if (level == 0) throw InvalidInput("signature level must be at least 1");
  if (scenario.n_assets == 0) throw InvalidInput("basket needs at least one asset");
  if (!(scenario.dt > 0.0)) throw InvalidInput("dt must be positive");
  scenario.cir.rate.validate();
  scenario.cir.dividend.validate();
  if (regime == features::Regime::kTimeVarying) scenario.cir.volatility.validate();
  const auto& law = scenario.maturity;
  if (law.fixed) {
    if (!(*law.fixed > 0.0 && *law.fixed <= 1.05)) throw InvalidInput("fixed maturity must lie in (0, 1.05]");
  } else if (!(law.lo > 0.0 && law.lo < law.hi && law.hi <= 1.05)) {
    throw InvalidInput("maturity range must satisfy 0 < lo < hi <= 1.05");
  }
  if (!(law.beta_weight >= 0.0 && law.beta_weight <= 1.0) || !(law.beta_a > 0.0) || !(law.beta_b > 0.0)) {
    throw InvalidInput("invalid maturity mixture parameters");
  }
  if (regime == features::Regime::kTimeVarying) {
    const auto w = scenario.basket_weights_tv();
    double total = 0.0;
    for (double v : w) total += v;
    if (w.size() != scenario.n_assets || std::abs(total - 1.0) > 1e-12) {
      throw InvalidInput("tv basket weights must have N entries summing to 1");
    }
  } else if (scenario.weights.kind == stochastic::WeightLaw::Kind::kFixed) {
    double total = 0.0;
    for (double v : scenario.weights.fixed) total += v;
    if (scenario.weights.fixed.size() != scenario.n_assets || std::abs(total - 1.0) > 1e-12) {
      throw InvalidInput("fixed basket weights must have N entries summing to 1");
    }
  } else if (!(scenario.weights.alpha > 0.0)) {
    throw InvalidInput("Dirichlet concentration must be positive");
  }
}

features::FeatureLayout GenerationConfig::layout() const {
  return {regime, scenario.n_assets, level, time_augmented};
}

nlohmann::json GenerationConfig::to_json() const {
  const auto& s = scenario;
  nlohmann::json maturity{{"lo", s.maturity.lo},
                          {"hi", s.maturity.hi},
                          {"beta_weight", s.maturity.beta_weight},
                          {"beta_a", s.maturity.beta_a},
                          {"beta_b", s.maturity.beta_b},
                          {"fixed", s.maturity.fixed ? nlohmann::json(*s.maturity.fixed) : nlohmann::json(nullptr)}};
  return {{"regime", features::regime_name(regime)},
          {"n_assets", s.n_assets},
          {"dt", s.dt},
          {"signature_level", level},
          {"time_augmented", time_augmented},
          {"n1", n1},
          {"n2", n2},
          {"M", n_targets},
          {"cir", {{"rate", cir_json(s.cir.rate)}, {"dividend", cir_json(s.cir.dividend)}, {"volatility", cir_json(s.cir.volatility)}}},
          {"maturity", maturity},
          {"local_vol",
           {{"a", {s.local_vol.a_lo, s.local_vol.a_hi}},
            {"b", {s.local_vol.b_lo, s.local_vol.b_hi}},
            {"c", {s.local_vol.c_lo, s.local_vol.c_hi}}}},
          {"weights",
           {{"law", s.weights.kind == stochastic::WeightLaw::Kind::kFixed ? "fixed" : "dirichlet"},
            {"alpha", s.weights.alpha},
            {"fixed", s.weights.fixed}}},
          {"tv_weights", s.basket_weights_tv()}};
}

std::uint64_t config_digest(const GenerationConfig& config, std::uint64_t seed, Domain domain) {
  const nlohmann::json j{{"config", config.to_json()}, {"seed", seed}, {"domain", static_cast<std::uint64_t>(domain)}};
  return fnv1a(j.dump());
}

features::FeatureLayout Dataset::layout() const { return {regime, n_assets, level, time_augmented}; }

Scenario scenario_for(const GenerationConfig& config, std::uint64_t seed, Domain domain, std::size_t i,
                      std::size_t m) {
  const auto d = static_cast<std::uint64_t>(domain);
  rng::Stream maturity_rng(rng::StreamKey(seed, rng::Tag::kMaturity).child({d, i}));
  const double T = stochastic::sample_maturity(config.scenario.maturity, maturity_rng);
  rng::Stream rng(rng::StreamKey(seed, rng::Tag::kScenario).child({d, i, m}));
  if (config.regime == features::Regime::kTimeVarying) {
    return stochastic::sample_scenario_tv_at(config.scenario, T, T, rng);
  }
  return stochastic::sample_scenario_lv_at(config.scenario, T, T, rng);
}

rng::StreamKey paths_key(std::uint64_t seed, Domain domain, std::size_t i, std::size_t m) {
  return rng::StreamKey(seed, rng::Tag::kPaths).child({static_cast<std::uint64_t>(domain), i, m});
}

std::vector<double> basket_weights(const GenerationConfig& config, const Scenario& scenario) {
  if (const auto* lv = std::get_if<stochastic::GbmScenarioLV>(&scenario)) return lv->weights;
  return config.scenario.basket_weights_tv();
}

features::FeatureVector assemble(const Scenario& scenario, std::size_t level, bool time_augmented) {
  return std::visit(
      [&](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, stochastic::GbmScenarioTV>) {
          return features::assemble_tv(s, level, time_augmented);
        } else {
          return features::assemble_lv(s, level, time_augmented);
        }
      },
      scenario);
}

Dataset generate(const GenerationConfig& config, std::uint64_t seed, Domain domain) {
  config.validate();
  const auto layout = config.layout();
  Dataset data;
  data.regime = config.regime;
  data.n_assets = static_cast<std::uint32_t>(config.scenario.n_assets);
  data.level = static_cast<std::uint32_t>(config.level);
  data.n_targets = static_cast<std::uint32_t>(config.n_targets);
  data.feature_dim = static_cast<std::uint32_t>(layout.dim());
  data.time_augmented = config.time_augmented;
  data.digest = config_digest(config, seed, domain);
  const std::size_t count = config.n1 * config.n2;
  const std::size_t stride = data.stride();
  data.records.assign(count * stride, 0.0f);

  std::vector<std::exception_ptr> errors(count);
  const auto total = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < total; ++k) {
    const std::size_t i = static_cast<std::size_t>(k) / config.n2;
    const std::size_t m = static_cast<std::size_t>(k) % config.n2;
    try {
      const Scenario scenario = scenario_for(config, seed, domain, i, m);
      const auto fv = assemble(scenario, config.level, config.time_augmented);
      const auto prices = std::visit(
          [&](const auto& s) {
            return stochastic::reference::simulate_terminal_prices(s, config.n_targets, paths_key(seed, domain, i, m));
          },
          scenario);
      const auto y = stochastic::log_basket_returns(prices, basket_weights(config, scenario));
      float* row = data.records.data() + static_cast<std::size_t>(k) * stride;
      for (std::size_t c = 0; c < fv.values.size(); ++c) row[c] = static_cast<float>(fv.values[c]);
      for (std::size_t c = 0; c < y.size(); ++c) {
        if (!std::isfinite(y[c])) throw NumericError("non-finite target");
        row[fv.values.size() + c] = static_cast<float>(y[c]);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (!errors[k]) continue;
    const std::string where = "record (i=" + std::to_string(k / config.n2) + ", m=" + std::to_string(k % config.n2) + "): ";
    try {
      std::rethrow_exception(errors[k]);
    } catch (const InvalidInput& e) {
      throw InvalidInput(where + e.what());
    } catch (const std::exception& e) {
      throw NumericError(where + e.what());
    }
  }
  return data;
}

Dataset generate_tv(std::size_t n1, std::size_t n2, std::size_t M, GenerationConfig config, std::uint64_t seed) {
  config.regime = features::Regime::kTimeVarying;
  config.n1 = n1;
  config.n2 = n2;
  config.n_targets = M;
  return generate(config, seed);
}

Dataset generate_lv(std::size_t n1, std::size_t n2, std::size_t M, GenerationConfig config, std::uint64_t seed) {
  config.regime = features::Regime::kLocalVol;
  config.n1 = n1;
  config.n2 = n2;
  config.n_targets = M;
  return generate(config, seed);
}

TrainingArrays to_training_arrays(const Dataset& data, const features::Standardizer* standardizer,
                                  std::size_t begin, std::size_t end) {
  end = std::min(end, data.count());
  if (begin > end) throw InvalidInput("record range is empty");
  TrainingArrays out;
  out.dim = data.feature_dim;
  out.n_targets = data.n_targets;
  out.features.reserve((end - begin) * out.dim);
  out.targets.reserve((end - begin) * out.n_targets);
  std::vector<double> row(out.dim);
  for (std::size_t i = begin; i < end; ++i) {
    const auto x = data.x(i);
    std::copy(x.begin(), x.end(), row.begin());
    if (standardizer != nullptr) standardizer->apply_inplace(row);
    out.features.insert(out.features.end(), row.begin(), row.end());
    const auto y = data.y(i);
    out.targets.insert(out.targets.end(), y.begin(), y.end());
  }
  return out;
}

void write(const Dataset& data, std::ostream& out) {
  if (data.records.size() != data.count() * data.stride()) throw InvalidInput("record buffer is not a whole number of records");
  io::Writer w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.scalar<std::uint32_t>(kFormatVersion);
  w.scalar<std::uint32_t>(data.regime == features::Regime::kTimeVarying ? 0 : 1);
  w.scalar<std::uint32_t>(data.n_assets);
  w.scalar<std::uint32_t>(data.level);
  w.scalar<std::uint32_t>(data.n_targets);
  w.scalar<std::uint32_t>(data.feature_dim);
  w.scalar<std::uint32_t>(data.time_augmented ? 1 : 0);
  w.scalar<std::uint64_t>(data.count());
  w.scalar<std::uint64_t>(data.digest);
  w.array(std::span<const float>(data.records));
  if (!out) throw std::runtime_error("failed to write dataset");
}

Dataset read(std::istream& in) {
  io::Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("magic", "not an MDNSET1 dataset");
  const auto version = r.scalar<std::uint32_t>("version");
  if (version != kFormatVersion) throw FormatError("version", "unsupported dataset version " + std::to_string(version));
  const auto regime = r.scalar<std::uint32_t>("regime");
  if (regime > 1) throw FormatError("regime", "unknown regime tag " + std::to_string(regime));
  Dataset d;
  d.regime = regime == 0 ? features::Regime::kTimeVarying : features::Regime::kLocalVol;
  d.n_assets = r.scalar<std::uint32_t>("n_assets");
  d.level = r.scalar<std::uint32_t>("level");
  d.n_targets = r.scalar<std::uint32_t>("n_targets");
  d.feature_dim = r.scalar<std::uint32_t>("feature_dim");
  const auto flags = r.scalar<std::uint32_t>("flags");
  if (flags > 1) throw FormatError("flags", "unknown flag bits");
  d.time_augmented = flags == 1;
  if (d.n_assets == 0 || d.n_assets > 64) throw FormatError("n_assets", "out of range");
  if (d.level == 0 || d.level > 16) throw FormatError("level", "out of range");
  if (d.n_targets == 0) throw FormatError("n_targets", "must be at least 1");
  const auto expected = features::expected_dimension(d.regime, d.n_assets, d.level, d.time_augmented);
  if (d.feature_dim != expected) {
    throw FormatError("feature_dim", "header says " + std::to_string(d.feature_dim) + " but regime " +
                                         std::string(features::regime_name(d.regime)) + " with N=" +
                                         std::to_string(d.n_assets) + ", l=" + std::to_string(d.level) +
                                         " requires " + std::to_string(expected));
  }
  const auto count = r.scalar<std::uint64_t>("record_count");
  if (count == 0) throw FormatError("record_count", "dataset is empty");
  d.digest = r.scalar<std::uint64_t>("digest");
  const std::uint64_t n_floats = count * d.stride();
  if (count > (std::uint64_t{1} << 40) / d.stride()) throw FormatError("record_count", "implausibly large");
  d.records = r.array<float>(n_floats, "records");
  if (!r.at_end()) throw FormatError("records", "trailing bytes after the last record");
  return d;
}

void save(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(data, out);
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("path", "cannot open " + path.string());
  return read(in);
}

void write_manifest(const std::filesystem::path& dataset_path, const GenerationConfig& config, std::uint64_t seed,
                    Domain domain, const Dataset& data) {
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(data.digest));
  const nlohmann::json manifest{{"format", "MDNSET1"},
                                {"version", kFormatVersion},
                                {"seed", seed},
                                {"domain", static_cast<std::uint64_t>(domain)},
                                {"record_count", data.count()},
                                {"feature_dim", data.feature_dim},
                                {"digest", digest},
                                {"layout", data.layout().to_json()},
                                {"generation", config.to_json()}};
  std::ofstream out(dataset_path.string() + ".json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest for " + dataset_path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace smdn::dataset
