// Command-line front end: gen-data, train, price, evaluate, sample-scenario, defaults.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "smdn/config.hpp"
#include "smdn/dataset.hpp"
#include "smdn/error.hpp"
#include "smdn/evaluation.hpp"
#include "smdn/model.hpp"
#include "smdn/pricing.hpp"
#include "smdn/scenario_io.hpp"
#include "smdn/training.hpp"

namespace {

using namespace smdn;

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kFormatError = 3, kNumericError = 4 };

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Flag, then SMDN_SEED, then the config value.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t from_config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SMDN_SEED")) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("SMDN_SEED", "must be an unsigned integer");
    return v;
  }
  return from_config;
}

void apply_thread_override() {
  if (const char* env = std::getenv("SMDN_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) throw ConfigError("SMDN_THREADS", "must be a positive integer");
    omp_set_num_threads(static_cast<int>(n));
  }
}

std::vector<double> parse_grid(const std::string& text, const std::string& field) {
  if (text.find(':') != std::string::npos) {
    double lo = 0.0, hi = 0.0;
    unsigned long count = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lu%c", &lo, &hi, &count, &tail) != 3 || count == 0) {
      throw ConfigError(field, "expected lo:hi:count or a comma-separated list");
    }
    return pricing::linspace(lo, hi, count);
  }
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') throw ConfigError(field, "unparseable value '" + cell + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(field, "grid is empty");
  return out;
}

void write_history(const std::string& path, const std::vector<mdn::EpochRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,train_nll,validation_nll,learning_rate\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", h.epoch, h.train_nll, h.validation_nll, h.learning_rate);
    out << buf;
  }
}

std::string default_validation_path(const std::string& data) { return data + ".val"; }

int cmd_gen_data(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed_flag,
                 std::string validation_out) {
  const auto rc = config::load(config_path);
  const auto seed = resolve_seed(seed_flag, rc.data_seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = dataset::generate(rc.generation, seed, dataset::Domain::kTraining);
  dataset::save(data, out_path);
  dataset::write_manifest(out_path, rc.generation, seed, dataset::Domain::kTraining, data);
  std::cout << "records " << data.count() << " -> " << out_path << '\n';
  if (rc.validation_n1 > 0) {
    auto vcfg = rc.generation;
    vcfg.n1 = rc.validation_n1;
    const auto val = dataset::generate(vcfg, seed, dataset::Domain::kValidation);
    if (validation_out.empty()) validation_out = default_validation_path(out_path);
    dataset::save(val, validation_out);
    dataset::write_manifest(validation_out, vcfg, seed, dataset::Domain::kValidation, val);
    std::cout << "validation records " << val.count() << " -> " << validation_out << '\n';
  }
  std::printf("wall time %.2f s\n", seconds_since(t0));
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path, const std::string& out_path,
              std::string val_path, const std::string& resume_path, std::string history_path,
              std::optional<std::uint64_t> seed_flag, std::optional<std::size_t> epochs_flag) {
  auto rc = config::load(config_path);
  rc.train.seed = resolve_seed(seed_flag, rc.train.seed);
  if (epochs_flag) rc.train.epochs = *epochs_flag;
  const auto data = dataset::load(data_path);
  if (data.layout() != rc.generation.layout()) {
    throw ConfigError("regime", "dataset layout does not match the config (regime, n_assets, signature_level)");
  }
  if (val_path.empty() && std::filesystem::exists(default_validation_path(data_path))) {
    val_path = default_validation_path(data_path);
  }
  std::optional<dataset::Dataset> val;
  if (!val_path.empty()) val = dataset::load(val_path);
  std::optional<model::Model> resume;
  if (!resume_path.empty()) resume = model::load(resume_path);

  const auto t0 = std::chrono::steady_clock::now();
  auto outcome = training::fit(data, val ? &*val : nullptr, rc.mdn, rc.train, resume ? &*resume : nullptr);
  outcome.model.metadata["config"] = rc.canonical;
  model::save(outcome.model, out_path);
  if (history_path.empty()) history_path = out_path + ".history.csv";
  write_history(history_path, outcome.history);
  std::cout << "epochs " << outcome.history.size() << " -> " << out_path << '\n';
  if (!outcome.history.empty()) {
    std::printf("best validation NLL %.6f, final learning rate %.3g%s\n", outcome.model.train_state->best_validation,
                outcome.model.train_state->scheduler.learning_rate,
                outcome.stopped_at_lr_floor ? " (stopped at floor)" : "");
  }
  std::printf("wall time %.2f s\n", seconds_since(t0));
  return kOk;
}

void check_model_scenario(const model::Model& m, const scenario_io::ScenarioFile& f) {
  const bool tv = std::holds_alternative<stochastic::GbmScenarioTV>(f.scenario);
  const auto n = std::visit([](const auto& s) { return s.n_assets(); }, f.scenario);
  const auto regime = tv ? features::Regime::kTimeVarying : features::Regime::kLocalVol;
  if (regime != m.layout.regime()) throw ConfigError("regime", "scenario regime differs from the model's");
  if (n != m.layout.n_assets()) {
    throw ConfigError("n_assets", "scenario has " + std::to_string(n) + " assets, model expects " +
                                      std::to_string(m.layout.n_assets()));
  }
}

int cmd_price(const std::string& model_path, const std::string& scenario_path, const std::string& strikes_text,
              const std::string& kind_text, const std::string& maturities_text, const std::string& out_path) {
  const auto m = model::load(model_path);
  auto f = scenario_io::load(scenario_path);
  check_model_scenario(m, f);
  const auto strikes = strikes_text.empty() ? pricing::default_strikes() : parse_grid(strikes_text, "--strikes");
  for (double k : strikes)
    if (!(k > 0.0)) throw ConfigError("--strikes", "strikes must be positive");
  const auto maturities = maturities_text.empty() ? f.maturities : parse_grid(maturities_text, "--maturities");
  std::vector<pricing::OptionKind> kinds;
  if (kind_text == "both") {
    kinds = {pricing::OptionKind::kCall, pricing::OptionKind::kPut};
  } else {
    try {
      kinds = {pricing::parse_kind(kind_text)};
    } catch (const InvalidInput& e) {
      throw ConfigError("--kind", e.what());
    }
  }

  std::vector<pricing::PriceRow> rows;
  double worst_ms = 0.0;
  for (double T : maturities) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = evaluation::at_maturity(f.scenario, T);
    const auto fv = dataset::assemble(s, m.layout.level(), m.layout.time_augmented());
    const auto mix = m.predict(fv.values);
    const double D = std::visit([T](const auto& sc) { return pricing::discount_factor(sc.r, T); }, s);
    for (auto kind : kinds) {
      for (double K : strikes) {
        const auto q = pricing::mixture_european_price(mix, {kind, K, T}, D);
        rows.push_back({f.id, T, K, kind, q.method, q.price, std::nullopt, std::nullopt});
      }
    }
    worst_ms = std::max(worst_ms, 1e3 * seconds_since(t0));
  }
  if (out_path.empty()) {
    pricing::write_price_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    pricing::write_price_csv(out, rows);
  }
  std::fprintf(stderr, "slowest maturity: %.3f ms (features + forward + %zu prices)\n", worst_ms,
               strikes.size() * kinds.size());
  return kOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& scenario_path, std::optional<std::size_t> mc_paths,
                 std::optional<std::uint64_t> seed_flag, const std::string& config_path, const std::string& prefix) {
  const auto m = model::load(model_path);
  const auto f = scenario_io::load(scenario_path);
  check_model_scenario(m, f);
  evaluation::Settings settings;
  std::uint64_t config_seed = 0;
  if (!config_path.empty()) {
    const auto rc = config::load(config_path);
    settings = rc.evaluation;
    config_seed = rc.evaluation_seed;
  }
  settings.maturities = f.maturities;
  if (mc_paths) settings.mc_paths = *mc_paths;
  const auto seed = resolve_seed(seed_flag, config_seed);
  const auto weights = evaluation::scenario_weights(f.scenario, f.tv_weights);
  const auto report = evaluation::evaluate(m, f.scenario, weights, settings,
                                           rng::StreamKey(seed, rng::Tag::kEvaluation), f.id);
  auto json = evaluation::to_json(report);
  json["seed"] = seed;
  {
    std::ofstream out(prefix + ".json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + prefix + ".json");
    out << json.dump(2) << '\n';
  }
  {
    std::ofstream out(prefix + ".csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + prefix + ".csv");
    evaluation::write_csv(out, std::span<const evaluation::ScenarioReport>(&report, 1));
  }
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& mr : report.maturities) std::printf("T=%.4g KL=%.6f\n", mr.maturity, mr.kl);
  std::printf("median KL %.6f, median Huberized error %.4f -> %s.json, %s.csv\n", evaluation::median(report.kl_values()),
              evaluation::median(report.relative_errors()), prefix.c_str(), prefix.c_str());
  return kOk;
}

int cmd_sample_scenario(const std::string& config_path, const std::string& out_path,
                        std::optional<std::uint64_t> seed_flag, std::uint64_t index) {
  const auto rc = config::load(config_path);
  const auto seed = resolve_seed(seed_flag, rc.evaluation_seed);
  double horizon = 0.0;
  for (double T : rc.evaluation.maturities) horizon = std::max(horizon, T);
  rng::Stream rng(rng::StreamKey(seed, rng::Tag::kHoldout).child(index));
  scenario_io::ScenarioFile f;
  f.id = std::to_string(index);
  f.maturities = rc.evaluation.maturities;
  if (rc.generation.regime == features::Regime::kTimeVarying) {
    f.scenario = stochastic::sample_scenario_tv_at(rc.generation.scenario, horizon, horizon, rng);
    f.tv_weights = rc.generation.scenario.basket_weights_tv();
  } else {
    f.scenario = stochastic::sample_scenario_lv_at(rc.generation.scenario, horizon, horizon, rng);
  }
  scenario_io::save(f, out_path);
  std::cout << "scenario " << f.id << " -> " << out_path << '\n';
  return kOk;
}

int cmd_defaults(const std::string& format) {
  const auto d = config::defaults();
  if (format == "json") {
    std::cout << d.dump(2) << '\n';
    return kOk;
  }
  std::function<void(const nlohmann::json&, const std::string&)> walk = [&](const nlohmann::json& j,
                                                                            const std::string& prefix) {
    for (const auto& [k, v] : j.items()) {
      const std::string key = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object()) {
        walk(v, key);
      } else {
        std::cout << key << " = " << v.dump() << '\n';
      }
    }
  };
  std::cout << "# smdn run configuration (key = JSON value); regime is required\n";
  walk(d, "");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signature-conditioned mixture density network for basket option pricing"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, val_path, resume_path, history_path, model_path, scenario_path;
  std::string strikes_text, kind_text = "both", maturities_text, format = "json", report_prefix = "report";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, mc_paths;
  std::uint64_t index = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate a training set (and a validation set)");
  gen->add_option("--config", config_path, "Run configuration")->required();
  gen->add_option("--out", out_path, "Dataset file")->required();
  gen->add_option("--seed", seed, "Master seed (overrides config and SMDN_SEED)");
  gen->add_option("--validation-out", val_path, "Validation dataset file (default <out>.val)");

  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  train->add_option("--config", config_path, "Run configuration")->required();
  train->add_option("--data", data_path, "Training dataset")->required();
  train->add_option("--out", out_path, "Model file")->required();
  train->add_option("--val", val_path, "Validation dataset (default <data>.val when present)");
  train->add_option("--resume", resume_path, "Continue from a saved model's training state");
  train->add_option("--history", history_path, "History CSV (default <out>.history.csv)");
  train->add_option("--seed", seed, "Training seed");
  train->add_option("--epochs", epochs, "Total epoch budget");

  auto* price = app.add_subcommand("price", "Price European basket options with a trained model");
  price->add_option("--model", model_path, "Model file")->required();
  price->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  price->add_option("--strikes", strikes_text, "lo:hi:count or comma list (default 0.8:1.2:21)");
  price->add_option("--kind", kind_text, "call, put or both")->check(CLI::IsMember({"call", "put", "both"}));
  price->add_option("--maturities", maturities_text, "Override the scenario's maturities");
  price->add_option("--out", out_path, "CSV output (default stdout)");

  auto* eval = app.add_subcommand("evaluate", "Compare a model against Monte Carlo on a scenario");
  eval->add_option("--model", model_path, "Model file")->required();
  eval->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  eval->add_option("--mc-paths", mc_paths, "Monte Carlo paths per maturity");
  eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("--config", config_path, "Run configuration (strike grid, KDE grid)");
  eval->add_option("--out", report_prefix, "Report prefix: writes <out>.json and <out>.csv");

  auto* sample = app.add_subcommand("sample-scenario", "Draw a held-out scenario from the config's laws");
  sample->add_option("--config", config_path, "Run configuration")->required();
  sample->add_option("--out", out_path, "Scenario JSON (series CSV written alongside)")->required();
  sample->add_option("--seed", seed, "Scenario seed");
  sample->add_option("--index", index, "Scenario index within the seed");

  auto* defaults = app.add_subcommand("defaults", "Print every configuration key with its default");
  defaults->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    apply_thread_override();
    if (*gen) return cmd_gen_data(config_path, out_path, seed, val_path);
    if (*train) return cmd_train(config_path, data_path, out_path, val_path, resume_path, history_path, seed, epochs);
    if (*price) return cmd_price(model_path, scenario_path, strikes_text, kind_text, maturities_text, out_path);
    if (*eval) return cmd_evaluate(model_path, scenario_path, mc_paths, seed, config_path, report_prefix);
    if (*sample) return cmd_sample_scenario(config_path, out_path, seed, index);
    if (*defaults) return cmd_defaults(format);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfigError;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kFormatError;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return kNumericError;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumericError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
