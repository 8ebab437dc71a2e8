#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "smdn/dataset.hpp"
#include "smdn/model.hpp"
#include "smdn/pricing.hpp"
#include "smdn/rng.hpp"

namespace smdn::evaluation {

struct Settings {
  std::vector<double> maturities = pricing::default_maturities();
  std::vector<double> strikes = pricing::default_strikes();
  std::size_t mc_paths = 100000;
  std::size_t grid_points = 512;
};

struct MaturityReport {
  double maturity = 0.0;
  double kl = 0.0;
  double bandwidth = 0.0;
  double discount = 1.0;
  double mc_mean = 0.0;
  double mc_std = 0.0;
  mdn::MixtureParams mixture;
  // Monte Carlo and closed-form rows; closed-form rows carry the Huberized error.
  std::vector<pricing::PriceRow> prices;
};

struct ScenarioReport {
  std::string id;
  std::size_t mc_paths = 0;
  std::vector<MaturityReport> maturities;
  std::vector<std::string> warnings;

  std::vector<double> kl_values() const;
  std::vector<double> relative_errors() const;
};

// The same scenario with its maturity moved to T (paths must cover T).
dataset::Scenario at_maturity(const dataset::Scenario& scenario, double T);

// Basket weights of the scenario: its own for local vol, `tv_weights` otherwise.
std::vector<double> scenario_weights(const dataset::Scenario& scenario, std::span<const double> tv_weights);

// Monte Carlo reference, KDE, KL(p_MC || p_MDN) and price comparison at every
// maturity. Maturity k simulates from key.child(k).
ScenarioReport evaluate(const model::Model& model, const dataset::Scenario& scenario,
                        std::span<const double> basket_weights, const Settings& settings, const rng::StreamKey& key,
                        std::string id = "0");

nlohmann::json to_json(const ScenarioReport& report);
void write_csv(std::ostream& out, std::span<const ScenarioReport> reports);

double median(std::vector<double> values);

}  // namespace smdn::evaluation
