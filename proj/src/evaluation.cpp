#include "smdn/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "smdn/error.hpp"
#include "smdn/metrics.hpp"

namespace smdn::evaluation {

std::vector<double> ScenarioReport::kl_values() const {
  std::vector<double> v;
  for (const auto& m : maturities) v.push_back(m.kl);
  return v;
}

std::vector<double> ScenarioReport::relative_errors() const {
  std::vector<double> v;
  for (const auto& m : maturities)
    for (const auto& row : m.prices)
      if (row.relative_error) v.push_back(*row.relative_error);
  return v;
}

dataset::Scenario at_maturity(const dataset::Scenario& scenario, double T) {
  return std::visit(
      [T](auto s) -> dataset::Scenario {
        s.maturity = T;
        s.validate();
        return s;
      },
      scenario);
}

std::vector<double> scenario_weights(const dataset::Scenario& scenario, std::span<const double> tv_weights) {
  if (const auto* lv = std::get_if<stochastic::GbmScenarioLV>(&scenario)) return lv->weights;
  return {tv_weights.begin(), tv_weights.end()};
}

ScenarioReport evaluate(const model::Model& model, const dataset::Scenario& scenario,
                        std::span<const double> weights, const Settings& settings, const rng::StreamKey& key,
                        std::string id) {
  if (settings.mc_paths < 2) throw InvalidInput("mc_paths must be at least 2");
  if (settings.maturities.empty() || settings.strikes.empty()) throw InvalidInput("evaluation grids must be nonempty");
  ScenarioReport report;
  report.id = std::move(id);
  report.mc_paths = settings.mc_paths;
  if (settings.mc_paths < 1000) {
    report.warnings.push_back("mc_paths " + std::to_string(settings.mc_paths) +
                              " is below 1000; KDE and Monte Carlo prices are noisy");
  }
  const auto& layout = model.layout;

  for (std::size_t k = 0; k < settings.maturities.size(); ++k) {
    const double T = settings.maturities[k];
    const dataset::Scenario s = at_maturity(scenario, T);
    MaturityReport mr;
    mr.maturity = T;

    const auto prices = std::visit(
        [&](const auto& sc) { return stochastic::simulate_terminal_prices(sc, settings.mc_paths, key.child(k)); }, s);
    const auto y = stochastic::log_basket_returns(prices, weights);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    mr.mc_mean = mean;
    mr.mc_std = std::sqrt(var / static_cast<double>(y.size() - 1));

    const auto fv = dataset::assemble(s, layout.level(), layout.time_augmented());
    mr.mixture = model.predict(fv.values);
    mr.discount = std::visit([T](const auto& sc) { return pricing::discount_factor(sc.r, T); }, s);

    mr.bandwidth = metrics::silverman_bandwidth(y);
    const auto grid = metrics::evaluation_grid(y, mr.bandwidth, mr.mixture, settings.grid_points);
    const auto p_mc = metrics::kde(y, grid, mr.bandwidth);
    const auto p_mdn = metrics::mixture_density(mr.mixture, grid);
    mr.kl = metrics::kl_divergence(p_mc, p_mdn);

    for (auto kind : {pricing::OptionKind::kCall, pricing::OptionKind::kPut}) {
      for (double K : settings.strikes) {
        const pricing::OptionSpec spec{kind, K, T};
        const auto mc = pricing::mc_price(y, spec, mr.discount);
        const auto cf = pricing::mixture_european_price(mr.mixture, spec, mr.discount);
        mr.prices.push_back({report.id, T, K, kind, mc.method, mc.price, mc.std_error, std::nullopt});
        mr.prices.push_back({report.id, T, K, kind, cf.method, cf.price, std::nullopt,
                             metrics::huberized_relative_error(cf.price, mc.price)});
      }
    }
    report.maturities.push_back(std::move(mr));
  }
  return report;
}

nlohmann::json to_json(const ScenarioReport& r) {
  nlohmann::json maturities = nlohmann::json::array();
  for (const auto& m : r.maturities) {
    std::vector<double> errors;
    for (const auto& row : m.prices)
      if (row.relative_error) errors.push_back(*row.relative_error);
    maturities.push_back({{"maturity", m.maturity},
                          {"kl", m.kl},
                          {"bandwidth", m.bandwidth},
                          {"discount", m.discount},
                          {"mc_mean", m.mc_mean},
                          {"mc_std", m.mc_std},
                          {"median_relative_error", median(errors)},
                          {"max_relative_error", errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end())},
                          {"mixture", {{"pi", m.mixture.pi}, {"mu", m.mixture.mu}, {"delta", m.mixture.delta}}}});
  }
  return {{"scenario_id", r.id},
          {"mc_paths", r.mc_paths},
          {"median_kl", median(r.kl_values())},
          {"median_relative_error", median(r.relative_errors())},
          {"maturities", maturities},
          {"warnings", r.warnings}};
}

void write_csv(std::ostream& out, std::span<const ScenarioReport> reports) {
  std::vector<pricing::PriceRow> rows;
  for (const auto& r : reports)
    for (const auto& m : r.maturities) rows.insert(rows.end(), m.prices.begin(), m.prices.end());
  pricing::write_price_csv(out, rows);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace smdn::evaluation
