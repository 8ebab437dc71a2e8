#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "smdn/rng.hpp"

namespace smdn::stochastic {

inline constexpr double kTradingDaysPerYear = 252.0;

// dX = a (b - X) dt + c sqrt(X) dW with X(0) drawn from [x0_lo, x0_hi].
struct CirParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double x0_lo = 0.0;
  double x0_hi = 0.0;

  // Strict check used for sampling configurations.
  void validate() const;
};

// CIR parameters for each rate family; defaults are the reference table.
struct CirTable {
  CirParams rate{0.6, 0.05, 0.05, 0.005, 0.1};
  CirParams dividend{0.6, 0.03, 0.02, 0.005, 0.1};
  CirParams volatility{0.75, 0.1, 0.2, 0.01, 0.2};
};

// Levels sampled on the uniform grid 0, dt, 2 dt, ...
struct RatePath {
  double dt = 0.0;
  std::vector<double> values;

  double horizon() const { return dt * static_cast<double>(values.size() - 1); }
  // Linear interpolation between grid points; t must lie in [0, horizon].
  double at(double t) const;
  // Samples on [0, t]: every grid point strictly before t, then the value at t.
  std::vector<double> restricted(double t) const;
  // Integral over [0, t] of the piecewise-linear interpolant (trapezoid rule).
  double integral(double t) const;
  // Mean of the interpolant over grid step k clipped to [0, t].
  double step_average(std::size_t k, double t) const;

  void validate() const;
};

// Number of dt-steps needed to cover [0, T].
std::size_t steps_to_cover(double T, double dt);

RatePath simulate_cir(const CirParams& params, double x0, double T, double dt, rng::Stream& rng);

// Lower-triangular correlation factor stored row-major.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  CholeskyFactor(std::size_t n, std::vector<double> entries);

  static CholeskyFactor identity(std::size_t n);
  // Standard Cholesky of a correlation matrix (row-major n x n, unit diagonal).
  static CholeskyFactor from_correlation(std::size_t n, std::span<const double> correlation);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> entries() const { return entries_; }
  // Lower triangle including the diagonal, row-major.
  std::vector<double> lower_triangle() const;
  // L L^T, row-major.
  std::vector<double> correlation() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

// Angle count N(N-1)/2 determines the basket size N.
CholeskyFactor cholesky_from_angles(std::span<const double> angles);

struct LocalVolParams {
  double a_loc = 1.0;
  double b_loc = 0.1;
  double c_loc = 0.1;
};

// sigma_L(x) = c ((x - a)^2 + c)^b
double local_vol(double x, const LocalVolParams& p);

struct LocalVolBox {
  double a_lo = 0.5, a_hi = 1.5;
  double b_lo = 0.05, b_hi = 0.5;
  double c_lo = 0.05, c_hi = 0.4;
};

// U-shaped maturity law: with probability beta_weight a Beta(beta_a, beta_b)
// draw, otherwise uniform, mapped affinely onto [lo, hi].
struct MaturityLaw {
  double lo = 0.001;
  double hi = 1.05;
  double beta_weight = 0.7;
  double beta_a = 0.5;
  double beta_b = 0.5;
  std::optional<double> fixed;
};

double sample_maturity(const MaturityLaw& law, rng::Stream& rng);

// Basket weights for the local-volatility regime.
struct WeightLaw {
  enum class Kind { kDirichlet, kFixed };
  Kind kind = Kind::kDirichlet;
  double alpha = 1.0;
  std::vector<double> fixed;
};

std::vector<double> sample_weights(const WeightLaw& law, std::size_t n, rng::Stream& rng);

struct ScenarioConfig {
  std::size_t n_assets = 2;
  double dt = 1.0 / kTradingDaysPerYear;
  CirTable cir;
  MaturityLaw maturity;
  LocalVolBox local_vol;
  WeightLaw weights;
  // Fixed basket weights of the time-varying regime; empty means equal weights.
  std::vector<double> tv_weights;

  std::vector<double> basket_weights_tv() const;
};

struct GbmScenarioTV {
  RatePath r;
  std::vector<RatePath> q;
  std::vector<RatePath> sigma;
  CholeskyFactor chol;
  double maturity = 0.0;

  std::size_t n_assets() const { return q.size(); }
  void validate() const;
};

struct GbmScenarioLV {
  RatePath r;
  std::vector<RatePath> q;
  std::vector<LocalVolParams> vol;
  CholeskyFactor chol;
  std::vector<double> weights;
  double maturity = 0.0;

  std::size_t n_assets() const { return q.size(); }
  void validate() const;
};

// Paths are simulated over [0, horizon]; the scenario maturity is set to T.
GbmScenarioTV sample_scenario_tv_at(const ScenarioConfig& config, double T, double horizon,
                                    rng::Stream& rng);
GbmScenarioLV sample_scenario_lv_at(const ScenarioConfig& config, double T, double horizon,
                                    rng::Stream& rng);
GbmScenarioTV sample_scenario_tv(const ScenarioConfig& config, rng::Stream& rng);
GbmScenarioLV sample_scenario_lv(const ScenarioConfig& config, rng::Stream& rng);

// Row-major n_paths x N matrix of terminal prices.
struct TerminalPrices {
  std::size_t n_paths = 0;
  std::size_t n_assets = 0;
  std::vector<double> values;

  std::span<const double> path(std::size_t p) const { return {values.data() + p * n_assets, n_assets}; }
};

// Initial prices are all 1. Path p draws from Stream(key.child(p)), so the
// output does not depend on the thread count. Parallelised across paths.
TerminalPrices simulate_terminal_prices(const GbmScenarioTV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key);
TerminalPrices simulate_terminal_prices(const GbmScenarioLV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key);

double log_basket_return(std::span<const double> terminal, std::span<const double> weights,
                         std::span<const double> s0);
// One log-return per path with unit initial prices.
std::vector<double> log_basket_returns(const TerminalPrices& prices, std::span<const double> weights);

namespace reference {

// Single-threaded path loop; bit-identical to the parallel kernels.
TerminalPrices simulate_terminal_prices(const GbmScenarioTV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key);
TerminalPrices simulate_terminal_prices(const GbmScenarioLV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key);

}  // namespace reference

}  // namespace smdn::stochastic
