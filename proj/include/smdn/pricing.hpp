#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smdn/mdn.hpp"
#include "smdn/stochastic.hpp"

namespace smdn::pricing {

enum class OptionKind { kCall, kPut };

std::string_view kind_name(OptionKind kind);
OptionKind parse_kind(std::string_view name);

// Strike in gross-return units: the payoff is on exp(y), y the log basket return.
struct OptionSpec {
  OptionKind kind = OptionKind::kCall;
  double strike = 1.0;
  double maturity = 1.0;

  void validate() const;
};

enum class Method { kClosedForm, kQuadrature, kMonteCarlo };

std::string_view method_name(Method method);

struct PriceQuote {
  double price = 0.0;
  std::optional<double> std_error;
  Method method = Method::kClosedForm;
};

// exp(-integral of r over [0, T]) with the trapezoid rule on the path grid.
double discount_factor(const stochastic::RatePath& r, double T);

// Mixture-implied forward gross return: sum_j pi_j exp(mu_j + delta_j^2 / 2).
double mixture_forward(const mdn::MixtureParams& mix);

// Lognormal closed form per component, weighted by pi and discounted.
PriceQuote mixture_european_price(const mdn::MixtureParams& mix, const OptionSpec& spec, double discount);

// Trapezoid rule per component over mu +- 12 delta, split at ln K, with one
// Richardson extrapolation step. `resolution` counts intervals per piece.
PriceQuote quadrature_price(const mdn::MixtureParams& mix, const OptionSpec& spec, double discount,
                            std::size_t resolution = 4096);

// Discounted sample mean of the payoff; std_error uses the n - 1 sample std.
PriceQuote mc_price(std::span<const double> y_samples, const OptionSpec& spec, double discount);

struct PriceRow {
  std::string scenario_id;
  double maturity = 0.0;
  double strike = 0.0;
  OptionKind kind = OptionKind::kCall;
  Method method = Method::kClosedForm;
  double price = 0.0;
  std::optional<double> std_error;
  std::optional<double> relative_error;
};

// Columns: scenario_id, maturity, strike, kind, method, price, stderr, relative_error.
void write_price_csv(std::ostream& out, std::span<const PriceRow> rows);

// 21 strikes on [0.8, 1.2].
std::vector<double> default_strikes();
std::vector<double> default_maturities();
std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace smdn::pricing
