#include "smdn/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

#include "smdn/error.hpp"

namespace smdn::pricing {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double payoff(OptionKind kind, double y, double strike) {
  const double s = std::exp(y);
  return kind == OptionKind::kCall ? std::max(s - strike, 0.0) : std::max(strike - s, 0.0);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Trapezoid sum of f on [a, b] with n intervals.
template <class F>
double trapezoid(F&& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i));
  return s * h;
}

template <class F>
double richardson(F&& f, double a, double b, std::size_t n) {
  if (b <= a) return 0.0;
  const double coarse = trapezoid(f, a, b, n);
  const double fine = trapezoid(f, a, b, 2 * n);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace

std::string_view kind_name(OptionKind kind) { return kind == OptionKind::kCall ? "call" : "put"; }

OptionKind parse_kind(std::string_view name) {
  if (name == "call") return OptionKind::kCall;
  if (name == "put") return OptionKind::kPut;
  throw InvalidInput("option kind must be call or put, got '" + std::string(name) + "'");
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::kClosedForm: return "mixture-closed-form";
    case Method::kQuadrature: return "mixture-quadrature";
    case Method::kMonteCarlo: return "monte-carlo";
  }
  return "unknown";
}

void OptionSpec::validate() const {
  if (!(strike > 0.0) || !std::isfinite(strike)) throw InvalidInput("strike must be positive and finite");
  if (!(maturity > 0.0) || !std::isfinite(maturity)) throw InvalidInput("maturity must be positive");
}

double discount_factor(const stochastic::RatePath& r, double T) {
  r.validate();
  if (!(T > 0.0)) throw InvalidInput("discount maturity must be positive");
  if (r.horizon() < T - 1e-9) throw InvalidInput("rate path does not cover the maturity");
  return std::exp(-r.integral(T));
}

double mixture_forward(const mdn::MixtureParams& mix) {
  double f = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) f += mix.pi[j] * std::exp(mix.mu[j] + 0.5 * mix.delta[j] * mix.delta[j]);
  return f;
}

PriceQuote mixture_european_price(const mdn::MixtureParams& mix, const OptionSpec& spec, double discount) {
  spec.validate();
  mix.validate();
  const double log_k = std::log(spec.strike);
  double total = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double mu = mix.mu[j], s = mix.delta[j];
    const double fwd = std::exp(mu + 0.5 * s * s);
    const double d1 = (mu + s * s - log_k) / s;
    const double d2 = (mu - log_k) / s;
    const double value = spec.kind == OptionKind::kCall ? fwd * normal_cdf(d1) - spec.strike * normal_cdf(d2)
                                                        : spec.strike * normal_cdf(-d2) - fwd * normal_cdf(-d1);
    total += mix.pi[j] * std::max(value, 0.0);
  }
  return {discount * total, std::nullopt, Method::kClosedForm};
}

PriceQuote quadrature_price(const mdn::MixtureParams& mix, const OptionSpec& spec, double discount,
                            std::size_t resolution) {
  spec.validate();
  mix.validate();
  if (resolution < 16) throw InvalidInput("quadrature resolution must be at least 16");
  const double log_k = std::log(spec.strike);
  double total = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double mu = mix.mu[j], s = mix.delta[j];
    auto integrand = [&](double y) {
      const double z = (y - mu) / s;
      return payoff(spec.kind, y, spec.strike) * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
    };
    const double lo = mu - 12.0 * s, hi = mu + 12.0 * s;
    double part;
    if (log_k > lo && log_k < hi) {
      part = richardson(integrand, lo, log_k, resolution) + richardson(integrand, log_k, hi, resolution);
    } else {
      part = richardson(integrand, lo, hi, resolution);
    }
    total += mix.pi[j] * part;
  }
  return {discount * total, std::nullopt, Method::kQuadrature};
}

PriceQuote mc_price(std::span<const double> y, const OptionSpec& spec, double discount) {
  spec.validate();
  if (y.size() < 2) throw InvalidInput("Monte Carlo pricing needs at least 2 samples");
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double v : y) {
    const double p = payoff(spec.kind, v, spec.strike);
    ++n;
    const double delta = p - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (p - mean);
  }
  const double sd = std::sqrt(m2 / static_cast<double>(n - 1));
  return {discount * mean, discount * sd / std::sqrt(static_cast<double>(n)), Method::kMonteCarlo};
}

void write_price_csv(std::ostream& out, std::span<const PriceRow> rows) {
  out << "scenario_id,maturity,strike,kind,method,price,stderr,relative_error\n";
  for (const auto& r : rows) {
    out << r.scenario_id << ',' << format_double(r.maturity) << ',' << format_double(r.strike) << ','
        << kind_name(r.kind) << ',' << method_name(r.method) << ',' << format_double(r.price) << ','
        << (r.std_error ? format_double(*r.std_error) : "") << ','
        << (r.relative_error ? format_double(*r.relative_error) : "") << '\n';
  }
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return v;
}

std::vector<double> default_strikes() { return linspace(0.8, 1.2, 21); }

std::vector<double> default_maturities() { return {0.25, 0.5, 0.75, 1.0}; }

}  // namespace smdn::pricing
