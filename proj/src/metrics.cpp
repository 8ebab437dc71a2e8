#include "smdn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smdn/error.hpp"

namespace smdn::metrics {

namespace {

constexpr double kWindow = 9.0;
constexpr double kDensityFloor = 1e-300;
constexpr double kMinComponentWeight = 1e-3;

double gaussian(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

void check_samples(std::span<const double> samples) {
  if (samples.size() < 30) throw InvalidInput("KDE needs at least 30 samples");
  for (double v : samples)
    if (!std::isfinite(v)) throw InvalidInput("KDE samples must be finite");
}

double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= sorted.size()) return sorted.back();
  return sorted[k] + (pos - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
}

}  // namespace

void GridSpec::validate() const {
  if (!(dx > 0.0) || !std::isfinite(dx) || !std::isfinite(x0)) throw InvalidInput("grid spacing must be positive");
  if (points < 2) throw InvalidInput("grid needs at least 2 points");
}

double DensityGrid::integral() const {
  if (values.size() < 2) return 0.0;
  double s = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
  return s * dx;
}

bool DensityGrid::same_grid(const DensityGrid& o) const {
  const double scale = std::max(std::abs(dx), std::abs(o.dx));
  return values.size() == o.values.size() && std::abs(dx - o.dx) <= 1e-12 * scale &&
         std::abs(x0 - o.x0) <= 1e-9 * scale;
}

double silverman_bandwidth(std::span<const double> samples) {
  check_samples(samples);
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = (quantile(sorted, 0.75) - quantile(sorted, 0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0)) spread = std::max(sd, iqr);
  if (!(spread > 0.0)) throw InvalidInput("KDE samples have zero variance");
  return 0.9 * spread * std::pow(n, -0.2);
}

GridSpec kde_support(std::span<const double> samples, double h, std::size_t points) {
  check_samples(samples);
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double a = *lo - 4.0 * h, b = *hi + 4.0 * h;
  GridSpec g{a, (b - a) / static_cast<double>(points - 1), points};
  g.validate();
  return g;
}

DensityGrid kde(std::span<const double> samples) {
  const double h = silverman_bandwidth(samples);
  return kde(samples, kde_support(samples, h), h);
}

DensityGrid kde(std::span<const double> samples, const GridSpec& grid, double h) {
  check_samples(samples);
  grid.validate();
  if (!(h > 0.0)) throw InvalidInput("bandwidth must be positive");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  DensityGrid out{grid.x0, grid.dx, std::vector<double>(grid.points)};
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h);
  const auto count = static_cast<std::ptrdiff_t>(grid.points);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const double x = grid.x(static_cast<std::size_t>(i));
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - kWindow * h);
    const auto last = std::upper_bound(first, sorted.end(), x + kWindow * h);
    double s = 0.0;
    for (auto it = first; it != last; ++it) s += gaussian((x - *it) / h);
    out.values[static_cast<std::size_t>(i)] = s * norm;
  }
  return out;
}

DensityGrid mixture_density(const mdn::MixtureParams& mix, const GridSpec& grid) {
  grid.validate();
  DensityGrid out{grid.x0, grid.dx, std::vector<double>(grid.points)};
  for (std::size_t i = 0; i < grid.points; ++i) out.values[i] = mdn::mixture_pdf(mix, grid.x(i));
  return out;
}

GridSpec evaluation_grid(std::span<const double> samples, double h, const mdn::MixtureParams& mix,
                         std::size_t points) {
  const GridSpec base = kde_support(samples, h, points);
  double lo = base.x0, hi = base.end();
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.pi[j] < kMinComponentWeight) continue;
    lo = std::min(lo, mix.mu[j] - 10.0 * mix.delta[j]);
    hi = std::max(hi, mix.mu[j] + 10.0 * mix.delta[j]);
  }
  GridSpec g{lo, (hi - lo) / static_cast<double>(points - 1), points};
  g.validate();
  return g;
}

double kl_divergence(const DensityGrid& p, const DensityGrid& q) {
  if (!p.same_grid(q)) throw InvalidInput("KL divergence requires identical grids");
  double s = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double pi = p.values[i];
    if (pi <= 0.0) continue;
    s += pi * std::log(pi / std::max(q.values[i], kDensityFloor));
  }
  return s * p.dx;
}

double huberized_relative_error(double p_mdn, double p_mc) {
  if (!(p_mc >= 0.0)) throw InvalidInput("reference price must be nonnegative");
  return std::abs(p_mdn - p_mc) / (0.00125 * p_mc + 0.00125);
}

namespace reference {

DensityGrid kde(std::span<const double> samples, const GridSpec& grid, double h) {
  check_samples(samples);
  grid.validate();
  DensityGrid out{grid.x0, grid.dx, std::vector<double>(grid.points)};
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h);
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double x = grid.x(i);
    double s = 0.0;
    for (double v : samples) s += gaussian((x - v) / h);
    out.values[i] = s * norm;
  }
  return out;
}

}  // namespace reference

}  // namespace smdn::metrics
