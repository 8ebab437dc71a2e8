#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smdn/mdn.hpp"

namespace smdn::metrics {

// Uniform grid x0, x0 + dx, ..., x0 + (points - 1) dx.
struct GridSpec {
  double x0 = 0.0;
  double dx = 0.0;
  std::size_t points = 0;

  double x(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
  double end() const { return x(points - 1); }
  void validate() const;
};

struct DensityGrid {
  double x0 = 0.0;
  double dx = 0.0;
  std::vector<double> values;

  GridSpec spec() const { return {x0, dx, values.size()}; }
  double x(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
  // Trapezoid rule over the grid.
  double integral() const;
  bool same_grid(const DensityGrid& other) const;
};

inline constexpr std::size_t kDefaultGridPoints = 512;

// 0.9 min(std, IQR / 1.34) n^(-1/5); falls back to whichever spread is nonzero.
double silverman_bandwidth(std::span<const double> samples);

// [min - 4h, max + 4h] with `points` nodes.
GridSpec kde_support(std::span<const double> samples, double bandwidth, std::size_t points = kDefaultGridPoints);

// Gaussian KDE on the default support and Silverman bandwidth.
DensityGrid kde(std::span<const double> samples);
// Gaussian KDE on an explicit grid. Sums over a sorted 9h window per node,
// parallel over grid nodes.
DensityGrid kde(std::span<const double> samples, const GridSpec& grid, double bandwidth);

// Mixture density evaluated at every node.
DensityGrid mixture_density(const mdn::MixtureParams& mix, const GridSpec& grid);

// Grid shared by the KDE of `samples` and `mix`: the KDE support joined with
// mu_j +- 10 delta_j of every component carrying weight at least 1e-3.
GridSpec evaluation_grid(std::span<const double> samples, double bandwidth, const mdn::MixtureParams& mix,
                         std::size_t points = kDefaultGridPoints);

// sum_i p_i log(p_i / max(q_i, 1e-300)) dx, skipping nodes where p_i = 0.
double kl_divergence(const DensityGrid& p, const DensityGrid& q);

// |a - b| / (0.00125 b + 0.00125)
double huberized_relative_error(double p_mdn, double p_mc);

namespace reference {

// Every sample contributes at every node; single-threaded.
DensityGrid kde(std::span<const double> samples, const GridSpec& grid, double bandwidth);

}  // namespace reference

}  // namespace smdn::metrics
