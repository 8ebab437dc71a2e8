#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "smdn/stochastic.hpp"

namespace smdn::testing {

inline stochastic::RatePath constant_path(double level, double horizon, double dt = 1.0 / 252.0) {
  return {dt, std::vector<double>(stochastic::steps_to_cover(horizon, dt) + 1, level)};
}

inline stochastic::GbmScenarioTV constant_tv(std::size_t n, double r, double q, double sigma, double T,
                                             stochastic::CholeskyFactor chol) {
  stochastic::GbmScenarioTV s;
  s.r = constant_path(r, T);
  for (std::size_t j = 0; j < n; ++j) {
    s.q.push_back(constant_path(q, T));
    s.sigma.push_back(constant_path(sigma, T));
  }
  s.chol = std::move(chol);
  s.maturity = T;
  return s;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double stderr_mean(std::size_t n) const { return std::sqrt(var / static_cast<double>(n)); }
};

inline Moments moments(std::span<const double> v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(v.size() - 1);
  return m;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace smdn::testing
