#include "smdn/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "smdn/error.hpp"

namespace smdn::stochastic {

namespace {

constexpr double kHorizonSlack = 1e-9;
constexpr double kMaxMaturity = 1.05;

bool finite(double x) { return std::isfinite(x); }

void check_path_covers(const RatePath& path, double T, const char* name) {
  path.validate();
  if (path.horizon() < T - kHorizonSlack) {
    throw InvalidInput(std::string(name) + " path horizon " + std::to_string(path.horizon()) +
                       " shorter than maturity " + std::to_string(T));
  }
}

// Per-step coefficients shared by every Monte Carlo path of one scenario.
struct StepGrid {
  std::vector<double> h;
  std::vector<double> sqrt_h;
  // Row-major steps x N.
  std::vector<double> carry;  // (r - q_j) averaged over the step
};

StepGrid build_step_grid(const RatePath& r, const std::vector<RatePath>& q, double T) {
  const double dt = r.dt;
  const std::size_t n_steps = steps_to_cover(T, dt);
  const std::size_t n = q.size();
  StepGrid grid;
  grid.h.resize(n_steps);
  grid.sqrt_h.resize(n_steps);
  grid.carry.resize(n_steps * n);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double start = static_cast<double>(k) * dt;
    const double h = std::min(dt, T - start);
    grid.h[k] = std::max(h, 0.0);
    grid.sqrt_h[k] = std::sqrt(grid.h[k]);
    const double r_bar = r.step_average(k, T);
    for (std::size_t j = 0; j < n; ++j) grid.carry[k * n + j] = r_bar - q[j].step_average(k, T);
  }
  return grid;
}

void correlate(const CholeskyFactor& chol, std::span<const double> independent, std::span<double> out) {
  const std::size_t n = chol.size();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += chol(i, j) * independent[j];
    out[i] = acc;
  }
}

class TvKernel {
 public:
  explicit TvKernel(const GbmScenarioTV& s) : s_(s), grid_(build_step_grid(s.r, s.q, s.maturity)) {
    const std::size_t n = s.n_assets();
    const std::size_t steps = grid_.h.size();
    drift_.resize(steps * n);
    vol_.resize(steps * n);
    for (std::size_t k = 0; k < steps; ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        const double sig = s.sigma[j].step_average(k, s.maturity);
        drift_[k * n + j] = (grid_.carry[k * n + j] - 0.5 * sig * sig) * grid_.h[k];
        vol_[k * n + j] = sig * grid_.sqrt_h[k];
      }
    }
  }

  // Exact log-Euler: coefficients are constant within each step.
  void run(rng::Stream& rng, std::span<double> out) const {
    const std::size_t n = s_.n_assets();
    std::vector<double> z(n), w(n), log_s(n, 0.0);
    for (std::size_t k = 0; k < grid_.h.size(); ++k) {
      if (grid_.h[k] <= 0.0) continue;
      for (auto& v : z) v = rng.normal();
      correlate(s_.chol, z, w);
      for (std::size_t j = 0; j < n; ++j) log_s[j] += drift_[k * n + j] + vol_[k * n + j] * w[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(log_s[j]);
  }

 private:
  const GbmScenarioTV& s_;
  StepGrid grid_;
  std::vector<double> drift_;
  std::vector<double> vol_;
};

class LvKernel {
 public:
  explicit LvKernel(const GbmScenarioLV& s) : s_(s), grid_(build_step_grid(s.r, s.q, s.maturity)) {}

  // Euler-Maruyama in log space, volatility frozen at the step's starting spot.
  void run(rng::Stream& rng, std::span<double> out) const {
    const std::size_t n = s_.n_assets();
    std::vector<double> z(n), w(n), log_s(n, 0.0), spot(n, 1.0);
    for (std::size_t k = 0; k < grid_.h.size(); ++k) {
      const double h = grid_.h[k];
      if (h <= 0.0) continue;
      for (auto& v : z) v = rng.normal();
      correlate(s_.chol, z, w);
      for (std::size_t j = 0; j < n; ++j) {
        const double sig = local_vol(spot[j], s_.vol[j]);
        log_s[j] += (grid_.carry[k * n + j] - 0.5 * sig * sig) * h + sig * grid_.sqrt_h[k] * w[j];
        spot[j] = std::exp(log_s[j]);
      }
    }
    std::copy(spot.begin(), spot.end(), out.begin());
  }

 private:
  const GbmScenarioLV& s_;
  StepGrid grid_;
};

template <class Kernel>
TerminalPrices run_paths(const Kernel& kernel, std::size_t n_assets, std::size_t n_paths,
                         const rng::StreamKey& key, bool parallel) {
  if (n_paths == 0) throw InvalidInput("n_paths must be positive");
  TerminalPrices out{n_paths, n_assets, std::vector<double>(n_paths * n_assets)};
  const auto count = static_cast<std::ptrdiff_t>(n_paths);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    rng::Stream stream(key.child(static_cast<std::uint64_t>(p)));
    kernel.run(stream, std::span<double>(out.values.data() + p * n_assets, n_assets));
  }
  return out;
}

}  // namespace

void CirParams::validate() const {
  if (!(finite(a) && finite(b) && finite(c) && finite(x0_lo) && finite(x0_hi))) {
    throw InvalidInput("CIR parameters must be finite");
  }
  if (a <= 0.0 || b <= 0.0 || c <= 0.0) throw InvalidInput("CIR a, b, c must be positive");
  if (x0_lo < 0.0 || x0_hi >= 1.0 || x0_lo > x0_hi) {
    throw InvalidInput("CIR x0 range must satisfy 0 <= lo <= hi < 1");
  }
}

void RatePath::validate() const {
  if (!(dt > 0.0) || !finite(dt)) throw InvalidInput("rate path dt must be positive");
  if (values.size() < 2) throw InvalidInput("rate path needs at least 2 grid points");
  for (double v : values) {
    if (!(v >= 0.0) || !finite(v)) throw InvalidInput("rate path values must be finite and nonnegative");
  }
}

double RatePath::at(double t) const {
  if (t < 0.0 || t > horizon() + kHorizonSlack) {
    throw InvalidInput("time " + std::to_string(t) + " outside rate path horizon");
  }
  const double pos = std::clamp(t / dt, 0.0, static_cast<double>(values.size() - 1));
  const auto k = std::min(static_cast<std::size_t>(pos), values.size() - 2);
  const double frac = pos - static_cast<double>(k);
  return values[k] + frac * (values[k + 1] - values[k]);
}

std::vector<double> RatePath::restricted(double t) const {
  if (!(t > 0.0)) throw InvalidInput("restriction horizon must be positive");
  if (t > horizon() + kHorizonSlack) throw InvalidInput("restriction beyond rate path horizon");
  const std::size_t n = std::min(steps_to_cover(t, dt), values.size() - 1);
  std::vector<double> out(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n));
  out.push_back(at(std::min(t, horizon())));
  return out;
}

double RatePath::integral(double t) const {
  const std::size_t n = steps_to_cover(t, dt);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double start = static_cast<double>(k) * dt;
    const double h = std::min(dt, t - start);
    if (h > 0.0) sum += h * step_average(k, t);
  }
  return sum;
}

double RatePath::step_average(std::size_t k, double t) const {
  const double start = static_cast<double>(k) * dt;
  const double end = std::min(start + dt, std::min(t, horizon()));
  if (end <= start) return values[k];
  return 0.5 * (values[k] + at(end));
}

std::size_t steps_to_cover(double T, double dt) {
  if (!(dt > 0.0) || !finite(dt)) throw InvalidInput("dt must be positive");
  if (!(T > 0.0) || !finite(T)) throw InvalidInput("horizon must be positive");
  const double ratio = T / dt;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio - 1e-9)));
}

RatePath simulate_cir(const CirParams& params, double x0, double T, double dt, rng::Stream& rng) {
  if (!(finite(params.a) && finite(params.b) && finite(params.c) && finite(x0))) {
    throw InvalidInput("CIR parameters and x0 must be finite");
  }
  if (x0 < 0.0) throw InvalidInput("CIR x0 must be nonnegative");
  const std::size_t n = steps_to_cover(T, dt);
  RatePath path{dt, std::vector<double>(n + 1)};
  path.values[0] = x0;
  const double sqrt_dt = std::sqrt(dt);
  // Full truncation: the latent state may dip below zero, the output is its positive part.
  double x = x0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double xp = std::max(x, 0.0);
    x += params.a * (params.b - xp) * dt + params.c * std::sqrt(xp) * sqrt_dt * rng.normal();
    path.values[k] = std::max(x, 0.0);
  }
  return path;
}

CholeskyFactor::CholeskyFactor(std::size_t n, std::vector<double> entries) : n_(n), entries_(std::move(entries)) {
  if (entries_.size() != n * n) throw InvalidInput("Cholesky factor needs n*n entries");
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = (*this)(i, j);
      if (!finite(v)) throw InvalidInput("Cholesky entries must be finite");
      if (j > i && v != 0.0) throw InvalidInput("Cholesky factor must be lower triangular");
      norm2 += v * v;
    }
    if ((*this)(i, i) <= 0.0) throw InvalidInput("Cholesky diagonal must be positive");
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9) throw InvalidInput("Cholesky rows must have unit norm");
  }
}

CholeskyFactor CholeskyFactor::identity(std::size_t n) {
  std::vector<double> e(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) e[i * n + i] = 1.0;
  return CholeskyFactor(n, std::move(e));
}

CholeskyFactor CholeskyFactor::from_correlation(std::size_t n, std::span<const double> corr) {
  if (corr.size() != n * n) throw InvalidInput("correlation matrix must be n x n");
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(corr[i * n + i] - 1.0) > 1e-12) throw InvalidInput("correlation diagonal must be 1");
    for (std::size_t j = 0; j <= i; ++j) {
      if (std::abs(corr[i * n + j] - corr[j * n + i]) > 1e-12) {
        throw InvalidInput("correlation matrix must be symmetric");
      }
      double s = corr[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw InvalidInput("correlation matrix must be positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  return CholeskyFactor(n, std::move(l));
}

std::vector<double> CholeskyFactor::lower_triangle() const {
  std::vector<double> out;
  out.reserve(n_ * (n_ + 1) / 2);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j <= i; ++j) out.push_back((*this)(i, j));
  return out;
}

std::vector<double> CholeskyFactor::correlation() const {
  std::vector<double> r(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= std::min(i, j); ++k) s += (*this)(i, k) * (*this)(j, k);
      r[i * n_ + j] = s;
    }
  return r;
}

CholeskyFactor cholesky_from_angles(std::span<const double> angles) {
  std::size_t n = 1;
  while (n * (n - 1) / 2 < angles.size()) ++n;
  if (n * (n - 1) / 2 != angles.size()) {
    throw InvalidInput("angle count " + std::to_string(angles.size()) + " is not N(N-1)/2");
  }
  for (double a : angles) {
    if (!(a > 0.0 && a < std::numbers::pi)) throw InvalidInput("angles must lie strictly inside (0, pi)");
  }
  // Row i consumes the next i angles: entry j is sin(a_1)...sin(a_j) cos(a_{j+1}),
  // and the diagonal is the full product of sines.
  std::vector<double> l(n * n, 0.0);
  l[0] = 1.0;
  std::size_t next = 0;
  for (std::size_t i = 1; i < n; ++i) {
    double sines = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double a = angles[next++];
      l[i * n + j] = sines * std::cos(a);
      sines *= std::sin(a);
    }
    l[i * n + i] = sines;
  }
  return CholeskyFactor(n, std::move(l));
}

double local_vol(double x, const LocalVolParams& p) {
  const double d = x - p.a_loc;
  return p.c_loc * std::pow(d * d + p.c_loc, p.b_loc);
}

double sample_maturity(const MaturityLaw& law, rng::Stream& rng) {
  if (law.fixed) return *law.fixed;
  double u;
  if (rng.uniform() < law.beta_weight) {
    std::gamma_distribution<double> ga(law.beta_a, 1.0), gb(law.beta_b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    u = x / (x + y);
  } else {
    u = rng.uniform();
  }
  return law.lo + (law.hi - law.lo) * u;
}

std::vector<double> sample_weights(const WeightLaw& law, std::size_t n, rng::Stream& rng) {
  if (law.kind == WeightLaw::Kind::kFixed) {
    if (law.fixed.size() != n) throw InvalidInput("fixed weight count must equal the basket size");
    return law.fixed;
  }
  std::gamma_distribution<double> g(law.alpha, 1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& v : w) {
    v = g(rng);
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

std::vector<double> ScenarioConfig::basket_weights_tv() const {
  if (!tv_weights.empty()) return tv_weights;
  return std::vector<double>(n_assets, 1.0 / static_cast<double>(n_assets));
}

void GbmScenarioTV::validate() const {
  const std::size_t n = n_assets();
  if (n == 0 || sigma.size() != n || chol.size() != n) throw InvalidInput("scenario asset counts disagree");
  if (!(maturity > 0.0 && maturity <= kMaxMaturity + 1e-12)) {
    throw InvalidInput("maturity must lie in (0, 1.05]");
  }
  check_path_covers(r, maturity, "r");
  for (std::size_t j = 0; j < n; ++j) {
    check_path_covers(q[j], maturity, "q");
    check_path_covers(sigma[j], maturity, "sigma");
    if (q[j].dt != r.dt || sigma[j].dt != r.dt) throw InvalidInput("all paths must share dt");
  }
}

void GbmScenarioLV::validate() const {
  const std::size_t n = n_assets();
  if (n == 0 || vol.size() != n || chol.size() != n || weights.size() != n) {
    throw InvalidInput("scenario asset counts disagree");
  }
  if (!(maturity > 0.0 && maturity <= kMaxMaturity + 1e-12)) {
    throw InvalidInput("maturity must lie in (0, 1.05]");
  }
  check_path_covers(r, maturity, "r");
  for (std::size_t j = 0; j < n; ++j) {
    check_path_covers(q[j], maturity, "q");
    if (q[j].dt != r.dt) throw InvalidInput("all paths must share dt");
    if (!(vol[j].b_loc > 0.0 && vol[j].c_loc > 0.0)) throw InvalidInput("local vol b, c must be positive");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidInput("basket weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("basket weights must sum to 1");
}

namespace {

double draw_x0(const CirParams& p, rng::Stream& rng) { return rng.uniform(p.x0_lo, p.x0_hi); }

RatePath draw_cir_path(const CirParams& p, double horizon, double dt, rng::Stream& rng) {
  const double x0 = draw_x0(p, rng);
  return simulate_cir(p, x0, horizon, dt, rng);
}

std::vector<double> draw_angles(std::size_t n, rng::Stream& rng) {
  std::vector<double> angles(n * (n - 1) / 2);
  for (auto& a : angles) a = rng.uniform(0.0, std::numbers::pi);
  return angles;
}

void check_horizon(double T, double horizon) {
  if (!(T > 0.0) || horizon < T) throw InvalidInput("scenario horizon must cover the maturity");
}

}  // namespace

GbmScenarioTV sample_scenario_tv_at(const ScenarioConfig& config, double T, double horizon, rng::Stream& rng) {
  check_horizon(T, horizon);
  const std::size_t n = config.n_assets;
  GbmScenarioTV s;
  s.maturity = T;
  s.r = draw_cir_path(config.cir.rate, horizon, config.dt, rng);
  for (std::size_t j = 0; j < n; ++j) s.q.push_back(draw_cir_path(config.cir.dividend, horizon, config.dt, rng));
  for (std::size_t j = 0; j < n; ++j) {
    s.sigma.push_back(draw_cir_path(config.cir.volatility, horizon, config.dt, rng));
  }
  s.chol = cholesky_from_angles(draw_angles(n, rng));
  return s;
}

GbmScenarioLV sample_scenario_lv_at(const ScenarioConfig& config, double T, double horizon, rng::Stream& rng) {
  check_horizon(T, horizon);
  const std::size_t n = config.n_assets;
  GbmScenarioLV s;
  s.maturity = T;
  s.r = draw_cir_path(config.cir.rate, horizon, config.dt, rng);
  for (std::size_t j = 0; j < n; ++j) s.q.push_back(draw_cir_path(config.cir.dividend, horizon, config.dt, rng));
  s.chol = cholesky_from_angles(draw_angles(n, rng));
  const auto& box = config.local_vol;
  for (std::size_t j = 0; j < n; ++j) {
    LocalVolParams p;
    p.a_loc = rng.uniform(box.a_lo, box.a_hi);
    p.b_loc = rng.uniform(box.b_lo, box.b_hi);
    p.c_loc = rng.uniform(box.c_lo, box.c_hi);
    s.vol.push_back(p);
  }
  s.weights = sample_weights(config.weights, n, rng);
  return s;
}

GbmScenarioTV sample_scenario_tv(const ScenarioConfig& config, rng::Stream& rng) {
  const double T = sample_maturity(config.maturity, rng);
  return sample_scenario_tv_at(config, T, T, rng);
}

GbmScenarioLV sample_scenario_lv(const ScenarioConfig& config, rng::Stream& rng) {
  const double T = sample_maturity(config.maturity, rng);
  return sample_scenario_lv_at(config, T, T, rng);
}

TerminalPrices simulate_terminal_prices(const GbmScenarioTV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key) {
  scenario.validate();
  return run_paths(TvKernel(scenario), scenario.n_assets(), n_paths, key, true);
}

TerminalPrices simulate_terminal_prices(const GbmScenarioLV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key) {
  scenario.validate();
  return run_paths(LvKernel(scenario), scenario.n_assets(), n_paths, key, true);
}

namespace reference {

TerminalPrices simulate_terminal_prices(const GbmScenarioTV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key) {
  scenario.validate();
  return run_paths(TvKernel(scenario), scenario.n_assets(), n_paths, key, false);
}

TerminalPrices simulate_terminal_prices(const GbmScenarioLV& scenario, std::size_t n_paths,
                                        const rng::StreamKey& key) {
  scenario.validate();
  return run_paths(LvKernel(scenario), scenario.n_assets(), n_paths, key, false);
}

}  // namespace reference

double log_basket_return(std::span<const double> terminal, std::span<const double> weights,
                         std::span<const double> s0) {
  if (terminal.size() != weights.size() || s0.size() != weights.size()) {
    throw InvalidInput("terminal prices, weights and s0 must have equal length");
  }
  double basket = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(s0[j] > 0.0)) throw InvalidInput("initial prices must be positive");
    basket += weights[j] * terminal[j] / s0[j];
  }
  if (!(basket > 0.0) || !finite(basket)) throw NumericError("basket value must be positive and finite");
  return std::log(basket);
}

std::vector<double> log_basket_returns(const TerminalPrices& prices, std::span<const double> weights) {
  const std::vector<double> s0(prices.n_assets, 1.0);
  std::vector<double> y(prices.n_paths);
  for (std::size_t p = 0; p < prices.n_paths; ++p) y[p] = log_basket_return(prices.path(p), weights, s0);
  return y;
}

}  // namespace smdn::stochastic
