// Acceptance runner: evaluates each numbered acceptance criterion and prints
// one PASS/FAIL line per criterion. Pass criterion numbers as arguments to
// run a subset. The exit status is the number of failed criteria.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "smdn/dataset.hpp"
#include "smdn/evaluation.hpp"
#include "smdn/features.hpp"
#include "smdn/metrics.hpp"
#include "smdn/model.hpp"
#include "smdn/pricing.hpp"
#include "smdn/signature.hpp"
#include "smdn/stochastic.hpp"
#include "smdn/training.hpp"
#include "support.hpp"

using namespace smdn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  // Records a failed check without stopping the criterion.
  void require(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += "failed: " + what;
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Closed-form mixture prices against Simpson quadrature, and parity.
// ---------------------------------------------------------------------------
Verdict pricing_oracle() {
  Verdict v;
  rng::Stream rng{rng::StreamKey(1001)};
  double worst_rel = 0.0, worst_parity = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = oracle::random_mixture(10, rng);
    const double K = rng.uniform(0.5, 1.5), D = rng.uniform(0.9, 1.0);
    double cf[2];
    for (int c = 0; c < 2; ++c) {
      const auto kind = c == 0 ? pricing::OptionKind::kCall : pricing::OptionKind::kPut;
      cf[c] = pricing::mixture_european_price(m, {kind, K, 1.0}, D).price;
      const double ref = oracle::mixture_price_simpson(m, c == 0, K, D);
      worst_rel = std::max(worst_rel, std::abs(cf[c] - ref) / std::abs(ref));
    }
    double fwd = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) fwd += m.pi[j] * std::exp(m.mu[j] + 0.5 * m.delta[j] * m.delta[j]);
    worst_parity = std::max(worst_parity, std::abs(cf[0] - cf[1] - D * (fwd - K)));
  }
  v.require(worst_rel < 1e-8, "closed form vs quadrature");
  v.require(worst_parity < 1e-10, "put-call parity");
  v.note(fmt("worst relative gap %.2e, worst parity residual %.2e", worst_rel, worst_parity));
  return v;
}

// ---------------------------------------------------------------------------
// 2. Backprop against Richardson-refined central differences.
// ---------------------------------------------------------------------------
Verdict gradient_oracle() {
  Verdict v;
  std::size_t checked = 0, failed = 0, kinks = 0, draws = 0, tries = 0;
  double worst = 0.0;
  for (auto act : {mdn::MuActivation::kTanh, mdn::MuActivation::kIdentity}) {
    mdn::MdnConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden_sizes = {8, 6};
    cfg.components = 3;
    cfg.mu_activation = act;
    for (std::uint64_t draw = 0; draw < 3; ++draw) {
      rng::Stream rng{rng::StreamKey(2000 + draw, rng::Tag::kInit)};
      const std::size_t count = 5, n_targets = 3;
      std::vector<double> x(count * cfg.input_dim), y(count * n_targets);
      for (auto& e : x) e = rng.normal();
      for (auto& e : y) e = 0.2 * rng.normal();
      const mdn::DataView data{x, y, cfg.input_dim, n_targets};
      const auto batch = mdn::all_indices(count);
      mdn::MdnParams p(cfg);
      tries += oracle::well_conditioned_draw(p, data, batch, 0.3, rng);
      mdn::Gradients g(cfg);
      mdn::gradients(p, data, batch, g);
      for (std::size_t layer = 0; layer < p.layer_count(); ++layer) {
        const auto r = oracle::finite_difference_check(p, data, batch, g, p.weight_offset(layer),
                                                       p.bias_offset(layer) + p.layer_outputs(layer));
        v.require(r.checked > 0, "layer " + std::to_string(layer) + " had no checkable entries");
        checked += r.checked;
        failed += r.failed;
        kinks += r.kinks;
        worst = std::max(worst, r.worst);
      }
      ++draws;
    }
  }
  v.require(failed == 0, std::to_string(failed) + " entries above 1e-4 relative error");
  v.note(std::to_string(draws) + " draws (" + std::to_string(tries) + " parameter samples), " +
         std::to_string(checked) + " entries checked, " + std::to_string(kinks) + " kink crossings skipped");
  v.note(fmt("worst relative error %.2e", worst));
  return v;
}

// ---------------------------------------------------------------------------
// 3. Simulator: Black-Scholes, martingale property, CIR conditional mean.
// ---------------------------------------------------------------------------
Verdict simulator() {
  Verdict v;
  using testing::moments;
  const std::size_t n = 100000;

  {
    const double r = 0.03, q = 0.01, sigma = 0.2, T = 0.5;
    const auto s = testing::constant_tv(1, r, q, sigma, T, stochastic::CholeskyFactor::identity(1));
    const auto prices = stochastic::simulate_terminal_prices(s, n, rng::StreamKey(3001));
    const std::vector<double> w{1.0};
    const auto y = stochastic::log_basket_returns(prices, w);
    const double D = pricing::discount_factor(s.r, T);
    double worst = 0.0;
    for (double K : {0.8, 0.9, 1.0, 1.05, 1.1, 1.2}) {
      for (bool call : {true, false}) {
        const auto quote = pricing::mc_price(
            y, {call ? pricing::OptionKind::kCall : pricing::OptionKind::kPut, K, T}, D);
        const double z = std::abs(quote.price - oracle::black_scholes(call, K, r, q, sigma, T)) / *quote.std_error;
        worst = std::max(worst, z);
      }
    }
    v.require(worst < 3.0, "Black-Scholes benchmark");
    v.note(fmt("Black-Scholes worst |z| %.2f", worst));
  }

  {
    stochastic::ScenarioConfig cfg;
    double worst = 0.0;
    auto check = [&](const auto& s, double T, std::uint64_t seed) {
      const auto prices = stochastic::simulate_terminal_prices(s, n, rng::StreamKey(seed));
      for (std::size_t j = 0; j < s.n_assets(); ++j) {
        const double carry = std::exp(-(s.r.integral(T) - s.q[j].integral(T)));
        std::vector<double> disc(n);
        for (std::size_t p = 0; p < n; ++p) disc[p] = prices.path(p)[j] * carry;
        const auto m = moments(disc);
        worst = std::max(worst, std::abs(m.mean - 1.0) / m.stderr_mean(n));
      }
    };
    rng::Stream rng{rng::StreamKey(3002)};
    check(stochastic::sample_scenario_tv_at(cfg, 0.8, 0.8, rng), 0.8, 3003);
    check(stochastic::sample_scenario_lv_at(cfg, 1.0, 1.0, rng), 1.0, 3004);
    v.require(worst < 3.0, "martingale check");
    v.note(fmt("martingale worst |z| %.2f", worst));
  }

  {
    const stochastic::CirParams p{0.6, 0.05, 0.05, 0.005, 0.1};
    const double x0 = 0.1;
    std::vector<double> terminal(n);
    const rng::StreamKey key(3005, rng::Tag::kPaths);
    for (std::size_t i = 0; i < n; ++i) {
      rng::Stream rng{key.child(i)};
      terminal[i] = stochastic::simulate_cir(p, x0, 1.0, 1.0 / 252.0, rng).values.back();
    }
    const auto m = moments(terminal);
    const double exact = p.b + (x0 - p.b) * std::exp(-p.a);
    const double z = std::abs(m.mean - exact) / m.stderr_mean(n);
    v.require(z < 3.0, "CIR conditional mean");
    v.note(fmt("CIR |z| %.2f", z));
  }
  return v;
}

// ---------------------------------------------------------------------------
// 4. Signature identities.
// ---------------------------------------------------------------------------
std::vector<double> random_path(std::size_t points, std::size_t dim, std::uint64_t seed) {
  rng::Stream rng{rng::StreamKey(seed)};
  std::vector<double> out(points * dim, 0.0);
  for (std::size_t p = 1; p < points; ++p)
    for (std::size_t i = 0; i < dim; ++i) out[p * dim + i] = out[(p - 1) * dim + i] + 0.5 * rng.normal();
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Verdict signature_suite() {
  using namespace signature;
  Verdict v;

  double chen = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t dim = 2 + seed % 2, points = 12;
    const auto path = random_path(points, dim, 4000 + seed);
    const auto whole = signature_of_path(path, dim, 5);
    const std::span<const double> all(path);
    for (std::size_t cut = 1; cut + 1 < points; ++cut) {
      const auto head = signature_of_path(all.subspan(0, (cut + 1) * dim), dim, 5);
      const auto tail = signature_of_path(all.subspan(cut * dim), dim, 5);
      const auto joined = chen_concat(head, tail);
      chen = std::max(chen, max_abs_diff(joined.coefficients(), whole.coefficients()));
    }
  }
  v.require(chen < 1e-12, "Chen identity");

  double scalar = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto path = random_path(40, 1, 4100 + seed);
    const double delta = path.back() - path.front();
    const auto s = signature_of_path(path, 1, 5);
    double factorial = 1.0;
    for (std::size_t k = 1; k <= 5; ++k) {
      factorial *= static_cast<double>(k);
      scalar = std::max(scalar, std::abs(s.level_block(k)[0] - std::pow(delta, static_cast<double>(k)) / factorial));
    }
  }
  v.require(scalar < 1e-13, "scalar closed form");

  double reversal = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto path = random_path(30, 2, 4200 + seed);
    const auto loop = chen_concat(signature_of_path(path, 2, 5), signature_of_path(reverse_path(path, 2), 2, 5));
    const auto c = loop.coefficients();
    for (std::size_t i = 1; i < c.size(); ++i) reversal = std::max(reversal, std::abs(c[i]));
  }
  v.require(reversal < 1e-10, "time reversal");

  const std::size_t steps = 10000;
  const double dt = 1.0 / steps;
  rng::Stream rng{rng::StreamKey(4300)};
  std::vector<double> path(2 * (steps + 1), 0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    path[2 * k] = static_cast<double>(k) * dt;
    path[2 * k + 1] = path[2 * k - 1] + std::sqrt(dt) * rng.normal();
  }
  double t_dw = 0.0, w_dt = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    t_dw += 0.5 * (path[2 * k] + path[2 * k + 2]) * (path[2 * k + 3] - path[2 * k + 1]);
    w_dt += 0.5 * (path[2 * k + 1] + path[2 * k + 3]) * (path[2 * k + 2] - path[2 * k]);
  }
  const auto l2 = signature_of_path(path, 2, 2).level_block(2);
  const double levy = std::abs(0.5 * (l2[1] - l2[2]) - 0.5 * (t_dw - w_dt));
  v.require(levy < 1e-3, "Levy area");

  v.note(fmt("Chen %.1e, scalar %.1e", chen, scalar));
  v.note(fmt("reversal %.1e, Levy area %.1e", reversal, levy));
  return v;
}

// ---------------------------------------------------------------------------
// 5. Feature dimensions.
// ---------------------------------------------------------------------------
Verdict feature_dimensions() {
  Verdict v;
  const std::size_t n = 2, l = 5;
  stochastic::ScenarioConfig cfg;
  rng::Stream rng{rng::StreamKey(5001)};
  const auto tv = features::assemble_tv(stochastic::sample_scenario_tv_at(cfg, 0.5, 0.5, rng), l);
  const auto lv = features::assemble_lv(stochastic::sample_scenario_lv_at(cfg, 0.5, 0.5, rng), l);
  const std::size_t tv_formula = 2 * n + (1 + 2 * n) * l + 2 + n * (n + 1) / 2;
  const std::size_t lv_formula = 5 * n + (1 + n) * l + 2 + n * (n + 1) / 2;
  v.require(tv.values.size() == 34 && tv_formula == 34, "TV length");
  v.require(lv.values.size() == 30 && lv_formula == 30, "LV length");
  v.note("TV " + std::to_string(tv.values.size()) + ", LV " + std::to_string(lv.values.size()));
  return v;
}

// ---------------------------------------------------------------------------
// 6 and 7. Desk-scale training and held-out evaluation.
// ---------------------------------------------------------------------------
struct DeskRun {
  model::Model model;
  dataset::GenerationConfig generation;
  std::size_t epochs = 0;
};

DeskRun desk_train(features::Regime regime) {
  dataset::GenerationConfig g;
  g.regime = regime;
  g.n1 = 200;
  g.n2 = 100;
  g.n_targets = 30;
  const auto train = dataset::generate(g, 7, dataset::Domain::kTraining);
  auto gv = g;
  gv.n1 = 40;
  const auto validation = dataset::generate(gv, 7, dataset::Domain::kValidation);

  mdn::MdnConfig mc;
  mc.hidden_sizes = {64, 64, 48};
  mc.components = 5;
  mc.mu_activation = regime == features::Regime::kLocalVol ? mdn::MuActivation::kIdentity : mdn::MuActivation::kTanh;
  mdn::TrainConfig tc;
  tc.batch_size = 1000;
  tc.epochs = 200;
  tc.seed = 11;
  auto out = training::fit(train, &validation, mc, tc);
  return {std::move(out.model), g, out.history.size()};
}

dataset::Scenario holdout_scenario(const dataset::GenerationConfig& g, std::uint64_t index) {
  rng::Stream rs{rng::StreamKey(99, rng::Tag::kHoldout).child(index)};
  if (g.regime == features::Regime::kLocalVol) return stochastic::sample_scenario_lv_at(g.scenario, 1.0, 1.0, rs);
  return stochastic::sample_scenario_tv_at(g.scenario, 1.0, 1.0, rs);
}

struct HoldoutSummary {
  double median_kl = 0.0;
  double median_error = 0.0;
  bool finite = true;
};

HoldoutSummary evaluate_holdout(const DeskRun& run, std::size_t scenarios) {
  std::vector<double> kls, errors;
  bool finite = true;
  for (std::uint64_t s = 0; s < scenarios; ++s) {
    const auto sc = holdout_scenario(run.generation, s);
    const auto w = evaluation::scenario_weights(sc, run.generation.scenario.basket_weights_tv());
    const auto rep = evaluation::evaluate(run.model, sc, w, evaluation::Settings{},
                                          rng::StreamKey(99, rng::Tag::kEvaluation).child(s), std::to_string(s));
    for (double k : rep.kl_values()) {
      finite = finite && std::isfinite(k);
      kls.push_back(k);
    }
    const auto e = rep.relative_errors();
    errors.insert(errors.end(), e.begin(), e.end());
  }
  return {evaluation::median(kls), evaluation::median(errors), finite};
}

Verdict desk_tv() {
  Verdict v;
  const auto run = desk_train(features::Regime::kTimeVarying);
  const auto h = evaluate_holdout(run, 10);
  v.require(h.finite, "non-finite KL");
  v.require(h.median_kl <= 0.05, "median KL above 0.05");
  v.require(h.median_error <= 25.0, "median Huberized error above 25");
  v.note(fmt("median KL %.4f, median Huberized error %.2f", h.median_kl, h.median_error));
  v.note(std::to_string(run.epochs) + " epochs");
  return v;
}

Verdict desk_lv() {
  Verdict v;
  auto run = desk_train(features::Regime::kLocalVol);
  const auto h = evaluate_holdout(run, 10);
  v.require(h.finite, "non-finite KL");
  v.require(h.median_kl <= 0.05, "median KL above 0.05");
  v.require(h.median_error <= 25.0, "median Huberized error above 25");
  v.note(fmt("median KL %.4f, median Huberized error %.2f", h.median_kl, h.median_error));
  v.note(std::to_string(run.epochs) + " epochs");

  const std::vector<std::vector<double>> triples{{0.25, 0.75}, {0.5, 0.5}, {0.75, 0.25}};
  std::string weights = "fixed-weight median KL";
  for (std::size_t t = 0; t < triples.size(); ++t) {
    std::vector<double> kls;
    bool finite = true;
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto sc = std::get<stochastic::GbmScenarioLV>(holdout_scenario(run.generation, s));
      sc.weights = triples[t];
      const auto rep = evaluation::evaluate(run.model, sc, triples[t], evaluation::Settings{},
                                            rng::StreamKey(98, rng::Tag::kEvaluation).child({t, s}));
      for (double k : rep.kl_values()) {
        finite = finite && std::isfinite(k);
        kls.push_back(k);
      }
    }
    const double med = evaluation::median(kls);
    v.require(finite && med <= 0.1, fmt("weights (%.2f, %.2f)", triples[t][0], triples[t][1]));
    weights += fmt(" %.4f", med);
  }
  v.note(weights);
  return v;
}

// ---------------------------------------------------------------------------
// 8. Single-scenario inference latency at the paper architecture.
// ---------------------------------------------------------------------------
Verdict latency() {
  Verdict v;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  stochastic::ScenarioConfig cfg;
  rng::Stream rng{rng::StreamKey(8001)};
  const auto scenario = stochastic::sample_scenario_tv_at(cfg, 1.0, 1.0, rng);

  model::Model m;
  const auto probe = features::assemble_tv(scenario, 5);
  mdn::MdnConfig mc;
  mc.input_dim = probe.values.size();
  m.params = mdn::initialize(mc, rng::StreamKey(8002, rng::Tag::kInit));
  m.layout = probe.layout;
  m.standardizer = features::Standardizer::identity(mc.input_dim);

  const auto strikes = pricing::default_strikes();
  std::vector<double> times;
  double sink = 0.0;
  for (int rep = 0; rep < 101; ++rep) {
    const auto start = Clock::now();
    const auto fv = features::assemble_tv(scenario, 5);
    const auto mix = m.predict(fv.values);
    const double D = pricing::discount_factor(scenario.r, scenario.maturity);
    for (double K : strikes) {
      sink += pricing::mixture_european_price(mix, {pricing::OptionKind::kCall, K, scenario.maturity}, D).price;
      sink += pricing::mixture_european_price(mix, {pricing::OptionKind::kPut, K, scenario.maturity}, D).price;
    }
    times.push_back(seconds_since(start) * 1e3);
  }
  omp_set_num_threads(saved);
  std::sort(times.begin(), times.end());
  const double median = times[times.size() / 2];
  v.require(std::isfinite(sink), "non-finite price");
  v.require(median < 10.0, "median latency at or above 10 ms");
  v.note(fmt("median %.3f ms, max %.3f ms for features, forward and 42 prices", median, times.back()));
  return v;
}

// ---------------------------------------------------------------------------
// 9. Byte-level reproducibility.
// ---------------------------------------------------------------------------
template <class F>
auto with_threads(int n, F&& f) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(n);
  auto out = f();
  omp_set_num_threads(saved);
  return out;
}

std::string dataset_bytes(const dataset::GenerationConfig& g) {
  std::ostringstream os;
  dataset::write(dataset::generate(g, 9001), os);
  return os.str();
}

Verdict reproducibility() {
  Verdict v;
  dataset::GenerationConfig g;
  g.n1 = 4;
  g.n2 = 5;
  g.n_targets = 8;
  for (auto regime : {features::Regime::kTimeVarying, features::Regime::kLocalVol}) {
    g.regime = regime;
    const auto a = with_threads(1, [&] { return dataset_bytes(g); });
    const auto b = with_threads(1, [&] { return dataset_bytes(g); });
    const auto c = with_threads(4, [&] { return dataset_bytes(g); });
    v.require(a == b, std::string(features::regime_name(regime)) + " dataset across runs");
    v.require(a == c, std::string(features::regime_name(regime)) + " dataset across thread counts");
  }

  g.regime = features::Regime::kTimeVarying;
  const auto data = dataset::generate(g, 9002);
  mdn::MdnConfig mc;
  mc.hidden_sizes = {8, 8};
  mc.components = 3;
  mdn::TrainConfig tc;
  tc.batch_size = 8;
  tc.epochs = 6;
  tc.seed = 9003;
  auto fit = [&] {
    auto out = training::fit(data, nullptr, mc, tc);
    std::ostringstream os;
    model::write(out.model, os);
    return std::make_pair(out.history, os.str());
  };
  const auto first = with_threads(1, fit);
  const auto second = with_threads(1, fit);
  v.require(first.first == second.first, "training history");
  v.require(first.second == second.second, "trained model bytes");

  std::istringstream is(first.second);
  const auto trained = model::read(is);
  rng::Stream rs{rng::StreamKey(9004, rng::Tag::kHoldout)};
  const dataset::Scenario sc = stochastic::sample_scenario_tv_at(g.scenario, 1.0, 1.0, rs);
  const auto w = evaluation::scenario_weights(sc, g.scenario.basket_weights_tv());
  evaluation::Settings settings;
  settings.mc_paths = 5000;
  auto report = [&] {
    const auto r = evaluation::evaluate(trained, sc, w, settings, rng::StreamKey(9005, rng::Tag::kEvaluation));
    std::ostringstream csv;
    evaluation::write_csv(csv, std::span(&r, 1));
    return evaluation::to_json(r).dump() + csv.str();
  };
  const auto r1 = with_threads(1, report);
  const auto r2 = with_threads(1, report);
  const auto r4 = with_threads(4, report);
  v.require(r1 == r2, "report across runs");
  v.require(r1 == r4, "report across thread counts");
  v.note("datasets, training histories, models and reports identical");
  return v;
}

// ---------------------------------------------------------------------------
// 10. Metric formulas.
// ---------------------------------------------------------------------------
Verdict metric_formulas() {
  Verdict v;
  // (P_MDN, P_MC, expected) worked out by hand in exact arithmetic.
  const double pairs[20][3] = {
      {0.1, 0.1, 0.0},
      {0.00125, 0, 1.0},
      {1.01, 1, 4.0},
      {0.05, 0.04, 7.6923076923076925},
      {0.2, 0.25, 32.0},
      {0, 0.01, 7.920792079207921},
      {0.0375, 0.035, 1.932367149758454},
      {0.15, 0.1, 36.36363636363637},
      {0.003, 0.002, 0.7984031936127745},
      {0.5, 0.45, 27.586206896551722},
      {0.081, 0.08, 0.7407407407407407},
      {0.012, 0.016, 3.1496062992125986},
      {0.3, 0.31, 6.106870229007634},
      {0.0005, 0.0001, 0.31996800319968005},
      {0.07, 0.0725, 1.8648018648018647},
      {0.11, 0.1, 7.2727272727272725},
      {0.0225, 0.02, 1.9607843137254901},
      {0.6, 0.64, 19.51219512195122},
      {0.001, 0, 0.8},
      {0.25, 0.2, 33.333333333333336},
  };
  double worst = 0.0;
  for (const auto& p : pairs) {
    const double got = metrics::huberized_relative_error(p[0], p[1]);
    worst = std::max(worst, std::abs(got - p[2]) / std::max(1.0, std::abs(p[2])));
  }
  v.require(worst <= 1e-12, "Huberized pairs");

  auto analytic = [](double mean, double sd, const metrics::GridSpec& g) {
    metrics::DensityGrid d{g.x0, g.dx, std::vector<double>(g.points)};
    for (std::size_t i = 0; i < g.points; ++i) d.values[i] = oracle::normal_pdf(g.x(i), mean, sd);
    return d;
  };
  const metrics::GridSpec grid{-15.0, 0.001, 30001};
  double kl_worst = 0.0;
  for (double m : {0.5, 1.0, 2.0}) {
    const double exact = m * m / 2;
    kl_worst = std::max(kl_worst, std::abs(metrics::kl_divergence(analytic(0, 1, grid), analytic(m, 1, grid)) - exact) / exact);
  }
  {
    const double s1 = 0.8, s2 = 1.3, m = 0.7;
    const double exact = std::log(s2 / s1) + (s1 * s1 + m * m) / (2 * s2 * s2) - 0.5;
    kl_worst = std::max(kl_worst, std::abs(metrics::kl_divergence(analytic(0, s1, grid), analytic(m, s2, grid)) - exact) / exact);
  }
  v.require(kl_worst <= 0.02, "Gaussian KL");
  v.note(fmt("Huberized worst %.1e, Gaussian KL worst relative %.1e", worst, kl_worst));
  return v;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "pricing oracle equivalence", 5.0, pricing_oracle},
      {2, "gradient oracle equivalence", 60.0, gradient_oracle},
      {3, "simulator correctness", 120.0, simulator},
      {4, "signature suite", 30.0, signature_suite},
      {5, "feature dimensions", 1e9, feature_dimensions},
      {6, "desk-scale time-varying regime", 1800.0, desk_tv},
      {7, "desk-scale local-volatility regime", 1800.0, desk_lv},
      {8, "inference latency", 1e9, latency},
      {9, "reproducibility", 1e9, reproducibility},
      {10, "metric formulas", 1e9, metric_formulas},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(start);
    if (elapsed > c.budget_seconds) v.require(false, fmt("runtime over %.0f s budget", c.budget_seconds));
    if (!v.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                elapsed);
    std::fflush(stdout);
  }
  return failures;
}
