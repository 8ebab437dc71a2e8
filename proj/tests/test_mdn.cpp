#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "smdn/error.hpp"
#include "smdn/mdn.hpp"

using namespace smdn;
using namespace smdn::mdn;

namespace {

MdnConfig small_config(std::size_t input_dim, std::size_t d = 3, MuActivation mu = MuActivation::kTanh) {
  MdnConfig c;
  c.input_dim = input_dim;
  c.hidden_sizes = {7, 5};
  c.components = d;
  c.mu_activation = mu;
  return c;
}

struct Toy {
  std::vector<double> x, y;
  std::size_t dim = 0, n_targets = 0;
  DataView view() const { return {x, y, dim, n_targets}; }
};

Toy random_toy(std::size_t count, std::size_t dim, std::size_t n_targets, std::uint64_t seed) {
  rng::Stream rng{rng::StreamKey(seed)};
  Toy t{{}, {}, dim, n_targets};
  for (std::size_t i = 0; i < count * dim; ++i) t.x.push_back(rng.normal());
  for (std::size_t i = 0; i < count * n_targets; ++i) t.y.push_back(0.2 * rng.normal());
  return t;
}

// Trapezoid integral of the mixture density over the union of mu +- 10 delta.
double mixture_mass(const MixtureParams& m) {
  std::vector<std::pair<double, double>> spans;
  for (std::size_t j = 0; j < m.size(); ++j) spans.emplace_back(m.mu[j] - 10 * m.delta[j], m.mu[j] + 10 * m.delta[j]);
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second) merged.back().second = std::max(merged.back().second, s.second);
    else merged.push_back(s);
  }
  const double narrow = *std::min_element(m.delta.begin(), m.delta.end());
  double mass = 0.0;
  for (const auto& [lo, hi] : merged) {
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / (narrow / 50.0)));
    const double dx = (hi - lo) / static_cast<double>(n);
    double s = 0.5 * (oracle::mixture_pdf_naive(m, lo) + oracle::mixture_pdf_naive(m, hi));
    for (std::size_t k = 1; k < n; ++k) s += oracle::mixture_pdf_naive(m, lo + dx * static_cast<double>(k));
    mass += s * dx;
  }
  return mass;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward pass and densities
// ---------------------------------------------------------------------------

TEST(Forward, ZeroWeightsGiveUniformNarrowMixture) {
  MdnParams p(small_config(4, 5));
  p.set_zero();
  const std::vector<double> x{0.3, -1.0, 2.0, 0.1};
  const auto m = forward(p, x);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_DOUBLE_EQ(m.pi[j], 0.2);
    EXPECT_EQ(m.mu[j], 0.0);
    EXPECT_DOUBLE_EQ(m.delta[j], 1e-4);
  }
}

TEST(Forward, HeadConstraintsAndNormalisation) {
  for (auto act : {MuActivation::kTanh, MuActivation::kIdentity}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      MdnParams p(small_config(4, 4, act));
      rng::Stream rng{rng::StreamKey(seed)};
      oracle::randomize(p, 0.8, rng);
      std::vector<double> x(4);
      for (auto& v : x) v = rng.normal();
      const auto m = forward(p, x);
      double total = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_GT(m.pi[j], 0.0);
        EXPECT_GE(m.delta[j], 1e-4);
        total += m.pi[j];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_NEAR(mixture_mass(m), 1.0, 1e-6);
    }
  }
}

TEST(Forward, NonFiniteInputRejected) {
  MdnParams p(small_config(2));
  const std::vector<double> x{1.0, NAN};
  EXPECT_THROW(forward(p, x), NumericError);
}

TEST(Density, StandardNormalAtMode) {
  const MixtureParams m{{1.0}, {0.0}, {1.0}};
  EXPECT_NEAR(mixture_logpdf(m, 0.0), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
}

TEST(Density, DuplicateComponentsCollapse) {
  const MixtureParams one{{1.0}, {0.1}, {0.3}};
  const MixtureParams two{{0.5, 0.5}, {0.1, 0.1}, {0.3, 0.3}};
  for (double y : {-1.0, 0.0, 0.1, 0.7}) EXPECT_NEAR(mixture_logpdf(two, y), mixture_logpdf(one, y), 1e-14);
}

TEST(Density, MatchesNaiveSum) {
  rng::Stream rng{rng::StreamKey(3)};
  const auto m = oracle::random_mixture(3, rng);
  for (double y = -3.0; y <= 3.0; y += 0.01) {
    const double naive = oracle::mixture_pdf_naive(m, y);
    if (naive <= 1e-300) continue;
    EXPECT_NEAR(std::exp(mixture_logpdf(m, y)) / naive, 1.0, 1e-12) << y;
  }
}

TEST(Density, FarTailStaysFinite) {
  const MixtureParams m{{0.5, 0.5}, {0.0, 0.01}, {1e-4, 1e-4}};
  EXPECT_TRUE(std::isfinite(mixture_logpdf(m, 100.0)));
  EXPECT_TRUE(std::isfinite(mixture_logpdf(m, -100.0)));
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

TEST(Loss, ZeroNetworkSingleRecord) {
  MdnParams p(small_config(2, 4));
  p.set_zero();
  const std::vector<double> x{0.5, 0.5}, y{0.0};
  const DataView v{x, y, 2, 1};
  const std::size_t idx[] = {0};
  EXPECT_NEAR(nll_batch(p, v, idx), -std::log(oracle::normal_pdf(0.0, 0.0, 1e-4)), 1e-10);
}

TEST(Loss, ExtremeResidualFinite) {
  MdnParams p(small_config(2, 2));
  p.set_zero();
  const std::vector<double> x{0.5, 0.5}, y{100.0, -100.0};
  const DataView v{x, y, 2, 2};
  EXPECT_TRUE(std::isfinite(nll_batch(p, v)));
}

TEST(Loss, DuplicatingRecordsKeepsMean) {
  MdnParams p(small_config(3));
  rng::Stream rng{rng::StreamKey(4)};
  oracle::randomize(p, 0.5, rng);
  const auto toy = random_toy(10, 3, 4, 5);
  Toy twice = toy;
  twice.x.insert(twice.x.end(), toy.x.begin(), toy.x.end());
  twice.y.insert(twice.y.end(), toy.y.begin(), toy.y.end());
  EXPECT_NEAR(nll_batch(p, twice.view()), nll_batch(p, toy.view()), 1e-12);
}

TEST(Loss, BatchedMatchesReference) {
  MdnParams p(small_config(3));
  rng::Stream rng{rng::StreamKey(6)};
  oracle::randomize(p, 0.5, rng);
  const auto toy = random_toy(600, 3, 5, 7);
  const auto idx = all_indices(600);
  EXPECT_NEAR(nll_batch(p, toy.view(), idx), reference::nll_batch(p, toy.view(), idx), 1e-11);
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

TEST(Gradient, MatchesFiniteDifferencesPerLayer) {
  for (auto act : {MuActivation::kTanh, MuActivation::kIdentity}) {
    for (std::uint64_t draw = 0; draw < 3; ++draw) {
      MdnParams p(small_config(4, 3, act));
      const auto toy = random_toy(6, 4, 3, 200 + draw);
      const auto idx = all_indices(6);
      rng::Stream rng{rng::StreamKey(100 + draw)};
      oracle::well_conditioned_draw(p, toy.view(), idx, 0.3, rng);
      Gradients g(p.config());
      gradients(p, toy.view(), idx, g);
      for (std::size_t layer = 0; layer < p.layer_count(); ++layer) {
        const std::size_t begin = p.weight_offset(layer);
        const std::size_t end = p.bias_offset(layer) + p.layer_outputs(layer);
        const auto r = oracle::finite_difference_check(p, toy.view(), idx, g, begin, end);
        EXPECT_GT(r.checked, 0u);
        EXPECT_EQ(r.failed, 0u) << "layer " << layer << " worst " << r.worst;
      }
    }
  }
}

TEST(Gradient, FiniteDifferenceOracleSkipsKinks) {
  MdnParams p(small_config(1, 1));
  p.set_zero();
  p.weight(0)(0, 0) = 1.0;
  p.weight(1).setConstant(1.0);
  p.weight(2).setConstant(0.5);
  const std::vector<double> x{1e-5}, y{0.0};
  const DataView v{x, y, 1, 1};
  const std::size_t idx[] = {0};
  Gradients g(p.config());
  gradients(p, v, idx, g);
  const auto r = oracle::finite_difference_check(p, v, idx, g, p.bias_offset(0), p.bias_offset(0) + 7);
  EXPECT_GT(r.kinks, 0u);
}

TEST(Gradient, BatchedMatchesReference) {
  MdnParams p(small_config(3));
  rng::Stream rng{rng::StreamKey(8)};
  oracle::randomize(p, 0.5, rng);
  const auto toy = random_toy(700, 3, 4, 9);
  const auto idx = all_indices(700);
  Gradients a(p.config()), b(p.config());
  gradients(p, toy.view(), idx, a);
  reference::gradients(p, toy.view(), idx, b);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a.values()[i], b.values()[i], 1e-10 * std::max(1.0, std::abs(b.values()[i])));
}

TEST(Gradient, IdenticalTargetsScaleLinearly) {
  MdnParams p(small_config(3));
  rng::Stream rng{rng::StreamKey(10)};
  oracle::randomize(p, 0.5, rng);
  const std::vector<double> x{0.1, -0.4, 1.2}, one{0.05}, many(6, 0.05);
  const std::size_t idx[] = {0};
  Gradients g1(p.config()), g6(p.config());
  const double l1 = gradients(p, {x, one, 3, 1}, idx, g1);
  const double l6 = gradients(p, {x, many, 3, 6}, idx, g6);
  EXPECT_NEAR(l6, 6.0 * l1, 1e-12 * std::abs(l6));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g6.values()[i], 6.0 * g1.values()[i], 1e-12 * std::max(1.0, std::abs(g6.values()[i])));
}

TEST(Gradient, PermutationInvariant) {
  MdnParams p(small_config(3));
  rng::Stream rng{rng::StreamKey(11)};
  oracle::randomize(p, 0.5, rng);
  const auto toy = random_toy(300, 3, 4, 12);
  auto idx = all_indices(300);
  Gradients a(p.config()), b(p.config());
  gradients(p, toy.view(), idx, a);
  std::shuffle(idx.begin(), idx.end(), rng);
  gradients(p, toy.view(), idx, b);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a.values()[i], b.values()[i], 1e-12 * std::max(1.0, std::abs(a.values()[i])));
}

TEST(Gradient, BitIdenticalAcrossThreadCounts) {
  MdnParams p(small_config(3));
  rng::Stream rng{rng::StreamKey(13)};
  oracle::randomize(p, 0.5, rng);
  const auto toy = random_toy(1000, 3, 4, 14);
  const auto idx = all_indices(1000);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  Gradients ref(p.config());
  const double l1 = gradients(p, toy.view(), idx, ref);
  for (int t : {2, 3, 8}) {
    omp_set_num_threads(t);
    Gradients g(p.config());
    EXPECT_EQ(gradients(p, toy.view(), idx, g), l1);
    EXPECT_TRUE(std::equal(g.values().begin(), g.values().end(), ref.values().begin()));
  }
  omp_set_num_threads(saved);
}

// ---------------------------------------------------------------------------
// Optimiser and scheduler
// ---------------------------------------------------------------------------

TEST(AdamW, ZeroGradientNoDecayIsNoop) {
  MdnParams p(small_config(2));
  rng::Stream rng{rng::StreamKey(15)};
  oracle::randomize(p, 1.0, rng);
  const MdnParams before = p;
  Gradients g(p.config());
  g.set_zero();
  auto st = AdamState::zeros(p.size());
  for (int i = 0; i < 5; ++i) adamw_step(st, p, g, {0.01, 0.9, 0.999, 1e-8, 0.0});
  EXPECT_TRUE(p == before);
}

TEST(AdamW, PureDecayShrinksWeights) {
  MdnParams p(small_config(2));
  rng::Stream rng{rng::StreamKey(16)};
  oracle::randomize(p, 1.0, rng);
  const MdnParams before = p;
  Gradients g(p.config());
  g.set_zero();
  auto st = AdamState::zeros(p.size());
  adamw_step(st, p, g, {0.1, 0.9, 0.999, 1e-8, 0.5});
  const auto& mask = p.trainable_mask();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double expect = mask[i] ? before.values()[i] * (1.0 - 0.05) : before.values()[i];
    EXPECT_DOUBLE_EQ(p.values()[i], expect);
  }
}

TEST(AdamW, ConstantGradientStepsAtLearningRate) {
  MdnParams p(small_config(2));
  p.set_zero();
  Gradients g(p.config());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = (i % 2 == 0) ? 0.3 : -2.0;
  auto st = AdamState::zeros(p.size());
  const AdamWHyper h{0.01, 0.9, 0.999, 1e-8, 0.0};
  for (int i = 0; i < 200; ++i) adamw_step(st, p, g, h);
  MdnParams prev = p;
  adamw_step(st, p, g, h);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p.trainable_mask()[i]) continue;
    const double step = p.values()[i] - prev.values()[i];
    EXPECT_NEAR(step, (i % 2 == 0) ? -0.01 : 0.01, 1e-8);
  }
}

TEST(AdamW, FrozenBiasesStayZero) {
  MdnParams p(small_config(2));
  p.set_zero();
  Gradients g(p.config());
  for (auto& v : g.values()) v = 1.0;
  auto st = AdamState::zeros(p.size());
  adamw_step(st, p, g, {});
  for (std::size_t l = 0; l < p.layer_count(); ++l) EXPECT_EQ(p.bias(l).norm(), 0.0);
  auto cfg = small_config(2);
  cfg.train_biases = true;
  MdnParams q(cfg);
  q.set_zero();
  auto st2 = AdamState::zeros(q.size());
  adamw_step(st2, q, g, {});
  EXPECT_GT(q.bias(0).norm(), 0.0);
}

TEST(Plateau, DecaysAfterPatience) {
  PlateauScheduler s(0.01, 3, 0.5, 1e-4);
  EXPECT_FALSE(s.step(1.0));
  EXPECT_FALSE(s.step(0.99995));
  EXPECT_FALSE(s.step(1.2));
  EXPECT_TRUE(s.step(0.99991));
  EXPECT_DOUBLE_EQ(s.learning_rate(), 0.005);
  EXPECT_FALSE(s.step(0.5));
  EXPECT_EQ(s.state().bad_epochs, 0u);
}

TEST(HeadPreimage, Inverts) {
  for (double w : {1e-3, 0.02, 0.3, 2.0}) {
    const double z = delta_head_preimage(w);
    const double sp = std::log1p(std::exp(z));
    EXPECT_NEAR(sp * std::tanh(z) * std::tanh(z), w, 1e-12 * std::max(1.0, w));
  }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig tc;
  tc.batch_size = 250;
  tc.epochs = epochs;
  tc.seed = 3;
  return tc;
}

Toy gaussian_toy(std::size_t count, std::size_t n_targets, std::uint64_t seed) {
  rng::Stream rng{rng::StreamKey(seed)};
  Toy t{{}, {}, 2, n_targets};
  for (std::size_t i = 0; i < count * 2; ++i) t.x.push_back(rng.normal());
  for (std::size_t i = 0; i < count * n_targets; ++i) t.y.push_back(0.02 + 0.05 * rng.normal());
  return t;
}

}  // namespace

TEST(Train, LossDecreasesEarly) {
  const auto data = gaussian_toy(1000, 5, 20);
  auto tc = quick_train(5);
  tc.calibrate_head = false;
  const auto r = train(data.view(), {}, small_config(2), tc);
  ASSERT_EQ(r.history.size(), 5u);
  EXPECT_LT(r.history.back().train_nll, r.history.front().train_nll);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(r.history[e].train_nll, r.history[e - 1].train_nll);
}

TEST(Train, RecoversGeneratingMoments) {
  const auto data = gaussian_toy(2000, 10, 21);
  const auto val = gaussian_toy(400, 10, 22);
  auto config = small_config(2);
  config.train_biases = true;
  const auto r = train(data.view(), val.view(), config, quick_train(60));
  const std::vector<double> x{0.3, -0.2};
  const auto m = forward(r.best, x);
  double mean = 0.0, second = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    mean += m.pi[j] * m.mu[j];
    second += m.pi[j] * (m.delta[j] * m.delta[j] + m.mu[j] * m.mu[j]);
  }
  EXPECT_NEAR(mean, 0.02, 0.05 * 0.02);
  EXPECT_NEAR(std::sqrt(second - mean * mean), 0.05, 0.05 * 0.05);
}

// Without biases the network is positively homogeneous, so the origin maps
// to a zero head whatever the weights.
TEST(Mdn, FrozenBiasesCollapseAtOrigin) {
  rng::Stream rng{rng::StreamKey(31)};
  auto p = initialize(small_config(2), rng::StreamKey(32));
  oracle::randomize(p, 0.5, rng);
  for (std::size_t i = 0; i < p.layer_count(); ++i) p.bias(i).setZero();
  const auto m = forward(p, std::vector<double>{0.0, 0.0});
  for (std::size_t j = 0; j < m.size(); ++j) {
    EXPECT_DOUBLE_EQ(m.pi[j], 1.0 / 3.0);
    EXPECT_EQ(m.mu[j], 0.0);
    EXPECT_NEAR(m.delta[j], 1e-4, 1e-18);
  }
}

TEST(Train, SeparatesTwoRegimes) {
  rng::Stream rng{rng::StreamKey(23)};
  Toy t{{}, {}, 1, 4};
  for (int i = 0; i < 2000; ++i) {
    const bool upper = i % 2 == 0;
    t.x.push_back(upper ? 1.0 : -1.0);
    for (int k = 0; k < 4; ++k) {
      const double centre = upper ? (rng.uniform() < 0.5 ? -0.15 : 0.15) : 0.0;
      t.y.push_back(centre + (upper ? 0.03 : 0.05) * rng.normal());
    }
  }
  auto tc = quick_train(80);
  tc.standardize_features = false;
  const auto r = train(t.view(), {}, small_config(1, 4), tc);
  const double up[] = {1.0}, down[] = {-1.0};
  const auto p = forward(r.best, up), q = forward(r.best, down);
  double kl = 0.0;
  const double dx = 1e-4;
  for (double y = -0.6; y <= 0.6; y += dx) {
    const double a = oracle::mixture_pdf_naive(p, y), b = std::max(oracle::mixture_pdf_naive(q, y), 1e-300);
    if (a > 0.0) kl += a * std::log(a / b) * dx;
  }
  EXPECT_GT(kl, 0.1);
}

TEST(Train, SingleRecordUsesItselfForValidation) {
  const auto data = gaussian_toy(1, 5, 24);
  const auto r = train(data.view(), {}, small_config(2), quick_train(6));
  ASSERT_EQ(r.history.size(), 6u);
  double best = r.history[0].validation_nll;
  for (const auto& e : r.history) {
    best = std::min(best, e.validation_nll);
    EXPECT_TRUE(std::isfinite(e.validation_nll));
  }
  const std::size_t idx[] = {0};
  EXPECT_NEAR(nll_batch(r.best, data.view(), idx), best, 1e-12);
}

TEST(Train, ZeroEpochsReturnsInitialisation) {
  const auto data = gaussian_toy(50, 3, 25);
  auto tc = quick_train(0);
  tc.calibrate_head = false;
  const auto r = train(data.view(), {}, small_config(2), tc);
  EXPECT_TRUE(r.history.empty());
  EXPECT_TRUE(r.best == initialize(small_config(2), rng::StreamKey(tc.seed, rng::Tag::kInit)));
}

TEST(Train, ReproducibleSingleThreaded) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto data = gaussian_toy(500, 4, 26);
  const auto a = train(data.view(), {}, small_config(2), quick_train(4));
  const auto b = train(data.view(), {}, small_config(2), quick_train(4));
  omp_set_num_threads(saved);
  EXPECT_EQ(a.history, b.history);
  EXPECT_TRUE(a.best == b.best);
}

TEST(Train, ResumeContinuesExactly) {
  const auto data = gaussian_toy(500, 4, 27);
  const auto full = train(data.view(), {}, small_config(2), quick_train(4));
  const auto half = train(data.view(), {}, small_config(2), quick_train(2));
  const auto rest = train(data.view(), {}, small_config(2), quick_train(4), &half.state, &half.best);
  ASSERT_EQ(rest.history.size(), 2u);
  EXPECT_EQ(rest.history[0], full.history[2]);
  EXPECT_EQ(rest.history[1], full.history[3]);
  EXPECT_TRUE(rest.best == full.best);
}

TEST(Train, DivergenceReportsEpoch) {
  const auto data = gaussian_toy(100, 2, 28);
  auto tc = quick_train(3);
  tc.learning_rate = 1e300;
  try {
    train(data.view(), {}, small_config(2), tc);
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}
