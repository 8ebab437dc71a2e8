#include "smdn/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "smdn/error.hpp"

namespace smdn::mdn {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // 0.5 * log(2 pi)
// Fixed partition of every batch; independent of the OpenMP thread count.
constexpr std::size_t kChunks = 16;
constexpr std::size_t kBlockColumns = 256;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double delta_activation(double z, double eps0) {
  const double t = std::tanh(z);
  return softplus(z) * t * t + eps0;
}

double delta_activation_grad(double z) {
  const double t = std::tanh(z);
  return sigmoid(z) * t * t + softplus(z) * 2.0 * t * (1.0 - t * t);
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Scratch space for one record's head evaluation.
struct HeadScratch {
  explicit HeadScratch(std::size_t d) : log_pi(d), pi(d), mu(d), delta(d), log_delta(d), joint(d), resp_sum(d),
                                        d_mu(d), d_delta(d) {}
  std::vector<double> log_pi, pi, mu, delta, log_delta, joint, resp_sum, d_mu, d_delta;
};

// -sum_k log p(y_k | head); if d_head is non-null also writes d(loss)/d(head).
double head_loss(const double* head, std::span<const double> y, const MdnConfig& cfg, HeadScratch& s,
                 double* d_head) {
  const std::size_t d = cfg.components;
  const std::span<const double> logits(head, d);
  const double lse = log_sum_exp(logits);
  for (std::size_t j = 0; j < d; ++j) {
    s.log_pi[j] = logits[j] - lse;
    s.pi[j] = std::exp(s.log_pi[j]);
    const double u = head[d + j];
    s.mu[j] = cfg.mu_activation == MuActivation::kTanh ? std::tanh(u) : u;
    s.delta[j] = delta_activation(head[2 * d + j], cfg.epsilon0);
    s.log_delta[j] = std::log(s.delta[j]);
    s.resp_sum[j] = 0.0;
    s.d_mu[j] = 0.0;
    s.d_delta[j] = 0.0;
  }
  double loss = 0.0;
  for (double yk : y) {
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (yk - s.mu[j]) / s.delta[j];
      s.joint[j] = s.log_pi[j] - s.log_delta[j] - kHalfLogTwoPi - 0.5 * z * z;
    }
    const double lk = log_sum_exp(s.joint);
    loss -= lk;
    if (d_head != nullptr) {
      for (std::size_t j = 0; j < d; ++j) {
        const double gamma = std::exp(s.joint[j] - lk);
        const double inv = 1.0 / s.delta[j];
        const double z = (yk - s.mu[j]) * inv;
        s.resp_sum[j] += gamma;
        s.d_mu[j] -= gamma * z * inv;
        s.d_delta[j] += gamma * (inv - z * z * inv);
      }
    }
  }
  if (d_head != nullptr) {
    const double m = static_cast<double>(y.size());
    for (std::size_t j = 0; j < d; ++j) {
      d_head[j] = m * s.pi[j] - s.resp_sum[j];
      const double mu_slope = cfg.mu_activation == MuActivation::kTanh ? 1.0 - s.mu[j] * s.mu[j] : 1.0;
      d_head[d + j] = s.d_mu[j] * mu_slope;
      d_head[2 * d + j] = s.d_delta[j] * delta_activation_grad(head[2 * d + j]);
    }
  }
  return loss;
}

double leaky(double z, double slope) { return z > 0.0 ? z : slope * z; }
double leaky_grad(double z, double slope) { return z > 0.0 ? 1.0 : slope; }

std::size_t hidden_count(const MdnParams& p) { return p.layer_count() - 1; }

// Loss (and gradient accumulation) over one contiguous chunk of indices.
double chunk_eval(const MdnParams& params, const DataView& data, std::span<const std::size_t> idx,
                  Gradients* grads) {
  const MdnConfig& cfg = params.config();
  const double slope = cfg.leaky_slope;
  const std::size_t hidden = hidden_count(params);
  const std::size_t head_layer = hidden;
  HeadScratch scratch(cfg.components);
  std::vector<Eigen::MatrixXd> act(hidden + 1), pre(hidden);
  Eigen::MatrixXd head, d_head, d_act, d_pre;
  double loss = 0.0;

  for (std::size_t start = 0; start < idx.size(); start += kBlockColumns) {
    const std::size_t b = std::min(kBlockColumns, idx.size() - start);
    Eigen::MatrixXd& x = act[0];
    x.resize(static_cast<Eigen::Index>(data.dim), static_cast<Eigen::Index>(b));
    for (std::size_t c = 0; c < b; ++c) {
      const auto row = data.x(idx[start + c]);
      std::copy(row.begin(), row.end(), x.col(static_cast<Eigen::Index>(c)).data());
    }
    for (std::size_t h = 0; h < hidden; ++h) {
      pre[h].noalias() = params.weight(h) * act[h];
      pre[h].colwise() += params.bias(h);
      act[h + 1] = pre[h].unaryExpr([slope](double z) { return leaky(z, slope); });
    }
    head.noalias() = params.weight(head_layer) * act[hidden];
    head.colwise() += params.bias(head_layer);
    if (grads != nullptr) d_head.resize(head.rows(), head.cols());
    for (std::size_t c = 0; c < b; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      loss += head_loss(head.col(col).data(), data.y(idx[start + c]), cfg, scratch,
                        grads != nullptr ? d_head.col(col).data() : nullptr);
    }
    if (grads == nullptr) continue;

    grads->weight(head_layer).noalias() += d_head * act[hidden].transpose();
    grads->bias(head_layer) += d_head.rowwise().sum();
    d_act.noalias() = params.weight(head_layer).transpose() * d_head;
    for (std::size_t h = hidden; h-- > 0;) {
      d_pre = d_act.cwiseProduct(pre[h].unaryExpr([slope](double z) { return leaky_grad(z, slope); }));
      grads->weight(h).noalias() += d_pre * act[h].transpose();
      grads->bias(h) += d_pre.rowwise().sum();
      if (h > 0) d_act.noalias() = params.weight(h).transpose() * d_pre;
    }
  }
  return loss;
}

double evaluate_batch(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices,
                      Gradients* grads) {
  data.validate();
  if (indices.empty()) throw InvalidInput("batch must be nonempty");
  if (data.dim != params.config().input_dim) throw InvalidInput("feature dimension does not match the network");
  const std::size_t count = indices.size();
  const std::size_t chunks = std::min(kChunks, count);
  std::vector<double> losses(chunks, 0.0);
  std::vector<Gradients> partial;
  if (grads != nullptr) partial.assign(chunks, Gradients(params.config()));

  const auto n_chunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * count / chunks;
    const std::size_t hi = (static_cast<std::size_t>(c) + 1) * count / chunks;
    losses[c] = chunk_eval(params, data, indices.subspan(lo, hi - lo), grads != nullptr ? &partial[c] : nullptr);
  }

  double total = 0.0;
  for (double l : losses) total += l;
  const double inv = 1.0 / static_cast<double>(count);
  if (grads != nullptr) {
    if (grads->config() != params.config()) *grads = Gradients(params.config());
    auto out = grads->values();
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& g : partial) {
      const auto v = g.values();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    }
    for (auto& v : out) v *= inv;
  }
  return total * inv;
}

}  // namespace

void MdnConfig::validate() const {
  if (input_dim == 0) throw InvalidInput("input_dim must be positive");
  if (hidden_sizes.empty()) throw InvalidInput("hidden_sizes must be nonempty");
  for (auto h : hidden_sizes)
    if (h == 0) throw InvalidInput("hidden layer sizes must be positive");
  if (components == 0) throw InvalidInput("component count must be at least 1");
  if (!(epsilon0 > 0.0)) throw InvalidInput("epsilon0 must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw InvalidInput("leaky_slope must lie in [0, 1)");
}

nlohmann::json MdnConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"hidden_sizes", hidden_sizes},
          {"components", components},
          {"mu_activation", mu_activation == MuActivation::kTanh ? "tanh" : "identity"},
          {"epsilon0", epsilon0},
          {"leaky_slope", leaky_slope},
          {"train_biases", train_biases}};
}

MdnConfig MdnConfig::from_json(const nlohmann::json& j) {
  MdnConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
  c.components = j.at("components").get<std::size_t>();
  const auto mu = j.at("mu_activation").get<std::string>();
  if (mu != "tanh" && mu != "identity") throw InvalidInput("mu_activation must be tanh or identity");
  c.mu_activation = mu == "tanh" ? MuActivation::kTanh : MuActivation::kIdentity;
  c.epsilon0 = j.at("epsilon0").get<double>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.train_biases = j.value("train_biases", false);
  c.validate();
  return c;
}

void MixtureParams::validate(double epsilon0) const {
  const std::size_t d = pi.size();
  if (d == 0 || mu.size() != d || delta.size() != d) throw InvalidInput("mixture parameter lengths disagree");
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (!(pi[j] >= 0.0) || !std::isfinite(mu[j]) || !(delta[j] > 0.0) || !std::isfinite(delta[j])) {
      throw InvalidInput("invalid mixture component");
    }
    if (delta[j] < epsilon0) throw InvalidInput("mixture delta below epsilon0");
    total += pi[j];
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("mixture weights must sum to 1");
}

MdnParams::MdnParams(MdnConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = config_.input_dim;
  std::size_t offset = 0;
  auto add = [&](std::size_t out) {
    Slot s{in, out, offset, offset + in * out};
    offset = s.bias + out;
    slots_.push_back(s);
    in = out;
  };
  for (auto h : config_.hidden_sizes) add(h);
  add(3 * config_.components);
  values_.assign(offset, 0.0);
  trainable_.assign(offset, 1);
  if (!config_.train_biases) {
    for (const auto& s : slots_) std::fill_n(trainable_.begin() + static_cast<std::ptrdiff_t>(s.bias), s.out, 0);
  }
}

MatrixMap MdnParams::weight(std::size_t i) {
  const auto& s = slots_.at(i);
  return {values_.data() + s.weight, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in)};
}

ConstMatrixMap MdnParams::weight(std::size_t i) const {
  const auto& s = slots_.at(i);
  return {values_.data() + s.weight, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in)};
}

VectorMap MdnParams::bias(std::size_t i) {
  const auto& s = slots_.at(i);
  return {values_.data() + s.bias, static_cast<Eigen::Index>(s.out)};
}

ConstVectorMap MdnParams::bias(std::size_t i) const {
  const auto& s = slots_.at(i);
  return {values_.data() + s.bias, static_cast<Eigen::Index>(s.out)};
}

void MdnParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

MdnParams initialize(const MdnConfig& config, const rng::StreamKey& key) {
  MdnParams params(config);
  rng::Stream stream(key);
  const double slope2 = config.leaky_slope * config.leaky_slope;
  for (std::size_t i = 0; i < params.layer_count(); ++i) {
    const double fan_in = static_cast<double>(params.layer_inputs(i));
    double bound = std::sqrt(6.0 / (fan_in * (1.0 + slope2)));
    if (i + 1 == params.layer_count()) bound *= 0.01;
    auto w = params.weight(i);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = stream.uniform(-bound, bound);
  }
  return params;
}

MixtureParams mixture_from_head(std::span<const double> head, const MdnConfig& config) {
  const std::size_t d = config.components;
  if (head.size() != 3 * d) throw InvalidInput("head output size must be 3 d");
  MixtureParams mix{std::vector<double>(d), std::vector<double>(d), std::vector<double>(d)};
  const double lse = log_sum_exp(head.first(d));
  for (std::size_t j = 0; j < d; ++j) {
    mix.pi[j] = std::exp(head[j] - lse);
    mix.mu[j] = config.mu_activation == MuActivation::kTanh ? std::tanh(head[d + j]) : head[d + j];
    mix.delta[j] = delta_activation(head[2 * d + j], config.epsilon0);
  }
  return mix;
}

namespace {

Eigen::VectorXd last_hidden(const MdnParams& params, std::span<const double> x) {
  const double slope = params.config().leaky_slope;
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t h = 0; h < hidden_count(params); ++h) {
    Eigen::VectorXd z = params.weight(h) * a + params.bias(h);
    a = z.unaryExpr([slope](double v) { return leaky(v, slope); });
  }
  return a;
}

}  // namespace

MixtureParams forward(const MdnParams& params, std::span<const double> x) {
  if (x.size() != params.config().input_dim) throw InvalidInput("feature dimension does not match the network");
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("non-finite network input");
  const std::size_t head_layer = hidden_count(params);
  const Eigen::VectorXd head = params.weight(head_layer) * last_hidden(params, x) + params.bias(head_layer);
  return mixture_from_head({head.data(), static_cast<std::size_t>(head.size())}, params.config());
}

double mixture_logpdf(const MixtureParams& mix, double y) {
  std::vector<double> terms(mix.size());
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double z = (y - mix.mu[j]) / mix.delta[j];
    terms[j] = std::log(mix.pi[j]) - std::log(mix.delta[j]) - kHalfLogTwoPi - 0.5 * z * z;
  }
  return log_sum_exp(terms);
}

double mixture_pdf(const MixtureParams& mix, double y) { return std::exp(mixture_logpdf(mix, y)); }

void DataView::validate() const {
  if (dim == 0 || n_targets == 0) throw InvalidInput("data view needs positive dim and target count");
  if (features.size() % dim != 0) throw InvalidInput("feature buffer is not a multiple of dim");
  if (targets.size() != count() * n_targets) throw InvalidInput("target buffer does not match record count");
}

std::vector<std::size_t> all_indices(std::size_t count) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double nll_batch(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices) {
  return evaluate_batch(params, data, indices, nullptr);
}

double nll_batch(const MdnParams& params, const DataView& data) {
  const auto idx = all_indices(data.count());
  return nll_batch(params, data, idx);
}

double gradients(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices,
                 Gradients& grads) {
  return evaluate_batch(params, data, indices, &grads);
}

namespace reference {

namespace {

// Dense out x in matrix-vector product over the column-major weight block.
void matvec(const MdnParams& p, std::size_t layer, const std::vector<double>& in, std::vector<double>& out) {
  const std::size_t rows = p.layer_outputs(layer), cols = p.layer_inputs(layer);
  const double* w = p.values().data() + p.weight_offset(layer);
  const double* b = p.values().data() + p.bias_offset(layer);
  out.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += w[c * rows + r] * in[c];
    out[r] = acc;
  }
}

double record(const MdnParams& params, std::span<const double> x, std::span<const double> y, Gradients* grads,
              HeadScratch& scratch) {
  const MdnConfig& cfg = params.config();
  const std::size_t hidden = hidden_count(params);
  std::vector<std::vector<double>> act(hidden + 1), pre(hidden);
  act[0].assign(x.begin(), x.end());
  for (std::size_t h = 0; h < hidden; ++h) {
    matvec(params, h, act[h], pre[h]);
    act[h + 1].resize(pre[h].size());
    for (std::size_t i = 0; i < pre[h].size(); ++i) act[h + 1][i] = leaky(pre[h][i], cfg.leaky_slope);
  }
  std::vector<double> head;
  matvec(params, hidden, act[hidden], head);
  std::vector<double> delta(head.size());
  const double loss = head_loss(head.data(), y, cfg, scratch, grads != nullptr ? delta.data() : nullptr);
  if (grads == nullptr) return loss;

  auto g = grads->values();
  for (std::size_t layer = hidden + 1; layer-- > 0;) {
    const std::size_t rows = params.layer_outputs(layer), cols = params.layer_inputs(layer);
    const std::vector<double>& input = act[layer];
    double* gw = g.data() + params.weight_offset(layer);
    double* gb = g.data() + params.bias_offset(layer);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r) gw[c * rows + r] += delta[r] * input[c];
    for (std::size_t r = 0; r < rows; ++r) gb[r] += delta[r];
    if (layer == 0) break;
    const double* w = params.values().data() + params.weight_offset(layer);
    std::vector<double> below(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) acc += w[c * rows + r] * delta[r];
      below[c] = acc * leaky_grad(pre[layer - 1][c], cfg.leaky_slope);
    }
    delta = std::move(below);
  }
  return loss;
}

double run(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices, Gradients* grads) {
  data.validate();
  if (indices.empty()) throw InvalidInput("batch must be nonempty");
  if (data.dim != params.config().input_dim) throw InvalidInput("feature dimension does not match the network");
  if (grads != nullptr) {
    *grads = Gradients(params.config());
  }
  HeadScratch scratch(params.config().components);
  double total = 0.0;
  for (std::size_t i : indices) total += record(params, data.x(i), data.y(i), grads, scratch);
  const double inv = 1.0 / static_cast<double>(indices.size());
  if (grads != nullptr)
    for (auto& v : grads->values()) v *= inv;
  return total * inv;
}

}  // namespace

double nll_batch(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices) {
  return run(params, data, indices, nullptr);
}

double gradients(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices,
                 Gradients& grads) {
  return run(params, data, indices, &grads);
}

}  // namespace reference

void adamw_step(AdamState& state, MdnParams& params, const Gradients& grads, const AdamWHyper& hyper) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw InvalidInput("AdamW state, parameter and gradient shapes must match");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(hyper.beta1, t);
  const double bias2 = 1.0 - std::pow(hyper.beta2, t);
  const double decay = 1.0 - hyper.learning_rate * hyper.weight_decay;
  auto theta = params.values();
  const auto g = grads.values();
  const auto& mask = params.trainable_mask();
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] == 0) continue;
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    theta[i] = theta[i] * decay - hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

PlateauScheduler::PlateauScheduler(double learning_rate, std::size_t patience, double decay_factor, double min_delta)
    : PlateauScheduler(State{learning_rate, 0.0, false, 0}, patience, decay_factor, min_delta) {}

PlateauScheduler::PlateauScheduler(State state, std::size_t patience, double decay_factor, double min_delta)
    : state_(state), patience_(patience), decay_factor_(decay_factor), min_delta_(min_delta) {
  if (!(state_.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw InvalidInput("decay factor must lie in (0, 1)");
  if (patience == 0) throw InvalidInput("patience must be at least 1");
}

bool PlateauScheduler::step(double validation_loss) {
  if (!state_.has_best || validation_loss < state_.best - min_delta_) {
    state_.best = validation_loss;
    state_.has_best = true;
    state_.bad_epochs = 0;
    return false;
  }
  if (++state_.bad_epochs >= patience_) {
    state_.learning_rate *= decay_factor_;
    state_.bad_epochs = 0;
    return true;
  }
  return false;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (batch_size == 0) throw InvalidInput("batch_size must be at least 1");
  if (!(weight_decay >= 0.0)) throw InvalidInput("weight_decay must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidInput("betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw InvalidInput("adam_eps must be positive");
  if (patience == 0) throw InvalidInput("patience must be at least 1");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw InvalidInput("decay_factor must lie in (0, 1)");
  if (!(min_delta >= 0.0)) throw InvalidInput("min_delta must be nonnegative");
  if (!(lr_floor > 0.0)) throw InvalidInput("lr_floor must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw InvalidInput("validation_fraction must lie in [0, 1)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"weight_decay", weight_decay},   {"beta1", beta1},
          {"beta2", beta2},                 {"adam_eps", adam_eps},
          {"patience", patience},           {"decay_factor", decay_factor},
          {"min_delta", min_delta},         {"lr_floor", lr_floor},
          {"epochs", epochs},               {"validation_fraction", validation_fraction},
          {"seed", seed},                   {"standardize_features", standardize_features},
          {"calibrate_head", calibrate_head}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.patience = j.value("patience", c.patience);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.min_delta = j.value("min_delta", c.min_delta);
  c.lr_floor = j.value("lr_floor", c.lr_floor);
  c.epochs = j.value("epochs", c.epochs);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  c.standardize_features = j.value("standardize_features", c.standardize_features);
  c.calibrate_head = j.value("calibrate_head", c.calibrate_head);
  c.validate();
  return c;
}

double delta_head_preimage(double width) {
  if (!(width > 0.0)) throw InvalidInput("width must be positive");
  auto g = [](double z) {
    const double t = std::tanh(z);
    return softplus(z) * t * t;
  };
  double lo = 0.0, hi = 1.0;
  while (g(hi) < width) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < width ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void calibrate_head(MdnParams& params, const DataView& data, std::span<const std::size_t> sample) {
  data.validate();
  if (sample.empty()) return;
  const MdnConfig& cfg = params.config();
  const std::size_t d = cfg.components;
  const std::size_t head_layer = hidden_count(params);

  Eigen::VectorXd mean_act = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.layer_inputs(head_layer)));
  double y_sum = 0.0, within_var = 0.0, y_sq = 0.0;
  std::size_t y_count = 0;
  for (std::size_t i : sample) {
    mean_act += last_hidden(params, data.x(i));
    const auto y = data.y(i);
    double m = 0.0;
    for (double v : y) m += v;
    m /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) {
      var += (v - m) * (v - m);
      y_sum += v;
      y_sq += v * v;
    }
    if (y.size() > 1) within_var += var / static_cast<double>(y.size() - 1);
    y_count += y.size();
  }
  mean_act /= static_cast<double>(sample.size());
  const double norm2 = mean_act.squaredNorm();
  if (!(norm2 > 1e-12)) return;

  const double y_mean = y_sum / static_cast<double>(y_count);
  double spread = data.n_targets > 1 ? std::sqrt(within_var / static_cast<double>(sample.size()))
                                     : std::sqrt(std::max(0.0, y_sq / static_cast<double>(y_count) - y_mean * y_mean));
  spread = std::max(spread, 10.0 * cfg.epsilon0);

  auto w = params.weight(head_layer);
  auto retarget = [&](Eigen::Index row, double target) {
    const double current = w.row(row).dot(mean_act) + params.bias(head_layer)(row);
    if (cfg.train_biases) {
      params.bias(head_layer)(row) += target - current;
    } else {
      w.row(row) += ((target - current) / norm2) * mean_act.transpose();
    }
  };
  for (std::size_t j = 0; j < d; ++j) {
    const double offset = d == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(d - 1);
    const double mu = y_mean + spread * offset;
    const double mu_pre = cfg.mu_activation == MuActivation::kTanh ? std::atanh(std::clamp(mu, -0.95, 0.95)) : mu;
    retarget(static_cast<Eigen::Index>(d + j), mu_pre);
    retarget(static_cast<Eigen::Index>(2 * d + j), delta_head_preimage(spread));
  }
}

TrainResult train(const DataView& train_data, const DataView& validation_data, const MdnConfig& mdn_config,
                  const TrainConfig& tc, const TrainState* resume, const MdnParams* resume_best) {
  tc.validate();
  mdn_config.validate();
  train_data.validate();
  if (train_data.count() == 0) throw InvalidInput("training set is empty");
  const DataView& val = validation_data.count() > 0 ? validation_data : train_data;
  val.validate();

  TrainResult result;
  TrainState& st = result.state;
  if (resume != nullptr) {
    if (resume->current.config() != mdn_config) throw InvalidInput("resume state has a different architecture");
    st = *resume;
    result.best = resume_best != nullptr ? *resume_best : resume->current;
  } else {
    st.current = initialize(mdn_config, rng::StreamKey(tc.seed, rng::Tag::kInit));
    if (tc.calibrate_head) {
      const auto sample = all_indices(std::min<std::size_t>(train_data.count(), 4096));
      calibrate_head(st.current, train_data, sample);
    }
    st.adam = AdamState::zeros(st.current.size());
    st.scheduler = PlateauScheduler::State{tc.learning_rate, 0.0, false, 0};
    st.epochs_done = 0;
    st.has_best = false;
    result.best = st.current;
  }

  PlateauScheduler scheduler(st.scheduler, tc.patience, tc.decay_factor, tc.min_delta);
  Gradients grads(mdn_config);
  std::vector<std::size_t> order = all_indices(train_data.count());
  const std::vector<std::size_t> val_idx = all_indices(val.count());

  while (st.epochs_done < tc.epochs) {
    if (scheduler.learning_rate() < tc.lr_floor) {
      result.stopped_at_lr_floor = true;
      break;
    }
    const std::size_t epoch = st.epochs_done + 1;
    const double lr = scheduler.learning_rate();
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Stream shuffle(rng::StreamKey(tc.seed, rng::Tag::kShuffle).child(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);

    const AdamWHyper hyper{lr, tc.beta1, tc.beta2, tc.adam_eps, tc.weight_decay};
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t b = std::min(tc.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, b);
      const double loss = gradients(st.current, train_data, batch, grads);
      if (!std::isfinite(loss)) throw TrainingError(static_cast<int>(epoch), "non-finite training loss");
      adamw_step(st.adam, st.current, grads, hyper);
      weighted += loss * static_cast<double>(b);
    }
    const double train_nll = weighted / static_cast<double>(order.size());
    const double val_nll = nll_batch(st.current, val, val_idx);
    if (!std::isfinite(val_nll)) throw TrainingError(static_cast<int>(epoch), "non-finite validation loss");

    result.history.push_back({epoch, train_nll, val_nll, lr});
    if (!st.has_best || val_nll < st.best_validation) {
      st.best_validation = val_nll;
      st.has_best = true;
      result.best = st.current;
    }
    scheduler.step(val_nll);
    st.scheduler = scheduler.state();
    st.epochs_done = epoch;
  }
  if (scheduler.learning_rate() < tc.lr_floor) result.stopped_at_lr_floor = true;
  return result;
}

}  // namespace smdn::mdn
