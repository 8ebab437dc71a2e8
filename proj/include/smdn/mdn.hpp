#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "smdn/rng.hpp"

namespace smdn::mdn {

enum class MuActivation { kTanh, kIdentity };

struct MdnConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_sizes{320, 256, 256, 192, 128, 80};
  std::size_t components = 10;
  MuActivation mu_activation = MuActivation::kTanh;
  double epsilon0 = 1e-4;
  double leaky_slope = 0.01;
  // Biases exist in the parameter block but stay frozen at zero unless set.
  bool train_biases = false;

  void validate() const;
  nlohmann::json to_json() const;
  static MdnConfig from_json(const nlohmann::json& j);
  bool operator==(const MdnConfig&) const = default;
};

// A univariate Gaussian mixture in log-return units.
struct MixtureParams {
  std::vector<double> pi;
  std::vector<double> mu;
  std::vector<double> delta;

  std::size_t size() const { return pi.size(); }
  void validate(double epsilon0 = 0.0) const;
};

using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

// All network weights in one flat block. Layer i (hidden layers first, the
// head last) owns a column-major out x in weight matrix followed by its bias.
// Head rows are [pi logits | mu | delta], d rows each.
class MdnParams {
 public:
  MdnParams() = default;
  explicit MdnParams(MdnConfig config);

  const MdnConfig& config() const { return config_; }
  std::size_t layer_count() const { return slots_.size(); }
  std::size_t layer_inputs(std::size_t i) const { return slots_.at(i).in; }
  std::size_t layer_outputs(std::size_t i) const { return slots_.at(i).out; }
  std::size_t weight_offset(std::size_t i) const { return slots_.at(i).weight; }
  std::size_t bias_offset(std::size_t i) const { return slots_.at(i).bias; }

  MatrixMap weight(std::size_t i);
  ConstMatrixMap weight(std::size_t i) const;
  VectorMap bias(std::size_t i);
  ConstVectorMap bias(std::size_t i) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  // 1 for parameters the optimiser updates, 0 for frozen biases.
  const std::vector<std::uint8_t>& trainable_mask() const { return trainable_; }

  void set_zero();
  bool operator==(const MdnParams& other) const { return config_ == other.config_ && values_ == other.values_; }

 private:
  struct Slot {
    std::size_t in = 0, out = 0, weight = 0, bias = 0;
  };
  MdnConfig config_;
  std::vector<Slot> slots_;
  std::vector<double> values_;
  std::vector<std::uint8_t> trainable_;
};

// Gradients share the parameter layout.
using Gradients = MdnParams;

// Scaled-uniform LeakyReLU initialisation; head weights damped by 0.01.
MdnParams initialize(const MdnConfig& config, const rng::StreamKey& key);

// Head activations for one record: softmax, tanh/identity, softplus*tanh^2 + eps0.
MixtureParams mixture_from_head(std::span<const double> head, const MdnConfig& config);

// x is a standardised feature vector.
MixtureParams forward(const MdnParams& params, std::span<const double> x);

double mixture_logpdf(const MixtureParams& mix, double y);
double mixture_pdf(const MixtureParams& mix, double y);

// Non-owning view of training records: row-major features (count x dim)
// and targets (count x n_targets).
struct DataView {
  std::span<const double> features;
  std::span<const double> targets;
  std::size_t dim = 0;
  std::size_t n_targets = 0;

  std::size_t count() const { return dim == 0 ? 0 : features.size() / dim; }
  std::span<const double> x(std::size_t i) const { return features.subspan(i * dim, dim); }
  std::span<const double> y(std::size_t i) const { return targets.subspan(i * n_targets, n_targets); }
  void validate() const;
};

std::vector<std::size_t> all_indices(std::size_t count);

// Mean over records of -sum_k log p(y_k | x). The batch is split into a
// fixed number of contiguous chunks evaluated in parallel and reduced in
// chunk order, so results do not depend on the thread count.
double nll_batch(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices);
double nll_batch(const MdnParams& params, const DataView& data);

// Returns the loss and writes the exact gradient of nll_batch into grads.
double gradients(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices,
                 Gradients& grads);

namespace reference {

// Record-at-a-time loops without Eigen; single-threaded arbiter for tests.
double nll_batch(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices);
double gradients(const MdnParams& params, const DataView& data, std::span<const std::size_t> indices,
                 Gradients& grads);

}  // namespace reference

struct AdamWHyper {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
  bool operator==(const AdamState&) const = default;
};

// Decoupled weight decay: theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps).
void adamw_step(AdamState& state, MdnParams& params, const Gradients& grads, const AdamWHyper& hyper);

// Multiplies the learning rate by decay_factor once `patience` consecutive
// epochs fail to improve the best validation loss by at least min_delta.
class PlateauScheduler {
 public:
  struct State {
    double learning_rate = 0.01;
    double best = 0.0;
    bool has_best = false;
    std::size_t bad_epochs = 0;
    bool operator==(const State&) const = default;
  };

  PlateauScheduler(double learning_rate, std::size_t patience, double decay_factor, double min_delta);
  PlateauScheduler(State state, std::size_t patience, double decay_factor, double min_delta);

  // Returns true when the learning rate was reduced.
  bool step(double validation_loss);
  double learning_rate() const { return state_.learning_rate; }
  const State& state() const { return state_; }

 private:
  State state_;
  std::size_t patience_;
  double decay_factor_;
  double min_delta_;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 100000;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t patience = 3;
  double decay_factor = 0.5;
  double min_delta = 1e-4;
  double lr_floor = 1e-5;
  std::size_t epochs = 100;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  bool standardize_features = true;
  // Align the mu/delta heads with the target scale before the first epoch.
  bool calibrate_head = true;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double validation_nll = 0.0;
  double learning_rate = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

// Everything needed to continue training bit-for-bit.
struct TrainState {
  MdnParams current;
  AdamState adam;
  PlateauScheduler::State scheduler;
  std::size_t epochs_done = 0;
  double best_validation = 0.0;
  bool has_best = false;
};

struct TrainResult {
  MdnParams best;
  std::vector<EpochRecord> history;
  TrainState state;
  bool stopped_at_lr_floor = false;
};

// Shifts the mu and delta head rows so that, at the mean last-layer
// activation, component means spread over ybar +- s and widths equal s,
// where ybar and s are the target mean and within-record spread.
// With trainable biases the shift goes into the head bias instead.
void calibrate_head(MdnParams& params, const DataView& data, std::span<const std::size_t> sample);

// Inverse of softplus(z) tanh(z)^2 on z > 0.
double delta_head_preimage(double width);

// `resume` continues from a saved state; `resume_best` supplies the best
// parameters seen before the checkpoint.
TrainResult train(const DataView& train_data, const DataView& validation_data, const MdnConfig& mdn_config,
                  const TrainConfig& train_config, const TrainState* resume = nullptr,
                  const MdnParams* resume_best = nullptr);

}  // namespace smdn::mdn
