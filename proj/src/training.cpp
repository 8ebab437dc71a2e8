#include "smdn/training.hpp"

#include <cmath>
#include <string>

#include "smdn/error.hpp"

namespace smdn::training {

Outcome fit(const dataset::Dataset& train, const dataset::Dataset* validation, mdn::MdnConfig mdn_config,
            const mdn::TrainConfig& tc, const model::Model* resume) {
  tc.validate();
  if (train.count() == 0) throw InvalidInput("training dataset is empty");
  const auto layout = train.layout();
  mdn_config.input_dim = layout.dim();

  if (validation != nullptr && validation->count() > 0) {
    if (validation->layout() != layout || validation->n_targets != train.n_targets) {
      throw InvalidInput("validation dataset layout differs from the training dataset");
    }
  }

  std::size_t train_end = train.count();
  const bool split_tail = (validation == nullptr || validation->count() == 0) && tc.validation_fraction > 0.0 &&
                          train.count() >= 2;
  if (split_tail) {
    const auto held = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(tc.validation_fraction * static_cast<double>(train.count()))));
    train_end = train.count() - std::min(held, train.count() - 1);
  }

  features::Standardizer standardizer;
  if (resume != nullptr) {
    if (resume->layout != layout) throw InvalidInput("resumed model was trained on a different feature layout");
    if (!resume->train_state) throw InvalidInput("model file carries no training state to resume from");
    standardizer = resume->standardizer;
  } else if (tc.standardize_features) {
    standardizer = features::Standardizer::fit(
        std::span<const float>(train.records.data(), train_end * train.stride()), train.stride(), train.feature_dim);
  } else {
    standardizer = features::Standardizer::identity(layout.dim());
  }

  const auto train_arrays = dataset::to_training_arrays(train, &standardizer, 0, train_end);
  dataset::TrainingArrays val_arrays;
  if (split_tail) {
    val_arrays = dataset::to_training_arrays(train, &standardizer, train_end, train.count());
  } else if (validation != nullptr && validation->count() > 0) {
    val_arrays = dataset::to_training_arrays(*validation, &standardizer);
  }
  const mdn::DataView val_view = val_arrays.features.empty() ? mdn::DataView{{}, {}, train_arrays.dim, train_arrays.n_targets}
                                                            : val_arrays.view();

  mdn::TrainResult result;
  if (resume != nullptr) {
    if (resume->params.config() != mdn_config) throw InvalidInput("resumed model has a different architecture");
    result = mdn::train(train_arrays.view(), val_view, mdn_config, tc, &*resume->train_state, &resume->params);
  } else {
    result = mdn::train(train_arrays.view(), val_view, mdn_config, tc);
  }

  Outcome out;
  out.model.params = std::move(result.best);
  out.model.layout = layout;
  out.model.standardizer = std::move(standardizer);
  out.model.train_state = std::move(result.state);
  out.history = std::move(result.history);
  out.stopped_at_lr_floor = result.stopped_at_lr_floor;
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(train.digest));
  out.model.metadata = {{"train_config", tc.to_json()},
                        {"dataset_digest", digest},
                        {"train_records", train_end},
                        {"validation_records", split_tail ? train.count() - train_end : (validation ? validation->count() : 0)},
                        {"epochs_done", out.model.train_state->epochs_done},
                        {"best_validation_nll", out.model.train_state->best_validation}};
  return out;
}

}  // namespace smdn::training
