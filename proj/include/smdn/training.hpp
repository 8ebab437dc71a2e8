#pragma once

#include <vector>

#include "smdn/dataset.hpp"
#include "smdn/mdn.hpp"
#include "smdn/model.hpp"

namespace smdn::training {

struct Outcome {
  model::Model model;
  std::vector<mdn::EpochRecord> history;
  bool stopped_at_lr_floor = false;
};

// Fits the standardiser (unless resuming), trains, and packages the
// best-validation parameters with a resumable training state. Without a
// validation set the last validation_fraction of the training records is
// held out instead. `mdn_config.input_dim` is taken from the dataset.
Outcome fit(const dataset::Dataset& train, const dataset::Dataset* validation, mdn::MdnConfig mdn_config,
            const mdn::TrainConfig& train_config, const model::Model* resume = nullptr);

}  // namespace smdn::training
