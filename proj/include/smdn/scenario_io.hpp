#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "smdn/dataset.hpp"

namespace smdn::scenario_io {

// A pricing scenario: model parameters plus the maturities to price at.
struct ScenarioFile {
  std::string id = "0";
  dataset::Scenario scenario;
  std::vector<double> maturities;
  std::vector<double> tv_weights;  // basket weights for the time-varying regime
};

// JSON scalar block. `series` is either a CSV file name (resolved against
// base_dir) with columns day, r, q_1..q_N[, sigma_1..sigma_N], or an inline
// object whose entries are arrays or constants. Correlation is given as one
// of `correlation`, `angles` or `cholesky`; identity when absent.
ScenarioFile parse(const nlohmann::json& j, const std::filesystem::path& base_dir);
ScenarioFile load(const std::filesystem::path& path);

// Writes `<stem>.json` and the series CSV `<stem>.csv` next to it.
void save(const ScenarioFile& file, const std::filesystem::path& json_path);

}  // namespace smdn::scenario_io
