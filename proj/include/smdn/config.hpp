#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "smdn/dataset.hpp"
#include "smdn/evaluation.hpp"
#include "smdn/mdn.hpp"

namespace smdn::config {

struct Paths {
  std::string data;
  std::string validation;
  std::string model;
  std::string history;
};

struct RunConfig {
  dataset::GenerationConfig generation;
  std::size_t validation_n1 = 40;
  mdn::MdnConfig mdn;
  mdn::TrainConfig train;
  evaluation::Settings evaluation;
  std::uint64_t data_seed = 0;
  std::uint64_t evaluation_seed = 0;
  Paths paths;
  // Defaults merged with the user's file; the canonical record of the run.
  nlohmann::json canonical;
};

// Every setting with its default value. `regime` must still be supplied.
nlohmann::json defaults();

// Accepts JSON, or `dotted.key = value` lines where each value is JSON or a
// bare string; `#` starts a comment.
nlohmann::json parse_text(std::string_view text);

// Merges onto the defaults and checks the schema. Unknown keys, type
// mismatches, missing required keys and out-of-range values raise
// ConfigError naming the field path.
RunConfig from_json(const nlohmann::json& user);
RunConfig load(const std::filesystem::path& path);

}  // namespace smdn::config
