#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "logora/trainer.hpp"

namespace logora {

/// Flat `key = value` run description. Keys cover the model shape, the
/// training schedule, the loss weights and the dataset paths; see
/// docs/config.md for the full table.
struct RunConfig {
  TrainConfig train;
  std::optional<std::filesystem::path> source;
  std::optional<std::filesystem::path> target;
  std::optional<std::filesystem::path> target_test;
  /// Keys that appeared in the parsed text.
  std::set<std::string> explicit_keys;

  bool has(const std::string& key) const { return explicit_keys.count(key) > 0; }
};

/// Parses config text. Blank lines and lines starting with '#' are skipped.
/// Unknown or repeated keys, malformed lines and bad values raise BadConfig.
/// Schedule and weights are validated here; the model shape is validated
/// once bind_dataset_shape has fixed T, d and C.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every recognized key, in documentation order.
const std::vector<std::string>& run_config_keys();

/// Canonical text for a config: one line per key, parseable by parse_run_config.
std::string format_run_config(const RunConfig& config);

/// Adopts T, d and C from a dataset. A key the config set explicitly must
/// agree with the dataset, otherwise MetaMismatch.
void bind_dataset_shape(RunConfig& config, const DatasetMeta& meta);

/// Zeroes the weights named in a comma-separated list of domain, margin, dtw, center.
void apply_ablation(LossWeights& weights, std::string_view names);

}  // namespace logora
