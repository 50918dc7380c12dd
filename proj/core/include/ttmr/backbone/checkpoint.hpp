#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ttmr/autodiff/adam.hpp"
#include "ttmr/backbone/strategy.hpp"

namespace ttmr::backbone {

/// Trained state of one strategy: parameters, optimizer moments and training metadata.
///
/// Stored as a pair of files sharing a stem: `<stem>.ttmt` holds `param/<name>`, `adam.m/<name>` and
/// `adam.v/<name>` tensors; `<stem>.json` is the manifest {strategy, n_cascades, channels, seed,
/// epoch, step, config}.
struct Checkpoint {
  StrategyConfig config;
  ad::ParameterSet<float> params;
  ad::AdamState<float> adam;
  std::size_t epoch = 0;  // completed epochs
  nlohmann::json extra = nlohmann::json::object();

  /// Untrained checkpoint holding the seeded initialisation.
  static Checkpoint initial(const StrategyConfig& cfg);

  Model<float> model() const { return Model<float>(config, params); }

  nlohmann::json manifest() const;
  void save(const std::filesystem::path& stem) const;
  /// Accepts the stem or either of the two file names.
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint& a, const Checkpoint& b);
};

/// Strips a `.ttmt` or `.json` extension.
std::filesystem::path checkpoint_stem(const std::filesystem::path& path);

}  // namespace ttmr::backbone
