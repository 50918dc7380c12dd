#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttmr/backbone/cascade.hpp"
#include "ttmr/data/sample.hpp"
#include "ttmr/ttm/ttm.hpp"

namespace ttmr::backbone {

/// How the backbone consumes the input and the reference pair.
enum class Strategy {
  original,     // cascade(x)
  ref_concat,   // cascade(x ++ y_ref), 4 input channels
  ttm,          // cascade(TTM(x, x_ref, y_ref))
  ttm_ha_only,  // TTM with the soft gate removed
  ttm_sa_only,  // TTM with the transferred texture zeroed
};

std::string to_string(Strategy s);
/// Throws std::invalid_argument listing the valid names.
Strategy strategy_from_string(const std::string& s);
const std::vector<Strategy>& all_strategies();
std::string strategy_names();
bool uses_reference(Strategy s);
bool uses_ttm(Strategy s);

struct StrategyConfig {
  Strategy strategy = Strategy::original;
  CascadeConfig cascade;
  std::optional<ttm::TtmConfig> ttm;
  std::uint64_t seed = 0;

  /// Default sizes for a strategy: 3 cascades x 48 channels, 64-channel TTM with 16x16 patches.
  static StrategyConfig make(Strategy s, std::uint64_t seed);

  void validate() const;
  nlohmann::json to_json() const;
  static StrategyConfig from_json(const nlohmann::json& j);
};

template <typename T>
struct Prediction {
  ad::Var output;
  ad::Var synthesized;  // x' (ttm strategies only)
  std::optional<ttm::AttentionResult<T>> attention;
};

template <typename T>
struct Reconstruction {
  kspace::ComplexImage<T> image;
  std::optional<kspace::ComplexImage<T>> synthesized;
  std::optional<ttm::AttentionResult<T>> attention;
};

/// A strategy configuration together with its parameters (backbone plus optional TTM).
template <typename T>
class Model {
 public:
  /// Fresh seeded initialisation.
  explicit Model(StrategyConfig cfg);
  /// Adopts existing parameters; names and shapes must match the configuration's layout.
  Model(StrategyConfig cfg, ad::ParameterSet<T> params);

  const StrategyConfig& config() const noexcept { return cfg_; }
  const ad::ParameterSet<T>& params() const noexcept { return params_; }
  ad::ParameterSet<T>& params() noexcept { return params_; }

  /// Records the strategy's forward pass. Throws when a reference strategy lacks references.
  Prediction<T> forward(ad::Graph<T>& g, const ad::BoundParameters& p, const data::Sample<T>& sample) const;

  /// Inference without gradient bookkeeping.
  Reconstruction<T> reconstruct(const data::Sample<T>& sample) const;

 private:
  StrategyConfig cfg_;
  ad::ParameterSet<T> params_;
};

template <typename T>
ad::ParameterSet<T> init_strategy_params(const StrategyConfig& cfg);

template <typename T>
Reconstruction<T> strategy_forward(const Model<T>& model, const data::Sample<T>& sample) {
  return model.reconstruct(sample);
}

}  // namespace ttmr::backbone
