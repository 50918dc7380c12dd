#include "ttmr/backbone/strategy.hpp"

#include <stdexcept>

#include "ttmr/autodiff/ops.hpp"

namespace ttmr::backbone {

namespace {

struct StrategyName {
  Strategy strategy;
  const char* name;
};

constexpr StrategyName kNames[] = {{Strategy::original, "original"},
                                   {Strategy::ref_concat, "ref_concat"},
                                   {Strategy::ttm, "ttm"},
                                   {Strategy::ttm_ha_only, "ttm_ha_only"},
                                   {Strategy::ttm_sa_only, "ttm_sa_only"}};

}  // namespace

std::string to_string(Strategy s) {
  for (const auto& n : kNames)
    if (n.strategy == s) return n.name;
  return "original";
}

std::string strategy_names() {
  std::string out;
  for (const auto& n : kNames) out += (out.empty() ? "" : ", ") + std::string(n.name);
  return out;
}

Strategy strategy_from_string(const std::string& s) {
  for (const auto& n : kNames)
    if (s == n.name) return n.strategy;
  throw std::invalid_argument("unknown strategy '" + s + "' (valid: " + strategy_names() + ")");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all{Strategy::original, Strategy::ref_concat, Strategy::ttm,
                                         Strategy::ttm_ha_only, Strategy::ttm_sa_only};
  return all;
}

bool uses_ttm(Strategy s) {
  return s == Strategy::ttm || s == Strategy::ttm_ha_only || s == Strategy::ttm_sa_only;
}

bool uses_reference(Strategy s) { return s == Strategy::ref_concat || uses_ttm(s); }

StrategyConfig StrategyConfig::make(Strategy s, std::uint64_t seed) {
  StrategyConfig cfg;
  cfg.strategy = s;
  cfg.seed = seed;
  cfg.cascade.in_channels = s == Strategy::ref_concat ? 4 : 2;
  if (uses_ttm(s)) {
    ttm::TtmConfig t;
    if (s == Strategy::ttm_ha_only) t.mode = ttm::AttentionMode::hard_only;
    if (s == Strategy::ttm_sa_only) t.mode = ttm::AttentionMode::soft_only;
    cfg.ttm = t;
  }
  return cfg;
}

void StrategyConfig::validate() const {
  if (uses_ttm(strategy) != ttm.has_value()) {
    throw std::invalid_argument("strategy '" + to_string(strategy) + "' " +
                                (ttm ? "does not take TTM parameters" : "requires TTM parameters"));
  }
  const std::size_t expected = strategy == Strategy::ref_concat ? 4 : 2;
  if (cascade.in_channels != expected) {
    throw std::invalid_argument("strategy '" + to_string(strategy) + "' needs a " + std::to_string(expected) +
                                "-channel backbone input");
  }
  if (ttm) {
    const auto want = strategy == Strategy::ttm_ha_only   ? ttm::AttentionMode::hard_only
                      : strategy == Strategy::ttm_sa_only ? ttm::AttentionMode::soft_only
                                                          : ttm::AttentionMode::full;
    if (ttm->mode != want) throw std::invalid_argument("TTM attention mode does not match strategy");
    if (ttm->in_channels != 2) throw std::invalid_argument("TTM consumes 2-channel complex images");
  }
}

nlohmann::json StrategyConfig::to_json() const {
  nlohmann::json j{{"strategy", to_string(strategy)}, {"cascade", cascade.to_json()}, {"seed", seed}};
  j["ttm"] = ttm ? ttm->to_json() : nlohmann::json(nullptr);
  return j;
}

StrategyConfig StrategyConfig::from_json(const nlohmann::json& j) {
  StrategyConfig cfg;
  cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  cfg.cascade = CascadeConfig::from_json(j.at("cascade"));
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("ttm") && !j.at("ttm").is_null()) cfg.ttm = ttm::TtmConfig::from_json(j.at("ttm"));
  cfg.validate();
  return cfg;
}

template <typename T>
ad::ParameterSet<T> init_strategy_params(const StrategyConfig& cfg) {
  cfg.validate();
  ad::ParameterSet<T> params;
  if (cfg.ttm) ttm::init_params(params, *cfg.ttm, cfg.seed, "ttm");
  init_params(params, cfg.cascade, cfg.seed, "backbone");
  return params;
}

template <typename T>
Model<T>::Model(StrategyConfig cfg) : cfg_(std::move(cfg)), params_(init_strategy_params<T>(cfg_)) {}

template <typename T>
Model<T>::Model(StrategyConfig cfg, ad::ParameterSet<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  const auto layout = init_strategy_params<T>(cfg_);
  if (layout.names() != params_.names()) {
    throw std::invalid_argument("parameter names do not match strategy '" + to_string(cfg_.strategy) + "'");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout.at(i).shape() != params_.at(i).shape()) {
      throw ShapeError("parameter '" + layout.names()[i] + "' has shape " + shape_str(params_.at(i).shape()) +
                       ", expected " + shape_str(layout.at(i).shape()));
    }
  }
}

template <typename T>
Prediction<T> Model<T>::forward(ad::Graph<T>& g, const ad::BoundParameters& p, const data::Sample<T>& sample) const {
  if (uses_reference(cfg_.strategy) && !sample.has_reference()) {
    throw std::invalid_argument("strategy '" + to_string(cfg_.strategy) + "' requires reference images (sample '" +
                                sample.id + "')");
  }
  Prediction<T> out;
  const ad::Var x = g.constant(sample.x.tensor());
  ad::Var input = x;
  switch (cfg_.strategy) {
    case Strategy::original:
      break;
    case Strategy::ref_concat:
      input = ad::concat_channels(g, x, g.constant(sample.y_ref->tensor()));
      break;
    case Strategy::ttm:
    case Strategy::ttm_ha_only:
    case Strategy::ttm_sa_only: {
      auto t = ttm::ttm_forward(g, p, x, g.constant(sample.x_ref->tensor()), g.constant(sample.y_ref->tensor()),
                                *cfg_.ttm, "ttm");
      out.synthesized = t.synthesized;
      out.attention = std::move(t.attention);
      input = t.synthesized;
      break;
    }
  }
  out.output = cascade_forward(g, p, input, sample.measured, sample.mask, cfg_.cascade, "backbone");
  return out;
}

template <typename T>
Reconstruction<T> Model<T>::reconstruct(const data::Sample<T>& sample) const {
  ad::Graph<T> g;
  const auto p = ad::bind(g, params_, nullptr);
  Prediction<T> pred = forward(g, p, sample);
  Reconstruction<T> rec{kspace::ComplexImage<T>(g.value(pred.output)), std::nullopt, std::move(pred.attention)};
  if (pred.synthesized.valid()) rec.synthesized = kspace::ComplexImage<T>(g.value(pred.synthesized));
  return rec;
}

template ad::ParameterSet<float> init_strategy_params(const StrategyConfig&);
template ad::ParameterSet<double> init_strategy_params(const StrategyConfig&);
template class Model<float>;
template class Model<double>;

}  // namespace ttmr::backbone
