#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttmr/autodiff/graph.hpp"
#include "ttmr/autodiff/ops.hpp"
#include "ttmr/autodiff/parameters.hpp"

namespace ttmr::ttm {

/// Which attention paths feed the synthesis.
enum class AttentionMode {
  full,       // Z = F + Conv(F ++ T) * S
  hard_only,  // soft gate removed: S == 1
  soft_only,  // transfer removed: T == 0, gate kept
};

std::string to_string(AttentionMode mode);
AttentionMode attention_mode_from_string(const std::string& s);

struct TtmConfig {
  std::size_t in_channels = 2;
  std::size_t features = 64;
  std::size_t blocks = 4;
  std::size_t patch = 16;
  std::size_t stride = 8;
  AttentionMode mode = AttentionMode::full;

  nlohmann::json to_json() const;
  static TtmConfig from_json(const nlohmann::json& j);
};

template <typename T>
struct AttentionResult {
  Tensor<T> relevance;              // N_q x N_k
  std::vector<std::int32_t> hard;   // h_i, index into the value patch grid
  Tensor<T> soft;                   // s_i = max_j r_ij
  Tensor<T> confidence;             // 1 x H x W applied gate: folded soft map, ones when hard-only
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
};

/// Parameters `<prefix>.fe.<i>`, `<prefix>.fuse`, `<prefix>.out` (conv weight/bias pairs).
template <typename T>
void init_params(ad::ParameterSet<T>& params, const TtmConfig& cfg, std::uint64_t seed,
                 const std::string& prefix = "ttm");

/// Shared feature extractor: `blocks` x (3x3 conv, stride 1, pad 1, ReLU). C x H x W -> features x H x W.
template <typename T>
ad::Var extract_features(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var image, const TtmConfig& cfg,
                         const std::string& prefix = "ttm");

/// Normalised inner product between every query patch and every key patch.
template <typename T>
ad::Var relevance(ad::Graph<T>& g, ad::Var query, ad::Var key, std::size_t patch, std::size_t stride);

/// h_i = argmax_j r_ij, lowest index on ties.
template <typename T>
std::vector<std::int32_t> hard_attention(const Tensor<T>& relevance);

/// s_i = max_j r_ij.
template <typename T>
ad::Var soft_attention(ad::Graph<T>& g, ad::Var relevance);

/// T = fold(gather_rows(unfold(V), h)).
template <typename T>
ad::Var transfer(ad::Graph<T>& g, ad::Var value, const std::vector<std::int32_t>& hard, std::size_t patch,
                 std::size_t stride);

/// Expands per-patch scores to constant patch blocks and folds them into a 1 x H x W map.
template <typename T>
ad::Var confidence_map(ad::Graph<T>& g, ad::Var soft, std::size_t height, std::size_t width, std::size_t patch,
                       std::size_t stride);

/// Z = F + Conv(F ++ T) * gate, with `gate` a 1 x H x W map broadcast over channels. An invalid
/// gate variable means no gating (gate == 1).
template <typename T>
ad::Var synthesize(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var features, ad::Var transferred, ad::Var gate,
                   const std::string& prefix = "ttm");

template <typename T>
struct TtmOutput {
  ad::Var synthesized;  // x', 2 x H x W
  AttentionResult<T> attention;
};

/// Full module: Q = FE(x), K = FE(x_ref), V = FE(y_ref), F = Q, then relevance, hard/soft attention,
/// transfer, synthesis and the output conv.
template <typename T>
TtmOutput<T> ttm_forward(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var x, ad::Var x_ref, ad::Var y_ref,
                         const TtmConfig& cfg, const std::string& prefix = "ttm");

}  // namespace ttmr::ttm
