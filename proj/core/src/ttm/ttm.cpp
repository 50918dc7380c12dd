#include "ttmr/ttm/ttm.hpp"

#include <stdexcept>

namespace ttmr::ttm {

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::full: return "full";
    case AttentionMode::hard_only: return "hard_only";
    case AttentionMode::soft_only: return "soft_only";
  }
  return "full";
}

AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "full") return AttentionMode::full;
  if (s == "hard_only") return AttentionMode::hard_only;
  if (s == "soft_only") return AttentionMode::soft_only;
  throw std::invalid_argument("unknown attention mode '" + s + "'");
}

nlohmann::json TtmConfig::to_json() const {
  return {{"in_channels", in_channels}, {"features", features}, {"blocks", blocks},
          {"patch", patch},             {"stride", stride},     {"mode", to_string(mode)}};
}

TtmConfig TtmConfig::from_json(const nlohmann::json& j) {
  TtmConfig c;
  c.in_channels = j.value("in_channels", c.in_channels);
  c.features = j.value("features", c.features);
  c.blocks = j.value("blocks", c.blocks);
  c.patch = j.value("patch", c.patch);
  c.stride = j.value("stride", c.stride);
  c.mode = attention_mode_from_string(j.value("mode", std::string("full")));
  return c;
}

template <typename T>
void init_params(ad::ParameterSet<T>& params, const TtmConfig& cfg, std::uint64_t seed, const std::string& prefix) {
  if (cfg.blocks == 0) throw std::invalid_argument("ttm: feature extractor needs at least one block");
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    ad::add_conv(params, prefix + ".fe." + std::to_string(b), cfg.features, b == 0 ? cfg.in_channels : cfg.features, 3,
                 seed);
  }
  ad::add_conv(params, prefix + ".fuse", cfg.features, 2 * cfg.features, 3, seed);
  ad::add_conv(params, prefix + ".out", cfg.in_channels, cfg.features, 3, seed);
}

template <typename T>
ad::Var extract_features(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var image, const TtmConfig& cfg,
                         const std::string& prefix) {
  ad::Var h = image;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string name = prefix + ".fe." + std::to_string(b);
    h = ad::relu(g, ad::conv2d(g, h, p[name + ".weight"], p[name + ".bias"], 1, 1));
  }
  return h;
}

template <typename T>
ad::Var relevance(ad::Graph<T>& g, ad::Var query, ad::Var key, std::size_t patch, std::size_t stride) {
  if (g.value(query).dim(0) != g.value(key).dim(0)) throw ShapeError("relevance: Q and K channel counts differ");
  return ad::cosine_similarity(g, ad::unfold(g, query, patch, stride), ad::unfold(g, key, patch, stride));
}

template <typename T>
std::vector<std::int32_t> hard_attention(const Tensor<T>& relevance) {
  return ad::kernels::row_argmax(relevance);
}

template <typename T>
ad::Var soft_attention(ad::Graph<T>& g, ad::Var relevance) {
  return ad::row_max(g, relevance);
}

template <typename T>
ad::Var transfer(ad::Graph<T>& g, ad::Var value, const std::vector<std::int32_t>& hard, std::size_t patch,
                 std::size_t stride) {
  const Tensor<T>& v = g.value(value);
  if (v.rank() != 3) throw ShapeError("transfer: V must be C x H x W");
  const ad::PatchGeometry geo{v.dim(0), v.dim(1), v.dim(2), patch, stride};
  geo.validate();
  if (hard.size() != geo.count()) {
    throw ShapeError("transfer: " + std::to_string(hard.size()) + " hard indices for a grid of " +
                     std::to_string(geo.count()) + " patches");
  }
  return ad::fold(g, ad::gather_rows(g, ad::unfold(g, value, patch, stride), hard), geo);
}

template <typename T>
ad::Var confidence_map(ad::Graph<T>& g, ad::Var soft, std::size_t height, std::size_t width, std::size_t patch,
                       std::size_t stride) {
  const ad::PatchGeometry geo{1, height, width, patch, stride};
  geo.validate();
  if (g.value(soft).size() != geo.count()) throw ShapeError("confidence_map: score count does not match patch grid");
  return ad::fold(g, ad::broadcast_columns(g, soft, patch * patch), geo);
}

template <typename T>
ad::Var synthesize(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var features, ad::Var transferred, ad::Var gate,
                   const std::string& prefix) {
  if (g.value(features).shape() != g.value(transferred).shape()) {
    throw ShapeError("synthesize: F " + shape_str(g.value(features).shape()) + " and T " +
                     shape_str(g.value(transferred).shape()) + " differ");
  }
  ad::Var fused = ad::conv2d(g, ad::concat_channels(g, features, transferred), p[prefix + ".fuse.weight"],
                             p[prefix + ".fuse.bias"], 1, 1);
  if (gate.valid()) fused = ad::mul_channel_broadcast(g, fused, gate);
  return ad::add(g, features, fused);
}

template <typename T>
TtmOutput<T> ttm_forward(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var x, ad::Var x_ref, ad::Var y_ref,
                         const TtmConfig& cfg, const std::string& prefix) {
  const Shape& shape = g.value(x).shape();
  if (g.value(x_ref).shape() != shape || g.value(y_ref).shape() != shape) {
    throw ShapeError("ttm_forward: x, x_ref and y_ref must share one shape, got " + shape_str(shape) + ", " +
                     shape_str(g.value(x_ref).shape()) + ", " + shape_str(g.value(y_ref).shape()));
  }
  const std::size_t h = shape.at(1), w = shape.at(2);

  const ad::Var q = extract_features(g, p, x, cfg, prefix);
  const ad::Var k = extract_features(g, p, x_ref, cfg, prefix);
  const ad::Var r = relevance(g, q, k, cfg.patch, cfg.stride);

  TtmOutput<T> out;
  AttentionResult<T>& attn = out.attention;
  attn.relevance = g.value(r);
  attn.hard = hard_attention(attn.relevance);
  const ad::PatchGeometry grid{1, h, w, cfg.patch, cfg.stride};
  attn.grid_rows = grid.grid_rows();
  attn.grid_cols = grid.grid_cols();

  const ad::Var s = soft_attention(g, r);
  const ad::Var s_map = confidence_map(g, s, h, w, cfg.patch, cfg.stride);
  attn.soft = g.value(s);
  // The reported map is the gate actually applied, so the hard-only ablation shows ones.
  attn.confidence = cfg.mode == AttentionMode::hard_only ? Tensor<T>({1, h, w}, T{1}) : g.value(s_map);

  ad::Var t;
  if (cfg.mode == AttentionMode::soft_only) {
    t = g.constant(Tensor<T>(g.value(q).shape()));
  } else {
    const ad::Var v = extract_features(g, p, y_ref, cfg, prefix);
    t = transfer(g, v, attn.hard, cfg.patch, cfg.stride);
  }
  const ad::Var gate = cfg.mode == AttentionMode::hard_only ? ad::Var{} : s_map;
  const ad::Var z = synthesize(g, p, q, t, gate, prefix);
  out.synthesized = ad::conv2d(g, z, p[prefix + ".out.weight"], p[prefix + ".out.bias"], 1, 1);
  return out;
}

#define TTMR_INSTANTIATE_TTM(T)                                                                                   \
  template void init_params(ad::ParameterSet<T>&, const TtmConfig&, std::uint64_t, const std::string&);           \
  template ad::Var extract_features(ad::Graph<T>&, const ad::BoundParameters&, ad::Var, const TtmConfig&,        \
                                    const std::string&);                                                         \
  template ad::Var relevance(ad::Graph<T>&, ad::Var, ad::Var, std::size_t, std::size_t);                          \
  template std::vector<std::int32_t> hard_attention(const Tensor<T>&);                                            \
  template ad::Var soft_attention(ad::Graph<T>&, ad::Var);                                                        \
  template ad::Var transfer(ad::Graph<T>&, ad::Var, const std::vector<std::int32_t>&, std::size_t, std::size_t); \
  template ad::Var confidence_map(ad::Graph<T>&, ad::Var, std::size_t, std::size_t, std::size_t, std::size_t);   \
  template ad::Var synthesize(ad::Graph<T>&, const ad::BoundParameters&, ad::Var, ad::Var, ad::Var,              \
                              const std::string&);                                                               \
  template TtmOutput<T> ttm_forward(ad::Graph<T>&, const ad::BoundParameters&, ad::Var, ad::Var, ad::Var,        \
                                    const TtmConfig&, const std::string&);

TTMR_INSTANTIATE_TTM(float)
TTMR_INSTANTIATE_TTM(double)

#undef TTMR_INSTANTIATE_TTM

}  // namespace ttmr::ttm
