#include "ttmr/backbone/cascade.hpp"

#include <stdexcept>

#include "ttmr/autodiff/ops.hpp"
#include "ttmr/kspace/acquisition.hpp"

namespace ttmr::backbone {

nlohmann::json CascadeConfig::to_json() const {
  return {{"n_cascades", n_cascades}, {"hidden", hidden}, {"layers", layers}, {"in_channels", in_channels}};
}

CascadeConfig CascadeConfig::from_json(const nlohmann::json& j) {
  CascadeConfig c;
  c.n_cascades = j.value("n_cascades", c.n_cascades);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.in_channels = j.value("in_channels", c.in_channels);
  return c;
}

template <typename T>
void init_params(ad::ParameterSet<T>& params, const CascadeConfig& cfg, std::uint64_t seed, const std::string& prefix) {
  if (cfg.n_cascades == 0 || cfg.layers < 2) throw std::invalid_argument("cascade: need >= 1 cascade and >= 2 layers");
  if (cfg.in_channels < 2) throw std::invalid_argument("cascade: input needs at least the 2 image channels");
  for (std::size_t c = 0; c < cfg.n_cascades; ++c) {
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::size_t c_in = l == 0 ? (c == 0 ? cfg.in_channels : 2) : cfg.hidden;
      const std::size_t c_out = l + 1 == cfg.layers ? 2 : cfg.hidden;
      ad::add_conv(params, prefix + ".c" + std::to_string(c) + ".conv" + std::to_string(l), c_out, c_in, 3, seed);
    }
  }
}

template <typename T>
ad::Var cascade_forward(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var input,
                        const kspace::KSpace<T>& measured, const kspace::SamplingMask& mask, const CascadeConfig& cfg,
                        const std::string& prefix) {
  const Tensor<T>& in = g.value(input);
  if (in.rank() != 3 || in.dim(0) != cfg.in_channels) {
    throw ShapeError("cascade_forward: expected " + std::to_string(cfg.in_channels) + " x H x W input, got " +
                     shape_str(in.shape()));
  }
  if (in.dim(1) != measured.height() || in.dim(2) != measured.width()) {
    throw ShapeError("cascade_forward: input " + shape_str(in.shape()) + " does not match k-space " +
                     std::to_string(measured.height()) + "x" + std::to_string(measured.width()));
  }
  ad::Var current = input;
  for (std::size_t c = 0; c < cfg.n_cascades; ++c) {
    ad::Var h = current;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string name = prefix + ".c" + std::to_string(c) + ".conv" + std::to_string(l);
      h = ad::conv2d(g, h, p[name + ".weight"], p[name + ".bias"], 1, 1);
      if (l + 1 < cfg.layers) h = ad::relu(g, h);
    }
    const ad::Var residual = g.value(current).dim(0) == 2 ? current : ad::slice_channels(g, current, 0, 2);
    current = kspace::data_consistency(g, ad::add(g, h, residual), measured, mask);
  }
  return current;
}

template void init_params(ad::ParameterSet<float>&, const CascadeConfig&, std::uint64_t, const std::string&);
template void init_params(ad::ParameterSet<double>&, const CascadeConfig&, std::uint64_t, const std::string&);
template ad::Var cascade_forward(ad::Graph<float>&, const ad::BoundParameters&, ad::Var, const kspace::KSpace<float>&,
                                 const kspace::SamplingMask&, const CascadeConfig&, const std::string&);
template ad::Var cascade_forward(ad::Graph<double>&, const ad::BoundParameters&, ad::Var, const kspace::KSpace<double>&,
                                 const kspace::SamplingMask&, const CascadeConfig&, const std::string&);

}  // namespace ttmr::backbone
