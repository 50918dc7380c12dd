#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "ttmr/autodiff/graph.hpp"
#include "ttmr/autodiff/parameters.hpp"
#include "ttmr/kspace/complex_image.hpp"
#include "ttmr/kspace/mask.hpp"

namespace ttmr::backbone {

/// Cascaded CNN with interleaved data consistency.
struct CascadeConfig {
  std::size_t n_cascades = 3;
  std::size_t hidden = 48;
  std::size_t layers = 4;       // convs per cascade: in -> hidden -> ... -> hidden -> 2
  std::size_t in_channels = 2;  // first cascade only; later cascades see 2 channels

  nlohmann::json to_json() const;
  static CascadeConfig from_json(const nlohmann::json& j);
};

/// Parameters `<prefix>.c<i>.conv<j>` for cascade i and layer j.
template <typename T>
void init_params(ad::ParameterSet<T>& params, const CascadeConfig& cfg, std::uint64_t seed,
                 const std::string& prefix = "backbone");

/// Each cascade: out = DC(convs(in) + in[0:2], measured, mask).
template <typename T>
ad::Var cascade_forward(ad::Graph<T>& g, const ad::BoundParameters& p, ad::Var input,
                        const kspace::KSpace<T>& measured, const kspace::SamplingMask& mask, const CascadeConfig& cfg,
                        const std::string& prefix = "backbone");

}  // namespace ttmr::backbone
