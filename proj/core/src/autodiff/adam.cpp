#include "ttmr/autodiff/adam.hpp"

#include <cmath>

namespace ttmr::ad {

template <typename T>
void adam_step(ParameterSet<T>& params, std::span<const Tensor<T>> grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Shape& s = params.at(i).shape();
    if (grads[i].shape() != s || state.first_moment[i].shape() != s || state.second_moment[i].shape() != s) {
      throw ShapeError("adam_step: shape mismatch for parameter '" + params.names()[i] + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T>& p = params.at(i);
    Tensor<T>& m = state.first_moment[i];
    Tensor<T>& v = state.second_moment[i];
    const Tensor<T>& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - lr * (mk / bc1) / (std::sqrt(vk / bc2) + cfg.eps));
    }
  }
}

template void adam_step(ParameterSet<float>&, std::span<const Tensor<float>>, AdamState<float>&, double,
                        const AdamConfig&);
template void adam_step(ParameterSet<double>&, std::span<const Tensor<double>>, AdamState<double>&, double,
                        const AdamConfig&);

}  // namespace ttmr::ad
