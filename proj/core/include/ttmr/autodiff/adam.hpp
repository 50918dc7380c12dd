#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ttmr/autodiff/parameters.hpp"

namespace ttmr::ad {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParameterSet<T>& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0};
  }
};

/// One bias-corrected Adam update; increments `state.step`.
template <typename T>
void adam_step(ParameterSet<T>& params, std::span<const Tensor<T>> grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace ttmr::ad
