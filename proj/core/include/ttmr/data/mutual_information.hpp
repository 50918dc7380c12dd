#pragma once

#include <cstddef>
#include <span>

#include "ttmr/tensor.hpp"

namespace ttmr::data {

struct MutualInformation {
  double bits = 0.0;
  bool degenerate = false;  // an input was constant; bits forced to 0
};

/// Plug-in mutual information (base 2) from a bins x bins joint histogram. Each image is rescaled
/// to [0, 1] by its own maximum before binning. The result is bitwise symmetric in (a, b).
MutualInformation mutual_information(const Tensor<double>& a, const Tensor<double>& b, std::size_t bins = 64);

/// Index of the pool image with the highest mutual information against `query`; lowest index wins ties.
std::size_t match_reference(const Tensor<double>& query, std::span<const Tensor<double>> pool, std::size_t bins = 64);

}  // namespace ttmr::data
