#pragma once

#include <limits>

#include "ttmr/tensor.hpp"

namespace ttmr::metrics {

/// Reported for a zero mean-squared error.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(range^2 / MSE) on H x W magnitude images, range = max(gt).
double psnr(const Tensor<double>& pred, const Tensor<double>& gt);
double psnr(const Tensor<double>& pred, const Tensor<double>& gt, double data_range);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean local SSIM with a Gaussian window over fully-contained windows only; range = max(gt).
double ssim(const Tensor<double>& pred, const Tensor<double>& gt, const SsimOptions& opt = {});
double ssim(const Tensor<double>& pred, const Tensor<double>& gt, double data_range, const SsimOptions& opt = {});

}  // namespace ttmr::metrics
