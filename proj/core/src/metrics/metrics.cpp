#include "ttmr/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ttmr::metrics {

namespace {

void check_pair(const Tensor<double>& a, const Tensor<double>& b, const char* what) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": expected two H x W images of equal shape, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
}

double gt_range(const Tensor<double>& gt) {
  const double r = *std::max_element(gt.values().begin(), gt.values().end());
  if (!(r >= 1e-8)) throw std::invalid_argument("metrics: ground-truth maximum must be >= 1e-8");
  return r;
}

std::vector<double> gaussian_window(const SsimOptions& opt) {
  std::vector<double> w1(opt.window);
  const double c = static_cast<double>(opt.window - 1) / 2.0;
  double s = 0.0;
  for (std::size_t i = 0; i < opt.window; ++i) {
    const double d = static_cast<double>(i) - c;
    s += w1[i] = std::exp(-d * d / (2.0 * opt.sigma * opt.sigma));
  }
  for (auto& v : w1) v /= s;
  std::vector<double> w(opt.window * opt.window);
  for (std::size_t i = 0; i < opt.window; ++i)
    for (std::size_t j = 0; j < opt.window; ++j) w[i * opt.window + j] = w1[i] * w1[j];
  return w;
}

}  // namespace

double psnr(const Tensor<double>& pred, const Tensor<double>& gt, double data_range) {
  check_pair(pred, gt, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) se += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  const double mse = se / static_cast<double>(gt.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(data_range * data_range / mse);
}

double psnr(const Tensor<double>& pred, const Tensor<double>& gt) {
  check_pair(pred, gt, "psnr");
  return psnr(pred, gt, gt_range(gt));
}

double ssim(const Tensor<double>& pred, const Tensor<double>& gt, double data_range, const SsimOptions& opt) {
  check_pair(pred, gt, "ssim");
  const std::size_t h = gt.dim(0), w = gt.dim(1), k = opt.window;
  if (h < k || w < k) throw ShapeError("ssim: image smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");
  const auto win = gaussian_window(opt);
  const double c1 = (opt.k1 * data_range) * (opt.k1 * data_range);
  const double c2 = (opt.k2 * data_range) * (opt.k2 * data_range);
  double total = 0.0;
  for (std::size_t y = 0; y + k <= h; ++y) {
    for (std::size_t x = 0; x + k <= w; ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const double wt = win[i * k + j];
          const double a = pred.at(y + i, x + j), b = gt.at(y + i, x + j);
          mx += wt * a;
          my += wt * b;
          sxx += wt * a * a;
          syy += wt * b * b;
          sxy += wt * a * b;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / static_cast<double>((h - k + 1) * (w - k + 1));
}

double ssim(const Tensor<double>& pred, const Tensor<double>& gt, const SsimOptions& opt) {
  check_pair(pred, gt, "ssim");
  return ssim(pred, gt, gt_range(gt), opt);
}

}  // namespace ttmr::metrics
