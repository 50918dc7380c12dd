#include "ttmr/data/mutual_information.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ttmr::data {

namespace {

constexpr double kMaxFloor = 1e-8;

std::vector<std::size_t> bin_indices(const Tensor<double>& img, std::size_t bins) {
  const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
  const double scale = std::max(*hi, kMaxFloor);
  std::vector<std::size_t> idx(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img[i] / scale, 0.0, 1.0);
    idx[i] = std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
  }
  return idx;
}

bool is_constant(const Tensor<double>& img) {
  const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
  return *hi - *lo == 0.0 || *hi < kMaxFloor;
}

}  // namespace

MutualInformation mutual_information(const Tensor<double>& a, const Tensor<double>& b, std::size_t bins) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mutual_information: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
  if (bins < 2) throw std::invalid_argument("mutual_information: need at least 2 bins");
  if (is_constant(a) || is_constant(b)) return {0.0, true};

  const auto ia = bin_indices(a, bins);
  const auto ib = bin_indices(b, bins);
  std::vector<double> joint(bins * bins, 0.0), pa(bins, 0.0), pb(bins, 0.0);
  for (std::size_t i = 0; i < ia.size(); ++i) {
    joint[ia[i] * bins + ib[i]] += 1.0;
    pa[ia[i]] += 1.0;
    pb[ib[i]] += 1.0;
  }
  const double n = static_cast<double>(ia.size());
  auto term = [&](std::size_t i, std::size_t j) {
    const double c = joint[i * bins + j];
    if (c == 0.0) return 0.0;
    return (c / n) * std::log2(c * n / (pa[i] * pb[j]));
  };
  // Diagonal first, then mirrored pairs: transposing the histogram leaves the summation order intact.
  double mi = 0.0;
  for (std::size_t i = 0; i < bins; ++i) mi += term(i, i);
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = i + 1; j < bins; ++j) mi += term(i, j) + term(j, i);
  return {std::max(mi, 0.0), false};
}

std::size_t match_reference(const Tensor<double>& query, std::span<const Tensor<double>> pool, std::size_t bins) {
  if (pool.empty()) throw std::invalid_argument("match_reference: reference pool is empty");
  std::size_t best = 0;
  double best_mi = -1.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double mi = mutual_information(query, pool[i], bins).bits;
    if (mi > best_mi) {
      best_mi = mi;
      best = i;
    }
  }
  return best;
}

}  // namespace ttmr::data
