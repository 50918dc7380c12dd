#include "ttmr/kspace/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace ttmr::kspace {

SamplingMask::SamplingMask(std::vector<std::uint8_t> columns, double acceleration_factor, double center_fraction,
                           std::uint64_t seed)
    : columns_(std::move(columns)),
      acceleration_factor_(acceleration_factor),
      center_fraction_(center_fraction),
      seed_(seed) {
  if (columns_.empty()) throw std::invalid_argument("sampling mask must have at least one column");
  for (auto& c : columns_) c = c ? 1 : 0;
}

SamplingMask SamplingMask::full(std::size_t width) {
  return SamplingMask(std::vector<std::uint8_t>(width, 1), 1.0, 1.0, 0);
}

std::vector<std::size_t> SamplingMask::sampled_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i]) out.push_back(i);
  return out;
}

std::size_t SamplingMask::sampled_count() const {
  return static_cast<std::size_t>(std::count(columns_.begin(), columns_.end(), std::uint8_t{1}));
}

nlohmann::json SamplingMask::to_json() const {
  return nlohmann::json{{"width", width()},
                        {"acceleration_factor", acceleration_factor_},
                        {"center_fraction", center_fraction_},
                        {"seed", seed_},
                        {"columns", sampled_columns()}};
}

SamplingMask SamplingMask::from_json(const nlohmann::json& j) {
  const auto width = j.at("width").get<std::size_t>();
  std::vector<std::uint8_t> cols(width, 0);
  for (const auto& c : j.at("columns")) {
    const auto idx = c.get<std::size_t>();
    if (idx >= width) throw std::invalid_argument("mask column " + std::to_string(idx) + " outside width");
    cols[idx] = 1;
  }
  return SamplingMask(std::move(cols), j.at("acceleration_factor").get<double>(),
                      j.at("center_fraction").get<double>(), j.at("seed").get<std::uint64_t>());
}

std::size_t center_band_width(std::size_t width, double center_fraction) {
  return static_cast<std::size_t>(std::lround(center_fraction * static_cast<double>(width)));
}

std::size_t center_band_start(std::size_t width, double center_fraction) {
  return width / 2 - center_band_width(width, center_fraction) / 2;
}

SamplingMask make_mask(std::size_t width, double acceleration_factor, double center_fraction, std::uint64_t seed) {
  if (width < 8) throw std::invalid_argument("make_mask: width must be >= 8");
  if (!(acceleration_factor >= 1.0) || acceleration_factor > static_cast<double>(width)) {
    throw std::invalid_argument("make_mask: acceleration factor must lie in [1, width]");
  }
  if (!(center_fraction > 0.0 && center_fraction < 1.0)) {
    throw std::invalid_argument("make_mask: center fraction must lie in (0, 1)");
  }
  const auto budget = static_cast<std::size_t>(std::lround(static_cast<double>(width) / acceleration_factor));
  const std::size_t band = center_band_width(width, center_fraction);
  if (budget < band) {
    throw std::invalid_argument("make_mask: budget of " + std::to_string(budget) + " columns is smaller than the " +
                                std::to_string(band) + "-column centre band");
  }
  std::vector<std::uint8_t> cols(width, 0);
  const std::size_t start = center_band_start(width, center_fraction);
  for (std::size_t c = start; c < start + band; ++c) cols[c] = 1;

  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < width; ++c)
    if (!cols[c]) candidates.push_back(c);
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (std::size_t i = 0; i < budget - band; ++i) cols[candidates[i]] = 1;
  return SamplingMask(std::move(cols), acceleration_factor, center_fraction, seed);
}

}  // namespace ttmr::kspace
