#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

namespace ttmr::kspace {

/// Binary Cartesian column mask over k-space (1 = phase-encode column acquired).
class SamplingMask {
 public:
  SamplingMask(std::vector<std::uint8_t> columns, double acceleration_factor, double center_fraction,
               std::uint64_t seed);

  /// Every column sampled (acceleration factor 1).
  static SamplingMask full(std::size_t width);

  std::size_t width() const noexcept { return columns_.size(); }
  double acceleration_factor() const noexcept { return acceleration_factor_; }
  double center_fraction() const noexcept { return center_fraction_; }
  std::uint64_t seed() const noexcept { return seed_; }

  bool sampled(std::size_t column) const { return columns_.at(column) != 0; }
  const std::vector<std::uint8_t>& columns() const noexcept { return columns_; }
  std::vector<std::size_t> sampled_columns() const;
  std::size_t sampled_count() const;

  /// {width, acceleration_factor, center_fraction, seed, columns: [sampled indices]}
  nlohmann::json to_json() const;
  static SamplingMask from_json(const nlohmann::json& j);

  friend bool operator==(const SamplingMask&, const SamplingMask&) = default;

 private:
  std::vector<std::uint8_t> columns_;
  double acceleration_factor_;
  double center_fraction_;
  std::uint64_t seed_;
};

/// Width of the always-sampled low-frequency band: round(center_fraction * width).
std::size_t center_band_width(std::size_t width, double center_fraction);

/// First column of the centred band; the band always contains the DC column width/2.
std::size_t center_band_start(std::size_t width, double center_fraction);

/// Draws round(width / acceleration_factor) columns: the centred band plus a uniform draw without
/// replacement from the remaining columns. Deterministic in (width, AF, fraction, seed).
SamplingMask make_mask(std::size_t width, double acceleration_factor, double center_fraction, std::uint64_t seed);

}  // namespace ttmr::kspace
