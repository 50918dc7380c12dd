#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ttmr/kspace/complex_image.hpp"

namespace ttmr::data {

struct Ellipse {
  double cx = 0, cy = 0;  // centre in [-1, 1] normalised coordinates
  double a = 0, b = 0;    // semi-axes (x, y)
  double theta = 0;       // rotation, radians
  double intensity = 0;

  bool contains(double u, double v) const;
};

struct AnatomyDescriptor {
  std::vector<Ellipse> ellipses;  // painted in order, later ellipses overwrite earlier ones
  std::uint64_t texture_seed = 0;
  double texture_amplitude = 0;
  double texture_low = 0, texture_high = 0;  // radial pass band, cycles per field of view
  std::array<double, 6> phase{};             // 1, u, v, uv, u^2, v^2 coefficients
};

struct Phantom {
  std::uint64_t id = 0;
  kspace::ComplexImage<float> image;  // ground truth y
  AnatomyDescriptor anatomy;
};

/// Brain-like phantom: nested head / brain / white-matter / ventricle ellipses plus optional lesions,
/// a band-limited multiplicative texture inside the brain and a smooth polynomial phase. Magnitude
/// is clipped to [0, 1]. Deterministic in (id, size, seed).
Phantom generate_phantom(std::uint64_t id, std::size_t size, std::uint64_t seed);

/// Phantoms with ids 0..count-1.
std::vector<Phantom> generate_phantoms(std::size_t count, std::size_t size, std::uint64_t seed);

}  // namespace ttmr::data
