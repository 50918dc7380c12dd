#include "ttmr/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "ttmr/kspace/fft.hpp"
#include "ttmr/util/rng.hpp"

namespace ttmr::data {

bool Ellipse::contains(double u, double v) const {
  const double du = u - cx, dv = v - cy;
  const double c = std::cos(theta), s = std::sin(theta);
  const double xr = c * du + s * dv;
  const double yr = -s * du + c * dv;
  return (xr * xr) / (a * a) + (yr * yr) / (b * b) <= 1.0;
}

namespace {

AnatomyDescriptor draw_anatomy(std::mt19937_64& rng) {
  auto uni = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  AnatomyDescriptor d;
  const double cx = uni(-0.04, 0.04), cy = uni(-0.04, 0.04);
  const double theta = uni(-0.15, 0.15);
  const double ha = uni(0.72, 0.84), hb = uni(0.86, 0.95);
  d.ellipses.push_back({cx, cy, ha, hb, theta, uni(0.70, 0.90)});  // scalp/skull
  const double brain_scale = uni(0.85, 0.91);
  const double gray = uni(0.40, 0.55);
  d.ellipses.push_back({cx, cy, ha * brain_scale, hb * brain_scale, theta, gray});
  const double wm_scale = uni(0.62, 0.74);
  d.ellipses.push_back({cx + uni(-0.02, 0.02), cy + uni(-0.02, 0.02), ha * brain_scale * wm_scale,
                        hb * brain_scale * wm_scale, theta + uni(-0.1, 0.1), gray - uni(0.08, 0.16)});
  const double vx = uni(0.07, 0.13), vy = cy + uni(-0.10, 0.04);
  const double va = uni(0.05, 0.09), vb = uni(0.14, 0.24), tilt = uni(0.1, 0.35);
  const double csf = uni(0.85, 1.0);
  d.ellipses.push_back({cx - vx, vy, va, vb, theta + tilt, csf});
  d.ellipses.push_back({cx + vx, vy, va * uni(0.85, 1.15), vb * uni(0.85, 1.15), theta - tilt, csf});
  const int lesions = std::uniform_int_distribution<int>(0, 2)(rng);
  for (int i = 0; i < lesions; ++i) {
    const double r = uni(0.2, 0.55) * ha * brain_scale, ang = uni(0.0, 2.0 * std::numbers::pi);
    d.ellipses.push_back({cx + r * std::cos(ang), cy + r * std::sin(ang), uni(0.04, 0.10), uni(0.04, 0.10),
                          uni(0.0, std::numbers::pi), uni(0.6, 0.9)});
  }
  d.texture_seed = rng();
  d.texture_amplitude = uni(0.15, 0.25);
  d.texture_low = uni(5.0, 8.0);
  d.texture_high = uni(16.0, 24.0);
  d.phase = {uni(-std::numbers::pi, std::numbers::pi), uni(-0.6, 0.6), uni(-0.6, 0.6),
             uni(-0.3, 0.3),                           uni(-0.3, 0.3), uni(-0.3, 0.3)};
  return d;
}

// Zero-mean, unit-variance Gaussian noise restricted to a radial frequency band.
std::vector<double> band_limited_noise(std::size_t size, std::uint64_t seed, double low, double high) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  kspace::ComplexImage<double> white(size, size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) white.re(y, x) = n01(rng);
  kspace::KSpace<double> k = kspace::fft2c(white);
  const double c = static_cast<double>(size / 2);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double r = std::hypot(static_cast<double>(y) - c, static_cast<double>(x) - c);
      if (r < low || r > high) k.re(y, x) = k.im(y, x) = 0.0;
    }
  }
  const auto filtered = kspace::ifft2c(k);
  std::vector<double> out(size * size);
  double mean = 0.0;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) mean += out[y * size + x] = filtered.re(y, x);
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (auto& v : out) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(out.size()));
  for (auto& v : out) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return out;
}

}  // namespace

Phantom generate_phantom(std::uint64_t id, std::size_t size, std::uint64_t seed) {
  if (size < 32) throw std::invalid_argument("generate_phantom: size must be >= 32");
  std::mt19937_64 rng(derive_seed(seed, id));
  Phantom ph{id, kspace::ComplexImage<float>(size, size), draw_anatomy(rng)};
  const AnatomyDescriptor& d = ph.anatomy;
  const auto texture = band_limited_noise(size, d.texture_seed, d.texture_low, d.texture_high);
  const double half = static_cast<double>(size) / 2.0;
  const Ellipse& brain = d.ellipses[1];
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (static_cast<double>(x) + 0.5 - half) / half;
      const double v = (static_cast<double>(y) + 0.5 - half) / half;
      double mag = 0.0;
      for (const auto& e : d.ellipses)
        if (e.contains(u, v)) mag = e.intensity;
      if (brain.contains(u, v)) mag *= 1.0 + d.texture_amplitude * texture[y * size + x];
      mag = std::clamp(mag, 0.0, 1.0);
      const auto& p = d.phase;
      const double phi = p[0] + p[1] * u + p[2] * v + p[3] * u * v + p[4] * u * u + p[5] * v * v;
      float re = static_cast<float>(mag * std::cos(phi));
      float im = static_cast<float>(mag * std::sin(phi));
      // float rounding of a unit-modulus value may land just above 1
      while (std::hypot(static_cast<double>(re), static_cast<double>(im)) > 1.0) {
        re = std::nextafter(re, 0.0f);
        im = std::nextafter(im, 0.0f);
      }
      ph.image.re(y, x) = re;
      ph.image.im(y, x) = im;
    }
  }
  return ph;
}

std::vector<Phantom> generate_phantoms(std::size_t count, std::size_t size, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("generate_phantoms: count must be >= 1");
  std::vector<Phantom> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_phantom(i, size, seed));
  return out;
}

}  // namespace ttmr::data
