#include "pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ttmr::tools {

void write_pgm(const std::filesystem::path& path, const Tensor<double>& image) {
  if (image.rank() != 2) throw ShapeError("PGM preview needs an H x W image, got " + shape_str(image.shape()));
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  double peak = 0.0;
  for (double v : image.values()) peak = std::max(peak, v);
  const std::size_t h = image.dim(0), w = image.dim(1);
  os << "P2\n" << w << ' ' << h << "\n255\n";
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = peak > 0.0 ? std::clamp(image.at(y, x) / peak, 0.0, 1.0) : 0.0;
      os << static_cast<int>(std::lround(v * 255.0)) << (x + 1 == w ? '\n' : ' ');
    }
  }
}

}  // namespace ttmr::tools
