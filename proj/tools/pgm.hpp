#pragma once

#include <filesystem>

#include "ttmr/tensor.hpp"

namespace ttmr::tools {

/// Plain (P2) 8-bit PGM, scaled so the image maximum maps to 255. An all-zero image stays black.
void write_pgm(const std::filesystem::path& path, const Tensor<double>& image);

}  // namespace ttmr::tools
