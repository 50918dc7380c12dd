#pragma once

#include "ttmr/kspace/complex_image.hpp"

namespace ttmr::kspace {

/// Orthonormal centred 2-D DFT: fftshift(fft2(ifftshift(img))) / sqrt(H*W). Evaluated in double.
template <typename T>
KSpace<T> fft2c(const ComplexImage<T>& img);

/// Exact inverse of fft2c.
template <typename T>
ComplexImage<T> ifft2c(const KSpace<T>& k);

}  // namespace ttmr::kspace
