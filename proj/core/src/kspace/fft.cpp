#include "ttmr/kspace/fft.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <vector>

namespace ttmr::kspace {

namespace {

using cd = std::complex<double>;

// Applies a centred orthonormal 2-D transform in place on an H x W row-major buffer.
void centered_dft(std::vector<cd>& buf, std::size_t h, std::size_t w, bool inverse) {
  // ifftshift: element at (y, x) moves to ((y + h/2) % h ... ) with the floor split; fftshift uses ceil.
  auto shift = [&](std::size_t sy, std::size_t sx) {
    std::vector<cd> tmp(buf.size());
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) tmp[((y + sy) % h) * w + (x + sx) % w] = buf[y * w + x];
    buf.swap(tmp);
  };
  shift(h - h / 2, w - w / 2);  // ifftshift

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cd> line_in, line_out;
  line_in.resize(w);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(y * w), buf.begin() + static_cast<std::ptrdiff_t>((y + 1) * w),
              line_in.begin());
    inverse ? fft.inv(line_out, line_in) : fft.fwd(line_out, line_in);
    std::copy(line_out.begin(), line_out.end(), buf.begin() + static_cast<std::ptrdiff_t>(y * w));
  }
  line_in.resize(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) line_in[y] = buf[y * w + x];
    inverse ? fft.inv(line_out, line_in) : fft.fwd(line_out, line_in);
    for (std::size_t y = 0; y < h; ++y) buf[y * w + x] = line_out[y];
  }

  shift(h / 2, w / 2);  // fftshift
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (auto& v : buf) v *= norm;
}

template <typename T, typename From, typename To>
ComplexField<T, To> transform(const ComplexField<T, From>& in, bool inverse) {
  const std::size_t h = in.height(), w = in.width(), n = h * w;
  const Tensor<T>& t = in.tensor();
  std::vector<cd> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = cd(static_cast<double>(t[i]), static_cast<double>(t[n + i]));
  centered_dft(buf, h, w, inverse);
  ComplexField<T, To> out(h, w);
  Tensor<T>& o = out.tensor();
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = static_cast<T>(buf[i].real());
    o[n + i] = static_cast<T>(buf[i].imag());
  }
  return out;
}

}  // namespace

template <typename T>
KSpace<T> fft2c(const ComplexImage<T>& img) {
  return transform<T, ImageDomain, FrequencyDomain>(img, false);
}

template <typename T>
ComplexImage<T> ifft2c(const KSpace<T>& k) {
  return transform<T, FrequencyDomain, ImageDomain>(k, true);
}

template KSpace<float> fft2c(const ComplexImage<float>&);
template KSpace<double> fft2c(const ComplexImage<double>&);
template ComplexImage<float> ifft2c(const KSpace<float>&);
template ComplexImage<double> ifft2c(const KSpace<double>&);

}  // namespace ttmr::kspace
