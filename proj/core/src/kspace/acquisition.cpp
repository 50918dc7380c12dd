#include "ttmr/kspace/acquisition.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ttmr/kspace/fft.hpp"

namespace ttmr::kspace {

namespace {

template <typename A, typename B>
void require_geometry(const A& a, const B& b, const SamplingMask& mask, const char* op) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(op) + ": image is " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                     " but k-space is " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
  if (mask.width() != a.width()) {
    throw ShapeError(std::string(op) + ": mask width " + std::to_string(mask.width()) + " != image width " +
                     std::to_string(a.width()));
  }
}

// k-space of `pred` with sampled columns replaced by `measured`, all in double.
template <typename T>
KSpace<double> project(const ComplexImage<T>& pred, const KSpace<T>& measured, const SamplingMask& mask) {
  KSpace<double> k = fft2c(pred.template cast<double>());
  for (std::size_t y = 0; y < k.height(); ++y)
    for (std::size_t x = 0; x < k.width(); ++x)
      if (mask.sampled(x)) {
        k.re(y, x) = static_cast<double>(measured.re(y, x));
        k.im(y, x) = static_cast<double>(measured.im(y, x));
      }
  return k;
}

}  // namespace

template <typename T>
KSpace<T> apply_mask(const KSpace<T>& k, const SamplingMask& mask) {
  if (mask.width() != k.width()) throw ShapeError("apply_mask: mask width does not match k-space width");
  KSpace<T> out = k;
  for (std::size_t y = 0; y < k.height(); ++y)
    for (std::size_t x = 0; x < k.width(); ++x)
      if (!mask.sampled(x)) out.re(y, x) = out.im(y, x) = T{0};
  return out;
}

template <typename T>
Acquisition<T> undersample(const ComplexImage<T>& y, const SamplingMask& mask, double noise_sigma,
                           std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("undersample: noise_sigma must be non-negative");
  if (mask.width() != y.width()) throw ShapeError("undersample: mask width does not match image width");
  KSpace<double> k = fft2c(y.template cast<double>());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  for (std::size_t r = 0; r < k.height(); ++r) {
    for (std::size_t c = 0; c < k.width(); ++c) {
      if (!mask.sampled(c)) {
        k.re(r, c) = k.im(r, c) = 0.0;
      } else if (noise_sigma > 0.0) {
        k.re(r, c) += noise(rng);
        k.im(r, c) += noise(rng);
      }
    }
  }
  KSpace<T> measured = k.template cast<T>();
  // Back-project the stored measurements so x is exactly consistent with them.
  return Acquisition<T>{ifft2c(measured.template cast<double>()).template cast<T>(), std::move(measured)};
}

template <typename T>
ComplexImage<T> data_consistency(const ComplexImage<T>& pred, const KSpace<T>& measured, const SamplingMask& mask) {
  require_geometry(pred, measured, mask, "data_consistency");
  return ifft2c(project(pred, measured, mask)).template cast<T>();
}

template <typename T>
ad::Var data_consistency(ad::Graph<T>& g, ad::Var pred, const KSpace<T>& measured, const SamplingMask& mask) {
  const ComplexImage<T> in(g.value(pred));
  require_geometry(in, measured, mask, "data_consistency");
  Tensor<T> out = ifft2c(project(in, measured, mask)).template cast<T>().tensor();
  return g.record(std::move(out), {pred}, [pred, mask](ad::Graph<T>& gr, const Tensor<T>& dy) {
    // The map is U^H P U with P the unsampled-column projector, which is self-adjoint.
    KSpace<double> k = fft2c(ComplexImage<double>(dy.template cast<double>()));
    for (std::size_t y = 0; y < k.height(); ++y)
      for (std::size_t x = 0; x < k.width(); ++x)
        if (mask.sampled(x)) k.re(y, x) = k.im(y, x) = 0.0;
    const Tensor<double> back = ifft2c(k).tensor();
    Tensor<T>& dx = gr.grad_buffer(pred);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += static_cast<T>(back[i]);
  });
}

template <typename T>
double sampled_residual(const ComplexImage<T>& img, const KSpace<T>& measured, const SamplingMask& mask) {
  require_geometry(img, measured, mask, "sampled_residual");
  const KSpace<double> k = fft2c(img.template cast<double>());
  double worst = 0.0;
  for (std::size_t y = 0; y < k.height(); ++y)
    for (std::size_t x = 0; x < k.width(); ++x)
      if (mask.sampled(x)) {
        worst = std::max(worst, std::abs(k.re(y, x) - static_cast<double>(measured.re(y, x))));
        worst = std::max(worst, std::abs(k.im(y, x) - static_cast<double>(measured.im(y, x))));
      }
  return worst;
}

#define TTMR_INSTANTIATE_ACQ(T)                                                                               \
  template Acquisition<T> undersample(const ComplexImage<T>&, const SamplingMask&, double, std::uint64_t);    \
  template KSpace<T> apply_mask(const KSpace<T>&, const SamplingMask&);                                      \
  template ComplexImage<T> data_consistency(const ComplexImage<T>&, const KSpace<T>&, const SamplingMask&); \
  template ad::Var data_consistency(ad::Graph<T>&, ad::Var, const KSpace<T>&, const SamplingMask&);          \
  template double sampled_residual(const ComplexImage<T>&, const KSpace<T>&, const SamplingMask&);

TTMR_INSTANTIATE_ACQ(float)
TTMR_INSTANTIATE_ACQ(double)

#undef TTMR_INSTANTIATE_ACQ

}  // namespace ttmr::kspace
