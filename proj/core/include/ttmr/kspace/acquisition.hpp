#pragma once

#include <cstdint>

#include "ttmr/autodiff/graph.hpp"
#include "ttmr/kspace/complex_image.hpp"
#include "ttmr/kspace/mask.hpp"

namespace ttmr::kspace {

template <typename T>
struct Acquisition {
  ComplexImage<T> zero_filled;  // x
  KSpace<T> measured;           // D (F y + noise)
};

/// Simulated accelerated acquisition: measured = mask * (fft2c(y) + noise), x = ifft2c(measured).
/// Noise is drawn only on sampled entries, independently on the real and imaginary parts with
/// standard deviation `noise_sigma`.
template <typename T>
Acquisition<T> undersample(const ComplexImage<T>& y, const SamplingMask& mask, double noise_sigma, std::uint64_t seed);

/// Keeps k-space zero outside the sampled columns.
template <typename T>
KSpace<T> apply_mask(const KSpace<T>& k, const SamplingMask& mask);

/// Hard projection: the prediction's k-space is overwritten by the measurements at sampled columns.
template <typename T>
ComplexImage<T> data_consistency(const ComplexImage<T>& pred, const KSpace<T>& measured, const SamplingMask& mask);

/// Differentiable data consistency on a 2 x H x W graph value; the gradient passes through unsampled
/// columns only.
template <typename T>
ad::Var data_consistency(ad::Graph<T>& g, ad::Var pred, const KSpace<T>& measured, const SamplingMask& mask);

/// Largest |fft2c(img) - measured| over sampled columns (both channels).
template <typename T>
double sampled_residual(const ComplexImage<T>& img, const KSpace<T>& measured, const SamplingMask& mask);

}  // namespace ttmr::kspace
