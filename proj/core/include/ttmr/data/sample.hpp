#pragma once

#include <optional>
#include <string>

#include "ttmr/kspace/complex_image.hpp"
#include "ttmr/kspace/mask.hpp"

namespace ttmr::data {

/// One training/evaluation slice: ground truth, its accelerated acquisition and an optional
/// matched reference pair.
template <typename T>
struct Sample {
  std::string id;
  kspace::ComplexImage<T> y;         // fully-sampled ground truth
  kspace::ComplexImage<T> x;         // zero-filled input
  kspace::KSpace<T> measured;
  kspace::SamplingMask mask = kspace::SamplingMask::full(1);
  std::optional<kspace::ComplexImage<T>> x_ref;  // reference, undersampled
  std::optional<kspace::ComplexImage<T>> y_ref;  // reference, fully sampled
  std::optional<kspace::SamplingMask> ref_mask;
  std::string ref_id;

  bool has_reference() const { return x_ref.has_value() && y_ref.has_value(); }

  template <typename U>
  Sample<U> cast() const {
    Sample<U> s;
    s.id = id;
    s.y = y.template cast<U>();
    s.x = x.template cast<U>();
    s.measured = measured.template cast<U>();
    s.mask = mask;
    if (x_ref) s.x_ref = x_ref->template cast<U>();
    if (y_ref) s.y_ref = y_ref->template cast<U>();
    s.ref_mask = ref_mask;
    s.ref_id = ref_id;
    return s;
  }
};

using DataSample = Sample<float>;

}  // namespace ttmr::data
