#pragma once

#include <cmath>
#include <cstddef>

#include "ttmr/tensor.hpp"

namespace ttmr::kspace {

struct ImageDomain {};
struct FrequencyDomain {};

/// H x W complex field stored as a 2 x H x W tensor (channel 0 real, channel 1 imaginary).
/// The domain tag keeps image-space and k-space data from being mixed up.
template <typename T, typename Domain>
class ComplexField {
 public:
  ComplexField() = default;
  ComplexField(std::size_t height, std::size_t width) : data_({2, height, width}) {}
  explicit ComplexField(Tensor<T> data) : data_(std::move(data)) {
    if (data_.rank() != 3 || data_.dim(0) != 2) {
      throw ShapeError("complex field must be 2 x H x W, got " + shape_str(data_.shape()));
    }
  }

  std::size_t height() const { return data_.dim(1); }
  std::size_t width() const { return data_.dim(2); }
  std::size_t pixels() const { return height() * width(); }

  T& re(std::size_t y, std::size_t x) { return data_.at(0, y, x); }
  T& im(std::size_t y, std::size_t x) { return data_.at(1, y, x); }
  const T& re(std::size_t y, std::size_t x) const { return data_.at(0, y, x); }
  const T& im(std::size_t y, std::size_t x) const { return data_.at(1, y, x); }

  const Tensor<T>& tensor() const& noexcept { return data_; }
  Tensor<T>& tensor() & noexcept { return data_; }
  Tensor<T> tensor() && noexcept { return std::move(data_); }

  /// Pixelwise modulus as an H x W double tensor.
  Tensor<double> magnitude() const {
    Tensor<double> mag({height(), width()});
    const std::size_t n = pixels();
    for (std::size_t i = 0; i < n; ++i) mag[i] = std::hypot(static_cast<double>(data_[i]), static_cast<double>(data_[n + i]));
    return mag;
  }

  /// Sum of squared moduli, accumulated in double.
  double energy() const {
    double e = 0.0;
    for (auto v : data_.values()) e += static_cast<double>(v) * static_cast<double>(v);
    return e;
  }

  template <typename U>
  ComplexField<U, Domain> cast() const {
    return ComplexField<U, Domain>(data_.template cast<U>());
  }

  friend bool operator==(const ComplexField& a, const ComplexField& b) { return a.data_ == b.data_; }

 private:
  Tensor<T> data_;
};

template <typename T>
using ComplexImage = ComplexField<T, ImageDomain>;

/// Frequency-domain counterpart with the DC component at (H/2, W/2).
template <typename T>
using KSpace = ComplexField<T, FrequencyDomain>;

}  // namespace ttmr::kspace
