#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "ttmr/autodiff/graph.hpp"
#include "ttmr/tensor.hpp"

namespace ttmr::ad {

/// Ordered collection of named trainable tensors.
template <typename T>
class ParameterSet {
 public:
  void add(std::string name, Tensor<T> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  const Tensor<T>& operator[](const std::string& name) const { return values_[index_of(name)]; }
  Tensor<T>& operator[](const std::string& name) { return values_[index_of(name)]; }
  const Tensor<T>& at(std::size_t i) const { return values_.at(i); }
  Tensor<T>& at(std::size_t i) { return values_.at(i); }

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t scalar_count() const;
  bool all_finite() const;

  /// Zero tensors shaped like each parameter, in parameter order.
  std::vector<Tensor<T>> zeros_like() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Graph variables for every parameter of a set, looked up by name.
class BoundParameters {
 public:
  Var operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.count(name) != 0; }
  void set(const std::string& name, Var v) { vars_[name] = v; }

 private:
  std::unordered_map<std::string, Var> vars_;
};

/// Records every parameter as a graph leaf. With `grads` (zeros_like layout) the backward pass adds
/// parameter gradients into it; without, parameters enter as constants.
template <typename T>
BoundParameters bind(Graph<T>& g, const ParameterSet<T>& params, std::type_identity_t<std::vector<Tensor<T>>>* grads);

/// Registers `<prefix>.weight` (c_out x c_in x k x k, uniform in +-sqrt(1/fan_in)) and a zero
/// `<prefix>.bias`. Each tensor draws from its own stream derived from (seed, name).
template <typename T>
void add_conv(ParameterSet<T>& params, const std::string& prefix, std::size_t c_out, std::size_t c_in,
              std::size_t kernel, std::uint64_t seed);

}  // namespace ttmr::ad
