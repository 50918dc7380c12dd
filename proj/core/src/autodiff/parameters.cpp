#include "ttmr/autodiff/parameters.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ttmr/util/rng.hpp"

namespace ttmr::ad {

template <typename T>
void ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

template <typename T>
std::size_t ParameterSet<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

template <typename T>
bool ParameterSet<T>::all_finite() const {
  for (const auto& v : values_)
    if (!v.all_finite()) return false;
  return true;
}

template <typename T>
std::vector<Tensor<T>> ParameterSet<T>::zeros_like() const {
  std::vector<Tensor<T>> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.emplace_back(v.shape());
  return out;
}

Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("parameter '" + name + "' is not bound");
  return it->second;
}

template <typename T>
BoundParameters bind(Graph<T>& g, const ParameterSet<T>& params, std::type_identity_t<std::vector<Tensor<T>>>* grads) {
  if (grads != nullptr && grads->size() != params.size()) {
    throw ShapeError("bind: gradient buffer count does not match parameter count");
  }
  BoundParameters bound;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Var v = grads ? g.parameter(params.at(i), &(*grads)[i]) : g.constant(params.at(i));
    bound.set(params.names()[i], v);
  }
  return bound;
}

template <typename T>
void add_conv(ParameterSet<T>& params, const std::string& prefix, std::size_t c_out, std::size_t c_in,
              std::size_t kernel, std::uint64_t seed) {
  const std::string wname = prefix + ".weight";
  const double bound = std::sqrt(1.0 / static_cast<double>(c_in * kernel * kernel));
  std::mt19937_64 rng(derive_seed(seed, wname));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> w({c_out, c_in, kernel, kernel});
  for (auto& e : w.values()) e = static_cast<T>(dist(rng));
  params.add(wname, std::move(w));
  params.add(prefix + ".bias", Tensor<T>({c_out}));
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template BoundParameters bind(Graph<float>&, const ParameterSet<float>&, std::vector<Tensor<float>>*);
template BoundParameters bind(Graph<double>&, const ParameterSet<double>&, std::vector<Tensor<double>>*);
template void add_conv(ParameterSet<float>&, const std::string&, std::size_t, std::size_t, std::size_t, std::uint64_t);
template void add_conv(ParameterSet<double>&, const std::string&, std::size_t, std::size_t, std::size_t,
                       std::uint64_t);

}  // namespace ttmr::ad
