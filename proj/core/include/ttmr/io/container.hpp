#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ttmr/tensor.hpp"

namespace ttmr::io {

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

/// Named-tensor container ("TTMT" files).
///
/// Layout, all integers little-endian:
///   magic "TTMT" | u32 version (1) | u32 entry count |
///   per entry: u32 name length, UTF-8 name, u8 dtype (0 = f32, 1 = f64), u32 ndim, u32 dims[ndim],
///              row-major payload.
/// Entries keep insertion order so identical content serialises to identical bytes.
class TensorArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, Tensor<float> t) { put_any(name, std::move(t)); }
  void put(const std::string& name, Tensor<double> t) { put_any(name, std::move(t)); }

  bool contains(const std::string& name) const;
  const AnyTensor& get(const std::string& name) const;

  /// Entry converted to `T`; throws std::out_of_range for missing names.
  template <typename T>
  Tensor<T> get_as(const std::string& name) const {
    return std::visit([](const auto& t) { return t.template cast<T>(); }, get(name));
  }

  const std::vector<std::pair<std::string, AnyTensor>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  void write(std::ostream& os) const;
  static TensorArchive read(std::istream& is);

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  void put_any(const std::string& name, AnyTensor t);

  std::vector<std::pair<std::string, AnyTensor>> entries_;
};

}  // namespace ttmr::io
