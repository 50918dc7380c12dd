#include "ttmr/io/container.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ttmr/errors.hpp"

namespace ttmr::io {

static_assert(std::endian::native == std::endian::little, "TTMT payloads are written in host order");

namespace {

constexpr std::array<char, 4> kMagic{'T', 'T', 'M', 'T'};
constexpr std::uint32_t kMaxRank = 16;

void write_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

std::uint32_t read_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("TTMT: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.put(static_cast<char>(std::is_same_v<T, float> ? 0 : 1));
  write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
}

template <typename T>
Tensor<T> read_payload(std::istream& is, Shape shape) {
  std::vector<T> data(shape_numel(shape));
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)))) {
    throw FormatError("TTMT: truncated payload");
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

void TensorArchive::put_any(const std::string& name, AnyTensor t) {
  for (auto& [n, v] : entries_) {
    if (n == name) {
      v = std::move(t);
      return;
    }
  }
  entries_.emplace_back(name, std::move(t));
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

const AnyTensor& TensorArchive::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw std::out_of_range("TTMT: no entry named '" + name + "'");
}

void TensorArchive::write(std::ostream& os) const {
  os.write(kMagic.data(), 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    std::visit([&os](const auto& tensor) { write_tensor(os, tensor); }, t);
  }
  if (!os) throw FormatError("TTMT: write failed");
}

TensorArchive TensorArchive::read(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kMagic) throw FormatError("TTMT: bad magic");
  const auto version = read_u32(is);
  if (version != kVersion) throw FormatError("TTMT: unsupported version " + std::to_string(version));
  const auto count = read_u32(is);
  TensorArchive archive;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = read_u32(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("TTMT: truncated entry name");
    const int dtype = is.get();
    if (dtype != 0 && dtype != 1) throw FormatError("TTMT: unknown dtype in entry '" + name + "'");
    const auto ndim = read_u32(is);
    if (ndim == 0 || ndim > kMaxRank) throw FormatError("TTMT: bad rank in entry '" + name + "'");
    Shape shape(ndim);
    for (auto& d : shape) d = read_u32(is);
    try {
      if (dtype == 0) {
        archive.put(name, read_payload<float>(is, std::move(shape)));
      } else {
        archive.put(name, read_payload<double>(is, std::move(shape)));
      }
    } catch (const ShapeError& err) {
      throw FormatError("TTMT: entry '" + name + "': " + err.what());
    }
  }
  return archive;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write(os);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read(is);
}

}  // namespace ttmr::io
