#include "tenips/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace tenips {
namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxOrder = 64;

template <typename T>
void put_le(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw FormatError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void write_header(std::ostream& os, const char* magic, const Shape& shape) {
  os.write(magic, 4);
  put_le<std::uint32_t>(os, kVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.order()));
  for (Index d : shape.dims()) put_le<std::uint64_t>(os, static_cast<std::uint64_t>(d));
}

Shape read_header(std::istream& is, const char* magic) {
  char got[4];
  if (!is.read(got, 4)) throw FormatError("unexpected end of file");
  if (std::memcmp(got, magic, 4) != 0) throw FormatError(std::string("bad magic, expected ") + magic);
  const auto version = get_le<std::uint32_t>(is);
  if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version));
  const auto order = get_le<std::uint32_t>(is);
  if (order < 1 || order > kMaxOrder) throw FormatError("invalid order " + std::to_string(order));
  std::vector<Index> dims;
  for (std::uint32_t n = 0; n < order; ++n) {
    const auto d = get_le<std::uint64_t>(is);
    if (d < 1 || d > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()))
      throw FormatError("invalid mode size");
    dims.push_back(static_cast<Index>(d));
  }
  try {
    return Shape(std::move(dims));
  } catch (const std::exception& e) {
    throw FormatError(e.what());
  }
}

}  // namespace

void write_tensor(std::ostream& os, const TensorXd& t) {
  write_header(os, "TNSR", t.shape());
  for (Index i = 0; i < t.size(); ++i) put_le<double>(os, t[i]);
  if (!os) throw std::runtime_error("write_tensor: stream error");
}

TensorXd read_tensor(std::istream& is) {
  TensorXd t(read_header(is, "TNSR"));
  for (Index i = 0; i < t.size(); ++i) t[i] = get_le<double>(is);
  return t;
}

void write_mask(std::ostream& os, const Mask& m) {
  write_header(os, "MASK", m.shape());
  os.write(reinterpret_cast<const char*>(m.bits().data()), static_cast<std::streamsize>(m.bits().size()));
  if (!os) throw std::runtime_error("write_mask: stream error");
}

Mask read_mask(std::istream& is) {
  const Shape shape = read_header(is, "MASK");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(shape.size()));
  if (!is.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size())))
    throw FormatError("unexpected end of file");
  for (auto b : bits)
    if (b > 1) throw FormatError("mask values must be 0 or 1");
  return Mask(shape, std::move(bits));
}

namespace {
template <typename F>
void with_output(const std::filesystem::path& path, F&& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f(os);
}
template <typename F>
auto with_input(const std::filesystem::path& path, F&& f) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return f(is);
}
}  // namespace

void save_tensor(const std::filesystem::path& path, const TensorXd& t) {
  with_output(path, [&](std::ostream& os) { write_tensor(os, t); });
}
TensorXd load_tensor(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& is) { return read_tensor(is); });
}
void save_mask(const std::filesystem::path& path, const Mask& m) {
  with_output(path, [&](std::ostream& os) { write_mask(os, m); });
}
Mask load_mask(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& is) { return read_mask(is); });
}

}  // namespace tenips
