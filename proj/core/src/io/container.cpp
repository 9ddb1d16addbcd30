// SPDX-License-Identifier: Apache-2.0

#include "imuloc/io/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <zlib.h>

static_assert(std::endian::native == std::endian::little,
              "container encoding assumes a little-endian host");

namespace imuloc::io {
namespace {

template <typename T>
void put(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw ContainerError(ContainerError::Kind::kTruncated, "container truncated inside header");
    }
  }

  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::byte> bytes, std::uint32_t seed = 0) {
  uLong c = seed;
  // zlib takes uInt lengths; feed in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + offset), static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<std::uint32_t>(c);
}

template <typename T>
Array make_array(std::string name, DType dtype, std::vector<std::uint64_t> shape, std::span<const T> values) {
  Array a;
  a.name = std::move(name);
  a.dtype = dtype;
  a.shape = std::move(shape);
  if (a.element_count() != values.size()) {
    throw std::invalid_argument("array '" + a.name + "': shape does not match value count");
  }
  a.bytes.resize(values.size_bytes());
  std::memcpy(a.bytes.data(), values.data(), values.size_bytes());
  return a;
}

template <typename T>
std::vector<T> view_as(const Array& a, DType expected) {
  if (a.dtype != expected) {
    throw ContainerError(ContainerError::Kind::kMalformed,
                         "array '" + a.name + "' has dtype " + dtype_name(a.dtype) + ", expected " +
                             dtype_name(expected));
  }
  std::vector<T> out(a.bytes.size() / sizeof(T));
  std::memcpy(out.data(), a.bytes.data(), out.size() * sizeof(T));
  return out;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kI64: return 8;
    case DType::kC64: return 8;
  }
  throw ContainerError(ContainerError::Kind::kMalformed, "unknown dtype");
}

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
    case DType::kI64: return "i64";
    case DType::kC64: return "c64";
  }
  return "unknown";
}

std::uint64_t Array::element_count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Array Array::f64(std::string name, std::vector<std::uint64_t> shape, std::span<const double> values) {
  return make_array(std::move(name), DType::kF64, std::move(shape), values);
}
Array Array::f32(std::string name, std::vector<std::uint64_t> shape, std::span<const float> values) {
  return make_array(std::move(name), DType::kF32, std::move(shape), values);
}
Array Array::i64(std::string name, std::vector<std::uint64_t> shape, std::span<const std::int64_t> values) {
  return make_array(std::move(name), DType::kI64, std::move(shape), values);
}
Array Array::c64(std::string name, std::vector<std::uint64_t> shape,
                 std::span<const std::complex<float>> values) {
  return make_array(std::move(name), DType::kC64, std::move(shape), values);
}

std::vector<double> Array::as_f64() const { return view_as<double>(*this, DType::kF64); }
std::vector<float> Array::as_f32() const { return view_as<float>(*this, DType::kF32); }
std::vector<std::int64_t> Array::as_i64() const { return view_as<std::int64_t>(*this, DType::kI64); }
std::vector<std::complex<float>> Array::as_c64() const {
  return view_as<std::complex<float>>(*this, DType::kC64);
}

const Array& Container::at(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw ContainerError(ContainerError::Kind::kMalformed, "container has no array named '" + name + "'");
}

bool Container::contains(const std::string& name) const {
  return std::any_of(arrays.begin(), arrays.end(), [&](const Array& a) { return a.name == name; });
}

std::vector<std::byte> encode_container(const Container& container) {
  std::set<std::string> names;
  for (const auto& a : container.arrays) {
    if (!names.insert(a.name).second) {
      throw std::invalid_argument("duplicate array name '" + a.name + "'");
    }
    if (a.name.size() > 0xFFFF || a.shape.size() > 0xFF) {
      throw std::invalid_argument("array '" + a.name + "': name or rank too large");
    }
    if (a.bytes.size() != a.element_count() * dtype_size(a.dtype)) {
      throw std::invalid_argument("array '" + a.name + "': byte size does not match shape");
    }
  }
  const std::string meta = container.metadata.dump();

  std::vector<std::byte> table;
  put<std::uint32_t>(table, static_cast<std::uint32_t>(container.arrays.size()));
  put<std::uint64_t>(table, meta.size());
  std::uint64_t offset = 0;
  for (const auto& a : container.arrays) {
    put<std::uint16_t>(table, static_cast<std::uint16_t>(a.name.size()));
    const auto* n = reinterpret_cast<const std::byte*>(a.name.data());
    table.insert(table.end(), n, n + a.name.size());
    put<std::uint8_t>(table, static_cast<std::uint8_t>(a.dtype));
    put<std::uint8_t>(table, static_cast<std::uint8_t>(a.shape.size()));
    for (auto d : a.shape) put<std::uint64_t>(table, d);
    put<std::uint64_t>(table, offset);
    put<std::uint64_t>(table, a.bytes.size());
    offset += a.bytes.size();
  }

  std::vector<std::byte> out;
  const auto* magic = reinterpret_cast<const std::byte*>(kContainerMagic);
  out.insert(out.end(), magic, magic + sizeof(kContainerMagic));
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, table.size());
  const std::uint32_t header_crc =
      crc(table, crc(std::span<const std::byte>(out).subspan(sizeof(kContainerMagic))));
  put<std::uint32_t>(out, header_crc);
  out.insert(out.end(), table.begin(), table.end());

  std::vector<std::byte> payload;
  const auto* m = reinterpret_cast<const std::byte*>(meta.data());
  payload.insert(payload.end(), m, m + meta.size());
  for (const auto& a : container.arrays) payload.insert(payload.end(), a.bytes.begin(), a.bytes.end());
  put<std::uint32_t>(out, crc(payload));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Container decode_container(std::span<const std::byte> image) {
  using Kind = ContainerError::Kind;
  constexpr std::size_t kPrefix = sizeof(kContainerMagic) + 4 + 8 + 4;
  if (image.size() < sizeof(kContainerMagic)) {
    throw ContainerError(Kind::kTruncated, "container shorter than its magic");
  }
  if (std::memcmp(image.data(), kContainerMagic, sizeof(kContainerMagic)) != 0) {
    throw ContainerError(Kind::kBadMagic, "not an imuloc container (bad magic)");
  }
  if (image.size() < kPrefix) throw ContainerError(Kind::kTruncated, "container truncated inside header");
  Reader prefix(image.subspan(sizeof(kContainerMagic)));
  const auto version = prefix.get<std::uint32_t>();
  const auto table_size = prefix.get<std::uint64_t>();
  const auto stored_header_crc = prefix.get<std::uint32_t>();
  if (table_size > image.size() - kPrefix) {
    throw ContainerError(Kind::kTruncated, "container truncated inside header");
  }
  const auto table = image.subspan(kPrefix, table_size);
  const std::uint32_t header_crc = crc(table, crc(image.subspan(sizeof(kContainerMagic), 12)));
  if (header_crc != stored_header_crc) {
    throw ContainerError(Kind::kHeaderChecksum, "container header checksum mismatch");
  }
  if (version != kContainerVersion) {
    throw ContainerError(Kind::kVersionMismatch, "container version " + std::to_string(version) +
                                                     " unsupported (expected " +
                                                     std::to_string(kContainerVersion) + ")");
  }

  struct Entry {
    Array array;
    std::uint64_t offset;
    std::uint64_t nbytes;
  };
  std::vector<Entry> entries;
  Reader r(table);
  std::uint32_t count = 0;
  std::uint64_t meta_size = 0;
  try {
    count = r.get<std::uint32_t>();
    meta_size = r.get<std::uint64_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      Entry e;
      const auto name_len = r.get<std::uint16_t>();
      e.array.name = r.get_string(name_len);
      e.array.dtype = static_cast<DType>(r.get<std::uint8_t>());
      const auto ndim = r.get<std::uint8_t>();
      for (std::uint8_t d = 0; d < ndim; ++d) e.array.shape.push_back(r.get<std::uint64_t>());
      e.offset = r.get<std::uint64_t>();
      e.nbytes = r.get<std::uint64_t>();
      entries.push_back(std::move(e));
    }
  } catch (const ContainerError&) {
    throw ContainerError(Kind::kMalformed, "container array table is inconsistent with its length");
  }
  if (r.pos() != table.size()) throw ContainerError(Kind::kMalformed, "container array table has trailing bytes");

  std::uint64_t payload_size = meta_size;
  for (const auto& e : entries) {
    if (e.array.dtype < DType::kF32 || e.array.dtype > DType::kC64) {
      throw ContainerError(Kind::kMalformed, "array '" + e.array.name + "' has unknown dtype");
    }
    if (e.nbytes != e.array.element_count() * dtype_size(e.array.dtype)) {
      throw ContainerError(Kind::kMalformed, "array '" + e.array.name + "' shape/size mismatch");
    }
    payload_size += e.nbytes;
  }
  const std::size_t payload_begin = kPrefix + table_size + 4;
  if (image.size() < payload_begin || image.size() - payload_begin < payload_size) {
    throw ContainerError(Kind::kTruncated, "container truncated: payload shorter than header declares");
  }
  if (image.size() - payload_begin > payload_size) {
    throw ContainerError(Kind::kMalformed, "container has trailing bytes");
  }
  std::uint32_t stored_payload_crc;
  std::memcpy(&stored_payload_crc, image.data() + kPrefix + table_size, 4);
  const auto payload = image.subspan(payload_begin);
  if (crc(payload) != stored_payload_crc) {
    throw ContainerError(Kind::kPayloadChecksum, "container payload checksum mismatch");
  }

  Container c;
  const std::string meta(reinterpret_cast<const char*>(payload.data()), meta_size);
  try {
    c.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(Kind::kMalformed, std::string("container metadata is not JSON: ") + e.what());
  }
  const auto arrays = payload.subspan(meta_size);
  std::uint64_t expected_offset = 0;
  for (auto& e : entries) {
    if (e.offset != expected_offset) {
      throw ContainerError(Kind::kMalformed, "array '" + e.array.name + "' is not contiguous");
    }
    const auto src = arrays.subspan(e.offset, e.nbytes);
    e.array.bytes.assign(src.begin(), src.end());
    expected_offset += e.nbytes;
    c.arrays.push_back(std::move(e.array));
  }
  return c;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  const auto image = encode_container(container);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContainerError(ContainerError::Kind::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  if (!out) throw ContainerError(ContainerError::Kind::kIo, "write failed for '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError(ContainerError::Kind::kIo, "cannot open '" + path.string() + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const std::byte*>(raw.data());
  return decode_container(std::span<const std::byte>(p, raw.size()));
}

}  // namespace imuloc::io
