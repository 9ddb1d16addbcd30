// SPDX-License-Identifier: Apache-2.0
//
// Versioned single-file binary container for named typed arrays plus a JSON
// metadata blob. Byte layout is documented in docs/container_format.md.

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace imuloc::io {

inline constexpr char kContainerMagic[8] = {'I', 'M', 'L', 'C', 'O', 'N', 'T', '\0'};
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t {
  kF32 = 1,
  kF64 = 2,
  kI64 = 3,
  kC64 = 4,  ///< complex, interleaved re/im 32-bit floats
};

std::size_t dtype_size(DType dtype);
const char* dtype_name(DType dtype);

class ContainerError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kHeaderChecksum, kPayloadChecksum, kMalformed };

  ContainerError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A named, typed, shaped array holding its raw little-endian bytes.
struct Array {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> shape;
  std::vector<std::byte> bytes;

  std::uint64_t element_count() const;

  static Array f64(std::string name, std::vector<std::uint64_t> shape, std::span<const double> values);
  static Array f32(std::string name, std::vector<std::uint64_t> shape, std::span<const float> values);
  static Array i64(std::string name, std::vector<std::uint64_t> shape, std::span<const std::int64_t> values);
  static Array c64(std::string name, std::vector<std::uint64_t> shape,
                   std::span<const std::complex<float>> values);

  std::vector<double> as_f64() const;
  std::vector<float> as_f32() const;
  std::vector<std::int64_t> as_i64() const;
  std::vector<std::complex<float>> as_c64() const;
};

struct Container {
  std::vector<Array> arrays;
  nlohmann::json metadata = nlohmann::json::object();

  const Array& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);

/// Serialize to an in-memory byte image (used by write_container and hashing).
std::vector<std::byte> encode_container(const Container& container);
Container decode_container(std::span<const std::byte> image);

}  // namespace imuloc::io
