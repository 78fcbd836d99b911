#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace medflow {

enum class DType { U8, U16, I16, I32, F32, F64 };

std::size_t element_size(DType t);
std::string dtype_name(DType t);          // "u8", "u16", "i16", "i32", "f32", "f64"
DType dtype_from_name(const std::string& name);  // throws Error("BadDType") on unknown

std::uint64_t element_count(std::span<const std::uint64_t> shape);

// Payloads are row-major little-endian byte buffers. These helpers convert
// between typed vectors and wire bytes independent of host endianness.
std::vector<std::uint8_t> pack_f64(std::span<const double> values);
std::vector<std::uint8_t> pack_f32(std::span<const float> values);
std::vector<std::uint8_t> pack_i32(std::span<const std::int32_t> values);
std::vector<std::uint8_t> pack_i16(std::span<const std::int16_t> values);
std::vector<std::uint8_t> pack_u16(std::span<const std::uint16_t> values);

std::vector<double> unpack_f64(std::span<const std::uint8_t> bytes);
std::vector<float> unpack_f32(std::span<const std::uint8_t> bytes);
std::vector<std::int32_t> unpack_i32(std::span<const std::uint8_t> bytes);
std::vector<std::int16_t> unpack_i16(std::span<const std::uint8_t> bytes);
std::vector<std::uint16_t> unpack_u16(std::span<const std::uint8_t> bytes);

}  // namespace medflow
