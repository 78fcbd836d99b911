#include "medflow/dtype.hpp"

#include <bit>
#include <cstring>

#include "medflow/errors.hpp"

namespace medflow {

std::size_t element_size(DType t) {
  switch (t) {
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::I16: return 2;
    case DType::I32: return 4;
    case DType::F32: return 4;
    case DType::F64: return 8;
  }
  return 0;
}

std::string dtype_name(DType t) {
  switch (t) {
    case DType::U8: return "u8";
    case DType::U16: return "u16";
    case DType::I16: return "i16";
    case DType::I32: return "i32";
    case DType::F32: return "f32";
    case DType::F64: return "f64";
  }
  return "?";
}

DType dtype_from_name(const std::string& name) {
  if (name == "u8") return DType::U8;
  if (name == "u16") return DType::U16;
  if (name == "i16") return DType::I16;
  if (name == "i32") return DType::I32;
  if (name == "f32") return DType::F32;
  if (name == "f64") return DType::F64;
  throw Error("BadDType", "unknown dtype code '" + name + "'");
}

std::uint64_t element_count(std::span<const std::uint64_t> shape) {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) n *= d;
  return n;
}

namespace {

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> pack_f64(std::span<const double> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 8);
  for (double v : values) put_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

std::vector<std::uint8_t> pack_f32(std::span<const float> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (float v : values) put_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

std::vector<std::uint8_t> pack_i32(std::span<const std::int32_t> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (std::int32_t v : values) put_le(out, static_cast<std::uint32_t>(v));
  return out;
}

std::vector<std::uint8_t> pack_i16(std::span<const std::int16_t> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 2);
  for (std::int16_t v : values) put_le(out, static_cast<std::uint16_t>(v));
  return out;
}

std::vector<std::uint8_t> pack_u16(std::span<const std::uint16_t> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 2);
  for (std::uint16_t v : values) put_le(out, v);
  return out;
}

namespace {
void check_multiple(std::size_t len, std::size_t elem) {
  if (len % elem != 0)
    throw Error("SizeMismatch", "payload length not a multiple of element size");
}
}  // namespace

std::vector<double> unpack_f64(std::span<const std::uint8_t> bytes) {
  check_multiple(bytes.size(), 8);
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes.data() + 8 * i));
  return out;
}

std::vector<float> unpack_f32(std::span<const std::uint8_t> bytes) {
  check_multiple(bytes.size(), 4);
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes.data() + 4 * i));
  return out;
}

std::vector<std::int32_t> unpack_i32(std::span<const std::uint8_t> bytes) {
  check_multiple(bytes.size(), 4);
  std::vector<std::int32_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::int32_t>(get_le<std::uint32_t>(bytes.data() + 4 * i));
  return out;
}

std::vector<std::int16_t> unpack_i16(std::span<const std::uint8_t> bytes) {
  check_multiple(bytes.size(), 2);
  std::vector<std::int16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::int16_t>(get_le<std::uint16_t>(bytes.data() + 2 * i));
  return out;
}

std::vector<std::uint16_t> unpack_u16(std::span<const std::uint8_t> bytes) {
  check_multiple(bytes.size(), 2);
  std::vector<std::uint16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = get_le<std::uint16_t>(bytes.data() + 2 * i);
  return out;
}

}  // namespace medflow
