#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "common/error.hpp"

namespace eidc {

// Little-endian encoding helpers for the on-disk and wire formats.
class ByteWriter {
 public:
  void put_u32(std::uint32_t v) { put_raw(v); }
  void put_f64(double v) { put_raw(std::bit_cast<std::uint64_t>(v)); }
  void put_f64s(std::span<const double> vs) {
    for (double v : vs) put_f64(v);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  template <typename T>
  void put_raw(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t get_u32() { return get_raw<std::uint32_t>(); }
  double get_f64() { return std::bit_cast<double>(get_raw<std::uint64_t>()); }
  std::size_t remaining() const { return bytes_.size() - at_; }

 private:
  template <typename T>
  T get_raw() {
    if (remaining() < sizeof(T)) throw ConfigError("binary record truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[at_ + i]) << (8 * i);
    at_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t at_ = 0;
};

}  // namespace eidc
