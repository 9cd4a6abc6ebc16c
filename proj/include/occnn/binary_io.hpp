#pragma once

// Little-endian primitives shared by the OCNN, OCBL and OCFV containers.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "occnn/error.hpp"

namespace occnn::io {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) fail(ErrorKind::io, "write failed");
  }
  void magic(std::string_view tag) { bytes(tag.data(), tag.size()); }

  template <typename T>
  void uint(T v) {
    std::array<unsigned char, sizeof(T)> buf{};
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    bytes(buf.data(), buf.size());
  }
  void u8(std::uint8_t v) { uint(v); }
  void u16(std::uint16_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const noexcept { return offset_; }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      fail(ErrorKind::corrupt, "truncated file at byte offset " +
                                   std::to_string(offset_ + in_.gcount()));
    }
    offset_ += n;
  }
  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    bytes(got.data(), got.size());
    if (got != tag) fail(ErrorKind::corrupt, "bad magic: expected \"" + std::string(tag) + "\"");
  }

  template <typename T>
  T uint() {
    std::array<unsigned char, sizeof(T)> buf{};
    bytes(buf.data(), buf.size());
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
  }
  std::uint8_t u8() { return uint<std::uint8_t>(); }
  std::uint16_t u16() { return uint<std::uint16_t>(); }
  std::uint32_t u32() { return uint<std::uint32_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  // True when no bytes remain.
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace occnn::io
