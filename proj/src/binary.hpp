#pragma once

// Little-endian encoding helpers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "vvnet/error.hpp"

namespace vvnet::detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  void magic(const char* expected) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0) {
      throw BadMagic(source_ + ": expected '" + expected + "'");
    }
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw TruncatedFile(source_ + ": unexpected end of data");
  }
  void finish() const {
    if (pos_ != bytes_.size()) throw ParseError(source_ + ": trailing bytes");
  }
  const std::string& source() const { return source_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace vvnet::detail
