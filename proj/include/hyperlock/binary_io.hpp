#pragma once

// Little helpers for the binary artifact formats (HBV1, HLCT, IDX).

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hyperlock/errors.hpp"

namespace hyperlock::io {

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

/// Sequential reader that tracks the byte offset for error reporting.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::size_t offset() const noexcept { return offset_; }

  std::vector<std::uint8_t> bytes(std::uint64_t n, std::string_view what) {
    // Grow in chunks so a corrupt length field cannot trigger a huge allocation.
    constexpr std::uint64_t kChunk = 1 << 20;
    std::vector<std::uint8_t> buf;
    while (buf.size() < n) {
      const std::size_t start = buf.size();
      const auto want = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, n - start));
      buf.resize(start + want);
      in_.read(reinterpret_cast<char*>(buf.data() + start), static_cast<std::streamsize>(want));
      const auto got = static_cast<std::size_t>(in_.gcount());
      if (got != want) throw FormatError("truncated " + std::string(what), offset_ + start + got);
    }
    offset_ += n;
    return buf;
  }

  void expect_magic(std::string_view magic) {
    const std::size_t at = offset_;
    const auto got = bytes(magic.size(), "magic");
    if (!std::equal(magic.begin(), magic.end(), got.begin(), [](char a, std::uint8_t b) {
          return static_cast<std::uint8_t>(a) == b;
        }))
      throw FormatError("bad magic, expected \"" + std::string(magic) + "\"", at);
  }

  std::uint64_t u64_le(std::string_view what) {
    const auto b = bytes(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }

  std::uint32_t u32_be(std::string_view what) {
    const auto b = bytes(4, what);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  /// True when no further byte can be read.
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

}  // namespace hyperlock::io
