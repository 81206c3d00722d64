#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace hyperlock::hd {

/// Bit-packed binary hypervector. Bit i lives in word i/64 at position i%64;
/// padding bits past dim() are always zero.
class BinaryHypervector {
 public:
  BinaryHypervector() = default;
  explicit BinaryHypervector(std::size_t dim) : dim_(dim), words_((dim + 63) / 64, 0) {}

  static BinaryHypervector from_bools(std::span<const bool> bits);

  std::size_t dim() const noexcept { return dim_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool get(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i, bool value) noexcept {
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    words_[i >> 6] = value ? (words_[i >> 6] | m) : (words_[i >> 6] & ~m);
  }

  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  /// Indices of set bits in increasing order.
  std::vector<std::uint32_t> active_indices() const;
  /// Bits as 0.0 / 1.0.
  std::vector<double> to_dense() const;

  bool operator==(const BinaryHypervector&) const = default;
  auto operator<=>(const BinaryHypervector&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Number of differing bits. Throws ShapeError on dimension mismatch.
std::size_t hamming(const BinaryHypervector& a, const BinaryHypervector& b);

/// ceil(dim/8) bytes, LSB-first within each byte.
std::vector<std::uint8_t> packed_bytes(const BinaryHypervector& v);
/// Inverse of packed_bytes. Nonzero padding bits are a FormatError.
BinaryHypervector from_packed_bytes(std::size_t dim, std::span<const std::uint8_t> bytes);

/// HBV1 wire format: "HBV1", u64 LE dim, ceil(dim/8) packed bytes.
void write_hbv(std::ostream& out, const BinaryHypervector& v);
BinaryHypervector read_hbv(std::istream& in);

}  // namespace hyperlock::hd
