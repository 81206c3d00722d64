#include "hyperlock/hypervector.hpp"

#include <array>
#include <istream>
#include <ostream>

#include "hyperlock/binary_io.hpp"
#include "hyperlock/errors.hpp"

namespace hyperlock::hd {

BinaryHypervector BinaryHypervector::from_bools(std::span<const bool> bits) {
  BinaryHypervector v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) v.set(i, true);
  }
  return v;
}

std::vector<std::uint32_t> BinaryHypervector::active_indices() const {
  std::vector<std::uint32_t> out;
  out.reserve(popcount());
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t word = words_[w];
    while (word != 0) {
      const int bit = std::countr_zero(word);
      out.push_back(static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(bit)));
      word &= word - 1;
    }
  }
  return out;
}

std::vector<double> BinaryHypervector::to_dense() const {
  std::vector<double> out(dim_, 0.0);
  for (auto i : active_indices()) out[i] = 1.0;
  return out;
}

std::size_t hamming(const BinaryHypervector& a, const BinaryHypervector& b) {
  if (a.dim() != b.dim()) throw ShapeError("hamming: hypervector dimensions differ");
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t d = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  return d;
}

std::vector<std::uint8_t> packed_bytes(const BinaryHypervector& v) {
  std::vector<std::uint8_t> out((v.dim() + 7) / 8);
  const auto words = v.words();
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b] = static_cast<std::uint8_t>(words[b / 8] >> (8 * (b % 8)));
  }
  return out;
}

BinaryHypervector from_packed_bytes(std::size_t dim, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != (dim + 7) / 8) throw FormatError("packed hypervector has wrong byte count");
  if (dim % 8 != 0 && !bytes.empty() && (bytes.back() >> (dim % 8)) != 0)
    throw FormatError("packed hypervector has nonzero padding bits");
  BinaryHypervector v(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if ((bytes[i / 8] >> (i % 8)) & 1U) v.set(i, true);
  }
  return v;
}

void write_hbv(std::ostream& out, const BinaryHypervector& v) {
  out.write("HBV1", 4);
  io::write_u64_le(out, v.dim());
  const auto bytes = packed_bytes(v);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed to write hypervector");
}

BinaryHypervector read_hbv(std::istream& in) {
  io::Reader reader(in);
  reader.expect_magic("HBV1");
  const std::uint64_t dim = reader.u64_le("dim");
  const auto bytes = reader.bytes((dim + 7) / 8, "packed bits");
  return from_packed_bytes(dim, bytes);
}

}  // namespace hyperlock::hd
