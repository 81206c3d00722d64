#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hyperlock/encoder.hpp"
#include "hyperlock/errors.hpp"
#include "hyperlock/hypervector.hpp"

using namespace hyperlock;
using hd::BinaryHypervector;

namespace {

std::vector<bool> random_bools(std::size_t n, RandomStream& rng) {
  std::vector<bool> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = rng.uniform() < 0.5;
  return b;
}

BinaryHypervector from_vector(const std::vector<bool>& bits) {
  std::unique_ptr<bool[]> raw(new bool[bits.size()]);
  std::copy(bits.begin(), bits.end(), raw.get());
  return BinaryHypervector::from_bools({raw.get(), bits.size()});
}

}  // namespace

TEST_CASE("thresholding follows x >= eps") {
  const std::vector<double> y{-1.0, 0.0, 2.0};
  const auto b = hd::threshold_binarize(y, 0.5);
  CHECK_FALSE(b.get(0));
  CHECK_FALSE(b.get(1));
  CHECK(b.get(2));

  const std::vector<double> tie(17, 0.25);
  CHECK(hd::threshold_binarize(tie, 0.25).popcount() == 17);

  const std::vector<double> bad{0.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(hd::threshold_binarize(bad, 0.0), ValueError);
  const std::vector<double> inf{std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(hd::threshold_binarize(inf, 0.0), ValueError);
}

TEST_CASE("thresholding at the sample median splits the bits in half") {
  RandomStream rng(8);
  std::vector<double> y(10000);
  for (auto& v : y) v = rng.normal();
  auto sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const double med = 0.5 * (sorted[4999] + sorted[5000]);
  const auto b = hd::threshold_binarize(y, med);
  CHECK(b.popcount() >= 4999);
  CHECK(b.popcount() <= 5001);
}

TEST_CASE("re-thresholding a binarized vector at 0.5 is the identity") {
  RandomStream rng(4);
  const auto b = from_vector(random_bools(333, rng));
  CHECK(hd::threshold_binarize(b.to_dense(), 0.5) == b);
}

TEST_CASE("packed storage agrees with a plain boolean array") {
  RandomStream rng(5);
  for (std::size_t dim : {1u, 63u, 64u, 65u, 200u, 1000u}) {
    const auto bits = random_bools(dim, rng);
    const auto v = from_vector(bits);
    std::size_t ones = 0;
    std::vector<std::uint32_t> active;
    for (std::size_t i = 0; i < dim; ++i) {
      CHECK(v.get(i) == bits[i]);
      if (bits[i]) {
        ++ones;
        active.push_back(static_cast<std::uint32_t>(i));
      }
    }
    CHECK(v.popcount() == ones);
    CHECK(v.active_indices() == active);
    const auto dense = v.to_dense();
    for (std::size_t i = 0; i < dim; ++i) CHECK(dense[i] == (bits[i] ? 1.0 : 0.0));
    if (dim % 64 != 0) CHECK((v.words().back() >> (dim % 64)) == 0);
  }
}

TEST_CASE("hamming distance") {
  RandomStream rng(6);
  const auto bits = random_bools(10000, rng);
  const auto a = from_vector(bits);
  CHECK(hd::hamming(a, a) == 0);

  std::vector<bool> flipped(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) flipped[i] = !bits[i];
  CHECK(hd::hamming(a, from_vector(flipped)) == 10000);

  const auto other = random_bools(10000, rng);
  std::size_t naive = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) naive += bits[i] != other[i];
  const auto b = from_vector(other);
  CHECK(hd::hamming(a, b) == naive);
  CHECK(hd::hamming(b, a) == naive);

  CHECK_THROWS_AS(hd::hamming(a, BinaryHypervector(9999)), ShapeError);
}

TEST_CASE("packed bytes are LSB-first") {
  BinaryHypervector v(10);
  v.set(0, true);
  v.set(9, true);
  const auto bytes = hd::packed_bytes(v);
  REQUIRE(bytes.size() == 2);
  CHECK(bytes[0] == 0x01);
  CHECK(bytes[1] == 0x02);
  CHECK(hd::from_packed_bytes(10, bytes) == v);

  const std::vector<std::uint8_t> padded{0x00, 0x04};
  CHECK_THROWS_AS(hd::from_packed_bytes(10, padded), FormatError);
  CHECK_THROWS_AS(hd::from_packed_bytes(10, std::vector<std::uint8_t>{0x00}), FormatError);
}

TEST_CASE("HBV1 wire format") {
  RandomStream rng(7);
  const auto v = from_vector(random_bools(77, rng));
  std::stringstream ss;
  hd::write_hbv(ss, v);
  const std::string raw = ss.str();
  REQUIRE(raw.size() == 4 + 8 + 10);
  CHECK(raw.substr(0, 4) == "HBV1");
  CHECK(static_cast<unsigned char>(raw[4]) == 77);
  for (int i = 5; i < 12; ++i) CHECK(raw[i] == 0);
  const auto bytes = hd::packed_bytes(v);
  CHECK(std::equal(bytes.begin(), bytes.end(), reinterpret_cast<const std::uint8_t*>(raw.data() + 12)));
  CHECK(hd::read_hbv(ss) == v);

  std::istringstream truncated(raw.substr(0, 15));
  try {
    hd::read_hbv(truncated);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 15);
  }
  std::istringstream wrong_magic("HBV2" + raw.substr(4));
  CHECK_THROWS_AS(hd::read_hbv(wrong_magic), FormatError);
}

TEST_CASE("ordering and equality are value based") {
  BinaryHypervector a(5), b(5);
  CHECK(a == b);
  b.set(3, true);
  CHECK(a != b);
  CHECK((a < b || b < a));
  b.set(3, false);
  CHECK(a == b);
}
