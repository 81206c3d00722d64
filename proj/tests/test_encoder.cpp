#include <doctest.h>

#include <cmath>

#include "hyperlock/encoder.hpp"
#include "hyperlock/errors.hpp"
#include "hyperlock/text_crypto.hpp"

using namespace hyperlock;
using xbar::CellState;
using xbar::Crossbar;
using xbar::CrossbarConfig;

namespace {

Crossbar hand_2x4() {
  const CrossbarConfig c{2, 4, 1e3, 1e4, 0.0, 0.0, 0.0, 0};
  Matrix g(2, 4);
  const double vals[8] = {1e-4, 2e-4, 5e-4, 1e-3, 9e-4, 3e-4, 1e-4, 6e-4};
  std::copy(vals, vals + 8, g.values().begin());
  return Crossbar::from_parts(c, g, std::vector<CellState>(8, CellState::Free));
}

hd::RandomProjection hand_projection(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
  Matrix w(rows, cols);
  std::copy(vals.begin(), vals.end(), w.values().begin());
  return hd::RandomProjection::from_matrix(w);
}

}  // namespace

TEST_CASE("encoder parameters") {
  hd::EncoderParams p{784, 4, 0.0};
  CHECK(p.output_dim() == 3136);
  CHECK_NOTHROW(p.validate());
  p.multiplier = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {0, 2, 0.0};
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("crossbar encoding of a hand-set 2x4 array") {
  const auto xb = hand_2x4();
  const std::vector<double> x{1.0, -0.5};
  double raw[4];
  for (int j = 0; j < 4; ++j) raw[j] = x[0] * xb.target()(0, j) + x[1] * xb.target()(1, j);
  RandomStream rng(1);

  SUBCASE("raw readout") {
    hd::CrossbarEncoder enc{xb, 1.5e-4, hd::Readout::Raw};
    const auto pre = enc.preactivation(x, rng);
    for (int j = 0; j < 4; ++j) CHECK(pre[j] == doctest::Approx(raw[j]).epsilon(1e-14));
    const auto bits = enc.encode(x, rng);
    for (int j = 0; j < 4; ++j) CHECK(bits.get(j) == (raw[j] >= 1.5e-4));
    CHECK(bits.popcount() == 2);
  }
  SUBCASE("midpoint reference readout subtracts the mid-conductance column") {
    const double ref = (x[0] + x[1]) * 0.5 * (1e-3 + 1e-4);
    hd::CrossbarEncoder enc{xb, 0.0, hd::Readout::MidpointReference};
    const auto pre = enc.preactivation(x, rng);
    for (int j = 0; j < 4; ++j) CHECK(pre[j] == doctest::Approx(raw[j] - ref).epsilon(1e-12));
    const auto bits = hd::encode_crossbar(xb, x, 0.0, rng);
    for (int j = 0; j < 4; ++j) CHECK(bits.get(j) == (raw[j] - ref >= 0.0));
  }
  CHECK_THROWS_AS(hd::encode_crossbar(xb, std::vector<double>{1.0}, 0.0, rng), ShapeError);
}

TEST_CASE("readout names round trip") {
  for (auto r : {hd::Readout::Raw, hd::Readout::MidpointReference})
    CHECK(hd::readout_from_string(hd::to_string(r)) == r);
  CHECK_THROWS_AS(hd::readout_from_string("differential"), ConfigError);
}

TEST_CASE("noise-free crossbar encoding is a pure function of the input") {
  const auto xb = Crossbar::random({10, 500, 1e3, 1e4, 0.0, 0.0, 0.0, 3});
  const auto keys = text::generate_keys(10, 4);
  hd::CrossbarEncoder enc{xb, 0.0};
  RandomStream rng(5);
  const auto a = enc.encode(keys.for_class(33), rng);
  CHECK(enc.encode(keys.for_class(33), rng) == a);

  SUBCASE("a tiny input perturbation flips no bits") {
    const auto pre = enc.preactivation(keys.for_class(33), rng);
    double gap = INFINITY;
    for (double v : pre) gap = std::min(gap, std::abs(v - enc.epsilon));
    REQUIRE(gap > 0.0);
    std::vector<double> x(keys.for_class(33).begin(), keys.for_class(33).end());
    x[4] += 1e-12;
    CHECK(enc.encode(x, rng) == a);
  }
}

TEST_CASE("noisy crossbar encodings differ pass to pass") {
  const auto xb = Crossbar::random({10, 500, 1e3, 1e4, 0.1, 0.02, 0.02, 3});
  const auto keys = text::generate_keys(10, 4);
  hd::CrossbarEncoder enc{xb, 0.0};
  RandomStream rng(9);
  const auto first = enc.encode(keys.for_class(1), rng);
  for (int i = 0; i < 5; ++i) CHECK(enc.encode(keys.for_class(1), rng) != first);
}

TEST_CASE("ideal encoder with hand-set weights") {
  auto w = hand_projection(3, 2, {0.5, -1.0, 1.5, 0.2, -0.3, -0.4});
  hd::IdealEncoder enc(w, 0.0, 0.0);
  RandomStream rng(1);
  const std::vector<double> x{1.0, 1.0};
  const auto bits = hd::encode_ideal(enc, x, rng);
  CHECK_FALSE(bits.get(0));  // -0.5
  CHECK(bits.get(1));        // 1.7
  CHECK_FALSE(bits.get(2));  // -0.7
  CHECK(enc.with_epsilon(-0.6).encode(x, rng).popcount() == 2);
  CHECK(hd::encode_ideal(enc, x, rng) == bits);
  CHECK_THROWS_AS(enc.encode(std::vector<double>{1.0}, rng), ShapeError);
}

TEST_CASE("uniform projection weights lie in the init interval") {
  const auto w = hd::RandomProjection::uniform(300, 40, 2.0, 17);
  REQUIRE(w.materialized());
  double lo = 0.0, hi = 0.0;
  for (double v : w.dense()->values()) {
    CHECK(v > -2.0);
    CHECK(v < 2.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo < -1.9);
  CHECK(hi > 1.9);
}

TEST_CASE("procedural and materialized projections agree") {
  const auto dense = hd::RandomProjection::uniform(50, 30, 2.0, 99, true);
  const auto lazy = hd::RandomProjection::uniform(50, 30, 2.0, 99, false);
  CHECK_FALSE(lazy.materialized());
  RandomStream rng(3);
  std::vector<double> x(30);
  for (auto& v : x) v = rng.uniform();
  std::vector<double> y1(50), y2(50);
  dense.apply(x, y1);
  lazy.apply(x, y2);
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t c = 0; c < 30; ++c) CHECK(dense.weight(r, c) == lazy.weight(r, c));
    CHECK(y1[r] == doctest::Approx(y2[r]).epsilon(1e-13));
    double expect = 0.0;
    for (std::size_t c = 0; c < 30; ++c) expect += dense.weight(r, c) * x[c];
    CHECK(y1[r] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("full-matrix noise reproduces (W + N) x draw by draw") {
  const auto w = hand_projection(4, 3, {1, 2, 3, -1, 0.5, 0, 2, 2, -2, 0, 0, 1});
  const std::vector<double> x{0.3, -1.2, 0.8};
  const double sigma = 0.7;
  RandomStream rng(21), oracle(21);
  std::vector<double> y(4);
  w.apply_noisy(x, sigma, rng, hd::NoiseSampling::FullMatrix, y);
  for (std::size_t r = 0; r < 4; ++r) {
    double expect = 0.0;
    for (std::size_t c = 0; c < 3; ++c) expect += (w.weight(r, c) + sigma * oracle.normal()) * x[c];
    CHECK(y[r] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("projected and full-matrix noise share their distribution") {
  const auto w = hand_projection(1, 3, {0.5, -0.25, 1.0});
  const std::vector<double> x{1.0, 2.0, -2.0};
  const double sigma = 0.5, mean = 0.5 - 0.5 - 2.0, var = sigma * sigma * 9.0;
  for (auto sampling : {hd::NoiseSampling::FullMatrix, hd::NoiseSampling::Projected}) {
    RandomStream rng(5);
    const int n = 40000;
    double s = 0.0, s2 = 0.0;
    std::vector<double> y(1);
    for (int i = 0; i < n; ++i) {
      w.apply_noisy(x, sigma, rng, sampling, y);
      s += y[0];
      s2 += y[0] * y[0];
    }
    const double m = s / n, v = s2 / n - m * m;
    CHECK(std::abs(m - mean) < 4.0 * std::sqrt(var / n));
    CHECK(std::abs(v - var) < 4.0 * var * std::sqrt(2.0 / n));
  }
}

TEST_CASE("epsilon calibration") {
  CHECK_THROWS(hd::calibrate_epsilon([](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); },
                                     {}));
  SUBCASE("constant outputs") {
    const auto eps = hd::calibrate_epsilon(
        [](std::span<const double>) { return std::vector<double>(7, 3.25); }, {{0.0}, {1.0}, {2.0}});
    CHECK(eps == 3.25);
  }
  SUBCASE("uniform outputs") {
    RandomStream rng(12);
    const auto eps = hd::calibrate_epsilon(
        [&](std::span<const double>) {
          std::vector<double> y(100);
          for (auto& v : y) v = rng.uniform();
          return y;
        },
        std::vector<std::vector<double>>(200, {0.0}));
    CHECK(std::abs(eps - 0.5) < 0.02);
  }
  SUBCASE("median of an even count is the midpoint of the middle pair") {
    CHECK(hd::median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK(hd::median({5.0, 1.0, 3.0}) == 3.0);
  }
}

TEST_CASE("calibrated ideal encodings of symmetric inputs are balanced") {
  auto enc = hd::IdealEncoder::create({20, 10, 0.0}, 2.0, 0.5, 44);
  RandomStream data(2), noise(3);
  std::vector<std::vector<double>> xs(1000, std::vector<double>(20));
  for (auto& x : xs)
    for (auto& v : x) v = data.uniform(-1, 1);
  enc = enc.with_epsilon(hd::calibrate_epsilon([&](std::span<const double> x) { return enc.preactivation(x, noise); },
                                               {xs.begin(), xs.begin() + 100}));
  double total = 0.0;
  for (const auto& x : xs) total += static_cast<double>(enc.encode(x, noise).popcount());
  CHECK(std::abs(total / (1000.0 * 200.0) - 0.5) < 0.02);
}

TEST_CASE("calibrated crossbar text encodings are balanced") {
  const auto xb = Crossbar::random({10, 500, 1e3, 1e4, 0.1, 0.02, 0.02, 8});
  const auto keys = text::generate_keys(10, 9);
  hd::CrossbarEncoder enc{xb, 0.0};
  RandomStream rng(10);
  enc.epsilon = text::calibrate_epsilon(keys, enc, 500, rng);
  double total = 0.0;
  for (int i = 0; i < 1000; ++i) total += static_cast<double>(enc.encode(keys.for_class(rng.below(94)), rng).popcount());
  const double frac = total / (1000.0 * 500.0);
  CHECK(frac >= 0.4);
  CHECK(frac <= 0.6);
}
