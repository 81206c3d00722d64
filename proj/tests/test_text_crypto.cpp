#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "hyperlock/errors.hpp"
#include "hyperlock/text_crypto.hpp"

using namespace hyperlock;

namespace {

hd::CrossbarEncoder make_encoder(std::size_t rows, std::size_t cols, double sigma, double p, std::uint64_t seed) {
  return {xbar::Crossbar::random({rows, cols, 1e3, 1e4, sigma, p, p, seed}), 0.0};
}

std::string full_charset() {
  std::string s;
  for (std::size_t c = 0; c < text::kNumClasses; ++c) s.push_back(text::char_of(c));
  return s;
}

struct Trained {
  text::SecretKeyTable keys;
  hd::CrossbarEncoder enc;
  nn::LinearDecoder model;
};

Trained train_noiseless() {
  auto keys = text::generate_keys(10, 3);
  auto enc = make_encoder(10, 500, 0.0, 0.0, 4);
  RandomStream rng(5);
  enc.epsilon = text::calibrate_epsilon(keys, enc, 200, rng);
  const auto train = text::build_dataset(3000, keys, enc, rng);
  const auto val = text::build_dataset(500, keys, enc, rng);
  nn::TrainConfig cfg{0.05, 64, 40, 5, 1e-4, 6};
  auto res = nn::train(nn::LinearDecoder::initialized(94, 500, nn::Head::SoftmaxClassifier, 7), train, val, cfg);
  return {keys, enc, res.model};
}

const Trained& noiseless() {
  static const Trained t = train_noiseless();
  return t;
}

}  // namespace

TEST_CASE("charset covers code points 32..125 as 94 classes") {
  CHECK(text::kNumClasses == 94);
  CHECK(text::class_of(' ') == 0u);
  CHECK(text::class_of('A') == 33u);
  CHECK(text::class_of('}') == 93u);
  CHECK_FALSE(text::class_of('~').has_value());
  CHECK_FALSE(text::class_of('\n').has_value());
  for (std::size_t c = 0; c < 94; ++c) CHECK(text::class_of(text::char_of(c)) == c);
  try {
    text::to_classes("ok\tno");
    FAIL("expected rejection");
  } catch (const ValueError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
}

TEST_CASE("key generation") {
  const auto a = text::generate_keys(10, 1);
  CHECK(a == text::generate_keys(10, 1));
  CHECK_FALSE(a == text::generate_keys(10, 2));
  CHECK(a.vectors().rows() == 94);
  CHECK(a.key_dim() == 10);
  CHECK_THROWS_AS(text::generate_keys(0, 1), ConfigError);

  SUBCASE("entries follow U(-1, 1)") {
    const auto big = text::generate_keys(107, 9);
    double s = 0.0, s2 = 0.0;
    const auto vals = big.vectors().values();
    for (double v : vals) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(vals.size());
    REQUIRE(n >= 10000);
    const double mean = s / n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(s2 / n - mean * mean - 1.0 / 3.0) < 0.02);
  }
  SUBCASE("table validation") {
    Matrix v = a.vectors();
    v(3, 0) = 1.5;
    CHECK_THROWS(text::SecretKeyTable::from_vectors(v, 0));
    v = a.vectors();
    for (std::size_t c = 0; c < 10; ++c) v(7, c) = v(8, c);
    CHECK_THROWS(text::SecretKeyTable::from_vectors(v, 0));
    CHECK_THROWS(text::SecretKeyTable::from_vectors(Matrix(93, 10), 0));
  }
  SUBCASE("JSON round trip") {
    const auto j = nlohmann::json::parse(text::to_json(a).dump());
    CHECK(j.at("k") == 10);
    CHECK(j.at("seed") == 1);
    CHECK(j.at("vectors").size() == 94);
    CHECK(text::keys_from_json(j) == a);
  }
}

TEST_CASE("encryption") {
  const auto keys = text::generate_keys(10, 2);
  RandomStream rng(3);
  SUBCASE("empty text gives empty ciphertext") {
    const auto ct = text::encrypt_text("", keys, make_encoder(10, 100, 0.1, 0.02, 1), rng);
    CHECK(ct.blocks.empty());
  }
  SUBCASE("noise-free crossbar repeats itself") {
    const auto ct = text::encrypt_text("AA", keys, make_encoder(10, 200, 0.0, 0.0, 1), rng);
    REQUIRE(ct.blocks.size() == 2);
    CHECK(ct.blocks[0] == ct.blocks[1]);
    CHECK(ct.dim == 200);
  }
  SUBCASE("noisy crossbar gives fresh blocks") {
    const auto ct = text::encrypt_text(std::string(200, 'A'), keys, make_encoder(10, 500, 0.1, 0.02, 1), rng);
    std::set<hd::BinaryHypervector> distinct(ct.blocks.begin(), ct.blocks.end());
    CHECK(distinct.size() >= 190);
  }
  SUBCASE("out-of-charset characters are rejected") {
    CHECK_THROWS_AS(text::encrypt_text("abc~", keys, make_encoder(10, 100, 0.1, 0.0, 1), rng), ValueError);
  }
  SUBCASE("key and crossbar dimensions must agree") {
    CHECK_THROWS(text::encrypt_text("a", keys, make_encoder(5, 100, 0.1, 0.0, 1), rng));
  }
}

TEST_CASE("decryption") {
  const auto& t = noiseless();
  RandomStream rng(8);
  CHECK(text::decrypt_text(text::CipherText{500, {}}, t.model).empty());
  const std::string all = full_charset();
  CHECK(text::decrypt_text(text::encrypt_text(all, t.keys, t.enc, rng), t.model) == all);
  CHECK(text::decrypt_text(text::encrypt_text("Hello, World!", t.keys, t.enc, rng), t.model) == "Hello, World!");
  CHECK_THROWS_AS(text::decrypt_text(text::CipherText{499, {hd::BinaryHypervector(499)}}, t.model), ShapeError);
}

TEST_CASE("blocks decrypt independently of their neighbours") {
  const auto& t = noiseless();
  RandomStream rng(9);
  const auto ct = text::encrypt_text("xyz", t.keys, t.enc, rng);
  text::CipherText swapped{ct.dim, {ct.blocks[2], ct.blocks[0], ct.blocks[1]}};
  CHECK(text::decrypt_text(swapped, t.model) == "zxy");
}

TEST_CASE("key sensitivity: fresh keys defeat an old decoder") {
  const auto& t = noiseless();
  RandomStream rng(10);
  const auto fresh = text::generate_keys(10, 999);
  const auto test = text::build_dataset(3000, fresh, t.enc, rng);
  CHECK(text::evaluate_accuracy(t.model, test) <= 0.05);
}

TEST_CASE("dataset construction") {
  const auto keys = text::generate_keys(5, 1);
  const auto enc = make_encoder(5, 40, 0.1, 0.0, 2);
  RandomStream rng(3);
  const auto small = text::build_dataset(10, keys, enc, rng);
  CHECK(small.size() == 10);
  for (auto l : small.labels) CHECK(l < 94);
  for (const auto& x : small.inputs) CHECK(x.dim() == 40);

  const std::size_t n = 100000;
  const auto big = text::build_dataset(n, keys, enc, rng);
  std::vector<double> counts(94, 0.0);
  for (auto l : big.labels) counts[l] += 1.0;
  const double expect = static_cast<double>(n) / 94.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < 93.0 + 3.0 * std::sqrt(2.0 * 93.0));
}

TEST_CASE("uniqueness statistics") {
  const auto keys = text::generate_keys(10, 1);
  RandomStream rng(2);
  SUBCASE("noise-free encodings collapse to one code") {
    const auto u = text::uniqueness_stats('A', 50, keys, make_encoder(10, 300, 0.0, 0.0, 3), rng);
    CHECK(u.distinct_count == 1);
    CHECK(u.distinct_fraction == doctest::Approx(1.0 / 50));
    CHECK(u.mean_pairwise_hamming == 0.0);
  }
  SUBCASE("agrees with a bit-array oracle") {
    std::vector<hd::BinaryHypervector> codes;
    const auto enc = make_encoder(10, 130, 0.3, 0.02, 4);
    for (int i = 0; i < 30; ++i) codes.push_back(enc.encode(keys.for_class(33), rng));
    codes.push_back(codes[3]);
    std::vector<std::vector<bool>> raw;
    for (const auto& c : codes) {
      std::vector<bool> b(130);
      for (std::size_t j = 0; j < 130; ++j) b[j] = c.get(j);
      raw.push_back(b);
    }
    std::set<std::vector<bool>> distinct(raw.begin(), raw.end());
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < raw.size(); ++a) {
      for (std::size_t b = a + 1; b < raw.size(); ++b) {
        std::size_t d = 0;
        for (std::size_t j = 0; j < 130; ++j) d += raw[a][j] != raw[b][j];
        total += static_cast<double>(d) / 130.0;
        ++pairs;
      }
    }
    const auto u = text::uniqueness_of(codes);
    CHECK(u.passes == codes.size());
    CHECK(u.distinct_count == distinct.size());
    CHECK(u.distinct_fraction == doctest::Approx(double(distinct.size()) / double(codes.size())));
    CHECK(u.mean_pairwise_hamming == doctest::Approx(total / double(pairs)).epsilon(1e-12));
  }
  CHECK_THROWS(text::uniqueness_stats('A', 1, keys, make_encoder(10, 30, 0.1, 0.0, 3), rng));
}

TEST_CASE("accuracy of a constant predictor is near chance") {
  const auto keys = text::generate_keys(5, 1);
  RandomStream rng(4);
  const auto test = text::build_dataset(10000, keys, make_encoder(5, 60, 0.1, 0.0, 2), rng);
  auto m = nn::LinearDecoder::zeros(94, 60, nn::Head::SoftmaxClassifier);
  m.bias()[0] = 1.0;
  const double acc = text::evaluate_accuracy(m, test);
  const double p = 1.0 / 94.0;
  CHECK(std::abs(acc - p) < 3.0 * std::sqrt(p * (1 - p) / 10000.0));
}

TEST_CASE("HLCT ciphertext files") {
  const auto keys = text::generate_keys(10, 1);
  RandomStream rng(5);
  const auto ct = text::encrypt_text("cipher", keys, make_encoder(10, 70, 0.2, 0.0, 2), rng);
  std::stringstream ss;
  text::write_ciphertext(ss, ct);
  const std::string raw = ss.str();
  const std::size_t block = (70 + 7) / 8;
  REQUIRE(raw.size() == 4 + 8 + 8 + 6 * block);
  CHECK(raw.substr(0, 4) == "HLCT");
  CHECK(static_cast<unsigned char>(raw[4]) == 6);
  CHECK(static_cast<unsigned char>(raw[12]) == 70);
  const auto bytes = hd::packed_bytes(ct.blocks[1]);
  CHECK(std::equal(bytes.begin(), bytes.end(), reinterpret_cast<const std::uint8_t*>(raw.data() + 20 + block)));
  CHECK(text::read_ciphertext(ss) == ct);

  SUBCASE("empty ciphertext") {
    std::stringstream e;
    text::write_ciphertext(e, text::CipherText{70, {}});
    CHECK(e.str().size() == 20);
    CHECK(text::read_ciphertext(e).blocks.empty());
  }
  SUBCASE("truncated final block reports the offset where data ran out") {
    std::istringstream in(raw.substr(0, raw.size() - 3));
    try {
      text::read_ciphertext(in);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == raw.size() - 3);
      CHECK(std::string(e.what()).find("block 5") != std::string::npos);
    }
  }
  SUBCASE("trailing bytes and bad magic are rejected") {
    std::istringstream extra(raw + "x");
    CHECK_THROWS_AS(text::read_ciphertext(extra), FormatError);
    std::istringstream magic("HLCX" + raw.substr(4));
    CHECK_THROWS_AS(text::read_ciphertext(magic), FormatError);
  }
}
