#include "hyperlock/text_crypto.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "hyperlock/binary_io.hpp"
#include "hyperlock/errors.hpp"
#include "hyperlock/kernels.hpp"

namespace hyperlock::text {

namespace {

constexpr int kKeysVersion = 1;

Matrix key_rows(const std::vector<std::size_t>& classes, const SecretKeyTable& keys) {
  Matrix rows(classes.size(), keys.key_dim());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto v = keys.for_class(classes[i]);
    std::copy(v.begin(), v.end(), rows.row(i).begin());
  }
  return rows;
}

void check_encoder(const SecretKeyTable& keys, const hd::CrossbarEncoder& enc) {
  if (keys.key_dim() != enc.input_dim()) throw ShapeError("key dimension does not match crossbar rows");
}

}  // namespace

SecretKeyTable SecretKeyTable::generate(std::size_t key_dim, std::uint64_t seed) {
  if (key_dim == 0) throw ConfigError("key_dim", "must be positive");
  RandomStream rng(derive_seed(seed, "secret-keys"));
  Matrix v(kNumClasses, key_dim);
  for (double& x : v.values()) x = rng.uniform(-1.0, 1.0);
  return from_vectors(std::move(v), seed);
}

SecretKeyTable SecretKeyTable::from_vectors(Matrix vectors, std::uint64_t seed) {
  if (vectors.rows() != kNumClasses) throw ConfigError("keys", "table must hold exactly 94 vectors");
  if (vectors.cols() == 0) throw ConfigError("key_dim", "must be positive");
  for (double x : vectors.values()) {
    if (!(x >= -1.0 && x <= 1.0)) throw ConfigError("keys", "entries must lie in [-1, 1]");
  }
  std::set<std::vector<double>> seen;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto r = vectors.row(c);
    if (!seen.emplace(r.begin(), r.end()).second) throw ConfigError("keys", "secret vectors must be pairwise distinct");
  }
  return SecretKeyTable(std::move(vectors), seed);
}

SecretKeyTable generate_keys(std::size_t key_dim, std::uint64_t seed) { return SecretKeyTable::generate(key_dim, seed); }

nlohmann::json to_json(const SecretKeyTable& keys) {
  nlohmann::json vectors = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto r = keys.for_class(c);
    vectors[std::string(1, char_of(c))] = std::vector<double>(r.begin(), r.end());
  }
  return {{"format", "hyperlock-keys"},
          {"version", kKeysVersion},
          {"k", keys.key_dim()},
          {"seed", keys.seed()},
          {"vectors", std::move(vectors)}};
}

SecretKeyTable keys_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "hyperlock-keys") throw FormatError("not a key-table document");
    if (j.value("version", 0) != kKeysVersion) throw FormatError("unsupported key-table version");
    const auto k = j.at("k").get<std::size_t>();
    const auto& vectors = j.at("vectors");
    Matrix m(kNumClasses, k);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto v = vectors.at(std::string(1, char_of(c))).get<std::vector<double>>();
      if (v.size() != k) throw FormatError("secret vector length does not match k");
      std::copy(v.begin(), v.end(), m.row(c).begin());
    }
    return SecretKeyTable::from_vectors(std::move(m), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("key-table document: ") + e.what());
  }
}

std::vector<std::size_t> to_classes(std::string_view text) {
  std::vector<std::size_t> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto cls = class_of(text[i]);
    if (!cls) throw ValueError("character at index " + std::to_string(i) + " is outside the charset");
    out.push_back(*cls);
  }
  return out;
}

double calibrate_epsilon(const SecretKeyTable& keys, const hd::CrossbarEncoder& enc, std::size_t samples,
                         RandomStream& rng) {
  check_encoder(keys, enc);
  if (samples == 0) throw ValueError("epsilon calibration needs at least one sample");
  std::vector<std::vector<double>> inputs;
  inputs.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const auto v = keys.for_class(rng.below(kNumClasses));
    inputs.emplace_back(v.begin(), v.end());
  }
  return hd::calibrate_epsilon([&](std::span<const double> x) { return enc.preactivation(x, rng); }, inputs);
}

CipherText encrypt_text(std::string_view text, const SecretKeyTable& keys, const hd::CrossbarEncoder& enc,
                        RandomStream& rng) {
  check_encoder(keys, enc);
  const Matrix rows = key_rows(to_classes(text), keys);
  const std::uint64_t base = rng.next_u64();
  return {enc.output_dim(), kernels::parallel::encode_crossbar_batch(enc, rows, base)};
}

CipherText encrypt_text_serial(std::string_view text, const SecretKeyTable& keys, const hd::CrossbarEncoder& enc,
                               RandomStream& rng) {
  check_encoder(keys, enc);
  const Matrix rows = key_rows(to_classes(text), keys);
  const std::uint64_t base = rng.next_u64();
  return {enc.output_dim(), kernels::serial::encode_crossbar_batch(enc, rows, base)};
}

std::string decrypt_text(const CipherText& ct, const nn::LinearDecoder& model) {
  if (model.head() != nn::Head::SoftmaxClassifier || model.out_dim() != kNumClasses)
    throw ShapeError("text decryption needs a 94-class classifier");
  std::string out;
  out.reserve(ct.blocks.size());
  for (const auto& block : ct.blocks) {
    if (block.dim() != model.in_dim()) throw ShapeError("ciphertext block dimension does not match decoder");
    out.push_back(char_of(model.predict(block)));
  }
  return out;
}

nn::ClassificationSet build_dataset(std::size_t n, const SecretKeyTable& keys, const hd::CrossbarEncoder& enc,
                                    RandomStream& rng) {
  check_encoder(keys, enc);
  if (n == 0) throw ValueError("dataset size must be at least 1");
  std::vector<std::size_t> classes(n);
  nn::ClassificationSet set;
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    classes[i] = rng.below(kNumClasses);
    set.labels[i] = static_cast<std::uint32_t>(classes[i]);
  }
  set.inputs = kernels::parallel::encode_crossbar_batch(enc, key_rows(classes, keys), rng.next_u64());
  return set;
}

UniquenessStats uniqueness_of(const std::vector<hd::BinaryHypervector>& codes) {
  UniquenessStats stats;
  stats.passes = codes.size();
  if (codes.empty()) return stats;
  stats.distinct_count = std::set<hd::BinaryHypervector>(codes.begin(), codes.end()).size();
  stats.distinct_fraction = static_cast<double>(stats.distinct_count) / static_cast<double>(codes.size());
  if (codes.size() < 2) return stats;
  const double dim = static_cast<double>(codes.front().dim());
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < codes.size(); ++a) {
    for (std::size_t b = a + 1; b < codes.size(); ++b) {
      total += static_cast<double>(hd::hamming(codes[a], codes[b])) / dim;
      ++pairs;
    }
  }
  stats.mean_pairwise_hamming = total / static_cast<double>(pairs);
  return stats;
}

UniquenessStats uniqueness_stats(char ch, std::size_t n_passes, const SecretKeyTable& keys,
                                 const hd::CrossbarEncoder& enc, RandomStream& rng) {
  if (n_passes < 2) throw ValueError("uniqueness statistics need at least two passes");
  const auto ct = encrypt_text(std::string(n_passes, ch), keys, enc, rng);
  return uniqueness_of(ct.blocks);
}

double evaluate_accuracy(const nn::LinearDecoder& model, const nn::ClassificationSet& test_set) {
  return nn::accuracy(model, test_set);
}

void write_ciphertext(std::ostream& out, const CipherText& ct) {
  out.write("HLCT", 4);
  io::write_u64_le(out, ct.blocks.size());
  io::write_u64_le(out, ct.dim);
  for (const auto& block : ct.blocks) {
    if (block.dim() != ct.dim) throw ShapeError("ciphertext blocks must share one dimension");
    const auto bytes = hd::packed_bytes(block);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw Error("failed to write ciphertext");
}

CipherText read_ciphertext(std::istream& in) {
  io::Reader reader(in);
  reader.expect_magic("HLCT");
  const std::uint64_t count = reader.u64_le("block count");
  const std::uint64_t dim = reader.u64_le("dim");
  if (dim == 0 && count != 0) throw FormatError("ciphertext declares zero-dimensional blocks", 12);
  CipherText ct;
  ct.dim = dim;
  const std::uint64_t block_bytes = (dim + 7) / 8;
  for (std::uint64_t b = 0; b < count; ++b) {
    const std::size_t at = reader.offset();
    const auto bytes = reader.bytes(block_bytes, "ciphertext block " + std::to_string(b));
    try {
      ct.blocks.push_back(hd::from_packed_bytes(dim, bytes));
    } catch (const FormatError& e) {
      throw FormatError(e.what(), at);
    }
  }
  if (!reader.at_end()) throw FormatError("trailing bytes after last ciphertext block", reader.offset());
  return ct;
}

}  // namespace hyperlock::text
