#pragma once

// Character-level en/decryption: each character maps to a short secret vector,
// the crossbar encoder turns it into a fresh binary hypervector, and a trained
// softmax decoder recovers the character.
//
// The charset is the 94 printable code points 32..125; class = code point - 32.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hyperlock/decoder.hpp"
#include "hyperlock/encoder.hpp"
#include "hyperlock/hypervector.hpp"
#include "hyperlock/matrix.hpp"
#include "hyperlock/random.hpp"

namespace hyperlock::text {

inline constexpr std::size_t kNumClasses = 94;
inline constexpr int kFirstCodePoint = 32;

constexpr std::optional<std::size_t> class_of(char ch) noexcept {
  const int code = static_cast<unsigned char>(ch);
  if (code < kFirstCodePoint || code >= kFirstCodePoint + static_cast<int>(kNumClasses)) return std::nullopt;
  return static_cast<std::size_t>(code - kFirstCodePoint);
}

constexpr char char_of(std::size_t cls) noexcept { return static_cast<char>(kFirstCodePoint + static_cast<int>(cls)); }

class SecretKeyTable {
 public:
  /// Entries i.i.d. uniform in [-1, 1].
  static SecretKeyTable generate(std::size_t key_dim, std::uint64_t seed);
  /// Validates shape, range and pairwise distinctness.
  static SecretKeyTable from_vectors(Matrix vectors, std::uint64_t seed);

  std::size_t key_dim() const noexcept { return vectors_.cols(); }
  std::uint64_t seed() const noexcept { return seed_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::span<const double> for_class(std::size_t cls) const { return vectors_.row(cls); }

  bool operator==(const SecretKeyTable&) const = default;

 private:
  SecretKeyTable(Matrix v, std::uint64_t seed) : vectors_(std::move(v)), seed_(seed) {}
  Matrix vectors_;
  std::uint64_t seed_;
};

SecretKeyTable generate_keys(std::size_t key_dim, std::uint64_t seed);

nlohmann::json to_json(const SecretKeyTable& keys);
SecretKeyTable keys_from_json(const nlohmann::json& j);

struct CipherText {
  std::size_t dim = 0;
  std::vector<hd::BinaryHypervector> blocks;
  bool operator==(const CipherText&) const = default;
};

/// Throws ValueError naming the index of the first character outside the charset.
std::vector<std::size_t> to_classes(std::string_view text);

/// Median pre-threshold output over `samples` uniformly drawn characters.
double calibrate_epsilon(const SecretKeyTable& keys, const hd::CrossbarEncoder& enc, std::size_t samples,
                         RandomStream& rng);

/// Block i is encoded from its own stream derived from one draw of rng and i.
CipherText encrypt_text(std::string_view text, const SecretKeyTable& keys, const hd::CrossbarEncoder& enc,
                        RandomStream& rng);
CipherText encrypt_text_serial(std::string_view text, const SecretKeyTable& keys, const hd::CrossbarEncoder& enc,
                               RandomStream& rng);

std::string decrypt_text(const CipherText& ct, const nn::LinearDecoder& model);

/// n characters drawn uniformly from the charset, each encrypted once.
nn::ClassificationSet build_dataset(std::size_t n, const SecretKeyTable& keys, const hd::CrossbarEncoder& enc,
                                    RandomStream& rng);

struct UniquenessStats {
  std::size_t passes = 0;
  std::size_t distinct_count = 0;
  double distinct_fraction = 0.0;
  double mean_pairwise_hamming = 0.0;  ///< normalised by D
};

UniquenessStats uniqueness_stats(char ch, std::size_t n_passes, const SecretKeyTable& keys,
                                 const hd::CrossbarEncoder& enc, RandomStream& rng);
/// Statistics over already encoded hypervectors.
UniquenessStats uniqueness_of(const std::vector<hd::BinaryHypervector>& codes);

double evaluate_accuracy(const nn::LinearDecoder& model, const nn::ClassificationSet& test_set);

/// HLCT: "HLCT", u64 LE block count, u64 LE dim, then blocks as packed HBV1 payloads.
void write_ciphertext(std::ostream& out, const CipherText& ct);
CipherText read_ciphertext(std::istream& in);

}  // namespace hyperlock::text
