#pragma once

// Image en/decryption through the ideal stochastic encoder, the no-expansion
// benchmark pipeline, image I/O (binary PGM, IDX) and ciphertext pixel statistics.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hyperlock/decoder.hpp"
#include "hyperlock/encoder.hpp"
#include "hyperlock/hypervector.hpp"
#include "hyperlock/random.hpp"

namespace hyperlock::image {

/// Row-major grayscale image with pixels in [0, 1].
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  static GrayImage filled(std::size_t width, std::size_t height, double value);
  void validate() const;
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

// I/O ------------------------------------------------------------------------

/// Binary PGM (P5), maxval <= 255. Pixels are scaled to [0, 1] by maxval.
GrayImage read_pgm(std::istream& in);
GrayImage read_pgm(const std::filesystem::path& path);
/// Writes P5 with maxval 255, pixels rounded from [0, 1].
void write_pgm(std::ostream& out, const GrayImage& img);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// IDX image file (magic 0x00000803). Reads at most `limit` images when given.
std::vector<GrayImage> read_idx_images(std::istream& in, std::optional<std::size_t> limit = std::nullopt);
std::vector<GrayImage> read_idx_images(const std::filesystem::path& path,
                                       std::optional<std::size_t> limit = std::nullopt);
/// IDX label file (magic 0x00000801).
std::vector<std::uint8_t> read_idx_labels(std::istream& in, std::optional<std::size_t> limit = std::nullopt);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path,
                                          std::optional<std::size_t> limit = std::nullopt);
void write_idx_images(std::ostream& out, const std::vector<GrayImage>& images);

// Crypto ----------------------------------------------------------------------

hd::BinaryHypervector encrypt_image(const GrayImage& img, const hd::IdealEncoder& enc, RandomStream& rng);

/// Forward pass, clamp to [0, 1], reshape row-major.
GrayImage decrypt_image(const hd::BinaryHypervector& bhv, const nn::LinearDecoder& model, std::size_t width,
                        std::size_t height);

/// Square projection with per-pass Gaussian perturbation and no threshold.
class BenchmarkEncoder {
 public:
  BenchmarkEncoder(hd::RandomProjection w, double sigma, hd::NoiseSampling sampling = hd::NoiseSampling::Projected);
  static BenchmarkEncoder create(std::size_t dim, double init_range, double sigma, std::uint64_t seed,
                                 hd::NoiseSampling sampling = hd::NoiseSampling::Projected);

  const hd::RandomProjection& projection() const noexcept { return w_; }
  double sigma() const noexcept { return sigma_; }
  hd::NoiseSampling sampling() const noexcept { return sampling_; }
  std::size_t dim() const noexcept { return w_.in_dim(); }

  std::vector<double> encode(std::span<const double> x, RandomStream& rng) const;

 private:
  hd::RandomProjection w_;
  double sigma_;
  hd::NoiseSampling sampling_;
};

/// y = (W + N) x, then the regression model reconstructs; output clamped to [0, 1].
GrayImage benchmark_roundtrip(const GrayImage& img, const BenchmarkEncoder& enc, const nn::LinearDecoder& model,
                              RandomStream& rng);

/// Per-image RMSE between two equally sized images.
double image_rmse(const GrayImage& a, const GrayImage& b);

// Statistics ------------------------------------------------------------------

enum class Stage {
  Plain,     ///< values in [0, 1], binned as 8-bit levels round(v * 255)
  Expanded,  ///< arbitrary reals, 256 equal bins over [min, max]
  Binary,    ///< {0, 1}, two bins
};

std::vector<std::size_t> pixel_histogram(std::span<const double> values, Stage stage);
std::vector<std::size_t> pixel_histogram(const hd::BinaryHypervector& bits);

enum class Direction { Horizontal, Vertical, Diagonal };

const char* to_string(Direction d) noexcept;
const char* to_string(Stage s) noexcept;

struct AdjacentCorrelation {
  double r = 0.0;
  std::size_t pairs = 0;
  /// Counts of (0,0), (0,1), (1,0), (1,1) pairs for binary data.
  std::optional<std::array<std::size_t, 4>> pair_counts;
};

/// Pearson correlation over all adjacent pixel pairs in `direction` of a
/// width x height row-major layout. Throws DegenerateStatisticError when either
/// side of the pairs has zero variance.
AdjacentCorrelation adjacent_pixel_correlation(std::span<const double> values, std::size_t width,
                                               std::size_t height, Direction direction, bool binary = false);
/// Binary stage: hypervector bits laid out row-major with the given width.
AdjacentCorrelation adjacent_pixel_correlation(const hd::BinaryHypervector& bits, std::size_t width,
                                               Direction direction);

}  // namespace hyperlock::image
