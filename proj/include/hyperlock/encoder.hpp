#pragma once

// Hyperdimensional stochastic encoder: noisy projection of a short vector to D
// dimensions followed by a global threshold. Two backends:
//  - CrossbarEncoder: the projection is an analog read of a simulated crossbar.
//  - IdealEncoder: y = (W + N) x with W fixed uniform and N fresh Gaussian per pass.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "hyperlock/crossbar.hpp"
#include "hyperlock/hypervector.hpp"
#include "hyperlock/matrix.hpp"
#include "hyperlock/random.hpp"

namespace hyperlock::hd {

/// bit_i = 1 iff y_i >= epsilon. Non-finite entries raise ValueError.
BinaryHypervector threshold_binarize(std::span<const double> y, double epsilon);

struct EncoderParams {
  std::size_t input_dim = 0;
  std::size_t multiplier = 1;
  double epsilon = 0.0;

  std::size_t output_dim() const noexcept { return input_dim * multiplier; }
  void validate() const;
};

/// How a crossbar read is turned into a signed pre-threshold value.
enum class Readout {
  Raw,                ///< bit-line current as is
  MidpointReference,  ///< minus the current of a reference column at (G_on + G_off) / 2
};

const char* to_string(Readout r) noexcept;
Readout readout_from_string(std::string_view s);

struct CrossbarEncoder {
  xbar::Crossbar crossbar;
  double epsilon = 0.0;
  Readout readout = Readout::MidpointReference;

  std::size_t input_dim() const noexcept { return crossbar.rows(); }
  std::size_t output_dim() const noexcept { return crossbar.cols(); }

  std::vector<double> preactivation(std::span<const double> x, RandomStream& rng) const;
  BinaryHypervector encode(std::span<const double> x, RandomStream& rng) const;
};

/// encode_crossbar as a free function: threshold(read(x)) with the given readout.
BinaryHypervector encode_crossbar(const xbar::Crossbar& xbar, std::span<const double> x, double epsilon,
                                  RandomStream& rng, Readout readout = Readout::MidpointReference);

/// Noise sampling for the ideal encoder.
enum class NoiseSampling {
  FullMatrix,  ///< draw every entry of the D x k Gaussian matrix N and form (W + N) x
  Projected,   ///< draw N x directly as sigma * ||x|| * z, z ~ N(0, I_D); same distribution
};

/// Fixed random matrix W (out x in), entries uniform in (-range, range).
///
/// Entries are a pure function of (seed, index), so a projection can either hold
/// the materialized matrix or regenerate entries on demand with identical values.
/// Hand-set matrices (from_matrix) are always materialized.
class RandomProjection {
 public:
  /// Matrices larger than this many entries are not materialized by default.
  static constexpr std::size_t kMaterializeLimit = std::size_t{1} << 24;

  static RandomProjection uniform(std::size_t out_dim, std::size_t in_dim, double range, std::uint64_t seed,
                                  std::optional<bool> materialize = std::nullopt);
  static RandomProjection from_matrix(Matrix w);

  std::size_t out_dim() const noexcept { return out_dim_; }
  std::size_t in_dim() const noexcept { return in_dim_; }
  double range() const noexcept { return range_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool materialized() const noexcept { return dense_.has_value(); }
  const std::optional<Matrix>& dense() const noexcept { return dense_; }

  double weight(std::size_t row, std::size_t col) const noexcept {
    if (dense_) return (*dense_)(row, col);
    return generated(row, col);
  }

  /// y = W x (noise free).
  void apply(std::span<const double> x, std::span<double> y) const;

  /// y = (W + N) x with N_ij ~ Normal(0, sigma), fresh for this call.
  void apply_noisy(std::span<const double> x, double sigma, RandomStream& rng, NoiseSampling sampling,
                   std::span<double> y) const;

 private:
  double generated(std::size_t row, std::size_t col) const noexcept {
    return range_ * (2.0 * counter_uniform(seed_, row * in_dim_ + col) - 1.0);
  }

  std::size_t out_dim_ = 0;
  std::size_t in_dim_ = 0;
  double range_ = 0.0;
  std::uint64_t seed_ = 0;
  std::optional<Matrix> dense_;
};

class IdealEncoder {
 public:
  IdealEncoder(RandomProjection w, double sigma, double epsilon,
               NoiseSampling sampling = NoiseSampling::Projected);

  /// W uniform in (-init_range, init_range), D = params.output_dim().
  static IdealEncoder create(const EncoderParams& params, double init_range, double sigma, std::uint64_t seed,
                             NoiseSampling sampling = NoiseSampling::Projected);

  const RandomProjection& projection() const noexcept { return w_; }
  double sigma() const noexcept { return sigma_; }
  double epsilon() const noexcept { return epsilon_; }
  NoiseSampling sampling() const noexcept { return sampling_; }
  std::size_t input_dim() const noexcept { return w_.in_dim(); }
  std::size_t output_dim() const noexcept { return w_.out_dim(); }

  IdealEncoder with_epsilon(double epsilon) const;

  std::vector<double> preactivation(std::span<const double> x, RandomStream& rng) const;
  BinaryHypervector encode(std::span<const double> x, RandomStream& rng) const;

 private:
  RandomProjection w_;
  double sigma_;
  double epsilon_;
  NoiseSampling sampling_;
};

BinaryHypervector encode_ideal(const IdealEncoder& enc, std::span<const double> x, RandomStream& rng);

using PreactivationFn = std::function<std::vector<double>(std::span<const double>)>;

/// Median of every pre-threshold output over all samples. Throws ValueError if empty.
double calibrate_epsilon(const PreactivationFn& encode_pre_threshold, const std::vector<std::vector<double>>& samples);

/// Median of a value list (mean of the two middle values for even counts).
double median(std::vector<double> values);

}  // namespace hyperlock::hd
