#pragma once

// Memristor crossbar with programmable non-idealities.
//
// A crossbar of rows x cols cells computes I_j = sum_i v_i * G_ij (Ohm's law plus
// current summation on the bit-line). Each read perturbs every free cell by fresh
// Gaussian noise with std sigma_frac * (G_on - G_off), clamped to [G_off, G_on].
// Stuck cells are pinned to a rail and never perturbed.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "hyperlock/matrix.hpp"
#include "hyperlock/random.hpp"

namespace hyperlock::xbar {

enum class CellState : std::uint8_t { Free, StuckOn, StuckOff };

struct CrossbarConfig {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double r_lrs = 1e3;  ///< ohms
  double r_hrs = 1e5;  ///< ohms
  double sigma_frac = 0.0;
  double p_stuck_on = 0.0;
  double p_stuck_off = 0.0;
  std::uint64_t seed = 0;

  double g_on() const noexcept { return 1.0 / r_lrs; }
  double g_off() const noexcept { return 1.0 / r_hrs; }
  double g_range() const noexcept { return g_on() - g_off(); }
  double noise_std() const noexcept { return sigma_frac * g_range(); }

  /// Throws ConfigError naming the first violated field.
  void validate() const;

  bool operator==(const CrossbarConfig&) const = default;
};

class Crossbar {
 public:
  /// Uniform conductances over [G_off, G_on] plus independently sampled stuck cells.
  static Crossbar random(const CrossbarConfig& config);

  /// Assemble from explicit state. Validates rail invariants.
  static Crossbar from_parts(const CrossbarConfig& config, Matrix g_target, std::vector<CellState> mask);

  const CrossbarConfig& config() const noexcept { return config_; }
  std::size_t rows() const noexcept { return config_.rows; }
  std::size_t cols() const noexcept { return config_.cols; }
  const Matrix& target() const noexcept { return g_target_; }
  CellState state(std::size_t r, std::size_t c) const noexcept { return mask_[r * config_.cols + c]; }
  std::span<const CellState> mask() const noexcept { return mask_; }
  std::size_t stuck_count() const noexcept;

  /// Clamp g_desired into the rail range on free cells; stuck cells keep their value.
  Crossbar program(const Matrix& g_desired) const;

  /// One noisy analog read: returns bit-line currents for word-line voltages v.
  std::vector<double> read_vmm(std::span<const double> v, RandomStream& rng) const;
  void read_vmm_into(std::span<const double> v, RandomStream& rng, std::span<double> out) const;

  /// Effective conductance matrix of one read. Consumes rng exactly as read_vmm does.
  Matrix sample_conductances(RandomStream& rng) const;

 private:
  Crossbar(CrossbarConfig config, Matrix g, std::vector<CellState> mask)
      : config_(config), g_target_(std::move(g)), mask_(std::move(mask)) {}

  CrossbarConfig config_;
  Matrix g_target_;
  std::vector<CellState> mask_;
};

nlohmann::json to_json(const CrossbarConfig& config);
CrossbarConfig config_from_json(const nlohmann::json& j);

/// Versioned crossbar document: config, row-major g_target, stuck mask as "F"/"N"/"P".
nlohmann::json to_json(const Crossbar& xbar);
Crossbar crossbar_from_json(const nlohmann::json& j);

}  // namespace hyperlock::xbar
