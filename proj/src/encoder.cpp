#include "hyperlock/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hyperlock/errors.hpp"
#include "hyperlock/kernels.hpp"

namespace hyperlock::hd {

BinaryHypervector threshold_binarize(std::span<const double> y, double epsilon) {
  if (!std::isfinite(epsilon)) throw ValueError("threshold epsilon is not finite");
  BinaryHypervector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw ValueError("non-finite pre-threshold value at index " + std::to_string(i));
    if (y[i] >= epsilon) out.set(i, true);
  }
  return out;
}

void EncoderParams::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim", "must be positive");
  if (multiplier == 0) throw ConfigError("multiplier", "must be positive");
  if (!std::isfinite(epsilon)) throw ConfigError("epsilon", "must be finite");
}

const char* to_string(Readout r) noexcept {
  return r == Readout::Raw ? "raw" : "midpoint-reference";
}

Readout readout_from_string(std::string_view s) {
  if (s == "raw") return Readout::Raw;
  if (s == "midpoint-reference") return Readout::MidpointReference;
  throw ConfigError("readout", "expected \"raw\" or \"midpoint-reference\"");
}

std::vector<double> CrossbarEncoder::preactivation(std::span<const double> x, RandomStream& rng) const {
  std::vector<double> y = crossbar.read_vmm(x, rng);
  if (readout == Readout::MidpointReference) {
    const auto& c = crossbar.config();
    double sum = 0.0;
    for (double v : x) sum += v;
    const double reference = sum * 0.5 * (c.g_on() + c.g_off());
    for (double& yi : y) yi -= reference;
  }
  return y;
}

BinaryHypervector CrossbarEncoder::encode(std::span<const double> x, RandomStream& rng) const {
  return threshold_binarize(preactivation(x, rng), epsilon);
}

BinaryHypervector encode_crossbar(const xbar::Crossbar& xbar, std::span<const double> x, double epsilon,
                                  RandomStream& rng, Readout readout) {
  return CrossbarEncoder{xbar, epsilon, readout}.encode(x, rng);
}

RandomProjection RandomProjection::uniform(std::size_t out_dim, std::size_t in_dim, double range, std::uint64_t seed,
                                           std::optional<bool> materialize) {
  if (out_dim == 0 || in_dim == 0) throw ConfigError("projection", "dimensions must be positive");
  if (!(std::isfinite(range) && range > 0.0)) throw ConfigError("init_range", "must be positive");
  RandomProjection p;
  p.out_dim_ = out_dim;
  p.in_dim_ = in_dim;
  p.range_ = range;
  p.seed_ = seed;
  const bool dense = materialize.value_or(out_dim * in_dim <= kMaterializeLimit);
  if (dense) {
    Matrix m(out_dim, in_dim);
    for (std::size_t r = 0; r < out_dim; ++r) {
      for (std::size_t c = 0; c < in_dim; ++c) m(r, c) = p.generated(r, c);
    }
    p.dense_ = std::move(m);
  }
  return p;
}

RandomProjection RandomProjection::from_matrix(Matrix w) {
  if (w.rows() == 0 || w.cols() == 0) throw ConfigError("projection", "matrix must be nonempty");
  RandomProjection p;
  p.out_dim_ = w.rows();
  p.in_dim_ = w.cols();
  double max_abs = 0.0;
  for (double v : w.values()) {
    if (!std::isfinite(v)) throw ValueError("projection matrix has a non-finite entry");
    max_abs = std::max(max_abs, std::abs(v));
  }
  p.range_ = max_abs;
  p.dense_ = std::move(w);
  return p;
}

void RandomProjection::apply(std::span<const double> x, std::span<double> y) const {
  kernels::parallel::project(*this, x, y);
}

void RandomProjection::apply_noisy(std::span<const double> x, double sigma, RandomStream& rng,
                                   NoiseSampling sampling, std::span<double> y) const {
  if (x.size() != in_dim_ || y.size() != out_dim_) throw ShapeError("projection operand shape mismatch");
  if (sigma == 0.0) {
    kernels::parallel::project(*this, x, y);
    return;
  }
  if (sampling == NoiseSampling::FullMatrix) {
    for (std::size_t r = 0; r < out_dim_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < in_dim_; ++c) acc += (weight(r, c) + sigma * rng.normal()) * x[c];
      y[r] = acc;
    }
    return;
  }
  kernels::parallel::project(*this, x, y);
  double norm2 = 0.0;
  for (double v : x) norm2 += v * v;
  const double scale = sigma * std::sqrt(norm2);
  for (std::size_t r = 0; r < out_dim_; ++r) y[r] += scale * rng.normal();
}

IdealEncoder::IdealEncoder(RandomProjection w, double sigma, double epsilon, NoiseSampling sampling)
    : w_(std::move(w)), sigma_(sigma), epsilon_(epsilon), sampling_(sampling) {
  if (!(std::isfinite(sigma) && sigma >= 0.0)) throw ConfigError("sigma", "must be nonnegative");
  if (!std::isfinite(epsilon)) throw ConfigError("epsilon", "must be finite");
}

IdealEncoder IdealEncoder::create(const EncoderParams& params, double init_range, double sigma, std::uint64_t seed,
                                  NoiseSampling sampling) {
  params.validate();
  return IdealEncoder(RandomProjection::uniform(params.output_dim(), params.input_dim, init_range, seed), sigma,
                      params.epsilon, sampling);
}

IdealEncoder IdealEncoder::with_epsilon(double epsilon) const {
  return IdealEncoder(w_, sigma_, epsilon, sampling_);
}

std::vector<double> IdealEncoder::preactivation(std::span<const double> x, RandomStream& rng) const {
  std::vector<double> y(w_.out_dim());
  w_.apply_noisy(x, sigma_, rng, sampling_, y);
  return y;
}

BinaryHypervector IdealEncoder::encode(std::span<const double> x, RandomStream& rng) const {
  return threshold_binarize(preactivation(x, rng), epsilon_);
}

BinaryHypervector encode_ideal(const IdealEncoder& enc, std::span<const double> x, RandomStream& rng) {
  return enc.encode(x, rng);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValueError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + 0.5 * (upper - lower);
}

double calibrate_epsilon(const PreactivationFn& encode_pre_threshold, const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw ValueError("epsilon calibration needs at least one sample");
  std::vector<double> all;
  for (const auto& x : samples) {
    const auto y = encode_pre_threshold(x);
    all.insert(all.end(), y.begin(), y.end());
  }
  return median(std::move(all));
}

}  // namespace hyperlock::hd
