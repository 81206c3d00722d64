#include "hyperlock/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hyperlock/errors.hpp"

namespace hyperlock::xbar {

namespace {

constexpr int kFormatVersion = 1;

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void CrossbarConfig::validate() const {
  if (rows == 0) throw ConfigError("rows", "must be positive");
  if (cols == 0) throw ConfigError("cols", "must be positive");
  if (!(std::isfinite(r_lrs) && r_lrs > 0.0)) throw ConfigError("r_lrs", "must be a positive resistance");
  if (!(std::isfinite(r_hrs) && r_hrs > r_lrs)) throw ConfigError("r_hrs", "must exceed r_lrs");
  if (!(std::isfinite(sigma_frac) && sigma_frac >= 0.0)) throw ConfigError("sigma_frac", "must be nonnegative");
  if (!is_probability(p_stuck_on)) throw ConfigError("p_stuck_on", "must lie in [0, 1]");
  if (!is_probability(p_stuck_off)) throw ConfigError("p_stuck_off", "must lie in [0, 1]");
  if (p_stuck_on + p_stuck_off > 1.0) throw ConfigError("p_stuck_off", "p_stuck_on + p_stuck_off exceeds 1");
}

Crossbar Crossbar::random(const CrossbarConfig& config) {
  config.validate();
  const double g_on = config.g_on();
  const double g_off = config.g_off();
  RandomStream rng(derive_seed(config.seed, "construct"));

  Matrix g(config.rows, config.cols);
  std::vector<CellState> mask(config.rows * config.cols, CellState::Free);
  auto values = g.values();
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    values[idx] = rng.uniform(g_off, g_on);
    const double u = rng.uniform();
    if (u < config.p_stuck_on) {
      mask[idx] = CellState::StuckOn;
      values[idx] = g_on;
    } else if (u < config.p_stuck_on + config.p_stuck_off) {
      mask[idx] = CellState::StuckOff;
      values[idx] = g_off;
    }
  }
  return Crossbar(config, std::move(g), std::move(mask));
}

Crossbar Crossbar::from_parts(const CrossbarConfig& config, Matrix g_target, std::vector<CellState> mask) {
  config.validate();
  if (g_target.rows() != config.rows || g_target.cols() != config.cols)
    throw ShapeError("g_target shape does not match crossbar geometry");
  if (mask.size() != config.rows * config.cols) throw ShapeError("stuck mask size does not match crossbar geometry");
  const double g_on = config.g_on();
  const double g_off = config.g_off();
  auto values = g_target.values();
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    const double g = values[idx];
    if (!(g >= g_off && g <= g_on)) throw ConfigError("g_target", "conductance outside [G_off, G_on]");
    if (mask[idx] == CellState::StuckOn && g != g_on) throw ConfigError("g_target", "stuck-on cell not at G_on");
    if (mask[idx] == CellState::StuckOff && g != g_off) throw ConfigError("g_target", "stuck-off cell not at G_off");
  }
  return Crossbar(config, std::move(g_target), std::move(mask));
}

std::size_t Crossbar::stuck_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(mask_.begin(), mask_.end(), [](CellState s) { return s != CellState::Free; }));
}

Crossbar Crossbar::program(const Matrix& g_desired) const {
  if (g_desired.rows() != rows() || g_desired.cols() != cols())
    throw ShapeError("programmed matrix shape does not match crossbar geometry");
  Matrix g = g_target_;
  auto dst = g.values();
  auto src = g_desired.values();
  const double g_on = config_.g_on();
  const double g_off = config_.g_off();
  for (std::size_t idx = 0; idx < dst.size(); ++idx) {
    if (mask_[idx] == CellState::Free) dst[idx] = std::clamp(src[idx], g_off, g_on);
  }
  return Crossbar(config_, std::move(g), mask_);
}

std::vector<double> Crossbar::read_vmm(std::span<const double> v, RandomStream& rng) const {
  std::vector<double> out(cols());
  read_vmm_into(v, rng, out);
  return out;
}

// Noise is drawn row-major over free cells only; sample_conductances must follow the
// same order so instrumented reads reproduce read_vmm exactly.
void Crossbar::read_vmm_into(std::span<const double> v, RandomStream& rng, std::span<double> out) const {
  if (v.size() != rows()) throw ShapeError("input length does not match crossbar rows");
  if (out.size() != cols()) throw ShapeError("output length does not match crossbar cols");
  std::fill(out.begin(), out.end(), 0.0);
  const double g_on = config_.g_on();
  const double g_off = config_.g_off();
  const double noise = config_.noise_std();
  const std::size_t n = cols();
  for (std::size_t i = 0; i < rows(); ++i) {
    const double vi = v[i];
    const auto g_row = g_target_.row(i);
    const CellState* m_row = mask_.data() + i * n;
    if (noise == 0.0) {
      for (std::size_t j = 0; j < n; ++j) out[j] += vi * g_row[j];
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double g = g_row[j];
      if (m_row[j] == CellState::Free) g = std::clamp(g + noise * rng.normal(), g_off, g_on);
      out[j] += vi * g;
    }
  }
}

Matrix Crossbar::sample_conductances(RandomStream& rng) const {
  Matrix g = g_target_;
  const double noise = config_.noise_std();
  if (noise == 0.0) return g;
  const double g_on = config_.g_on();
  const double g_off = config_.g_off();
  auto values = g.values();
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    if (mask_[idx] == CellState::Free) values[idx] = std::clamp(values[idx] + noise * rng.normal(), g_off, g_on);
  }
  return g;
}

nlohmann::json to_json(const CrossbarConfig& c) {
  return {{"rows", c.rows},           {"cols", c.cols},
          {"r_lrs", c.r_lrs},         {"r_hrs", c.r_hrs},
          {"sigma_frac", c.sigma_frac}, {"p_stuck_on", c.p_stuck_on},
          {"p_stuck_off", c.p_stuck_off}, {"seed", c.seed}};
}

CrossbarConfig config_from_json(const nlohmann::json& j) {
  CrossbarConfig c;
  try {
    c.rows = j.at("rows").get<std::size_t>();
    c.cols = j.at("cols").get<std::size_t>();
    c.r_lrs = j.value("r_lrs", c.r_lrs);
    c.r_hrs = j.value("r_hrs", c.r_hrs);
    c.sigma_frac = j.value("sigma_frac", c.sigma_frac);
    c.p_stuck_on = j.value("p_stuck_on", c.p_stuck_on);
    c.p_stuck_off = j.value("p_stuck_off", c.p_stuck_off);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("crossbar", e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const Crossbar& xbar) {
  nlohmann::json mask = nlohmann::json::array();
  for (CellState s : xbar.mask()) {
    mask.push_back(s == CellState::Free ? "F" : s == CellState::StuckOn ? "N" : "P");
  }
  const auto values = xbar.target().values();
  return {{"format", "hyperlock-crossbar"},
          {"version", kFormatVersion},
          {"config", to_json(xbar.config())},
          {"g_target", std::vector<double>(values.begin(), values.end())},
          {"stuck_mask", std::move(mask)}};
}

Crossbar crossbar_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "hyperlock-crossbar") throw FormatError("not a crossbar document");
    if (j.value("version", 0) != kFormatVersion) throw FormatError("unsupported crossbar document version");
    const CrossbarConfig config = config_from_json(j.at("config"));
    const auto values = j.at("g_target").get<std::vector<double>>();
    const auto codes = j.at("stuck_mask").get<std::vector<std::string>>();
    if (values.size() != config.rows * config.cols || codes.size() != values.size())
      throw FormatError("crossbar arrays do not match rows*cols");
    Matrix g(config.rows, config.cols);
    std::copy(values.begin(), values.end(), g.values().begin());
    std::vector<CellState> mask(codes.size());
    for (std::size_t idx = 0; idx < codes.size(); ++idx) {
      if (codes[idx] == "F") mask[idx] = CellState::Free;
      else if (codes[idx] == "N") mask[idx] = CellState::StuckOn;
      else if (codes[idx] == "P") mask[idx] = CellState::StuckOff;
      else throw FormatError("unknown stuck-mask code '" + codes[idx] + "'");
    }
    return Crossbar::from_parts(config, std::move(g), std::move(mask));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("crossbar document: ") + e.what());
  }
}

}  // namespace hyperlock::xbar
