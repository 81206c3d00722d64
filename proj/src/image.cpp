#include "hyperlock/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "hyperlock/binary_io.hpp"
#include "hyperlock/errors.hpp"

namespace hyperlock::image {

namespace {

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream& in, std::size_t& offset) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    ++offset;
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') ++offset;
      ++offset;
      continue;
    }
    if (!std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      break;
    }
  }
  while ((ch = in.peek()) != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(in.get()));
    ++offset;
  }
  if (tok.empty()) throw FormatError("truncated PGM header", offset);
  return tok;
}

std::size_t pgm_number(std::istream& in, std::size_t& offset, const char* what) {
  const std::size_t at = offset;
  const std::string tok = pgm_token(in, offset);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw FormatError(std::string("bad PGM ") + what, at);
  return std::stoul(tok);
}

}  // namespace

GrayImage GrayImage::filled(std::size_t width, std::size_t height, double value) {
  GrayImage img{width, height, std::vector<double>(width * height, value)};
  img.validate();
  return img;
}

void GrayImage::validate() const {
  if (width == 0 || height == 0) throw ShapeError("image dimensions must be positive");
  if (pixels.size() != width * height) throw ShapeError("pixel count does not match width*height");
  for (double p : pixels) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValueError("pixel value outside [0, 1]");
  }
}

GrayImage read_pgm(std::istream& in) {
  std::size_t offset = 0;
  if (pgm_token(in, offset) != "P5") throw FormatError("not a binary PGM (P5) file", 0);
  const std::size_t width = pgm_number(in, offset, "width");
  const std::size_t height = pgm_number(in, offset, "height");
  const std::size_t maxval = pgm_number(in, offset, "maxval");
  if (width == 0 || height == 0) throw FormatError("PGM dimensions must be positive", offset);
  if (maxval == 0 || maxval > 255) throw FormatError("PGM maxval must be in 1..255", offset);
  if (!std::isspace(in.get())) throw FormatError("missing whitespace after PGM maxval", offset);
  ++offset;
  io::Reader reader(in);
  std::vector<std::uint8_t> raw;
  try {
    raw = reader.bytes(width * height, "PGM pixel data");
  } catch (const FormatError& e) {
    throw FormatError("truncated PGM pixel data", offset + e.offset());
  }
  GrayImage img{width, height, std::vector<double>(raw.size())};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.pixels[i] = std::min(1.0, static_cast<double>(raw[i]) / static_cast<double>(maxval));
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  auto in = open_binary(path);
  return read_pgm(in);
}

void write_pgm(std::ostream& out, const GrayImage& img) {
  img.validate();
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(img.pixels[i] * 255.0)));
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error("failed to write PGM");
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_pgm(out, img);
}

std::vector<GrayImage> read_idx_images(std::istream& in, std::optional<std::size_t> limit) {
  io::Reader reader(in);
  if (reader.u32_be("magic") != 0x00000803) throw FormatError("not an IDX image file (magic 0x00000803)", 0);
  const std::size_t count = reader.u32_be("image count");
  const std::size_t rows = reader.u32_be("row count");
  const std::size_t cols = reader.u32_be("column count");
  if (rows == 0 || cols == 0) throw FormatError("IDX image dimensions must be positive", 8);
  const std::size_t n = limit ? std::min(*limit, count) : count;
  std::vector<GrayImage> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto raw = reader.bytes(rows * cols, "IDX image " + std::to_string(i));
    GrayImage img{cols, rows, std::vector<double>(raw.size())};
    for (std::size_t p = 0; p < raw.size(); ++p) img.pixels[p] = static_cast<double>(raw[p]) / 255.0;
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<GrayImage> read_idx_images(const std::filesystem::path& path, std::optional<std::size_t> limit) {
  auto in = open_binary(path);
  return read_idx_images(in, limit);
}

std::vector<std::uint8_t> read_idx_labels(std::istream& in, std::optional<std::size_t> limit) {
  io::Reader reader(in);
  if (reader.u32_be("magic") != 0x00000801) throw FormatError("not an IDX label file (magic 0x00000801)", 0);
  const std::size_t count = reader.u32_be("label count");
  return reader.bytes(limit ? std::min(*limit, count) : count, "IDX labels");
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path, std::optional<std::size_t> limit) {
  auto in = open_binary(path);
  return read_idx_labels(in, limit);
}

void write_idx_images(std::ostream& out, const std::vector<GrayImage>& images) {
  auto u32 = [&](std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    out.write(b, 4);
  };
  const std::size_t w = images.empty() ? 0 : images.front().width;
  const std::size_t h = images.empty() ? 0 : images.front().height;
  u32(0x00000803);
  u32(static_cast<std::uint32_t>(images.size()));
  u32(static_cast<std::uint32_t>(h));
  u32(static_cast<std::uint32_t>(w));
  for (const auto& img : images) {
    if (img.width != w || img.height != h) throw ShapeError("IDX images must share one size");
    for (double p : img.pixels) out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(p * 255.0))));
  }
}

hd::BinaryHypervector encrypt_image(const GrayImage& img, const hd::IdealEncoder& enc, RandomStream& rng) {
  img.validate();
  if (img.pixels.size() != enc.input_dim()) throw ShapeError("image size does not match encoder input dimension");
  return enc.encode(img.pixels, rng);
}

GrayImage decrypt_image(const hd::BinaryHypervector& bhv, const nn::LinearDecoder& model, std::size_t width,
                        std::size_t height) {
  if (model.head() != nn::Head::Regression) throw ShapeError("image decryption needs a regression head");
  if (model.out_dim() != width * height) throw ShapeError("decoder output does not match image size");
  auto pixels = model.forward(bhv);
  for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
  return GrayImage{width, height, std::move(pixels)};
}

BenchmarkEncoder::BenchmarkEncoder(hd::RandomProjection w, double sigma, hd::NoiseSampling sampling)
    : w_(std::move(w)), sigma_(sigma), sampling_(sampling) {
  if (w_.in_dim() != w_.out_dim()) throw ShapeError("benchmark encoder matrix must be square");
  if (!(std::isfinite(sigma) && sigma >= 0.0)) throw ConfigError("sigma", "must be nonnegative");
}

BenchmarkEncoder BenchmarkEncoder::create(std::size_t dim, double init_range, double sigma, std::uint64_t seed,
                                          hd::NoiseSampling sampling) {
  return BenchmarkEncoder(hd::RandomProjection::uniform(dim, dim, init_range, seed), sigma, sampling);
}

std::vector<double> BenchmarkEncoder::encode(std::span<const double> x, RandomStream& rng) const {
  std::vector<double> y(w_.out_dim());
  w_.apply_noisy(x, sigma_, rng, sampling_, y);
  return y;
}

GrayImage benchmark_roundtrip(const GrayImage& img, const BenchmarkEncoder& enc, const nn::LinearDecoder& model,
                              RandomStream& rng) {
  img.validate();
  if (img.pixels.size() != enc.dim()) throw ShapeError("image size does not match benchmark encoder");
  if (model.head() != nn::Head::Regression || model.in_dim() != enc.dim() || model.out_dim() != img.pixels.size())
    throw ShapeError("benchmark decoder shape does not match image");
  const auto y = enc.encode(img.pixels, rng);
  auto pixels = model.forward(std::span<const double>(y));
  for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
  return GrayImage{img.width, img.height, std::move(pixels)};
}

double image_rmse(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("images differ in size");
  return nn::loss_rmse(a.pixels, b.pixels);
}

std::vector<std::size_t> pixel_histogram(std::span<const double> values, Stage stage) {
  if (values.empty()) throw ValueError("histogram of an empty stage");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValueError("histogram input is not finite");
  }
  switch (stage) {
    case Stage::Plain: {
      std::vector<std::size_t> bins(256, 0);
      for (double v : values) ++bins[static_cast<std::size_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))];
      return bins;
    }
    case Stage::Expanded: {
      std::vector<std::size_t> bins(256, 0);
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      const double span = *hi - *lo;
      for (double v : values) {
        std::size_t b = span > 0.0 ? static_cast<std::size_t>((v - *lo) / span * 256.0) : 0;
        ++bins[std::min<std::size_t>(b, 255)];
      }
      return bins;
    }
    case Stage::Binary: {
      std::vector<std::size_t> bins(2, 0);
      for (double v : values) {
        if (v != 0.0 && v != 1.0) throw ValueError("binary-stage histogram needs values in {0, 1}");
        ++bins[v == 1.0 ? 1 : 0];
      }
      return bins;
    }
  }
  return {};
}

std::vector<std::size_t> pixel_histogram(const hd::BinaryHypervector& bits) {
  if (bits.dim() == 0) throw ValueError("histogram of an empty stage");
  const std::size_t ones = bits.popcount();
  return {bits.dim() - ones, ones};
}

const char* to_string(Direction d) noexcept {
  switch (d) {
    case Direction::Horizontal: return "horizontal";
    case Direction::Vertical: return "vertical";
    case Direction::Diagonal: return "diagonal";
  }
  return "?";
}

const char* to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Plain: return "plain";
    case Stage::Expanded: return "expanded";
    case Stage::Binary: return "binary";
  }
  return "?";
}

AdjacentCorrelation adjacent_pixel_correlation(std::span<const double> values, std::size_t width,
                                               std::size_t height, Direction direction, bool binary) {
  if (width == 0 || height == 0 || values.size() != width * height)
    throw ShapeError("layout does not match value count");
  const std::size_t dx = direction == Direction::Vertical ? 0 : 1;
  const std::size_t dy = direction == Direction::Horizontal ? 0 : 1;
  if (width <= dx || height <= dy) throw ShapeError("fewer than two pixels in the chosen direction");

  AdjacentCorrelation result;
  std::array<std::size_t, 4> counts{};
  // Two-pass Pearson for numerical stability.
  double mean_a = 0.0, mean_b = 0.0;
  const std::size_t n = (width - dx) * (height - dy);
  for (std::size_t y = 0; y + dy < height; ++y) {
    for (std::size_t x = 0; x + dx < width; ++x) {
      const double a = values[y * width + x];
      const double b = values[(y + dy) * width + x + dx];
      mean_a += a;
      mean_b += b;
      if (binary) {
        if ((a != 0.0 && a != 1.0) || (b != 0.0 && b != 1.0)) throw ValueError("binary stage needs values in {0, 1}");
        ++counts[(a == 1.0 ? 2 : 0) + (b == 1.0 ? 1 : 0)];
      }
    }
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t y = 0; y + dy < height; ++y) {
    for (std::size_t x = 0; x + dx < width; ++x) {
      const double a = values[y * width + x] - mean_a;
      const double b = values[(y + dy) * width + x + dx] - mean_b;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
    }
  }
  if (binary) result.pair_counts = counts;
  result.pairs = n;
  if (saa == 0.0 || sbb == 0.0)
    throw DegenerateStatisticError("adjacent-pixel correlation undefined: zero variance along " +
                                   std::string(to_string(direction)));
  result.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return result;
}

AdjacentCorrelation adjacent_pixel_correlation(const hd::BinaryHypervector& bits, std::size_t width,
                                               Direction direction) {
  if (width == 0 || bits.dim() % width != 0) throw ShapeError("hypervector length is not a multiple of width");
  const auto dense = bits.to_dense();
  return adjacent_pixel_correlation(dense, width, bits.dim() / width, direction, true);
}

}  // namespace hyperlock::image
