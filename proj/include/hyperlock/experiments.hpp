#pragma once

// Declarative experiment sweeps: Table 1 style crossbar configurations, grid
// searches over (dimension multiplier x sigma) for text and image tasks, the
// image statistics demo, and CSV/JSON report emission.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hyperlock/crossbar.hpp"
#include "hyperlock/decoder.hpp"
#include "hyperlock/encoder.hpp"
#include "hyperlock/image.hpp"
#include "hyperlock/text_crypto.hpp"

namespace hyperlock::exp {

enum class Task { Text, Image };

const char* to_string(Task t) noexcept;
Task task_from_string(std::string_view s);

struct DatasetSizes {
  std::size_t train = 20000;
  std::size_t val = 5000;
  std::size_t test = 10000;
  std::size_t calibration = 2000;

  static DatasetSizes full_scale() { return {100000, 100000, 10000, 2000}; }
  bool operator==(const DatasetSizes&) const = default;
};

// Text ------------------------------------------------------------------------

struct TextCellSpec {
  std::string id;
  xbar::CrossbarConfig crossbar;  ///< rows = key dimension, cols = hypervector dimension
  DatasetSizes sizes;
  nn::TrainConfig train;
  std::uint64_t seed = 0;  ///< all randomness of the cell derives from this
  hd::Readout readout = hd::Readout::MidpointReference;
  std::size_t uniqueness_passes = 200;
  char uniqueness_char = 'A';
};

struct ReportRow {
  std::string cell;
  std::string model = "bhv";  ///< "bhv" or "benchmark"
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t multiplier = 0;
  double sigma = 0.0;
  double p_on = 0.0;
  double p_off = 0.0;
  double metric = 0.0;  ///< test accuracy (text) or mean reconstruction RMSE (image)
  double distinct_fraction = 0.0;
  double mean_hamming = 0.0;
  std::size_t epochs = 0;
  double wall_time = 0.0;
  bool good = false;  ///< text: metric >= kGoodAccuracy
  std::string status = "ok";

  bool operator==(const ReportRow&) const = default;
};

inline constexpr double kGoodAccuracy = 0.999;

struct ExperimentReport {
  Task task = Task::Text;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ReportRow> rows;
};

/// Everything needed to decrypt with, or re-evaluate, a trained text cell.
struct TextArtifacts {
  xbar::Crossbar crossbar;
  text::SecretKeyTable keys;
  hd::CrossbarEncoder encoder;
  nn::ModelFile model;
  nn::TrainReport train_report;
  nn::ClassificationSet test_set;
};

struct TextCellOutcome {
  ReportRow row;
  std::optional<TextArtifacts> artifacts;
};

/// Calibrate epsilon, build datasets, train, and evaluate on a held-out test set.
/// Throws on any stage failure.
TextArtifacts train_text_model(xbar::Crossbar crossbar, text::SecretKeyTable keys, hd::Readout readout,
                               const DatasetSizes& sizes, const nn::TrainConfig& train, std::uint64_t seed);

/// Build crossbar, keys, calibrate epsilon, build datasets, train, evaluate.
/// Never throws: failures are reported through row.status.
TextCellOutcome run_text_cell(const TextCellSpec& spec, bool keep_artifacts = false);

/// The six published crossbar configurations; seeds derived from master_seed.
std::vector<TextCellSpec> reference_table(std::uint64_t master_seed, const DatasetSizes& sizes,
                                       const nn::TrainConfig& train);
/// Noise-free, fault-free 10 x 500 control configuration.
TextCellSpec control_cell(std::uint64_t master_seed, const DatasetSizes& sizes, const nn::TrainConfig& train);

nlohmann::json to_json(const TextCellSpec& spec);
TextCellSpec text_cell_from_json(const nlohmann::json& j, const TextCellSpec& defaults);

ExperimentReport run_table1(const std::vector<TextCellSpec>& cells, std::size_t jobs);

// Image -------------------------------------------------------------------------

struct ImageSettings {
  std::filesystem::path images;  ///< IDX image file
  std::size_t train = 1600;
  std::size_t val = 200;
  std::size_t test = 200;
  double init_range = 2.0;
  std::string trainer = "ridge";  ///< "ridge" or "sgd"
  std::vector<double> lambdas = {1e-10, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::size_t train_passes = 2;   ///< noisy encodings per training image (1 when sigma = 0)
  bool benchmark = true;
};

struct ImageData {
  std::vector<image::GrayImage> train;
  std::vector<image::GrayImage> val;
  std::vector<image::GrayImage> test;
  std::size_t width = 0;
  std::size_t height = 0;
};

ImageData load_image_data(const ImageSettings& settings);

struct ImageCellSpec {
  std::string id;
  std::string model = "bhv";  ///< "bhv" or "benchmark"
  std::size_t multiplier = 1;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  ImageSettings settings;
  nn::TrainConfig sgd;
};

ReportRow run_image_cell(const ImageCellSpec& spec, const ImageData& data);

// Grid --------------------------------------------------------------------------

struct ExperimentSpec {
  Task task = Task::Text;
  xbar::CrossbarConfig crossbar;  ///< resistances and stuck probabilities; geometry comes from the sweep
  std::size_t key_dim = 10;
  std::vector<std::size_t> multipliers;
  std::vector<double> sigmas;
  DatasetSizes sizes;
  nn::TrainConfig train;
  std::uint64_t master_seed = 0;
  std::string output = "out";
  hd::Readout readout = hd::Readout::MidpointReference;
  std::size_t uniqueness_passes = 200;
  ImageSettings image;

  void validate() const;
  /// Stable child seed for a grid cell.
  std::uint64_t cell_seed(std::string_view cell_id) const;
};

/// Relative image paths are resolved against base_dir.
ExperimentSpec spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentSpec& spec);

std::vector<TextCellSpec> grid_text_cells(const ExperimentSpec& spec);
std::vector<ImageCellSpec> grid_image_cells(const ExperimentSpec& spec);

ExperimentReport run_grid(const ExperimentSpec& spec, std::size_t jobs);

// Image statistics demo --------------------------------------------------------------

struct StageStats {
  std::string stage;
  std::string direction;
  double r = 0.0;
  std::optional<std::array<std::size_t, 4>> pair_counts;
  std::string status = "ok";
};

struct ImageDemoResult {
  image::GrayImage plain;
  std::vector<double> expanded;  ///< pre-threshold values, width x (m * height)
  hd::BinaryHypervector binary;
  std::size_t width = 0;
  std::size_t expanded_height = 0;
  double epsilon = 0.0;
  std::vector<std::size_t> histogram_plain;
  std::vector<std::size_t> histogram_expanded;
  std::vector<std::size_t> histogram_binary;
  std::vector<StageStats> correlations;
};

ImageDemoResult run_image_demo(const image::GrayImage& img, std::size_t multiplier, double sigma, double init_range,
                               std::uint64_t seed);
std::string correlations_csv(const std::vector<StageStats>& stats);
std::string histograms_csv(const ImageDemoResult& demo);
/// Min-max normalised rendering of the expanded stage.
image::GrayImage render_expanded(const ImageDemoResult& demo);
image::GrayImage render_binary(const ImageDemoResult& demo);

// Reports -----------------------------------------------------------------------

void sort_rows(std::vector<ReportRow>& rows);
std::string to_csv(const ExperimentReport& report, bool include_wall_time = true);
nlohmann::json to_json(const ExperimentReport& report, bool include_wall_time = true);
ExperimentReport report_from_json(const nlohmann::json& j);
/// Inverse of to_csv (rows only).
std::vector<ReportRow> rows_from_csv(std::string_view csv);

}  // namespace hyperlock::exp
