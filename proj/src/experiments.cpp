#include "hyperlock/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "hyperlock/errors.hpp"
#include "hyperlock/kernels.hpp"

namespace hyperlock::exp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

// Runs f(i) for i in [0, n) on at most `jobs` worker threads.
template <class F>
void run_pool(std::size_t jobs, std::size_t n, F&& f) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

ReportRow base_row(const TextCellSpec& spec) {
  ReportRow row;
  row.cell = spec.id;
  row.rows = spec.crossbar.rows;
  row.cols = spec.crossbar.cols;
  row.multiplier = spec.crossbar.rows == 0 ? 0 : spec.crossbar.cols / spec.crossbar.rows;
  row.sigma = spec.crossbar.sigma_frac;
  row.p_on = spec.crossbar.p_stuck_on;
  row.p_off = spec.crossbar.p_stuck_off;
  return row;
}

std::string cell_key(const char* model, std::size_t multiplier, double sigma) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s/m=%04zu/sigma=%.4f", model, multiplier, sigma);
  return buf;
}

nn::RegressionSet regression_targets(const std::vector<image::GrayImage>& images, std::size_t passes) {
  nn::RegressionSet set;
  const std::size_t k = images.front().pixels.size();
  set.targets = Matrix(images.size() * passes, k);
  for (std::size_t p = 0; p < passes; ++p) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      std::copy(images[i].pixels.begin(), images[i].pixels.end(), set.targets.row(p * images.size() + i).begin());
    }
  }
  return set;
}

Matrix stack_pixels(const std::vector<image::GrayImage>& images, std::size_t passes) {
  const std::size_t k = images.front().pixels.size();
  Matrix m(images.size() * passes, k);
  for (std::size_t p = 0; p < passes; ++p) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      std::copy(images[i].pixels.begin(), images[i].pixels.end(), m.row(p * images.size() + i).begin());
    }
  }
  return m;
}

Matrix bits_to_dense(const std::vector<hd::BinaryHypervector>& codes) {
  Matrix m(codes.size(), codes.empty() ? 0 : codes.front().dim());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (auto j : codes[i].active_indices()) m(i, j) = 1.0;
  }
  return m;
}

}  // namespace

const char* to_string(Task t) noexcept { return t == Task::Text ? "text" : "image"; }

Task task_from_string(std::string_view s) {
  if (s == "text") return Task::Text;
  if (s == "image") return Task::Image;
  throw ConfigError("task", "expected \"text\" or \"image\"");
}

TextArtifacts train_text_model(xbar::Crossbar crossbar, text::SecretKeyTable keys, hd::Readout readout,
                               const DatasetSizes& sizes, const nn::TrainConfig& train, std::uint64_t seed) {
  if (keys.key_dim() != crossbar.rows()) throw ShapeError("key dimension must equal crossbar rows");
  hd::CrossbarEncoder enc{crossbar, 0.0, readout};
  RandomStream rng(derive_seed(seed, "data"));
  enc.epsilon = text::calibrate_epsilon(keys, enc, sizes.calibration, rng);
  auto train_set = text::build_dataset(sizes.train, keys, enc, rng);
  auto val_set = text::build_dataset(sizes.val, keys, enc, rng);
  auto test_set = text::build_dataset(sizes.test, keys, enc, rng);

  nn::TrainConfig tc = train;
  tc.seed = derive_seed(seed, "train");
  auto init = nn::LinearDecoder::initialized(text::kNumClasses, crossbar.cols(), nn::Head::SoftmaxClassifier,
                                             derive_seed(seed, "init"));
  auto result = nn::train(std::move(init), train_set, val_set, tc);
  nlohmann::json extra = {{"readout", hd::to_string(readout)},
                          {"key_dim", keys.key_dim()},
                          {"crossbar_cols", crossbar.cols()}};
  nn::ModelFile model{std::move(result.model), enc.epsilon, tc, seed, std::move(extra)};
  return TextArtifacts{std::move(crossbar), std::move(keys), enc, std::move(model), std::move(result.report),
                       std::move(test_set)};
}

TextCellOutcome run_text_cell(const TextCellSpec& spec, bool keep_artifacts) {
  const auto t0 = Clock::now();
  TextCellOutcome outcome{base_row(spec), std::nullopt};
  ReportRow& row = outcome.row;
  try {
    xbar::CrossbarConfig cfg = spec.crossbar;
    cfg.seed = derive_seed(spec.seed, "crossbar");
    auto art = train_text_model(xbar::Crossbar::random(cfg), text::generate_keys(cfg.rows, derive_seed(spec.seed, "keys")),
                                spec.readout, spec.sizes, spec.train, spec.seed);
    row.metric = text::evaluate_accuracy(art.model.decoder, art.test_set);
    row.good = row.metric >= kGoodAccuracy;
    row.epochs = art.train_report.epochs_run;
    if (spec.uniqueness_passes >= 2) {
      RandomStream urng(derive_seed(spec.seed, "uniqueness"));
      const auto u = text::uniqueness_stats(spec.uniqueness_char, spec.uniqueness_passes, art.keys, art.encoder, urng);
      row.distinct_fraction = u.distinct_fraction;
      row.mean_hamming = u.mean_pairwise_hamming;
    }
    if (keep_artifacts) {
      art.model.extra["cell"] = spec.id;
      outcome.artifacts.emplace(std::move(art));
    }
  } catch (const std::exception& e) {
    row.status = sanitize(std::string("failed: ") + e.what());
    row.good = false;
  }
  row.wall_time = seconds_since(t0);
  return outcome;
}

std::vector<TextCellSpec> reference_table(std::uint64_t master_seed, const DatasetSizes& sizes,
                                       const nn::TrainConfig& train) {
  struct Published {
    std::size_t rows, cols;
    double r_lrs, r_hrs, sigma, p_on, p_off;
  };
  static constexpr Published kRows[] = {
      {5, 250, 1e3, 1e5, 0.1, 0.01, 0.01},  {5, 500, 1e3, 1e5, 0.1, 0.01, 0.01},
      {10, 500, 1e3, 1e4, 0.1, 0.02, 0.02}, {10, 1000, 1e3, 1e4, 0.4, 0.05, 0.05},
      {15, 300, 1e3, 1e4, 0.2, 0.02, 0.02}, {15, 600, 1e3, 1e4, 0.7, 0.02, 0.02},
  };
  std::vector<TextCellSpec> cells;
  for (std::size_t i = 0; i < std::size(kRows); ++i) {
    const auto& p = kRows[i];
    TextCellSpec s;
    s.id = "table1/" + std::to_string(i + 1) + "/" + std::to_string(p.rows) + "x" + std::to_string(p.cols);
    s.crossbar = {p.rows, p.cols, p.r_lrs, p.r_hrs, p.sigma, p.p_on, p.p_off, 0};
    s.sizes = sizes;
    s.train = train;
    s.seed = derive_seed(master_seed, s.id);
    cells.push_back(std::move(s));
  }
  return cells;
}

TextCellSpec control_cell(std::uint64_t master_seed, const DatasetSizes& sizes, const nn::TrainConfig& train) {
  TextCellSpec s;
  s.id = "table1/control/10x500";
  s.crossbar = {10, 500, 1e3, 1e4, 0.0, 0.0, 0.0, 0};
  s.sizes = sizes;
  s.train = train;
  s.seed = derive_seed(master_seed, s.id);
  return s;
}

nlohmann::json to_json(const TextCellSpec& spec) {
  return {{"id", spec.id},
          {"crossbar", xbar::to_json(spec.crossbar)},
          {"sizes",
           {{"train", spec.sizes.train},
            {"val", spec.sizes.val},
            {"test", spec.sizes.test},
            {"calibration", spec.sizes.calibration}}},
          {"train", nn::to_json(spec.train)},
          {"seed", spec.seed},
          {"readout", hd::to_string(spec.readout)},
          {"uniqueness_passes", spec.uniqueness_passes}};
}

namespace {

DatasetSizes sizes_from_json(const nlohmann::json& j, DatasetSizes s) {
  s.train = j.value("train", s.train);
  s.val = j.value("val", s.val);
  s.test = j.value("test", s.test);
  s.calibration = j.value("calibration", s.calibration);
  if (s.train == 0 || s.val == 0 || s.test == 0 || s.calibration == 0)
    throw ConfigError("sizes", "dataset sizes must be at least 1");
  return s;
}

xbar::CrossbarConfig crossbar_overrides(const nlohmann::json& j, xbar::CrossbarConfig c) {
  c.rows = j.value("rows", c.rows);
  c.cols = j.value("cols", c.cols);
  c.r_lrs = j.value("r_lrs", c.r_lrs);
  c.r_hrs = j.value("r_hrs", c.r_hrs);
  c.sigma_frac = j.value("sigma_frac", c.sigma_frac);
  c.p_stuck_on = j.value("p_stuck_on", c.p_stuck_on);
  c.p_stuck_off = j.value("p_stuck_off", c.p_stuck_off);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

TextCellSpec text_cell_from_json(const nlohmann::json& j, const TextCellSpec& defaults) {
  try {
    TextCellSpec s = defaults;
    s.id = j.value("id", s.id);
    if (j.contains("crossbar")) {
      s.crossbar = crossbar_overrides(j.at("crossbar"), s.crossbar);
      s.crossbar.validate();
    }
    if (j.contains("sizes")) s.sizes = sizes_from_json(j.at("sizes"), s.sizes);
    if (j.contains("train")) s.train = nn::train_config_from_json(j.at("train"), s.train);
    s.seed = j.value("seed", s.seed);
    if (j.contains("readout")) s.readout = hd::readout_from_string(j.at("readout").get<std::string>());
    s.uniqueness_passes = j.value("uniqueness_passes", s.uniqueness_passes);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cell", e.what());
  }
}

ExperimentReport run_table1(const std::vector<TextCellSpec>& cells, std::size_t jobs) {
  ExperimentReport report;
  report.task = Task::Text;
  report.config = {{"experiment", "table1"}, {"cells", nlohmann::json::array()}};
  for (const auto& c : cells) report.config["cells"].push_back(to_json(c));
  report.rows.resize(cells.size());
  run_pool(jobs, cells.size(), [&](std::size_t i) { report.rows[i] = run_text_cell(cells[i]).row; });
  sort_rows(report.rows);
  return report;
}

ImageData load_image_data(const ImageSettings& s) {
  if (s.train == 0 || s.val == 0 || s.test == 0) throw ConfigError("image", "train/val/test sizes must be positive");
  const std::size_t need = s.train + s.val + s.test;
  auto images = image::read_idx_images(s.images, need);
  if (images.size() < need) throw ConfigError("image.images", "file holds fewer images than train+val+test");
  ImageData data;
  data.width = images.front().width;
  data.height = images.front().height;
  auto it = images.begin();
  data.train.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(s.train)));
  it += static_cast<std::ptrdiff_t>(s.train);
  data.val.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(s.val)));
  it += static_cast<std::ptrdiff_t>(s.val);
  data.test.assign(std::make_move_iterator(it), std::make_move_iterator(it + static_cast<std::ptrdiff_t>(s.test)));
  return data;
}

ReportRow run_image_cell(const ImageCellSpec& spec, const ImageData& data) {
  const auto t0 = Clock::now();
  ReportRow row;
  row.cell = spec.id;
  row.model = spec.model;
  row.multiplier = spec.multiplier;
  row.sigma = spec.sigma;
  try {
    if (data.train.empty() || data.val.empty() || data.test.empty()) throw ValueError("image data set is empty");
    const std::size_t k = data.width * data.height;
    const std::size_t passes = spec.sigma > 0.0 ? std::max<std::size_t>(1, spec.settings.train_passes) : 1;
    const std::uint64_t enc_seed = derive_seed(spec.seed, "encoder");

    nn::RegressionSet train_set = regression_targets(data.train, passes);
    nn::RegressionSet val_set = regression_targets(data.val, 1);
    nn::RegressionSet test_set = regression_targets(data.test, 1);
    const Matrix train_x = stack_pixels(data.train, passes);
    const Matrix val_x = stack_pixels(data.val, 1);
    const Matrix test_x = stack_pixels(data.test, 1);

    if (spec.model == "bhv") {
      auto enc = hd::IdealEncoder::create({k, spec.multiplier, 0.0}, spec.settings.init_range, spec.sigma, enc_seed);
      RandomStream rng(derive_seed(spec.seed, "calibration"));
      std::vector<std::vector<double>> calib;
      for (std::size_t i = 0; i < std::min<std::size_t>(200, data.train.size()); ++i) calib.push_back(data.train[i].pixels);
      enc = enc.with_epsilon(hd::calibrate_epsilon([&](std::span<const double> x) { return enc.preactivation(x, rng); }, calib));
      train_set.inputs = bits_to_dense(kernels::parallel::encode_ideal_batch(enc, train_x, derive_seed(spec.seed, "train")));
      val_set.inputs = bits_to_dense(kernels::parallel::encode_ideal_batch(enc, val_x, derive_seed(spec.seed, "val")));
      test_set.inputs = bits_to_dense(kernels::parallel::encode_ideal_batch(enc, test_x, derive_seed(spec.seed, "test")));
      row.rows = k;
      row.cols = enc.output_dim();
    } else if (spec.model == "benchmark") {
      auto enc = image::BenchmarkEncoder::create(k, spec.settings.init_range, spec.sigma, enc_seed);
      const auto& w = enc.projection();
      train_set.inputs = kernels::parallel::noisy_project_batch(w, spec.sigma, enc.sampling(), train_x, derive_seed(spec.seed, "train"));
      val_set.inputs = kernels::parallel::noisy_project_batch(w, spec.sigma, enc.sampling(), val_x, derive_seed(spec.seed, "val"));
      test_set.inputs = kernels::parallel::noisy_project_batch(w, spec.sigma, enc.sampling(), test_x, derive_seed(spec.seed, "test"));
      row.rows = k;
      row.cols = k;
    } else {
      throw ConfigError("model", "expected \"bhv\" or \"benchmark\"");
    }

    std::optional<nn::LinearDecoder> model;
    if (spec.settings.trainer == "ridge") {
      auto fit = nn::fit_ridge(train_set, val_set, spec.settings.lambdas);
      model = std::move(fit.model);
      row.epochs = 0;
    } else if (spec.settings.trainer == "sgd") {
      nn::TrainConfig tc = spec.sgd;
      tc.seed = derive_seed(spec.seed, "sgd");
      auto init = nn::LinearDecoder::initialized(k, train_set.inputs.cols(), nn::Head::Regression,
                                                 derive_seed(spec.seed, "init"));
      auto fit = nn::train(std::move(init), train_set, val_set, tc);
      model = std::move(fit.model);
      row.epochs = fit.report.epochs_run;
    } else {
      throw ConfigError("image.trainer", "expected \"ridge\" or \"sgd\"");
    }
    row.metric = nn::mean_rmse(*model, test_set, true);
  } catch (const std::exception& e) {
    row.status = sanitize(std::string("failed: ") + e.what());
  }
  row.wall_time = seconds_since(t0);
  return row;
}

void ExperimentSpec::validate() const {
  if (multipliers.empty()) throw ConfigError("multipliers", "sweep list must be nonempty");
  if (sigmas.empty()) throw ConfigError("sigmas", "sweep list must be nonempty");
  for (auto m : multipliers) {
    if (m == 0) throw ConfigError("multipliers", "entries must be positive");
  }
  for (double s : sigmas) {
    if (!(std::isfinite(s) && s >= 0.0)) throw ConfigError("sigmas", "entries must be nonnegative");
  }
  train.validate();
  if (task == Task::Text) {
    if (key_dim == 0) throw ConfigError("key_dim", "must be positive");
    if (sizes.train == 0 || sizes.val == 0 || sizes.test == 0 || sizes.calibration == 0)
      throw ConfigError("sizes", "dataset sizes must be at least 1");
    xbar::CrossbarConfig probe = crossbar;
    probe.rows = key_dim;
    probe.cols = key_dim;
    probe.validate();
  } else {
    if (image.images.empty()) throw ConfigError("image.images", "path to an IDX image file is required");
    if (image.trainer != "ridge" && image.trainer != "sgd")
      throw ConfigError("image.trainer", "expected \"ridge\" or \"sgd\"");
    if (image.trainer == "ridge" && image.lambdas.empty()) throw ConfigError("image.lambdas", "must be nonempty");
    if (!(image.init_range > 0.0)) throw ConfigError("image.init_range", "must be positive");
  }
}

std::uint64_t ExperimentSpec::cell_seed(std::string_view cell_id) const { return derive_seed(master_seed, cell_id); }

ExperimentSpec spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentSpec s;
  try {
    s.task = task_from_string(j.value("task", std::string("text")));
    if (s.task == Task::Image) {
      s.train = nn::TrainConfig{0.01, 32, 60, 5, 1e-4, 0};
    }
    if (j.contains("crossbar")) s.crossbar = crossbar_overrides(j.at("crossbar"), s.crossbar);
    s.key_dim = j.value("key_dim", s.key_dim);
    s.multipliers = j.value("multipliers", s.multipliers);
    s.sigmas = j.value("sigmas", s.sigmas);
    if (j.contains("sizes")) s.sizes = sizes_from_json(j.at("sizes"), s.sizes);
    if (j.contains("train")) s.train = nn::train_config_from_json(j.at("train"), s.train);
    s.master_seed = j.value("master_seed", s.master_seed);
    s.output = j.value("output", s.output);
    if (j.contains("readout")) s.readout = hd::readout_from_string(j.at("readout").get<std::string>());
    s.uniqueness_passes = j.value("uniqueness_passes", s.uniqueness_passes);
    if (j.contains("image")) {
      const auto& im = j.at("image");
      if (im.contains("images")) {
        std::filesystem::path p = im.at("images").get<std::string>();
        s.image.images = (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
      }
      s.image.train = im.value("train", s.image.train);
      s.image.val = im.value("val", s.image.val);
      s.image.test = im.value("test", s.image.test);
      s.image.init_range = im.value("init_range", s.image.init_range);
      s.image.trainer = im.value("trainer", s.image.trainer);
      s.image.lambdas = im.value("lambdas", s.image.lambdas);
      s.image.train_passes = im.value("train_passes", s.image.train_passes);
      s.image.benchmark = im.value("benchmark", s.image.benchmark);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("experiment", e.what());
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const ExperimentSpec& s) {
  nlohmann::json cb = xbar::to_json(s.crossbar);
  cb.erase("rows");
  cb.erase("cols");
  cb.erase("sigma_frac");
  cb.erase("seed");
  return {{"task", to_string(s.task)},
          {"crossbar", std::move(cb)},
          {"key_dim", s.key_dim},
          {"multipliers", s.multipliers},
          {"sigmas", s.sigmas},
          {"sizes",
           {{"train", s.sizes.train}, {"val", s.sizes.val}, {"test", s.sizes.test}, {"calibration", s.sizes.calibration}}},
          {"train", nn::to_json(s.train)},
          {"master_seed", s.master_seed},
          {"output", s.output},
          {"readout", hd::to_string(s.readout)},
          {"uniqueness_passes", s.uniqueness_passes},
          {"image",
           {{"images", s.image.images.string()},
            {"train", s.image.train},
            {"val", s.image.val},
            {"test", s.image.test},
            {"init_range", s.image.init_range},
            {"trainer", s.image.trainer},
            {"lambdas", s.image.lambdas},
            {"train_passes", s.image.train_passes},
            {"benchmark", s.image.benchmark}}}};
}

std::vector<TextCellSpec> grid_text_cells(const ExperimentSpec& spec) {
  std::vector<TextCellSpec> cells;
  for (auto m : spec.multipliers) {
    for (double sigma : spec.sigmas) {
      TextCellSpec c;
      c.id = cell_key("bhv", m, sigma);
      c.crossbar = spec.crossbar;
      c.crossbar.rows = spec.key_dim;
      c.crossbar.cols = spec.key_dim * m;
      c.crossbar.sigma_frac = sigma;
      c.sizes = spec.sizes;
      c.train = spec.train;
      c.seed = spec.cell_seed(c.id);
      c.readout = spec.readout;
      c.uniqueness_passes = spec.uniqueness_passes;
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

std::vector<ImageCellSpec> grid_image_cells(const ExperimentSpec& spec) {
  std::vector<ImageCellSpec> cells;
  for (auto m : spec.multipliers) {
    for (double sigma : spec.sigmas) {
      ImageCellSpec c;
      c.id = cell_key("bhv", m, sigma);
      c.model = "bhv";
      c.multiplier = m;
      c.sigma = sigma;
      c.seed = spec.cell_seed(c.id);
      c.settings = spec.image;
      c.sgd = spec.train;
      cells.push_back(std::move(c));
    }
  }
  if (spec.image.benchmark) {
    for (double sigma : spec.sigmas) {
      ImageCellSpec c;
      c.id = cell_key("benchmark", 1, sigma);
      c.model = "benchmark";
      c.multiplier = 1;
      c.sigma = sigma;
      c.seed = spec.cell_seed(c.id);
      c.settings = spec.image;
      c.sgd = spec.train;
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

ExperimentReport run_grid(const ExperimentSpec& spec, std::size_t jobs) {
  spec.validate();
  ExperimentReport report;
  report.task = spec.task;
  report.config = {{"experiment", "grid"}, {"spec", to_json(spec)}};
  if (spec.task == Task::Text) {
    const auto cells = grid_text_cells(spec);
    report.rows.resize(cells.size());
    run_pool(jobs, cells.size(), [&](std::size_t i) { report.rows[i] = run_text_cell(cells[i]).row; });
  } else {
    const auto cells = grid_image_cells(spec);
    report.rows.resize(cells.size());
    std::optional<ImageData> data;
    std::string load_error;
    try {
      data = load_image_data(spec.image);
    } catch (const std::exception& e) {
      load_error = sanitize(std::string("failed: ") + e.what());
    }
    run_pool(jobs, cells.size(), [&](std::size_t i) {
      if (data) {
        report.rows[i] = run_image_cell(cells[i], *data);
      } else {
        report.rows[i].cell = cells[i].id;
        report.rows[i].model = cells[i].model;
        report.rows[i].multiplier = cells[i].multiplier;
        report.rows[i].sigma = cells[i].sigma;
        report.rows[i].status = load_error;
      }
    });
  }
  sort_rows(report.rows);
  return report;
}

ImageDemoResult run_image_demo(const image::GrayImage& img, std::size_t multiplier, double sigma, double init_range,
                               std::uint64_t seed) {
  img.validate();
  const std::size_t k = img.pixels.size();
  auto enc = hd::IdealEncoder::create({k, multiplier, 0.0}, init_range, sigma, derive_seed(seed, "encoder"));
  RandomStream rng(derive_seed(seed, "pass"));

  ImageDemoResult demo;
  demo.plain = img;
  demo.width = img.width;
  demo.expanded_height = img.height * multiplier;
  demo.expanded = enc.preactivation(img.pixels, rng);
  demo.epsilon = hd::median(demo.expanded);
  demo.binary = hd::threshold_binarize(demo.expanded, demo.epsilon);

  demo.histogram_plain = image::pixel_histogram(img.pixels, image::Stage::Plain);
  demo.histogram_expanded = image::pixel_histogram(demo.expanded, image::Stage::Expanded);
  demo.histogram_binary = image::pixel_histogram(demo.binary);

  const auto binary_dense = demo.binary.to_dense();
  for (auto dir : {image::Direction::Horizontal, image::Direction::Vertical, image::Direction::Diagonal}) {
    auto add = [&](const char* stage, std::span<const double> values, std::size_t h, bool binary) {
      StageStats s;
      s.stage = stage;
      s.direction = image::to_string(dir);
      try {
        const auto c = image::adjacent_pixel_correlation(values, demo.width, h, dir, binary);
        s.r = c.r;
        s.pair_counts = c.pair_counts;
      } catch (const DegenerateStatisticError& e) {
        s.status = sanitize(e.what());
      }
      demo.correlations.push_back(std::move(s));
    };
    add("plain", img.pixels, img.height, false);
    add("expanded", demo.expanded, demo.expanded_height, false);
    add("binary", binary_dense, demo.expanded_height, true);
  }
  return demo;
}

std::string correlations_csv(const std::vector<StageStats>& stats) {
  std::ostringstream out;
  out << "stage,direction,r,n00,n01,n10,n11,status\n";
  for (const auto& s : stats) {
    out << s.stage << ',' << s.direction << ',' << fmt("%.6f", s.r);
    for (std::size_t i = 0; i < 4; ++i) {
      out << ',';
      if (s.pair_counts) out << (*s.pair_counts)[i];
    }
    out << ',' << s.status << '\n';
  }
  return out.str();
}

std::string histograms_csv(const ImageDemoResult& demo) {
  std::ostringstream out;
  out << "stage,bin,count\n";
  auto emit = [&](const char* stage, const std::vector<std::size_t>& bins) {
    for (std::size_t b = 0; b < bins.size(); ++b) out << stage << ',' << b << ',' << bins[b] << '\n';
  };
  emit("plain", demo.histogram_plain);
  emit("expanded", demo.histogram_expanded);
  emit("binary", demo.histogram_binary);
  return out.str();
}

image::GrayImage render_expanded(const ImageDemoResult& demo) {
  const auto [lo, hi] = std::minmax_element(demo.expanded.begin(), demo.expanded.end());
  const double span = *hi - *lo;
  image::GrayImage out{demo.width, demo.expanded_height, std::vector<double>(demo.expanded.size(), 0.0)};
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = span > 0.0 ? (demo.expanded[i] - *lo) / span : 0.0;
  return out;
}

image::GrayImage render_binary(const ImageDemoResult& demo) {
  return image::GrayImage{demo.width, demo.expanded_height, demo.binary.to_dense()};
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.cell < b.cell; });
}

namespace {

constexpr const char* kColumns[] = {"cell",   "model", "rows",  "cols",         "multiplier",   "sigma",
                                    "p_on",   "p_off", "metric", "distinct_fraction", "mean_hamming", "epochs",
                                    "wall_time", "good", "status"};

std::string metric_text(Task task, double v) { return task == Task::Text ? fmt("%.4f", v) : shortest(v); }

}  // namespace

std::string to_csv(const ExperimentReport& report, bool include_wall_time) {
  std::ostringstream out;
  bool first = true;
  for (const char* col : kColumns) {
    if (!include_wall_time && std::string_view(col) == "wall_time") continue;
    out << (first ? "" : ",") << col;
    first = false;
  }
  out << '\n';
  for (const auto& r : report.rows) {
    out << r.cell << ',' << r.model << ',' << r.rows << ',' << r.cols << ',' << r.multiplier << ',' << shortest(r.sigma)
        << ',' << shortest(r.p_on) << ',' << shortest(r.p_off) << ',' << metric_text(report.task, r.metric) << ','
        << shortest(r.distinct_fraction) << ',' << shortest(r.mean_hamming) << ',' << r.epochs;
    if (include_wall_time) out << ',' << shortest(r.wall_time);
    out << ',' << (r.good ? "true" : "false") << ',' << r.status << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const ExperimentReport& report, bool include_wall_time) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row = {{"cell", r.cell},
                          {"model", r.model},
                          {"rows", r.rows},
                          {"cols", r.cols},
                          {"multiplier", r.multiplier},
                          {"sigma", r.sigma},
                          {"p_on", r.p_on},
                          {"p_off", r.p_off},
                          {"metric", r.metric},
                          {"distinct_fraction", r.distinct_fraction},
                          {"mean_hamming", r.mean_hamming},
                          {"epochs", r.epochs},
                          {"good", r.good},
                          {"status", r.status}};
    if (include_wall_time) row["wall_time"] = r.wall_time;
    rows.push_back(std::move(row));
  }
  return {{"format", "hyperlock-report"},
          {"version", 1},
          {"task", to_string(report.task)},
          {"metric", report.task == Task::Text ? "test_accuracy" : "reconstruction_rmse"},
          {"config", report.config},
          {"rows", std::move(rows)}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "hyperlock-report") throw FormatError("not a report document");
    ExperimentReport report;
    report.task = task_from_string(j.at("task").get<std::string>());
    report.config = j.value("config", nlohmann::json::object());
    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.cell = r.at("cell").get<std::string>();
      row.model = r.value("model", row.model);
      row.rows = r.value("rows", row.rows);
      row.cols = r.value("cols", row.cols);
      row.multiplier = r.value("multiplier", row.multiplier);
      row.sigma = r.value("sigma", row.sigma);
      row.p_on = r.value("p_on", row.p_on);
      row.p_off = r.value("p_off", row.p_off);
      row.metric = r.value("metric", row.metric);
      row.distinct_fraction = r.value("distinct_fraction", row.distinct_fraction);
      row.mean_hamming = r.value("mean_hamming", row.mean_hamming);
      row.epochs = r.value("epochs", row.epochs);
      row.wall_time = r.value("wall_time", row.wall_time);
      row.good = r.value("good", row.good);
      row.status = r.value("status", row.status);
      report.rows.push_back(std::move(row));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report document: ") + e.what());
  }
}

std::vector<ReportRow> rows_from_csv(std::string_view csv) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const auto end = csv.find('\n', pos);
    lines.emplace_back(csv.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  if (lines.empty()) throw FormatError("empty report CSV");
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  const auto header = split(lines.front());
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  std::vector<ReportRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = split(lines[li]);
    if (f.size() != header.size()) throw FormatError("report CSV line " + std::to_string(li + 1) + " has wrong field count");
    auto get = [&](std::string_view name) -> const std::string& {
      static const std::string empty;
      const auto idx = column(name);
      return idx ? f[*idx] : empty;
    };
    auto num = [&](std::string_view name) { const auto& s = get(name); return s.empty() ? 0.0 : std::stod(s); };
    auto count = [&](std::string_view name) {
      const auto& s = get(name);
      return s.empty() ? std::size_t{0} : static_cast<std::size_t>(std::stoull(s));
    };
    ReportRow r;
    r.cell = get("cell");
    r.model = get("model");
    r.rows = count("rows");
    r.cols = count("cols");
    r.multiplier = count("multiplier");
    r.sigma = num("sigma");
    r.p_on = num("p_on");
    r.p_off = num("p_off");
    r.metric = num("metric");
    r.distinct_fraction = num("distinct_fraction");
    r.mean_hamming = num("mean_hamming");
    r.epochs = count("epochs");
    r.wall_time = num("wall_time");
    r.good = get("good") == "true";
    r.status = get("status");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hyperlock::exp
