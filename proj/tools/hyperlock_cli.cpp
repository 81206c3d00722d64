#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "hyperlock/crossbar.hpp"
#include "hyperlock/decoder.hpp"
#include "hyperlock/errors.hpp"
#include "hyperlock/experiments.hpp"
#include "hyperlock/hypervector.hpp"
#include "hyperlock/image.hpp"
#include "hyperlock/text_crypto.hpp"

namespace fs = std::filesystem;
using namespace hyperlock;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
  bool full_scale = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output path");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--paper-scale", c.full_scale, "use 100K/100K/10K character datasets");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  const auto text = slurp(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

// Config documents map JSON schema errors to config errors; artifacts map them to format errors.
json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return read_json(path);
  } catch (const FormatError& e) {
    throw ConfigError("config", e.what());
  }
}

template <class F>
auto parse_artifact(const fs::path& path, F&& f) {
  const json j = read_json(path);
  try {
    return f(j);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path out_or(const Common& c, const std::string& fallback) { return c.out.empty() ? fs::path(fallback) : fs::path(c.out); }

exp::DatasetSizes sizes_for(const Common& c, const json& cfg) {
  exp::TextCellSpec probe;
  if (c.full_scale) probe.sizes = exp::DatasetSizes::full_scale();
  json j = json::object();
  if (cfg.contains("sizes")) j["sizes"] = cfg.at("sizes");
  return exp::text_cell_from_json(j, probe).sizes;
}

void emit_report(const exp::ExperimentReport& report, const fs::path& dir, bool timing) {
  fs::create_directories(dir);
  write_text(dir / "report.csv", exp::to_csv(report, timing));
  write_json(dir / "report.json", exp::to_json(report, timing));
  std::cout << exp::to_csv(report, timing);
}

int failed_rows(const exp::ExperimentReport& report) {
  int n = 0;
  for (const auto& r : report.rows) n += r.status != "ok";
  if (n > 0) std::cerr << n << " cell(s) failed; see the status column\n";
  return n;
}

hd::Readout readout_of(const nn::ModelFile& m) {
  return hd::readout_from_string(m.extra.value("readout", std::string("midpoint-reference")));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperlock: memristor crossbar hyperdimensional encryption simulator"};
  app.require_subcommand(1);

  // gen-crossbar
  Common gc;
  xbar::CrossbarConfig xcfg{10, 500, 1e3, 1e4, 0.1, 0.02, 0.02, 0};
  auto* gen_crossbar = app.add_subcommand("gen-crossbar", "sample a crossbar with stuck cells");
  add_common(gen_crossbar, gc);
  gen_crossbar->add_option("--rows", xcfg.rows);
  gen_crossbar->add_option("--cols", xcfg.cols);
  gen_crossbar->add_option("--r-lrs", xcfg.r_lrs);
  gen_crossbar->add_option("--r-hrs", xcfg.r_hrs);
  gen_crossbar->add_option("--sigma", xcfg.sigma_frac, "read noise std as a fraction of the conductance range");
  gen_crossbar->add_option("--p-on", xcfg.p_stuck_on);
  gen_crossbar->add_option("--p-off", xcfg.p_stuck_off);

  // gen-keys
  Common gk;
  std::size_t key_dim = 10;
  auto* gen_keys = app.add_subcommand("gen-keys", "generate a secret key table");
  add_common(gen_keys, gk);
  gen_keys->add_option("--k", key_dim, "key dimension")->check(CLI::PositiveNumber);

  // train-text
  Common tt;
  std::string tt_crossbar, tt_keys;
  auto* train_text = app.add_subcommand("train-text", "train a text decoder for a crossbar and key table");
  add_common(train_text, tt);
  train_text->add_option("--crossbar", tt_crossbar)->required();
  train_text->add_option("--keys", tt_keys)->required();

  // encrypt
  Common en;
  std::string en_crossbar, en_keys, en_model, en_in;
  auto* encrypt = app.add_subcommand("encrypt", "plaintext file to HLCT ciphertext");
  add_common(encrypt, en);
  encrypt->add_option("--crossbar", en_crossbar)->required();
  encrypt->add_option("--keys", en_keys)->required();
  encrypt->add_option("--model", en_model, "model file supplying epsilon and readout")->required();
  encrypt->add_option("--in", en_in)->required();

  // decrypt
  Common de;
  std::string de_model, de_in;
  auto* decrypt = app.add_subcommand("decrypt", "HLCT ciphertext to plaintext file");
  add_common(decrypt, de);
  decrypt->add_option("--model", de_model)->required();
  decrypt->add_option("--in", de_in)->required();

  // eval
  Common ev;
  std::string ev_crossbar, ev_keys, ev_model;
  std::size_t ev_n = 10000;
  auto* eval = app.add_subcommand("eval", "measure decryption accuracy on fresh encryptions");
  add_common(eval, ev);
  eval->add_option("--crossbar", ev_crossbar)->required();
  eval->add_option("--keys", ev_keys)->required();
  eval->add_option("--model", ev_model)->required();
  eval->add_option("--n", ev_n, "test characters")->check(CLI::PositiveNumber);

  // grid
  Common gr;
  bool gr_no_timing = false;
  auto* grid = app.add_subcommand("grid", "sweep dimension multipliers and noise levels");
  add_common(grid, gr);
  grid->add_flag("--no-timing", gr_no_timing, "omit wall_time for byte-comparable reports");

  // table1
  Common t1;
  bool t1_no_timing = false, t1_control = false;
  auto* table1 = app.add_subcommand("table1", "run the six reference crossbar configurations");
  add_common(table1, t1);
  table1->add_flag("--no-timing", t1_no_timing);
  table1->add_flag("--control", t1_control, "add a noise-free, fault-free control row");

  // image-demo
  Common im;
  std::string im_image;
  std::size_t im_m = 4;
  double im_sigma = 0.5, im_range = 2.0;
  auto* image_demo = app.add_subcommand("image-demo", "encrypt one image and emit pixel statistics");
  add_common(image_demo, im);
  image_demo->add_option("--image", im_image, "PGM (P5) input")->required();
  image_demo->add_option("--multiplier", im_m)->check(CLI::PositiveNumber);
  image_demo->add_option("--sigma", im_sigma);
  image_demo->add_option("--init-range", im_range);

  // report
  Common rp;
  std::string rp_in;
  bool rp_no_timing = false;
  auto* report = app.add_subcommand("report", "re-emit a JSON report as CSV and JSON");
  add_common(report, rp);
  report->add_option("--in", rp_in, "report.json")->required();
  report->add_flag("--no-timing", rp_no_timing);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen_crossbar) {
      const json cfg = read_config(gc.config);
      if (cfg.contains("crossbar")) {
        json merged = xbar::to_json(xcfg);
        merged.update(cfg.at("crossbar"));
        xcfg = xbar::config_from_json(merged);
      }
      if (gc.seed) xcfg.seed = *gc.seed;
      xcfg.validate();
      const auto xb = xbar::Crossbar::random(xcfg);
      write_json(out_or(gc, "crossbar.json"), xbar::to_json(xb));
      std::cout << "crossbar " << xcfg.rows << "x" << xcfg.cols << ", stuck cells " << xb.stuck_count() << "\n";
    } else if (*gen_keys) {
      const json cfg = read_config(gk.config);
      key_dim = cfg.value("key_dim", key_dim);
      const auto keys = text::generate_keys(key_dim, gk.seed.value_or(cfg.value("seed", std::uint64_t{0})));
      write_json(out_or(gk, "keys.json"), text::to_json(keys));
    } else if (*train_text) {
      const json cfg = read_config(tt.config);
      exp::TextCellSpec defaults;
      if (tt.full_scale) defaults.sizes = exp::DatasetSizes::full_scale();
      json jc = cfg;
      jc.erase("crossbar");
      const auto spec = exp::text_cell_from_json(jc, defaults);
      auto xb = parse_artifact(tt_crossbar, [](const json& j) { return xbar::crossbar_from_json(j); });
      auto keys = parse_artifact(tt_keys, [](const json& j) { return text::keys_from_json(j); });
      const std::uint64_t seed = tt.seed.value_or(spec.seed);
      auto art = exp::train_text_model(std::move(xb), std::move(keys), spec.readout, spec.sizes, spec.train, seed);
      const double acc = text::evaluate_accuracy(art.model.decoder, art.test_set);
      art.model.extra["test_accuracy"] = acc;
      art.model.extra["epochs_run"] = art.train_report.epochs_run;
      write_json(out_or(tt, "model.json"), nn::to_json(art.model));
      std::printf("test accuracy %.4f after %zu epochs\n", acc, art.train_report.epochs_run);
    } else if (*encrypt) {
      auto xb = parse_artifact(en_crossbar, [](const json& j) { return xbar::crossbar_from_json(j); });
      auto keys = parse_artifact(en_keys, [](const json& j) { return text::keys_from_json(j); });
      auto model = parse_artifact(en_model, [](const json& j) { return nn::model_from_json(j); });
      hd::CrossbarEncoder enc{std::move(xb), model.epsilon, readout_of(model)};
      RandomStream rng(en.seed.value_or(0));
      const auto ct = text::encrypt_text(slurp(en_in), keys, enc, rng);
      const fs::path out = out_or(en, "ciphertext.hlct");
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      std::ofstream f(out, std::ios::binary);
      if (!f) throw Error("cannot write " + out.string());
      text::write_ciphertext(f, ct);
    } else if (*decrypt) {
      auto model = parse_artifact(de_model, [](const json& j) { return nn::model_from_json(j); });
      std::ifstream f(de_in, std::ios::binary);
      if (!f) throw FormatError("cannot open " + de_in);
      const auto ct = text::read_ciphertext(f);
      write_text(out_or(de, "plaintext.txt"), text::decrypt_text(ct, model.decoder));
    } else if (*eval) {
      auto xb = parse_artifact(ev_crossbar, [](const json& j) { return xbar::crossbar_from_json(j); });
      auto keys = parse_artifact(ev_keys, [](const json& j) { return text::keys_from_json(j); });
      auto model = parse_artifact(ev_model, [](const json& j) { return nn::model_from_json(j); });
      hd::CrossbarEncoder enc{std::move(xb), model.epsilon, readout_of(model)};
      RandomStream rng(ev.seed.value_or(0));
      const auto set = text::build_dataset(ev_n, keys, enc, rng);
      const double acc = text::evaluate_accuracy(model.decoder, set);
      std::printf("accuracy %.4f over %zu characters\n", acc, ev_n);
      if (!ev.out.empty()) write_json(ev.out, {{"accuracy", acc}, {"characters", ev_n}});
    } else if (*grid) {
      if (gr.config.empty()) throw ConfigError("config", "grid requires --config");
      auto spec = exp::spec_from_json(read_config(gr.config), fs::path(gr.config).parent_path());
      if (gr.seed) spec.master_seed = *gr.seed;
      if (gr.full_scale) spec.sizes = exp::DatasetSizes::full_scale();
      const auto rep = exp::run_grid(spec, gr.jobs);
      emit_report(rep, gr.out.empty() ? fs::path(spec.output) : fs::path(gr.out), !gr_no_timing);
      failed_rows(rep);
    } else if (*table1) {
      const json cfg = read_config(t1.config);
      const auto sizes = sizes_for(t1, cfg);
      nn::TrainConfig train;
      if (cfg.contains("train")) train = nn::train_config_from_json(cfg.at("train"), train);
      const std::uint64_t seed = t1.seed.value_or(cfg.value("master_seed", std::uint64_t{0}));
      auto cells = exp::reference_table(seed, sizes, train);
      if (t1_control || cfg.value("control", false)) cells.push_back(exp::control_cell(seed, sizes, train));
      if (cfg.contains("readout")) {
        const auto r = hd::readout_from_string(cfg.at("readout").get<std::string>());
        for (auto& c : cells) c.readout = r;
      }
      const auto rep = exp::run_table1(cells, t1.jobs);
      emit_report(rep, out_or(t1, "table1"), !t1_no_timing);
      failed_rows(rep);
    } else if (*image_demo) {
      const auto img = image::read_pgm(fs::path(im_image));
      const auto demo = exp::run_image_demo(img, im_m, im_sigma, im_range, im.seed.value_or(0));
      const fs::path dir = out_or(im, "image-demo");
      fs::create_directories(dir);
      write_text(dir / "correlations.csv", exp::correlations_csv(demo.correlations));
      write_text(dir / "histograms.csv", exp::histograms_csv(demo));
      image::write_pgm(dir / "plain.pgm", demo.plain);
      image::write_pgm(dir / "expanded.pgm", exp::render_expanded(demo));
      image::write_pgm(dir / "binary.pgm", exp::render_binary(demo));
      std::ofstream hbv(dir / "ciphertext.hbv", std::ios::binary);
      hd::write_hbv(hbv, demo.binary);
      std::cout << exp::correlations_csv(demo.correlations);
    } else if (*report) {
      const auto rep = parse_artifact(rp_in, [](const json& j) { return exp::report_from_json(j); });
      emit_report(rep, out_or(rp, "report"), !rp_no_timing);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
