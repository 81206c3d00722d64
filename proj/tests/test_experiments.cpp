#include <doctest.h>

#include <omp.h>

#include <algorithm>
#include <set>

#include "hyperlock/errors.hpp"
#include "hyperlock/experiments.hpp"

using namespace hyperlock;

namespace {

exp::ExperimentSpec small_text_spec() {
  exp::ExperimentSpec s;
  s.task = exp::Task::Text;
  s.crossbar = {0, 0, 1e3, 1e4, 0.0, 0.05, 0.05, 0};
  s.key_dim = 5;
  s.multipliers = {10, 20};
  s.sigmas = {0.1, 0.4};
  s.sizes = {600, 200, 300, 200};
  s.train = {0.05, 64, 6, 3, 1e-4, 0};
  s.master_seed = 3;
  s.uniqueness_passes = 10;
  return s;
}

exp::ReportRow sample_row(std::string cell, double metric) {
  exp::ReportRow r;
  r.cell = std::move(cell);
  r.rows = 10;
  r.cols = 500;
  r.multiplier = 50;
  r.sigma = 0.1;
  r.p_on = 0.02;
  r.p_off = 0.02;
  r.metric = metric;
  r.distinct_fraction = 1.0;
  r.mean_hamming = 0.123456789012345;
  r.epochs = 17;
  r.wall_time = 1.25;
  r.good = metric >= exp::kGoodAccuracy;
  return r;
}

}  // namespace

TEST_CASE("task names") {
  CHECK(exp::task_from_string("text") == exp::Task::Text);
  CHECK(exp::task_from_string("image") == exp::Task::Image);
  CHECK(std::string(exp::to_string(exp::Task::Image)) == "image");
  CHECK_THROWS_AS(exp::task_from_string("audio"), ConfigError);
}

TEST_CASE("experiment spec parsing and validation") {
  const nlohmann::json j = {{"task", "text"},
                            {"crossbar", {{"p_stuck_on", 0.05}, {"p_stuck_off", 0.05}}},
                            {"key_dim", 10},
                            {"multipliers", {25, 50, 100}},
                            {"sigmas", {0.1, 0.4, 0.7}},
                            {"master_seed", 7}};
  const auto s = exp::spec_from_json(j);
  CHECK(s.multipliers == std::vector<std::size_t>{25, 50, 100});
  CHECK(s.crossbar.p_stuck_on == 0.05);
  CHECK(s.sizes == exp::DatasetSizes{});
  CHECK(exp::spec_from_json(exp::to_json(s)).multipliers == s.multipliers);

  auto bad = j;
  bad["multipliers"] = nlohmann::json::array();
  CHECK_THROWS_AS(exp::spec_from_json(bad), ConfigError);
  bad = j;
  bad["sigmas"] = {-0.1};
  CHECK_THROWS_AS(exp::spec_from_json(bad), ConfigError);
  bad = j;
  bad["sizes"] = {{"train", 0}};
  CHECK_THROWS_AS(exp::spec_from_json(bad), ConfigError);
  bad = j;
  bad["task"] = "audio";
  CHECK_THROWS_AS(exp::spec_from_json(bad), ConfigError);
  bad = j;
  bad["crossbar"] = {{"p_stuck_on", 0.7}, {"p_stuck_off", 0.7}};
  CHECK_THROWS_AS(exp::spec_from_json(bad), ConfigError);
  bad = j;
  bad["key_dim"] = "ten";
  CHECK_THROWS_AS(exp::spec_from_json(bad), ConfigError);

  const nlohmann::json img = {{"task", "image"},
                              {"multipliers", {1}},
                              {"sigmas", {0.0}},
                              {"image", {{"images", "mnist.idx"}}}};
  CHECK(exp::spec_from_json(img, "/data/cfg").image.images == std::filesystem::path("/data/cfg/mnist.idx"));
  auto no_images = img;
  no_images.erase("image");
  CHECK_THROWS_AS(exp::spec_from_json(no_images), ConfigError);
}

TEST_CASE("grid cells cover the cross product with distinct seeds") {
  const auto s = small_text_spec();
  const auto cells = exp::grid_text_cells(s);
  REQUIRE(cells.size() == 4);
  std::set<std::uint64_t> seeds;
  std::set<std::string> ids;
  for (const auto& c : cells) {
    CHECK(c.crossbar.rows == 5);
    CHECK(c.crossbar.cols % 5 == 0);
    CHECK(c.seed == s.cell_seed(c.id));
    seeds.insert(c.seed);
    ids.insert(c.id);
  }
  CHECK(seeds.size() == 4);
  CHECK(ids.size() == 4);
  CHECK(cells[1].crossbar.cols == 50);
  CHECK(cells[1].crossbar.sigma_frac == 0.4);
  CHECK(cells[2].crossbar.cols == 100);
}

TEST_CASE("a single-cell grid equals a direct run of that cell") {
  auto s = small_text_spec();
  s.multipliers = {20};
  s.sigmas = {0.4};
  const auto report = exp::run_grid(s, 1);
  REQUIRE(report.rows.size() == 1);
  const auto direct = exp::run_text_cell(exp::grid_text_cells(s).front()).row;
  auto a = report.rows.front(), b = direct;
  a.wall_time = b.wall_time = 0.0;
  CHECK(a == b);
  CHECK(a.status == "ok");
  CHECK(a.distinct_fraction > 0.0);
}

TEST_CASE("grid reports are deterministic across repeats and worker counts") {
  const auto s = small_text_spec();
  const auto a = exp::to_csv(exp::run_grid(s, 1), false);
  CHECK(a == exp::to_csv(exp::run_grid(s, 1), false));
  CHECK(a == exp::to_csv(exp::run_grid(s, 3), false));
  const int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  CHECK(a == exp::to_csv(exp::run_grid(s, 2), false));
  omp_set_num_threads(saved);
  auto other = s;
  other.master_seed = 4;
  CHECK(a != exp::to_csv(exp::run_grid(other, 1), false));
}

TEST_CASE("a failing cell does not abort its siblings") {
  auto cells = exp::grid_text_cells(small_text_spec());
  cells[1].crossbar.r_hrs = 1.0;
  cells[2].sizes.train = 0;
  const auto report = exp::run_table1(cells, 2);
  REQUIRE(report.rows.size() == 4);
  std::size_t failed = 0;
  for (const auto& r : report.rows) {
    if (r.status == "ok") continue;
    ++failed;
    CHECK(r.status.rfind("failed: ", 0) == 0);
    CHECK(r.status.find(',') == std::string::npos);
    CHECK_FALSE(r.good);
  }
  CHECK(failed == 2);
}

TEST_CASE("reference crossbar table") {
  const auto cells = exp::reference_table(1, {}, {});
  REQUIRE(cells.size() == 6);
  CHECK(cells[0].crossbar.rows == 5);
  CHECK(cells[0].crossbar.cols == 250);
  CHECK(cells[0].crossbar.r_hrs == 1e5);
  CHECK(cells[0].crossbar.p_stuck_on == 0.01);
  CHECK(cells[3].crossbar.cols == 1000);
  CHECK(cells[3].crossbar.sigma_frac == 0.4);
  CHECK(cells[3].crossbar.p_stuck_off == 0.05);
  CHECK(cells[5].crossbar.rows == 15);
  CHECK(cells[5].crossbar.sigma_frac == 0.7);
  for (const auto& c : cells) CHECK_NOTHROW(c.crossbar.validate());
  const auto control = exp::control_cell(1, {}, {});
  CHECK(control.crossbar.sigma_frac == 0.0);
  CHECK(control.crossbar.p_stuck_on == 0.0);
  auto j = exp::to_json(cells[2]);
  const auto back = exp::text_cell_from_json(j, {});
  CHECK(back.crossbar.cols == 500);
  CHECK(back.seed == cells[2].seed);
  CHECK(back.sizes == cells[2].sizes);
}

TEST_CASE("report emission") {
  SUBCASE("empty report is header-only CSV") {
    const auto csv = exp::to_csv(exp::ExperimentReport{}, true);
    CHECK(csv == "cell,model,rows,cols,multiplier,sigma,p_on,p_off,metric,distinct_fraction,mean_hamming,epochs,"
                 "wall_time,good,status\n");
    CHECK(exp::to_csv(exp::ExperimentReport{}, false).find("wall_time") == std::string::npos);
    CHECK(exp::rows_from_csv(csv).empty());
  }
  SUBCASE("text accuracy uses four decimals") {
    exp::ExperimentReport r;
    r.rows = {sample_row("a", 0.9955)};
    const auto csv = exp::to_csv(r, false);
    CHECK(csv.find(",0.9955,") != std::string::npos);
    r.rows[0].metric = 1.0;
    CHECK(exp::to_csv(r, false).find(",1.0000,") != std::string::npos);
  }
  SUBCASE("CSV re-parse equals the in-memory rows") {
    exp::ExperimentReport r;
    r.rows = {sample_row("b", 0.9991), sample_row("a", 0.9817)};
    r.rows[0].status = "failed: something";
    exp::sort_rows(r.rows);
    CHECK(r.rows[0].cell == "a");
    CHECK(exp::rows_from_csv(exp::to_csv(r, true)) == r.rows);
    auto no_time = r.rows;
    for (auto& row : no_time) row.wall_time = 0.0;
    CHECK(exp::rows_from_csv(exp::to_csv(r, false)) == no_time);

    exp::ExperimentReport img;
    img.task = exp::Task::Image;
    img.rows = {sample_row("bhv", 0.0812345678901234)};
    img.rows[0].good = false;
    CHECK(exp::rows_from_csv(exp::to_csv(img, true)) == img.rows);
  }
  SUBCASE("JSON mirrors the CSV and echoes the config") {
    exp::ExperimentReport r;
    r.config = {{"experiment", "grid"}, {"note", 1}};
    r.rows = {sample_row("a", 0.5)};
    const auto j = exp::to_json(r, true);
    CHECK(j.at("config").at("note") == 1);
    const auto back = exp::report_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.rows == r.rows);
    CHECK(exp::to_csv(back, true) == exp::to_csv(r, true));
    CHECK_THROWS_AS(exp::report_from_json(nlohmann::json::object()), FormatError);
  }
  SUBCASE("malformed CSV") { CHECK_THROWS_AS(exp::rows_from_csv("cell,model\na,b,c\n"), FormatError); }
}

TEST_CASE("image statistics demo on a small image") {
  image::GrayImage img{12, 10, {}};
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 12; ++x) img.pixels.push_back(double(x + y) / 20.0);
  const auto demo = exp::run_image_demo(img, 4, 0.5, 2.0, 9);
  CHECK(demo.expanded.size() == 480);
  CHECK(demo.binary.dim() == 480);
  CHECK(demo.expanded_height == 40);
  REQUIRE(demo.correlations.size() == 9);
  const auto csv = exp::correlations_csv(demo.correlations);
  CHECK(csv.rfind("stage,direction,r,n00,n01,n10,n11,status\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  for (const auto& s : demo.correlations) {
    if (s.stage == "binary") CHECK(s.pair_counts.has_value());
    if (s.stage == "plain") CHECK(s.r > 0.9);
  }
  std::size_t plain = 0;
  for (auto c : demo.histogram_plain) plain += c;
  CHECK(plain == 120);
  CHECK(demo.histogram_binary[0] + demo.histogram_binary[1] == 480);
  CHECK(exp::render_binary(demo).pixels.size() == 480);
  const auto rendered = exp::render_expanded(demo);
  CHECK_NOTHROW(rendered.validate());
}
