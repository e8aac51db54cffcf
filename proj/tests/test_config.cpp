#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sigwav/checkpoint.hpp"
#include "sigwav/config.hpp"
#include "sigwav/error.hpp"
#include "sigwav/pipeline.hpp"

using namespace sigwav;
namespace fs = std::filesystem;

namespace {

ErrorCategory category_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("no error raised");
  return ErrorCategory::contract;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("sigwav_cfg_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("ablation tags set sharing, thresholding and the recurrent path") {
  REQUIRE(ablation_tags().size() == 8);
  struct Row {
    const char* tag;
    wavelet::Sharing sharing;
    bool laht, gru;
  };
  const Row rows[] = {
      {"db10", wavelet::Sharing::db10_fixed, false, true},
      {"db10+laht", wavelet::Sharing::db10_fixed, true, true},
      {"1kernel", wavelet::Sharing::single_kernel, false, true},
      {"1kernel-layerwise", wavelet::Sharing::layer_wise, false, true},
      {"1kernel+laht", wavelet::Sharing::single_kernel, true, true},
      {"1kernel-layerwise+laht", wavelet::Sharing::layer_wise, true, true},
      {"allkernel+laht", wavelet::Sharing::all_kernel, true, true},
      {"allkernel+laht-nogru", wavelet::Sharing::all_kernel, true, false},
  };
  for (const auto& r : rows) {
    ModelConfig m;
    apply_ablation(m, r.tag);
    CHECK(m.frontend.sharing == r.sharing);
    CHECK(m.frontend.laht_enabled == r.laht);
    CHECK(m.use_gru == r.gru);
  }
  ModelConfig m;
  CHECK(category_of([&] { apply_ablation(m, "2kernel"); }) == ErrorCategory::config);
}

TEST_CASE("config file, overrides and echo") {
  auto dir = scratch("file");
  {
    std::ofstream f(dir / "run.ini");
    f << "[model]\nlevels = 4\nablation = db10\n[train]\nepochs = 3\nlr = 0.01\nclass_alpha = 1, 2\n";
  }
  auto cfg = resolve_config((dir / "run.ini").string(), {"model.hidden=5", "train.seed=9"});
  CHECK(cfg.model.frontend.levels == 4);
  CHECK(cfg.model.frontend.sharing == wavelet::Sharing::db10_fixed);
  CHECK(!cfg.model.frontend.laht_enabled);
  CHECK(cfg.model.hidden == 5);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.train.adam.lr == 0.01);
  CHECK(cfg.train.loss.class_alpha == std::vector<double>{1, 2});

  auto lines = echo_lines(cfg);
  auto has = [&](const std::string& s) { return std::find(lines.begin(), lines.end(), s) != lines.end(); };
  CHECK(has("model.levels=4"));
  CHECK(has("model.hidden=5"));
  CHECK(has("train.epochs=3"));

  auto again = from_ptree(to_ptree(cfg));
  CHECK(echo_lines(again) == lines);
}

TEST_CASE("config errors") {
  CHECK(category_of([] { resolve_config("", {"model.nonsense=1"}); }) == ErrorCategory::config);
  CHECK(category_of([] { resolve_config("", {"model.levels=abc"}); }) == ErrorCategory::config);
  CHECK(category_of([] { resolve_config("", {"nodot"}); }) == ErrorCategory::config);
  CHECK(category_of([] { resolve_config("/nonexistent/run.ini", {}); }) == ErrorCategory::config);
}

TEST_CASE("checkpoint round trip") {
  auto dir = scratch("ckpt");
  auto cfg = default_config();
  cfg.model.frontend.levels = 2;
  cfg.model.features.channels = 2;
  cfg.model.hidden = 2;
  cfg.model.gru_layers = 1;
  cfg.model.classes = 3;
  Model m(cfg.model, 4);
  const auto path = (dir / "c.bin").string();
  save_checkpoint(path, m, cfg, {"x", "y", "z"});
  auto ck = load_checkpoint(path);
  CHECK(ck.labels == std::vector<std::string>{"x", "y", "z"});
  CHECK(echo_lines(ck.config) == echo_lines(cfg));
  auto a = m.parameters(), b = ck.model->parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value.data == b[i]->value.data);
  }

  const auto bad = (dir / "bad.bin").string();
  {
    std::ofstream f(bad, std::ios::binary);
    f << "garbage";
  }
  CHECK(category_of([&] { load_checkpoint(bad); }) == ErrorCategory::format);
}

TEST_CASE("grid axes expand to the cartesian product") {
  auto a = parse_grid_axis("model.hidden=4,8");
  CHECK(a.key == "model.hidden");
  CHECK(a.values == std::vector<std::string>{"4", "8"});
  auto points = grid_points({a, parse_grid_axis("train.lr=1e-3,3e-3,1e-2")});
  REQUIRE(points.size() == 6);
  CHECK(points[0] == std::vector<std::string>{"model.hidden=4", "train.lr=1e-3"});
  CHECK(points[1] == std::vector<std::string>{"model.hidden=4", "train.lr=3e-3"});
  CHECK(points[5] == std::vector<std::string>{"model.hidden=8", "train.lr=1e-2"});
  CHECK(grid_points({}).size() == 1);
  for (const char* bad : {"model.hidden", "=1,2", "model.hidden=", "model.hidden=1,,2"})
    CHECK(category_of([&] { parse_grid_axis(bad); }) == ErrorCategory::config);
}
