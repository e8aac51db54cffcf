#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigwav/audio.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Result run(const fs::path& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(SIGWAV_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("sigwav_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Small enough that a full train/evaluate cycle takes about a second.
std::string tiny_args(const fs::path& dir) {
  {
    std::ofstream f(dir / "spec.ini");
    f << "[synthetic]\nmin_length = 320\nmax_length = 400\n[classes]\nhigh = 0:1:3\nlow = 3:1:5\n";
  }
  return "--out-dir " + (dir / "out").string() + " --epochs 1 --set model.levels=3 --set model.channels=2" +
         " --set model.hidden=2 --set model.gru_layers=1 --set data.n_per_class=10 --set train.folds=2" +
         " --set train.test_fraction=0.2 --set data.synthetic_spec=" + (dir / "spec.ini").string();
}

}  // namespace

TEST_CASE("train writes every artifact with the config echoed") {
  auto dir = scratch("train");
  auto r = run(dir, "train " + tiny_args(dir));
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"checkpoint.bin", "metrics.json", "confusion.csv", "epochs.csv"})
    CHECK(fs::exists(dir / "out" / f));
  auto j = nlohmann::json::parse(slurp(dir / "out" / "metrics.json"));
  for (const char* k : {"accuracy", "total", "loss", "macro", "weighted", "per_class", "confusion"})
    CHECK(j["metrics"].contains(k));
  CHECK(j["config"]["model"]["levels"] == "3");
  auto epochs = slurp(dir / "out" / "epochs.csv");
  CHECK(epochs.find("# model.levels=3") != std::string::npos);
  CHECK(epochs.find("epoch,split,loss,accuracy") != std::string::npos);
  CHECK(slurp(dir / "out" / "confusion.csv").find("# model.hidden=2") != std::string::npos);
}

TEST_CASE("evaluate is byte-identical across runs and worker counts") {
  auto dir = scratch("eval");
  const auto args = tiny_args(dir);
  REQUIRE(run(dir, "train " + args).code == 0);
  REQUIRE(run(dir, "evaluate " + args + " --subset all").code == 0);
  const auto first = slurp(dir / "out" / "metrics.json");
  REQUIRE(run(dir, "evaluate " + args + " --subset all").code == 0);
  CHECK(slurp(dir / "out" / "metrics.json") == first);
  REQUIRE(run(dir, "evaluate " + args + " --subset all --workers 2").code == 0);
  auto a = nlohmann::json::parse(first), b = nlohmann::json::parse(slurp(dir / "out" / "metrics.json"));
  CHECK(a["metrics"].dump() == b["metrics"].dump());
}

TEST_CASE("decompose dumps band sizes") {
  auto dir = scratch("decompose");
  sigwav::audio::AudioClip c;
  for (int i = 0; i < 1024; ++i) c.samples.push_back(0.3 * std::sin(0.05 * i));
  sigwav::audio::write_wav((dir / "x.wav").string(), c);
  auto r = run(dir, "decompose --set model.levels=3 --out-dir " + dir.string() + " " + (dir / "x.wav").string());
  INFO(r.err);
  REQUIRE(r.code == 0);
  std::ifstream f(dir / "bands.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line == "band,index,value");
  std::map<std::string, int> sizes;
  while (std::getline(f, line)) ++sizes[line.substr(0, line.find(','))];
  CHECK(sizes == std::map<std::string, int>{{"d1", 512}, {"d2", 256}, {"d3", 128}, {"a3", 128}});
}

TEST_CASE("synth-data then predict") {
  auto dir = scratch("predict");
  const auto args = tiny_args(dir);
  REQUIRE(run(dir, "synth-data " + args).code == 0);
  CHECK(fs::exists(dir / "out" / "manifest.csv"));
  REQUIRE(run(dir, "train " + args).code == 0);
  std::string first_wav;
  for (const auto& e : fs::directory_iterator(dir / "out"))
    if (e.path().extension() == ".wav") {
      first_wav = e.path().string();
      break;
    }
  REQUIRE(!first_wav.empty());
  auto r = run(dir, "predict --checkpoint " + (dir / "out" / "checkpoint.bin").string() + " " + first_wav);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("file,class,logp_high,logp_low", 0) == 0);
}

TEST_CASE("errors map to categories and exit codes") {
  auto dir = scratch("errors");
  auto bad_key = run(dir, "train --set model.bogus=1 --out-dir " + dir.string());
  CHECK(bad_key.code == 2);
  CHECK(bad_key.err.rfind("error: config:", 0) == 0);

  auto missing = run(dir, "train --set data.manifest=/nonexistent.csv --out-dir " + dir.string());
  CHECK(missing.code == 3);

  auto no_cmd = run(dir, "frobnicate");
  CHECK(no_cmd.code == 2);
}

TEST_CASE("gradcheck command reports every op") {
  auto dir = scratch("grad");
  auto r = run(dir, "gradcheck");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("op,max_rel_error,entries,status", 0) == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("grid scores every point on validation") {
  auto dir = scratch("grid");
  auto r = run(dir, "grid " + tiny_args(dir) + " --axis model.hidden=2,3 --axis train.lr=0.001,0.003");
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("best validation accuracy", 0) == 0);
  std::ifstream f(dir / "out" / "grid.csv");
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(f, line)) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "model.hidden,train.lr,validation_loss,validation_accuracy");
  CHECK(rows[1].rfind("2,0.001,", 0) == 0);
  CHECK(rows[4].rfind("3,0.003,", 0) == 0);
  CHECK(!fs::exists(dir / "out" / "checkpoint.bin"));

  CHECK(run(dir, "grid " + tiny_args(dir)).code == 2);
  CHECK(run(dir, "grid " + tiny_args(dir) + " --axis model.hidden").code == 2);
}
