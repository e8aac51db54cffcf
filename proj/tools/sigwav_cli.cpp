// sigwav: train / grid / evaluate / predict / decompose / synth-data / gradcheck

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sigwav/audio.hpp"
#include "sigwav/checkpoint.hpp"
#include "sigwav/error.hpp"
#include "sigwav/gradcheck.hpp"
#include "sigwav/pipeline.hpp"
#include "sigwav/synthetic.hpp"

namespace fs = std::filesystem;
using namespace sigwav;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::size_t> epochs;
  std::optional<std::string> ablation;
  std::string out_dir = ".";
  std::string checkpoint;
  std::string subset = "test";
  std::string output;
  bool cross_validate = false;
  std::vector<std::string> axes;
  std::vector<std::string> inputs;
};

RunConfig resolve(const Options& o) {
  std::vector<std::string> ov = o.overrides;
  if (o.seed) ov.push_back("train.seed=" + std::to_string(*o.seed));
  if (o.workers) ov.push_back("train.workers=" + std::to_string(*o.workers));
  if (o.epochs) ov.push_back("train.epochs=" + std::to_string(*o.epochs));
  if (o.ablation) ov.push_back("model.ablation=" + *o.ablation);
  return resolve_config(o.config, ov);
}

std::string out_path(const Options& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  return (fs::path(o.out_dir) / name).string();
}

int cmd_train(const Options& o) {
  RunConfig cfg = resolve(o);
  auto data = load_run_data(cfg);
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  RunOutcome last;
  double acc_sum = 0;
  for (std::size_t s = 0; s < cfg.seed_sweep; ++s) {
    const std::uint64_t seed = cfg.train.seed + s;
    auto on_epoch = [&](Model&, const std::vector<training::EpochRecord>& recs) {
      for (const auto& r : recs)
        std::cerr << "seed " << seed << " epoch " << r.epoch << ' ' << r.split << " loss " << r.loss
                  << " accuracy " << r.accuracy << '\n';
      return true;
    };
    last = run_training(cfg, data, seed, on_epoch);
    for (const auto& w : last.plan.warnings) std::cerr << "warning: " << w << '\n';
    acc_sum += last.test.accuracy;
    runs.push_back({{"seed", seed}, {"test_accuracy", last.test.accuracy}, {"epochs_run", last.train.epochs_run}});
  }
  require(!last.plan.test.empty(), ErrorCategory::dataset, "test split is empty; raise train.test_fraction");

  auto doc = metrics_document(last.test, data.labels, cfg);
  if (cfg.seed_sweep > 1) {
    doc["seed_sweep"] = runs;
    doc["mean_test_accuracy"] = acc_sum / cfg.seed_sweep;
  }
  if (o.cross_validate) {
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    double sum = 0;
    for (std::size_t f = 0; f < last.plan.folds.size(); ++f) {
      RunConfig fc = cfg;
      fc.fold = f;
      auto r = run_training(fc, data, cfg.train.seed);
      const auto& val = last.plan.folds[f].validation;
      if (val.empty()) continue;
      auto m = training::evaluate(*r.model, data.data, val, cfg.train.loss, cfg.train.workers);
      sum += m.accuracy;
      folds.push_back({{"fold", f}, {"validation", training::to_json(m, data.labels)}});
    }
    doc["cross_validation"] = folds;
    if (!folds.empty()) doc["mean_validation_accuracy"] = sum / folds.size();
  }
  save_checkpoint(out_path(o, "checkpoint.bin"), *last.model, cfg, data.labels);
  write_epochs_csv(out_path(o, "epochs.csv"), last.train.log, cfg);
  write_confusion_csv(out_path(o, "confusion.csv"), last.test, data.labels, cfg);
  write_json(out_path(o, "metrics.json"), doc);
  std::cout << "test accuracy " << last.test.accuracy << '\n';
  return 0;
}

// Scores every grid point by validation accuracy on train.fold; the test
// split is never touched.
int cmd_grid(const Options& o) {
  require(!o.axes.empty(), ErrorCategory::config, "grid needs at least one --axis");
  std::vector<GridAxis> axes;
  for (const auto& a : o.axes) axes.push_back(parse_grid_axis(a));
  const auto points = grid_points(axes);

  auto os = std::ofstream(out_path(o, "grid.csv"));
  require(os.good(), ErrorCategory::dataset, "cannot write grid.csv");
  os.precision(17);
  for (const auto& a : axes) os << a.key << ',';
  os << "validation_loss,validation_accuracy\n";

  double best = -1;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Options po = o;
    po.overrides.insert(po.overrides.end(), points[i].begin(), points[i].end());
    RunConfig cfg = resolve(po);
    auto data = load_run_data(cfg);
    auto r = run_training(cfg, data, cfg.train.seed);
    const auto& val = r.plan.folds[cfg.fold].validation;
    require(!val.empty(), ErrorCategory::dataset, "validation fold is empty; raise train.folds");
    auto m = training::evaluate(*r.model, data.data, val, cfg.train.loss, cfg.train.workers);
    for (const auto& kv : points[i]) os << kv.substr(kv.find('=') + 1) << ',';
    os << m.loss << ',' << m.accuracy << '\n';
    std::cerr << "grid " << i + 1 << '/' << points.size() << " validation accuracy " << m.accuracy << '\n';
    if (m.accuracy > best) {
      best = m.accuracy;
      best_i = i;
    }
  }
  std::cout << "best validation accuracy " << best;
  for (const auto& kv : points[best_i]) std::cout << ' ' << kv;
  std::cout << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  const std::string ck_path = o.checkpoint.empty() ? out_path(o, "checkpoint.bin") : o.checkpoint;
  auto ck = load_checkpoint(ck_path);
  RunConfig cfg = ck.config;
  // Data may be redirected; the model section stays as trained.
  if (!o.config.empty() || !o.overrides.empty()) {
    RunConfig alt = resolve(o);
    cfg.data = alt.data;
    cfg.train.workers = alt.train.workers;
  }
  if (o.workers) cfg.train.workers = *o.workers;
  RunConfig probe = cfg;
  auto data = load_run_data(probe);
  require(data.labels == ck.labels, ErrorCategory::label,
          "dataset labels do not match the checkpoint's label set");

  std::vector<std::size_t> idx;
  if (o.subset == "all") {
    for (std::size_t i = 0; i < data.data.size(); ++i) idx.push_back(i);
  } else if (o.subset == "test") {
    std::vector<std::size_t> labels;
    for (const auto& ex : data.data) labels.push_back(ex.label);
    idx = training::stratified_split(labels, cfg.train.seed, cfg.test_fraction, cfg.folds).test;
  } else {
    fail(ErrorCategory::config, "--subset must be 'test' or 'all'");
  }
  training::LossConfig loss = cfg.train.loss;
  if (cfg.auto_alpha) loss.class_alpha.clear();
  auto m = training::evaluate(*ck.model, data.data, idx, loss, cfg.train.workers);
  write_json(out_path(o, "metrics.json"), metrics_document(m, ck.labels, cfg));
  write_confusion_csv(out_path(o, "confusion.csv"), m, ck.labels, cfg);
  std::cout << "accuracy " << m.accuracy << '\n';
  return 0;
}

int cmd_predict(const Options& o) {
  require(!o.inputs.empty(), ErrorCategory::config, "predict needs at least one wav file");
  const std::string ck_path = o.checkpoint.empty() ? out_path(o, "checkpoint.bin") : o.checkpoint;
  auto ck = load_checkpoint(ck_path);
  training::Dataset data;
  for (const auto& f : o.inputs) {
    auto clip = audio::resample_to_16k(audio::load_wav(f));
    data.push_back({std::move(clip.samples), 0, f});
  }
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto preds = training::predict(*ck.model, data, idx, o.workers.value_or(ck.config.train.workers));
  std::cout.precision(17);
  std::cout << "file,class";
  for (const auto& l : ck.labels) std::cout << ",logp_" << l;
  std::cout << '\n';
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::cout << data[i].id << ',' << ck.labels[preds[i].label];
    for (double v : preds[i].log_probs) std::cout << ',' << v;
    std::cout << '\n';
  }
  return 0;
}

int cmd_decompose(const Options& o) {
  require(o.inputs.size() == 1, ErrorCategory::config, "decompose takes exactly one wav file");
  std::unique_ptr<wavelet::FrontEnd> owned;
  wavelet::FrontEnd* fe = nullptr;
  std::unique_ptr<Checkpoint> ck;
  if (!o.checkpoint.empty()) {
    ck = std::make_unique<Checkpoint>(load_checkpoint(o.checkpoint));
    fe = &ck->model->frontend();
  } else {
    const RunConfig cfg = resolve(o);
    owned = std::make_unique<wavelet::FrontEnd>(cfg.model.frontend);
    fe = owned.get();
  }
  auto clip = audio::resample_to_16k(audio::load_wav(o.inputs[0]));
  Tape tape;
  tape.set_grad_enabled(false);
  Var x = tape.constant(Tensor({1, 1, clip.samples.size()}, clip.samples));
  auto bands = fe->forward(tape, x);
  const std::string path = o.output.empty() ? out_path(o, "bands.csv") : o.output;
  std::ofstream os(path);
  require(os.good(), ErrorCategory::dataset, "cannot write " + path);
  os.precision(17);
  os << "band,index,value\n";
  auto dump = [&](const std::string& name, Var v) {
    const auto vals = v.value();
    for (std::size_t i = 0; i < vals.size(); ++i) os << name << ',' << i << ',' << vals[i] << '\n';
  };
  for (std::size_t j = 0; j < bands.details.size(); ++j) dump("d" + std::to_string(j + 1), bands.details[j]);
  dump("a" + std::to_string(bands.details.size()), bands.approximation);
  return 0;
}

int cmd_synth(const Options& o) {
  RunConfig cfg = resolve(o);
  auto data = load_run_data(cfg);
  audio::DatasetManifest manifest;
  manifest.vocabulary = data.labels;
  for (const auto& ex : data.data) {
    const std::string name = ex.id + ".wav";
    audio::write_wav(out_path(o, name), {ex.samples, audio::kTargetRate, ex.label, ex.id});
    manifest.rows.push_back({name, data.labels[ex.label]});
  }
  audio::write_manifest(out_path(o, "manifest.csv"), manifest);
  std::cout << "wrote " << data.data.size() << " clips\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto reports = gradcheck_suite(o.seed.value_or(1));
  bool ok = true;
  std::cout << "op,max_rel_error,entries,status\n";
  for (const auto& r : reports) {
    const bool pass = r.max_rel_error < kGradcheckTolerance;
    ok = ok && pass;
    std::cout << r.op << ',' << r.max_rel_error << ',' << r.entries << ',' << (pass ? "ok" : "FAIL") << '\n';
  }
  if (!ok) fail(ErrorCategory::numerical, "gradient check exceeded tolerance");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learnable wavelet front-end classifier"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI config file");
    sub->add_option("--set", o.overrides, "section.key=value override (repeatable)");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--workers", o.workers, "evaluation threads");
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--ablation", o.ablation, "ablation tag");
    sub->add_option("--out-dir", o.out_dir, "output directory");
  };
  auto* train = app.add_subcommand("train", "train and evaluate on the test split");
  common(train);
  train->add_flag("--cross-validate", o.cross_validate, "also train every fold and report validation metrics");
  auto* grid = app.add_subcommand("grid", "exhaustive hyperparameter grid scored on validation");
  common(grid);
  grid->add_option("--axis", o.axes, "section.key=v1,v2,... (repeatable)");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  common(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint path (default <out-dir>/checkpoint.bin)");
  evaluate->add_option("--subset", o.subset, "test | all");
  auto* predict = app.add_subcommand("predict", "classify wav files");
  common(predict);
  predict->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  predict->add_option("files", o.inputs, "wav files");
  auto* decompose = app.add_subcommand("decompose", "dump wavelet band coefficients");
  common(decompose);
  decompose->add_option("--checkpoint", o.checkpoint, "use a trained front-end");
  decompose->add_option("--output", o.output, "CSV path (default <out-dir>/bands.csv)");
  decompose->add_option("file", o.inputs, "wav file");
  auto* synth = app.add_subcommand("synth-data", "write the synthetic dataset as wav + manifest");
  common(synth);
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  common(grad);
  // Bare section.key=value arguments are overrides too.
  for (auto* sub : {train, grid, evaluate, synth}) sub->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (auto* sub : {train, grid, evaluate, synth})
      if (*sub)
        for (const auto& extra : sub->remaining()) o.overrides.push_back(extra);
    if (*train) return cmd_train(o);
    if (*grid) return cmd_grid(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*predict) return cmd_predict(o);
    if (*decompose) return cmd_decompose(o);
    if (*synth) return cmd_synth(o);
    if (*grad) return cmd_gradcheck(o);
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
