#include "sigwav/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "sigwav/audio.hpp"
#include "sigwav/error.hpp"
#include "sigwav/synthetic.hpp"

namespace sigwav {

namespace fs = std::filesystem;

namespace {

void echo(std::ostream& os, const RunConfig& cfg) {
  for (const auto& line : echo_lines(cfg)) os << "# " << line << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  require(os.good(), ErrorCategory::dataset, "cannot write " + path);
  os.precision(17);
  return os;
}

}  // namespace

LoadedData load_run_data(RunConfig& cfg) {
  LoadedData out;
  if (!cfg.data.emodb_dir.empty()) {
    auto manifest = audio::emodb_manifest(cfg.data.emodb_dir);
    out.labels = manifest.vocabulary;
    out.data = audio::load_dataset(manifest, cfg.data.emodb_dir, out.labels);
  } else if (!cfg.data.manifest.empty()) {
    auto manifest = audio::read_manifest(cfg.data.manifest);
    const std::string root =
        cfg.data.root.empty() ? fs::path(cfg.data.manifest).parent_path().string() : cfg.data.root;
    out.labels = manifest.vocabulary;
    out.data = audio::load_dataset(manifest, root, out.labels);
  } else {
    const auto spec = cfg.data.synthetic_spec.empty() ? synthetic::default_spec()
                                                      : synthetic::load_spec(cfg.data.synthetic_spec);
    cfg.model.classes = spec.classes.size();
    const Model probe(cfg.model, 0);
    auto syn = synthetic::generate_synthetic(spec, cfg.data.n_per_class, cfg.model.frontend.levels,
                                             probe.minimum_length());
    out.data = std::move(syn.data);
    out.labels = std::move(syn.labels);
  }
  require(!out.data.empty(), ErrorCategory::dataset, "dataset is empty");
  cfg.model.classes = out.labels.size();
  const Model probe(cfg.model, 0);
  const std::size_t min_len = probe.minimum_length();
  for (const auto& ex : out.data) {
    require(ex.samples.size() >= min_len, ErrorCategory::input_too_short,
            ex.id + ": " + std::to_string(ex.samples.size()) + " samples, below the " +
                std::to_string(cfg.model.frontend.levels) + "-level minimum of " + std::to_string(min_len));
  }
  return out;
}

RunOutcome run_training(const RunConfig& cfg, const LoadedData& data, std::uint64_t seed,
                        const training::EpochCallback& on_epoch) {
  std::vector<std::size_t> labels;
  for (const auto& ex : data.data) labels.push_back(ex.label);
  RunOutcome out;
  out.plan = training::stratified_split(labels, cfg.train.seed, cfg.test_fraction, cfg.folds);
  require(cfg.fold < out.plan.folds.size(), ErrorCategory::config,
          "train.fold " + std::to_string(cfg.fold) + " out of range (" +
              std::to_string(out.plan.folds.size()) + " folds)");
  const auto& fold = out.plan.folds[cfg.fold];

  training::TrainConfig tc = cfg.train;
  tc.seed = seed;
  if (cfg.auto_alpha) {
    std::vector<std::size_t> train_labels;
    for (auto i : fold.train) train_labels.push_back(labels[i]);
    tc.loss.class_alpha = training::inverse_frequency_alpha(train_labels, cfg.model.classes);
  }
  out.model = std::make_unique<Model>(cfg.model, seed);
  out.train = training::train(*out.model, data.data, fold.train, fold.validation, tc, on_epoch);
  if (!out.plan.test.empty())
    out.test = training::evaluate(*out.model, data.data, out.plan.test, tc.loss, tc.workers);
  return out;
}

GridAxis parse_grid_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  require(eq != std::string::npos && eq > 0 && eq + 1 < spec.size(), ErrorCategory::config,
          "grid axis '" + spec + "' is not section.key=v1,v2,...");
  GridAxis axis{spec.substr(0, eq), {}};
  std::size_t start = eq + 1;
  while (true) {
    const auto comma = spec.find(',', start);
    auto v = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    require(!v.empty(), ErrorCategory::config, "grid axis '" + spec + "' has an empty value");
    axis.values.push_back(std::move(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return axis;
}

std::vector<std::vector<std::string>> grid_points(const std::vector<GridAxis>& axes) {
  std::vector<std::vector<std::string>> points{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<std::string>> next;
    for (const auto& p : points)
      for (const auto& v : axis.values) {
        auto q = p;
        q.push_back(axis.key + "=" + v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

void write_epochs_csv(const std::string& path, const std::vector<training::EpochRecord>& log,
                      const RunConfig& cfg) {
  auto os = open_out(path);
  echo(os, cfg);
  os << "epoch,split,loss,accuracy\n";
  for (const auto& r : log) os << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.accuracy << '\n';
}

void write_confusion_csv(const std::string& path, const training::MetricsReport& m,
                         const std::vector<std::string>& labels, const RunConfig& cfg) {
  auto os = open_out(path);
  echo(os, cfg);
  os << "true\\predicted";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  for (std::size_t r = 0; r < m.confusion.size(); ++r) {
    os << labels[r];
    for (auto v : m.confusion[r]) os << ',' << v;
    os << '\n';
  }
}

nlohmann::ordered_json metrics_document(const training::MetricsReport& m,
                                        const std::vector<std::string>& labels, const RunConfig& cfg) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json config;
  for (const auto& [section, body] : to_ptree(cfg))
    for (const auto& [key, value] : body) config[section][key] = value.data();
  doc["config"] = config;
  doc["labels"] = labels;
  doc["metrics"] = training::to_json(m, labels);
  return doc;
}

void write_json(const std::string& path, const nlohmann::ordered_json& doc) {
  auto os = open_out(path);
  os << doc.dump(2) << '\n';
}

}  // namespace sigwav
