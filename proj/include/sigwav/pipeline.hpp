#pragma once

// Glue shared by the CLI and the end-to-end tests: dataset resolution from a
// RunConfig, one split/train/test cycle, and artifact writers.

#include <memory>
#include <string>
#include <vector>

#include "sigwav/config.hpp"
#include "sigwav/training.hpp"

namespace sigwav {

struct LoadedData {
  training::Dataset data;
  std::vector<std::string> labels;
};

// EMO-DB directory, else manifest, else synthetic. Sets cfg.model.classes to
// the label count and rejects clips shorter than the model minimum.
LoadedData load_run_data(RunConfig& cfg);

struct RunOutcome {
  training::SplitPlan plan;
  training::TrainResult train;
  training::MetricsReport test;
  std::vector<training::MetricsReport> fold_validation;
  std::unique_ptr<Model> model;
};

// Split with train.seed, train on train.fold (validation = that fold's
// held-out slice), evaluate on the test split. Model init and dropout use `seed`.
RunOutcome run_training(const RunConfig& cfg, const LoadedData& data, std::uint64_t seed,
                        const training::EpochCallback& on_epoch = {});

// One hyperparameter axis of an exhaustive grid: "section.key=v1,v2,...".
struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};
GridAxis parse_grid_axis(const std::string& spec);

// Cartesian product as override lists, last axis varying fastest.
std::vector<std::vector<std::string>> grid_points(const std::vector<GridAxis>& axes);

void write_epochs_csv(const std::string& path, const std::vector<training::EpochRecord>& log,
                      const RunConfig& cfg);
void write_confusion_csv(const std::string& path, const training::MetricsReport& m,
                         const std::vector<std::string>& labels, const RunConfig& cfg);
// Metrics document with the effective config echoed under "config".
nlohmann::ordered_json metrics_document(const training::MetricsReport& m,
                                        const std::vector<std::string>& labels, const RunConfig& cfg);
void write_json(const std::string& path, const nlohmann::ordered_json& doc);

}  // namespace sigwav
