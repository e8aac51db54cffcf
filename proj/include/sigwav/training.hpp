#pragma once

// Focal loss, L2 penalty, Adam, stratified splits, the training loop and
// classification metrics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigwav/model.hpp"

namespace sigwav::training {

struct LossConfig {
  double gamma = 2.0;
  // Per-class alpha_t; empty means 1 for every class.
  std::vector<double> class_alpha;
  double lambda = 1e-4;
};

// Inverse class frequency, rescaled to mean 1 over the classes present.
std::vector<double> inverse_frequency_alpha(std::span<const std::size_t> labels, std::size_t classes);

// mean_b -alpha_t (1 - p_t)^gamma log p_t, log_probs [B,classes].
Var focal_loss(Var log_probs, std::span<const std::size_t> targets, const LossConfig& cfg);

// lambda * sum of squares over every entry of `params`.
Var l2_penalty(Tape& tape, std::span<Parameter* const> params, double lambda);
Var regularized_objective(Tape& tape, Var task_loss, std::span<Parameter* const> params, double lambda);

struct AdamConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m, v;
};

// One bias-corrected update from Parameter::grad. Every parameter must
// carry a gradient.
void adam_step(std::span<Parameter* const> params, AdamState& state);

struct Fold {
  std::vector<std::size_t> train, validation;
};

struct SplitPlan {
  std::vector<std::size_t> test;
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Per class: shuffle, carve the test share by largest remainder, then deal
// the rest round-robin over the folds.
SplitPlan stratified_split(std::span<const std::size_t> labels, std::uint64_t seed,
                           double test_fraction = 0.1, std::size_t folds = 10);

struct Example {
  std::vector<double> samples;
  std::size_t label = 0;
  std::string id;
};
using Dataset = std::vector<Example>;

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  int workers = 1;
  LossConfig loss;
  AdamConfig adam;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
};

// Called after every epoch with that epoch's records; returning false stops
// training.
using EpochCallback = std::function<bool(Model&, const std::vector<EpochRecord>&)>;

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t epochs_run = 0;
};

TrainResult train(Model& model, const Dataset& data, std::span<const std::size_t> train_idx,
                  std::span<const std::size_t> validation_idx, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct Prediction {
  std::size_t label = 0;
  std::vector<double> log_probs;
};

// Eval-mode forward per utterance; `workers` threads, results in index order.
std::vector<Prediction> predict(Model& model, const Dataset& data,
                                std::span<const std::size_t> idx, int workers);

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<std::vector<std::size_t>> confusion;  // rows true, columns predicted
  std::vector<ClassMetrics> per_class;
  ClassMetrics macro, weighted;
  double accuracy = 0;
  std::size_t total = 0;
  double loss = 0;  // mean focal loss, when computed from predictions
};

MetricsReport compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                              std::size_t classes);

MetricsReport evaluate(Model& model, const Dataset& data, std::span<const std::size_t> idx,
                       const LossConfig& loss, int workers);

nlohmann::ordered_json to_json(const MetricsReport& m, const std::vector<std::string>& labels);

}  // namespace sigwav::training
