#pragma once

// Run configuration: INI-style text with [model], [train] and [data]
// sections, dotted-path overrides (model.levels=4) and ablation tags.

#include <cstddef>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "sigwav/model.hpp"
#include "sigwav/training.hpp"

namespace sigwav {

struct DataConfig {
  std::string manifest;        // CSV path,label
  std::string root;            // base directory for manifest paths
  std::string synthetic_spec;  // empty: built-in spec
  std::string emodb_dir;       // EMO-DB preset: directory of wav files
  std::size_t n_per_class = 25;
};

struct RunConfig {
  std::string ablation = "allkernel+laht";
  ModelConfig model;
  training::TrainConfig train;
  std::size_t folds = 10;
  std::size_t fold = 0;
  double test_fraction = 0.1;
  bool auto_alpha = true;  // inverse-frequency alpha when no explicit list
  std::size_t seed_sweep = 1;
  DataConfig data;
};

const std::vector<std::string>& ablation_tags();
// Sets sharing, LAHT and Bi-GRU bypass for a tag.
void apply_ablation(ModelConfig& model, const std::string& tag);

boost::property_tree::ptree to_ptree(const RunConfig& cfg);
// Unknown keys and malformed values raise config errors.
RunConfig from_ptree(const boost::property_tree::ptree& tree);

RunConfig default_config();
RunConfig load_config(const std::string& path);
// "section.key=value"
void apply_overrides(boost::property_tree::ptree& tree, const std::vector<std::string>& overrides);
// Defaults, then file (if any), then overrides.
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides);

// Flat "section.key=value" lines of the effective config.
std::vector<std::string> echo_lines(const RunConfig& cfg);

}  // namespace sigwav
