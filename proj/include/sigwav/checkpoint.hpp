#pragma once

// Checkpoint container:
//   u64 little-endian header length N
//   N bytes of JSON: format_version, labels, config, parameters [{name, shape}]
//   little-endian f64 values of every parameter in header order

#include <memory>
#include <string>
#include <vector>

#include "sigwav/config.hpp"
#include "sigwav/model.hpp"

namespace sigwav {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  std::vector<std::string> labels;
  std::unique_ptr<Model> model;
};

void save_checkpoint(const std::string& path, Model& model, const RunConfig& cfg,
                     const std::vector<std::string>& labels);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sigwav
