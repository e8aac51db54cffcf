#pragma once

// Full classifier: wavelet front-end -> per-band features -> Bi-GRU and
// temporal attention -> band fusion -> channel weighting -> class head.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "sigwav/features.hpp"
#include "sigwav/head.hpp"
#include "sigwav/sequence.hpp"
#include "sigwav/wavelet.hpp"

namespace sigwav {

struct ModelConfig {
  wavelet::FrontEndConfig frontend;
  features::FeatureConfig features;
  std::size_t hidden = 8;
  std::size_t gru_layers = 6;
  double dropout = 0.2;
  // Off: the spatial summary [B,C] goes straight to fusion.
  bool use_gru = true;
  // Separate feature/sequence parameters for every band instead of one shared stack.
  bool per_band = false;
  std::size_t head_kernel = 3;
  bool head_instance_norm = true;
  std::size_t classes = 4;

  std::size_t bands() const { return frontend.levels + 1; }
  // Width of each band vector entering fusion.
  std::size_t band_vector_size() const { return use_gru ? 2 * hidden : features.channels; }
};

struct ModelOutput {
  Var log_probs;                // [B,classes]
  std::vector<Var> band_vectors;  // per band [B,D]
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // signal [B,1,W]
  ModelOutput forward(Tape& tape, Var signal, bool training, std::uint64_t dropout_seed);

  // Stable order; checkpoint layout follows it.
  std::vector<Parameter*> parameters();
  std::size_t parameter_count();
  std::size_t minimum_length() const;

  wavelet::FrontEnd& frontend() { return *frontend_; }

 private:
  struct BandStack {
    std::unique_ptr<features::FeatureExtractor> features;
    sequence::BiGruStack gru;
    sequence::TemporalAttentionParams attention;
  };
  BandStack& stack_for(std::size_t band) { return stacks_[cfg_.per_band ? band : 0]; }

  ModelConfig cfg_;
  std::unique_ptr<wavelet::FrontEnd> frontend_;
  std::vector<BandStack> stacks_;
  head::ChannelWeights weights_;
  head::HeadParams head_;
};

}  // namespace sigwav
