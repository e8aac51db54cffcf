#pragma once

// Per-band local features: dilated conv blocks (conv -> instance norm ->
// leaky ReLU, no pooling) followed by 1-D spatial attention.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sigwav/autodiff.hpp"

namespace sigwav::features {

struct ConvBlockParams {
  Parameter weight;    // [K_out, C_in, S]
  Parameter bias;      // [K_out]
  Parameter in_gamma;  // [K_out]
  Parameter in_beta;   // [K_out]
  std::size_t stride = 1;
  std::size_t dilation = 1;
  double leaky_slope = 0.01;
  double eps = 1e-5;

  std::vector<Parameter*> parameters();
};

// Weights and bias uniform in +-1/sqrt(C_in*S); gamma 1, beta 0.
ConvBlockParams make_conv_block(const std::string& prefix, std::size_t in_channels,
                                std::size_t out_channels, std::size_t kernel, std::size_t dilation,
                                std::mt19937_64& rng);

// leaky_relu(instance_norm(conv1d(x)))
Var conv_block(Tape& tape, Var x, ConvBlockParams& p);

struct SpatialAttentionParams {
  Parameter score_weight;  // [1, C, 1]
  Parameter score_bias;    // [1]

  std::vector<Parameter*> parameters();
};

SpatialAttentionParams make_spatial_attention(const std::string& prefix, std::size_t channels,
                                              std::mt19937_64& rng);

struct SpatialAttentionOutput {
  Var weights;   // a  [B,1,W], softmax over W
  Var weighted;  // a * l  [B,C,W]
  Var summary;   // sum over W  [B,C]
};

// Global context is the width-wise mean of l, broadcast back over W.
Var global_context(Var l);
SpatialAttentionOutput spatial_attention(Tape& tape, Var l, SpatialAttentionParams& p);

struct FeatureConfig {
  std::size_t channels = 8;
  std::size_t kernel = 3;
  std::vector<std::size_t> dilations{1, 2, 4};
  double leaky_slope = 0.01;
};

struct BandFeatures {
  Var sequence;  // attention-weighted map [B,C,W']
  Var summary;   // [B,C]
};

class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureConfig& cfg, const std::string& prefix, std::mt19937_64& rng);

  BandFeatures forward(Tape& tape, Var band);
  std::vector<Parameter*> parameters();
  // Narrowest band width that survives every block.
  std::size_t minimum_width() const;
  std::size_t channels() const { return cfg_.channels; }

 private:
  FeatureConfig cfg_;
  std::vector<ConvBlockParams> blocks_;
  SpatialAttentionParams attention_;
};

// Free-function form used by tests: blocks in order, then attention.
BandFeatures band_features(Tape& tape, Var band, std::vector<ConvBlockParams>& blocks,
                           SpatialAttentionParams& att);

}  // namespace sigwav::features
