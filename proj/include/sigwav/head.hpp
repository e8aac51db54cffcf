#pragma once

// Band fusion, per-band channel weighting and the convolutional classifier
// (conv block -> global average pooling -> log-softmax).

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "sigwav/features.hpp"

namespace sigwav::head {

// Band vectors [B,D] -> [B,bands,D], in the order given.
Var fuse_bands(std::span<const Var> vectors);

struct ChannelWeights {
  Parameter w;  // [bands], starts at one

  static ChannelWeights ones(const std::string& prefix, std::size_t bands);
};

// X [B,bands,D] scaled per band.
Var channel_weighting(Tape& tape, Var X, ChannelWeights& cw);

struct HeadParams {
  features::ConvBlockParams class_conv;  // K_out = classes
  bool instance_norm = true;

  std::size_t classes() const { return class_conv.weight.value.shape[0]; }
  std::vector<Parameter*> parameters();
};

HeadParams make_head(const std::string& prefix, std::size_t bands, std::size_t classes,
                     std::size_t kernel, std::mt19937_64& rng);

// Class maps [B,classes,D'] averaged over width.
Var global_average_pool(Var maps);

// X [B,bands,D] -> log-probabilities [B,classes].
Var classify(Tape& tape, Var X, HeadParams& head);

}  // namespace sigwav::head
