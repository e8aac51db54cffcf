#include "sigwav/model.hpp"

#include <algorithm>
#include <random>

#include "sigwav/error.hpp"

namespace sigwav {

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  require(cfg_.classes >= 1, ErrorCategory::config, "model needs at least one class");
  require(cfg_.hidden >= 1 && cfg_.features.channels >= 1, ErrorCategory::config,
          "hidden and channel extents must be positive");
  std::mt19937_64 rng(seed);
  frontend_ = std::make_unique<wavelet::FrontEnd>(cfg_.frontend);
  const std::size_t n_stacks = cfg_.per_band ? cfg_.bands() : 1;
  for (std::size_t b = 0; b < n_stacks; ++b) {
    const std::string prefix = cfg_.per_band ? "band" + std::to_string(b) : "shared";
    BandStack s;
    s.features = std::make_unique<features::FeatureExtractor>(cfg_.features, prefix + ".features", rng);
    if (cfg_.use_gru) {
      s.gru = sequence::make_bigru(prefix + ".bigru", cfg_.features.channels, cfg_.hidden,
                                   cfg_.gru_layers, cfg_.dropout, rng);
      s.attention = sequence::make_temporal_attention(prefix + ".temporal", 2 * cfg_.hidden, rng);
    }
    stacks_.push_back(std::move(s));
  }
  weights_ = head::ChannelWeights::ones("fusion", cfg_.bands());
  head_ = head::make_head("head", cfg_.bands(), cfg_.classes, cfg_.head_kernel, rng);
  head_.instance_norm = cfg_.head_instance_norm;
  require(cfg_.band_vector_size() >= cfg_.head_kernel, ErrorCategory::config,
          "band vectors of width " + std::to_string(cfg_.band_vector_size()) +
              " are too narrow for the class conv");
}

ModelOutput Model::forward(Tape& tape, Var signal, bool training, std::uint64_t dropout_seed) {
  auto bands = frontend_->forward(tape, signal).bands();
  ModelOutput out;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    auto& s = stack_for(b);
    auto f = s.features->forward(tape, bands[b]);
    if (!cfg_.use_gru) {
      out.band_vectors.push_back(f.summary);
      continue;
    }
    Var seq = transpose(f.sequence, 1, 2);  // [B,W',C]
    Var H = sequence::bigru_forward(tape, seq, s.gru, training, dropout_seed + 7919 * b);
    out.band_vectors.push_back(sequence::temporal_attention(tape, H, s.attention).vector);
  }
  Var fused = head::channel_weighting(tape, head::fuse_bands(out.band_vectors), weights_);
  out.log_probs = head::classify(tape, fused, head_);
  return out;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = frontend_->parameters();
  for (auto& s : stacks_) {
    for (auto* p : s.features->parameters()) out.push_back(p);
    if (cfg_.use_gru) {
      for (auto* p : s.gru.parameters()) out.push_back(p);
      for (auto* p : s.attention.parameters()) out.push_back(p);
    }
  }
  out.push_back(&weights_.w);
  for (auto* p : head_.parameters()) out.push_back(p);
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

std::size_t Model::minimum_length() const {
  // The narrowest band (a_L, d_L) must also survive the conv stack.
  const std::size_t band_min = stacks_.front().features->minimum_width();
  return std::max(frontend_->minimum_length(), band_min << cfg_.frontend.levels);
}

}  // namespace sigwav
