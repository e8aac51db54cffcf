#include "sigwav/features.hpp"

#include <cmath>

#include "sigwav/error.hpp"

namespace sigwav::features {

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = dist(rng);
  return t;
}

}  // namespace

std::vector<Parameter*> ConvBlockParams::parameters() { return {&weight, &bias, &in_gamma, &in_beta}; }

ConvBlockParams make_conv_block(const std::string& prefix, std::size_t in_channels,
                                std::size_t out_channels, std::size_t kernel, std::size_t dilation,
                                std::mt19937_64& rng) {
  require(kernel >= 1 && dilation >= 1, ErrorCategory::config,
          "conv block needs kernel >= 1 and dilation >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel));
  ConvBlockParams p;
  p.weight = Parameter(prefix + ".weight", uniform({out_channels, in_channels, kernel}, bound, rng));
  p.bias = Parameter(prefix + ".bias", uniform({out_channels}, bound, rng));
  p.in_gamma = Parameter(prefix + ".in_gamma", Tensor({out_channels}, 1.0));
  p.in_beta = Parameter(prefix + ".in_beta", Tensor({out_channels}, 0.0));
  p.dilation = dilation;
  return p;
}

Var conv_block(Tape& tape, Var x, ConvBlockParams& p) {
  ConvOptions opt;
  opt.stride = p.stride;
  opt.dilation = p.dilation;
  Var y = conv1d(x, tape.param(p.weight), tape.param(p.bias), opt);
  y = instance_norm(y, tape.param(p.in_gamma), tape.param(p.in_beta), p.eps);
  return leaky_relu(y, p.leaky_slope);
}

std::vector<Parameter*> SpatialAttentionParams::parameters() { return {&score_weight, &score_bias}; }

SpatialAttentionParams make_spatial_attention(const std::string& prefix, std::size_t channels,
                                              std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  SpatialAttentionParams p;
  p.score_weight = Parameter(prefix + ".score_weight", uniform({1, channels, 1}, bound, rng));
  p.score_bias = Parameter(prefix + ".score_bias", uniform({1}, bound, rng));
  return p;
}

Var global_context(Var l) {
  const Shape& s = l.shape();
  return reshape(mean(l, 2), {s[0], s[1], 1});
}

SpatialAttentionOutput spatial_attention(Tape& tape, Var l, SpatialAttentionParams& p) {
  const Shape& s = l.shape();
  require(s.size() == 3 && s[2] >= 1, ErrorCategory::dimension,
          "spatial_attention: expected [B,C,W], got " + to_string(s));
  Var combined = add(l, global_context(l));
  Var scores = conv1d(combined, tape.param(p.score_weight), tape.param(p.score_bias));
  SpatialAttentionOutput out;
  out.weights = softmax(scores, 2);
  out.weighted = mul(out.weights, l);
  out.summary = sum(out.weighted, 2);
  return out;
}

BandFeatures band_features(Tape& tape, Var band, std::vector<ConvBlockParams>& blocks,
                           SpatialAttentionParams& att) {
  Var x = band;
  for (auto& b : blocks) x = conv_block(tape, x, b);
  auto a = spatial_attention(tape, x, att);
  // Rescaled by W so uniform weights pass the map through unchanged.
  const double width = static_cast<double>(x.shape()[2]);
  return {affine(a.weighted, width, 0.0), a.summary};
}

FeatureExtractor::FeatureExtractor(const FeatureConfig& cfg, const std::string& prefix,
                                   std::mt19937_64& rng)
    : cfg_(cfg) {
  require(!cfg_.dilations.empty(), ErrorCategory::config, "feature extractor needs conv layers");
  std::size_t in = 1;
  for (std::size_t i = 0; i < cfg_.dilations.size(); ++i) {
    blocks_.push_back(make_conv_block(prefix + ".block" + std::to_string(i), in, cfg_.channels,
                                      cfg_.kernel, cfg_.dilations[i], rng));
    blocks_.back().leaky_slope = cfg_.leaky_slope;
    in = cfg_.channels;
  }
  attention_ = make_spatial_attention(prefix + ".attention", cfg_.channels, rng);
}

BandFeatures FeatureExtractor::forward(Tape& tape, Var band) {
  require(band.shape().size() == 3 && band.shape()[2] >= minimum_width(),
          ErrorCategory::input_too_short,
          "band of width " + std::to_string(band.shape().back()) +
              " does not survive the conv stack (needs " + std::to_string(minimum_width()) + ")");
  return band_features(tape, band, blocks_, attention_);
}

std::vector<Parameter*> FeatureExtractor::parameters() {
  std::vector<Parameter*> out;
  for (auto& b : blocks_)
    for (auto* p : b.parameters()) out.push_back(p);
  for (auto* p : attention_.parameters()) out.push_back(p);
  return out;
}

std::size_t FeatureExtractor::minimum_width() const {
  std::size_t shrink = 0;
  for (auto d : cfg_.dilations) shrink += d * (cfg_.kernel - 1);
  return shrink + 1;
}

}  // namespace sigwav::features
