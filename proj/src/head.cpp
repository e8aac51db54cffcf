#include "sigwav/head.hpp"

#include "sigwav/error.hpp"

namespace sigwav::head {

Var fuse_bands(std::span<const Var> vectors) {
  require(!vectors.empty(), ErrorCategory::dimension, "fuse_bands: no bands");
  const Shape& first = vectors[0].shape();
  require(first.size() == 2, ErrorCategory::dimension,
          "fuse_bands: band vectors must be [B,D], got " + to_string(first));
  std::vector<Var> parts;
  parts.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    require(vectors[i].shape() == first, ErrorCategory::dimension,
            "fuse_bands: band " + std::to_string(i) + " has shape " +
                to_string(vectors[i].shape()) + ", expected " + to_string(first));
    parts.push_back(reshape(vectors[i], {first[0], 1, first[1]}));
  }
  return concat(parts, 1);
}

ChannelWeights ChannelWeights::ones(const std::string& prefix, std::size_t bands) {
  return {Parameter(prefix + ".channel_weights", Tensor({bands}, 1.0))};
}

Var channel_weighting(Tape& tape, Var X, ChannelWeights& cw) {
  const Shape& s = X.shape();
  const std::size_t bands = cw.w.value.size();
  require(s.size() == 3 && s[1] == bands, ErrorCategory::dimension,
          "channel_weighting: input " + to_string(s) + " does not have " + std::to_string(bands) +
              " bands");
  return mul(X, reshape(tape.param(cw.w), {1, bands, 1}));
}

std::vector<Parameter*> HeadParams::parameters() {
  if (instance_norm) return class_conv.parameters();
  return {&class_conv.weight, &class_conv.bias};
}

HeadParams make_head(const std::string& prefix, std::size_t bands, std::size_t classes,
                     std::size_t kernel, std::mt19937_64& rng) {
  require(classes >= 1, ErrorCategory::config, "head needs at least one class");
  return {features::make_conv_block(prefix + ".class_conv", bands, classes, kernel, 1, rng)};
}

Var global_average_pool(Var maps) { return mean(maps, 2); }

Var classify(Tape& tape, Var X, HeadParams& head) {
  const Shape& s = X.shape();
  const std::size_t span = head.class_conv.dilation * (head.class_conv.weight.value.shape[2] - 1);
  require(s.size() == 3, ErrorCategory::dimension, "classify: expected [B,bands,D]");
  require(s[2] > span, ErrorCategory::input_too_short,
          "classify: width " + std::to_string(s[2]) + " too small for the class conv (needs " +
              std::to_string(span + 1) + ")");
  Var maps;
  if (head.instance_norm) {
    maps = features::conv_block(tape, X, head.class_conv);
  } else {
    ConvOptions opt;
    opt.dilation = head.class_conv.dilation;
    maps = leaky_relu(conv1d(X, tape.param(head.class_conv.weight), tape.param(head.class_conv.bias), opt),
                      head.class_conv.leaky_slope);
  }
  return log_softmax(global_average_pool(maps), 1);
}

}  // namespace sigwav::head
