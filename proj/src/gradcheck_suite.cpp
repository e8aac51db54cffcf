#include <array>
#include <random>

#include "sigwav/features.hpp"
#include "sigwav/gradcheck.hpp"
#include "sigwav/head.hpp"
#include "sigwav/model.hpp"
#include "sigwav/sequence.hpp"
#include "sigwav/training.hpp"
#include "sigwav/wavelet.hpp"

namespace sigwav {

namespace {

Tensor random(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = dist(rng);
  return t;
}

Parameter random_param(const std::string& name, Shape shape, std::mt19937_64& rng) {
  return Parameter(name, random(std::move(shape), rng));
}

std::vector<Parameter*> pointers(std::vector<Parameter>& ps) {
  std::vector<Parameter*> out;
  for (auto& p : ps) out.push_back(&p);
  return out;
}

}  // namespace

std::vector<GradcheckReport> gradcheck_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradcheckReport> out;
  const std::vector<Parameter*> none;
  auto run = [&](const std::string& op, const GraphBuilder& build, std::vector<Tensor> inputs,
                 std::span<Parameter* const> params = {}) {
    out.push_back(gradcheck(op, build, std::move(inputs), params, rng()));
  };

  // ---- convolution
  auto conv_case = [&](const std::string& name, std::size_t w, std::size_t s, ConvOptions opt) {
    run(name,
        [opt](Tape&, std::span<const Var> v) { return conv1d(v[0], v[1], v[2], opt); },
        {random({2, 3, w}, rng), random({2, 3, s}, rng), random({2}, rng)});
  };
  conv_case("conv1d", 9, 3, {});
  conv_case("conv1d_stride2_dilation2", 12, 3, {2, 2, Padding::none()});
  conv_case("conv1d_circular", 10, 4, {2, 1, Padding::circular()});
  conv_case("conv1d_zero_pad", 7, 3, {1, 2, Padding::zero(2)});

  // ---- pointwise
  auto unary_case = [&](const std::string& name, Var (*f)(Var), double lo, double hi) {
    run(name, [f](Tape&, std::span<const Var> v) { return f(v[0]); }, {random({2, 3}, rng, lo, hi)});
  };
  unary_case("sigmoid", sigmoid, -3, 3);
  unary_case("tanh", tanh, -2, 2);
  unary_case("exp", exp, -2, 2);
  unary_case("log", log, 0.2, 3);
  unary_case("neg", neg, -2, 2);
  unary_case("softplus", softplus, -3, 3);
  run("leaky_relu", [](Tape&, std::span<const Var> v) { return leaky_relu(v[0], 0.01); },
      {random({2, 5}, rng)});
  run("affine", [](Tape&, std::span<const Var> v) { return affine(v[0], -1.5, 0.3); }, {random({4}, rng)});
  run("pow_scalar", [](Tape&, std::span<const Var> v) { return pow_scalar(v[0], 2.5); },
      {random({4}, rng, 0.1, 2.0)});
  run("add_broadcast", [](Tape&, std::span<const Var> v) { return add(v[0], v[1]); },
      {random({2, 3, 4}, rng), random({3, 1}, rng)});
  run("sub_broadcast", [](Tape&, std::span<const Var> v) { return sub(v[0], v[1]); },
      {random({2, 1, 4}, rng), random({3, 4}, rng)});
  run("mul_broadcast", [](Tape&, std::span<const Var> v) { return mul(v[0], v[1]); },
      {random({2, 3, 4}, rng), random({1, 3, 1}, rng)});

  // ---- linear algebra and reductions
  run("matmul", [](Tape&, std::span<const Var> v) { return matmul(v[0], v[1]); },
      {random({3, 4}, rng), random({4, 2}, rng)});
  run("matmul_batched", [](Tape&, std::span<const Var> v) { return matmul(v[0], v[1]); },
      {random({2, 3, 4}, rng), random({4, 2}, rng)});
  run("reduce_sum", [](Tape&, std::span<const Var> v) { return sum(v[0], 1); }, {random({2, 3, 4}, rng)});
  run("reduce_mean", [](Tape&, std::span<const Var> v) { return mean(v[0], 2); }, {random({2, 3, 4}, rng)});
  run("softmax", [](Tape&, std::span<const Var> v) { return softmax(v[0], 1); }, {random({2, 5}, rng)});
  run("log_softmax", [](Tape&, std::span<const Var> v) { return log_softmax(v[0], 2); },
      {random({2, 2, 4}, rng)});
  run("instance_norm", [](Tape&, std::span<const Var> v) { return instance_norm(v[0], v[1], v[2]); },
      {random({2, 3, 6}, rng), random({3}, rng), random({3}, rng)});

  // ---- shape ops
  run("shape_ops",
      [](Tape&, std::span<const Var> v) {
        Var t = transpose(v[0], 1, 2);  // [2,4,3]
        const std::array<Var, 2> parts{slice(t, 1, 1, 2), reverse(t, 2)};
        return reshape(concat(parts, 1), {2, 18});
      },
      {random({2, 3, 4}, rng)});
  run("pick", [](Tape&, std::span<const Var> v) {
        const std::size_t idx[3] = {2, 0, 1};
        return pick(v[0], idx);
      },
      {random({3, 4}, rng)});

  // ---- wavelet front-end
  {
    auto lp = wavelet::LahtParams::initial("laht");
    // Sharper and larger thresholds than the init so the nonlinearity matters.
    lp.raw_alpha.value[0] = std::log(3.0);
    lp.raw_beta.value[0] = std::log(4.0);
    lp.raw_bias_pos.value[0] = 0.2;
    lp.raw_bias_neg.value[0] = -0.3;
    std::vector<Parameter*> ps{&lp.raw_alpha, &lp.raw_beta, &lp.raw_bias_pos, &lp.raw_bias_neg};
    run("laht", [&lp](Tape& t, std::span<const Var> v) { return wavelet::laht(v[0], lp.effective(t)); },
        {random({2, 1, 6}, rng, -2, 2)}, ps);
  }
  run("derive_cqf", [](Tape&, std::span<const Var> v) { return wavelet::derive_cqf(v[0]); },
      {random({6}, rng)});
  run("decompose_level",
      [](Tape&, std::span<const Var> v) {
        auto [a, d] = wavelet::decompose_level(v[0], v[1], v[2]);
        const std::array<Var, 2> both{a, d};
        return concat(both, 2);
      },
      {random({2, 1, 8}, rng), random({4}, rng), random({4}, rng)});
  run("decompose_level_cqf_path",
      [](Tape&, std::span<const Var> v) {
        auto [a, d] = wavelet::decompose_level(v[0], v[1], wavelet::derive_cqf(v[1]));
        const std::array<Var, 2> both{a, d};
        return concat(both, 2);
      },
      {random({1, 1, 10}, rng), random({4}, rng)});
  for (auto sharing : {wavelet::Sharing::single_kernel, wavelet::Sharing::layer_wise,
                       wavelet::Sharing::all_kernel}) {
    wavelet::FrontEndConfig cfg;
    cfg.levels = 2;
    cfg.kernel_size = 4;
    cfg.sharing = sharing;
    auto fe = std::make_shared<wavelet::FrontEnd>(cfg);
    // Perturb the Haar-free init so LAHT acts on O(1) coefficients.
    auto ps = fe->parameters();
    for (auto* p : ps)
      for (auto& x : p->value.data) x += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
    run("frontend_" + wavelet::to_string(sharing),
        [fe](Tape& t, std::span<const Var> v) { return concat(fe->forward(t, v[0]).bands(), 2); },
        {random({1, 1, 19}, rng)}, ps);
  }

  // ---- features
  {
    auto block = features::make_conv_block("block", 2, 3, 3, 2, rng);
    auto ps = block.parameters();
    for (auto* p : {&block.in_gamma, &block.in_beta})
      p->value = random(p->value.shape, rng, 0.5, 1.5);
    run("conv_block", [&block](Tape& t, std::span<const Var> v) { return features::conv_block(t, v[0], block); },
        {random({2, 2, 9}, rng)}, ps);
  }
  {
    auto att = features::make_spatial_attention("att", 3, rng);
    auto ps = att.parameters();
    run("spatial_attention",
        [&att](Tape& t, std::span<const Var> v) {
          auto a = features::spatial_attention(t, v[0], att);
          const std::array<Var, 2> parts{reshape(a.weighted, {2, 15}), a.summary};
          return concat(parts, 1);
        },
        {random({2, 3, 5}, rng)}, ps);
  }

  // ---- sequence encoder
  {
    auto cell = sequence::make_gru_cell("gru", 3, 2, rng);
    auto ps = cell.parameters();
    run("gru_cell_step",
        [&cell](Tape& t, std::span<const Var> v) { return sequence::gru_cell_step(t, v[0], v[1], cell); },
        {random({2, 3}, rng), random({2, 2}, rng, -0.9, 0.9)}, ps);
    run("gru_scan",
        [&cell](Tape& t, std::span<const Var> v) { return sequence::gru_scan(t, v[0], cell, false); },
        {random({2, 4, 3}, rng)}, ps);
    run("gru_scan_reverse",
        [&cell](Tape& t, std::span<const Var> v) { return sequence::gru_scan(t, v[0], cell, true); },
        {random({1, 5, 3}, rng)}, ps);
  }
  {
    auto stack = sequence::make_bigru("bigru", 2, 2, 2, 0.0, rng);
    auto ps = stack.parameters();
    run("bigru_2layer",
        [&stack](Tape& t, std::span<const Var> v) { return sequence::bigru_forward(t, v[0], stack, false, 0); },
        {random({1, 4, 2}, rng)}, ps);
  }
  {
    auto ta = sequence::make_temporal_attention("ta", 4, rng);
    auto ps = ta.parameters();
    run("temporal_attention",
        [&ta](Tape& t, std::span<const Var> v) {
          auto o = sequence::temporal_attention(t, v[0], ta);
          const std::array<Var, 2> parts{o.vector, o.weights};
          return concat(parts, 1);
        },
        {random({2, 3, 4}, rng)}, ps);
  }

  // ---- fusion head
  {
    auto cw = head::ChannelWeights::ones("cw", 3);
    cw.w.value = random({3}, rng, 0.5, 1.5);
    std::vector<Parameter*> ps{&cw.w};
    run("channel_weighting",
        [&cw](Tape& t, std::span<const Var> v) {
          const std::array<Var, 3> bands{v[0], v[1], v[2]};
          return head::channel_weighting(t, head::fuse_bands(bands), cw);
        },
        {random({2, 4}, rng), random({2, 4}, rng), random({2, 4}, rng)}, ps);
  }
  {
    auto hp = head::make_head("head", 3, 4, 3, rng);
    hp.class_conv.in_gamma.value = random({4}, rng, 0.5, 1.5);
    hp.class_conv.in_beta.value = random({4}, rng);
    auto ps = hp.parameters();
    run("classify", [&hp](Tape& t, std::span<const Var> v) { return head::classify(t, v[0], hp); },
        {random({2, 3, 7}, rng)}, ps);
  }

  // ---- losses
  {
    training::LossConfig cfg;
    cfg.gamma = 2.0;
    cfg.class_alpha = {0.5, 1.5, 1.0};
    run("focal_loss",
        [cfg](Tape&, std::span<const Var> v) {
          const std::size_t targets[3] = {0, 2, 1};
          return training::focal_loss(log_softmax(v[0], 1), targets, cfg);
        },
        {random({3, 3}, rng, -2, 2)});
  }
  {
    std::vector<Parameter> owned{random_param("w0", {3}, rng), random_param("w1", {2, 2}, rng)};
    auto ps = pointers(owned);
    run("l2_penalty",
        [ps](Tape& t, std::span<const Var> v) {
          return training::regularized_objective(t, sum_all(v[0]), ps, 0.3);
        },
        {random({2}, rng)}, ps);
  }

  // ---- whole model, tiny
  {
    ModelConfig mc;
    mc.frontend.levels = 2;
    mc.frontend.kernel_size = 4;
    mc.features.channels = 2;
    mc.features.dilations = {1, 2};
    mc.hidden = 2;
    mc.gru_layers = 1;
    mc.dropout = 0.0;
    mc.classes = 3;
    auto model = std::make_shared<Model>(mc, rng());
    auto ps = model->parameters();
    run("model_forward",
        [model](Tape& t, std::span<const Var> v) { return model->forward(t, v[0], false, 0).log_probs; },
        {random({1, 1, 40}, rng)}, ps);
  }
  return out;
}

}  // namespace sigwav
