#include "sigwav/sequence.hpp"

#include <array>
#include <cmath>

#include "sigwav/error.hpp"
#include "sigwav/kernels.hpp"

namespace sigwav::sequence {

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = dist(rng);
  return t;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Uniform in [0,1) from the top 53 bits; stable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<Parameter*> GruCellParams::parameters() {
  return {&w_ir, &w_iz, &w_in, &w_hr, &w_hz, &w_hn, &b_ir, &b_iz, &b_in, &b_hr, &b_hz, &b_hn};
}

GruCellParams make_gru_cell(const std::string& prefix, std::size_t input_size,
                            std::size_t hidden_size, std::mt19937_64& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  GruCellParams p;
  p.w_ir = Parameter(prefix + ".w_ir", uniform({hidden_size, input_size}, k, rng));
  p.w_iz = Parameter(prefix + ".w_iz", uniform({hidden_size, input_size}, k, rng));
  p.w_in = Parameter(prefix + ".w_in", uniform({hidden_size, input_size}, k, rng));
  p.w_hr = Parameter(prefix + ".w_hr", uniform({hidden_size, hidden_size}, k, rng));
  p.w_hz = Parameter(prefix + ".w_hz", uniform({hidden_size, hidden_size}, k, rng));
  p.w_hn = Parameter(prefix + ".w_hn", uniform({hidden_size, hidden_size}, k, rng));
  p.b_ir = Parameter(prefix + ".b_ir", uniform({hidden_size}, k, rng));
  p.b_iz = Parameter(prefix + ".b_iz", uniform({hidden_size}, k, rng));
  p.b_in = Parameter(prefix + ".b_in", uniform({hidden_size}, k, rng));
  p.b_hr = Parameter(prefix + ".b_hr", uniform({hidden_size}, k, rng));
  p.b_hz = Parameter(prefix + ".b_hz", uniform({hidden_size}, k, rng));
  p.b_hn = Parameter(prefix + ".b_hn", uniform({hidden_size}, k, rng));
  return p;
}

Var linear(Tape& tape, Var x, Parameter& weight, Parameter& bias) {
  return add(matmul(x, transpose(tape.param(weight), 0, 1)), tape.param(bias));
}

Var gru_cell_step(Tape& tape, Var x_t, Var h_prev, GruCellParams& p) {
  const std::size_t dh = p.hidden_size();
  require(x_t.shape().size() == 2 && x_t.shape()[1] == p.input_size(), ErrorCategory::dimension,
          "gru_cell_step: input shape " + to_string(x_t.shape()) + " does not match D_in " +
              std::to_string(p.input_size()));
  require(h_prev.shape().size() == 2 && h_prev.shape()[1] == dh &&
              h_prev.shape()[0] == x_t.shape()[0],
          ErrorCategory::dimension,
          "gru_cell_step: hidden shape " + to_string(h_prev.shape()) + " does not match D_h " +
              std::to_string(dh));
  Var r = sigmoid(add(linear(tape, x_t, p.w_ir, p.b_ir), linear(tape, h_prev, p.w_hr, p.b_hr)));
  Var z = sigmoid(add(linear(tape, x_t, p.w_iz, p.b_iz), linear(tape, h_prev, p.w_hz, p.b_hz)));
  Var n = tanh(add(linear(tape, x_t, p.w_in, p.b_in), mul(r, linear(tape, h_prev, p.w_hn, p.b_hn))));
  Var one_minus_z = affine(z, -1.0, 1.0);
  return add(mul(one_minus_z, n), mul(z, h_prev));
}

Var gru_scan_unrolled(Tape& tape, Var seq, GruCellParams& p, bool reverse) {
  const Shape& s = seq.shape();
  require(s.size() == 3, ErrorCategory::dimension, "gru_scan: expected [B,T,D_in]");
  require(s[1] >= 1, ErrorCategory::empty_sequence, "gru_scan: empty sequence");
  const std::size_t B = s[0], T = s[1], din = s[2];
  Var h = tape.constant(Tensor({B, p.hidden_size()}, 0.0));
  std::vector<Var> outs(T);
  for (std::size_t i = 0; i < T; ++i) {
    const std::size_t t = reverse ? T - 1 - i : i;
    Var x_t = reshape(slice(seq, 1, t, 1), {B, din});
    h = gru_cell_step(tape, x_t, h, p);
    outs[t] = reshape(h, {B, 1, p.hidden_size()});
  }
  return concat(outs, 1);
}

Var gru_scan(Tape& tape, Var seq, GruCellParams& p, bool reverse) {
  const Shape& s = seq.shape();
  require(s.size() == 3, ErrorCategory::dimension,
          "gru_scan: expected [B,T,D_in], got " + to_string(s));
  require(s[1] >= 1, ErrorCategory::empty_sequence, "gru_scan: empty sequence");
  const std::size_t B = s[0], T = s[1], din = s[2], dh = p.hidden_size();
  require(din == p.input_size(), ErrorCategory::dimension,
          "gru_scan: input extent " + std::to_string(din) + " does not match D_in " +
              std::to_string(p.input_size()));

  std::vector<Var> params;
  for (auto* q : p.parameters()) params.push_back(tape.param(*q));

  // Stacked [r; z; n] weights and biases.
  const std::size_t g3 = 3 * dh;
  std::vector<double> wi(g3 * din), wh(g3 * dh), bi(g3), bh(g3);
  for (std::size_t gate = 0; gate < 3; ++gate) {
    const auto& wiv = params[gate].value();
    const auto& whv = params[3 + gate].value();
    const auto& biv = params[6 + gate].value();
    const auto& bhv = params[9 + gate].value();
    std::copy(wiv.begin(), wiv.end(), wi.begin() + gate * dh * din);
    std::copy(whv.begin(), whv.end(), wh.begin() + gate * dh * dh);
    std::copy(biv.begin(), biv.end(), bi.begin() + gate * dh);
    std::copy(bhv.begin(), bhv.end(), bh.begin() + gate * dh);
  }

  // Saved per (b, t): r, z, n, W_hn h + b_hn.
  std::vector<double> out(B * T * dh);
  std::vector<double> gates(B * T * 4 * dh);
  std::vector<double> xi(T * g3), gh(g3);
  const auto sv = seq.value();
  for (std::size_t b = 0; b < B; ++b) {
    kernels::gemm(false, true, T, g3, din, sv.data() + b * T * din, wi.data(), xi.data(), false);
    std::vector<double> h(dh, 0.0);
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t t = reverse ? T - 1 - i : i;
      for (std::size_t j = 0; j < g3; ++j) {
        double acc = bh[j];
        const double* row = wh.data() + j * dh;
        for (std::size_t k = 0; k < dh; ++k) acc += row[k] * h[k];
        gh[j] = acc;
      }
      const double* x = xi.data() + t * g3;
      double* sv_gates = gates.data() + (b * T + t) * 4 * dh;
      double* ho = out.data() + (b * T + t) * dh;
      for (std::size_t k = 0; k < dh; ++k) {
        const double r = sigmoid(x[k] + bi[k] + gh[k]);
        const double z = sigmoid(x[dh + k] + bi[dh + k] + gh[dh + k]);
        const double n = std::tanh(x[2 * dh + k] + bi[2 * dh + k] + r * gh[2 * dh + k]);
        sv_gates[k] = r;
        sv_gates[dh + k] = z;
        sv_gates[2 * dh + k] = n;
        sv_gates[3 * dh + k] = gh[2 * dh + k];
        ho[k] = (1.0 - z) * n + z * h[k];
      }
      std::copy(ho, ho + dh, h.begin());
    }
  }

  std::vector<std::size_t> parents{seq.id()};
  for (auto& v : params) parents.push_back(v.id());
  return tape.record(
      "gru_scan", {B, T, dh}, std::move(out), std::move(parents),
      [B, T, din, dh, reverse, wi = std::move(wi), wh = std::move(wh),
       gates = std::move(gates)](Tape& tp, std::size_t self) {
        auto& node = tp.node(self);
        const std::size_t g3 = 3 * dh;
        const auto& x = tp.node(node.parents[0]).value;
        const auto& hs = node.value;
        auto gseq = tp.parent_grad(self, 0);
        std::array<std::span<double>, 12> gp;
        for (std::size_t i = 0; i < 12; ++i) gp[i] = tp.parent_grad(self, 1 + i);

        std::vector<double> dxi(T * g3), dgh(T * g3), hprev(T * dh);
        std::vector<double> dwi(g3 * din, 0.0), dwh(g3 * dh, 0.0);
        std::vector<double> dbi(g3, 0.0), dbh(g3, 0.0);
        std::vector<double> dh_next(dh), dhp(dh);
        for (std::size_t b = 0; b < B; ++b) {
          std::fill(dh_next.begin(), dh_next.end(), 0.0);
          for (std::size_t i = T; i-- > 0;) {
            const std::size_t t = reverse ? T - 1 - i : i;
            const double* sg = gates.data() + (b * T + t) * 4 * dh;
            const double* prev = nullptr;
            if (i > 0) {
              const std::size_t tp_idx = reverse ? t + 1 : t - 1;
              prev = hs.data() + (b * T + tp_idx) * dh;
            }
            const double* go = node.grad.data() + (b * T + t) * dh;
            double* dx = dxi.data() + t * g3;
            double* dg = dgh.data() + t * g3;
            double* hp = hprev.data() + t * dh;
            for (std::size_t k = 0; k < dh; ++k) {
              const double r = sg[k], z = sg[dh + k], n = sg[2 * dh + k], ghn = sg[3 * dh + k];
              const double h_prev = prev ? prev[k] : 0.0;
              hp[k] = h_prev;
              const double dhk = go[k] + dh_next[k];
              const double dn = dhk * (1.0 - z);
              const double dz = dhk * (h_prev - n);
              dhp[k] = dhk * z;
              const double dan = dn * (1.0 - n * n);
              const double dar = dan * ghn * r * (1.0 - r);
              const double daz = dz * z * (1.0 - z);
              dx[k] = dar;
              dx[dh + k] = daz;
              dx[2 * dh + k] = dan;
              dg[k] = dar;
              dg[dh + k] = daz;
              dg[2 * dh + k] = dan * r;
            }
            // dh_prev += W_h^T dgh
            for (std::size_t j = 0; j < g3; ++j) {
              const double gj = dg[j];
              if (gj == 0.0) continue;
              const double* row = wh.data() + j * dh;
              for (std::size_t k = 0; k < dh; ++k) dhp[k] += row[k] * gj;
            }
            std::copy(dhp.begin(), dhp.end(), dh_next.begin());
          }
          // Weight gradients as GEMMs over the whole sequence.
          kernels::gemm(true, false, g3, din, T, dxi.data(), x.data() + b * T * din, dwi.data(), true);
          kernels::gemm(true, false, g3, dh, T, dgh.data(), hprev.data(), dwh.data(), true);
          for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < g3; ++j) {
              dbi[j] += dxi[t * g3 + j];
              dbh[j] += dgh[t * g3 + j];
            }
          if (!gseq.empty())
            kernels::gemm(false, false, T, din, g3, dxi.data(), wi.data(), gseq.data() + b * T * din, true);
        }
        for (std::size_t gate = 0; gate < 3; ++gate) {
          auto acc = [](std::span<double> dst, const double* src) {
            if (dst.empty()) return;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
          };
          acc(gp[gate], dwi.data() + gate * dh * din);
          acc(gp[3 + gate], dwh.data() + gate * dh * dh);
          acc(gp[6 + gate], dbi.data() + gate * dh);
          acc(gp[9 + gate], dbh.data() + gate * dh);
        }
      });
}

std::vector<Parameter*> BiGruStack::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers) {
    for (auto* p : l.forward.parameters()) out.push_back(p);
    for (auto* p : l.backward.parameters()) out.push_back(p);
  }
  return out;
}

BiGruStack make_bigru(const std::string& prefix, std::size_t input_size, std::size_t hidden_size,
                      std::size_t layers, double dropout_p, std::mt19937_64& rng) {
  require(layers >= 1, ErrorCategory::config, "Bi-GRU needs at least one layer");
  require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorCategory::config,
          "dropout probability must lie in [0, 1)");
  BiGruStack stack;
  stack.dropout_p = dropout_p;
  std::size_t in = input_size;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = prefix + ".layer" + std::to_string(l);
    BiGruLayer layer{make_gru_cell(base + ".fwd", in, hidden_size, rng),
                     make_gru_cell(base + ".bwd", in, hidden_size, rng)};
    stack.layers.push_back(std::move(layer));
    in = 2 * hidden_size;
  }
  return stack;
}

Var bigru_forward(Tape& tape, Var seq, BiGruStack& stack, bool training, std::uint64_t seed) {
  const Shape& s = seq.shape();
  require(s.size() == 3, ErrorCategory::dimension,
          "bigru_forward: expected [B,T,D], got " + to_string(s));
  require(s[1] >= 1, ErrorCategory::empty_sequence, "bigru_forward: empty sequence");
  std::mt19937_64 rng(seed);
  Var x = seq;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    auto& layer = stack.layers[l];
    const std::array<Var, 2> both{gru_scan(tape, x, layer.forward, false),
                                  gru_scan(tape, x, layer.backward, true)};
    x = concat(both, 2);
    if (training && stack.dropout_p > 0.0 && l + 1 < stack.layers.size()) {
      const double keep = 1.0 - stack.dropout_p;
      Tensor mask(x.shape());
      for (auto& m : mask.data) m = unit_uniform(rng) < keep ? 1.0 / keep : 0.0;
      x = mul(x, tape.constant(std::move(mask)));
    }
  }
  return x;
}

std::vector<Parameter*> TemporalAttentionParams::parameters() {
  return {&fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias};
}

TemporalAttentionParams make_temporal_attention(const std::string& prefix, std::size_t dim,
                                                std::mt19937_64& rng) {
  TemporalAttentionParams p;
  const double k1 = 1.0 / std::sqrt(static_cast<double>(dim));
  const double k2 = 1.0 / std::sqrt(static_cast<double>(2 * dim));
  p.fc1_weight = Parameter(prefix + ".fc1_weight", uniform({dim, dim}, k1, rng));
  p.fc1_bias = Parameter(prefix + ".fc1_bias", uniform({dim}, k1, rng));
  p.fc2_weight = Parameter(prefix + ".fc2_weight", uniform({dim, 2 * dim}, k2, rng));
  p.fc2_bias = Parameter(prefix + ".fc2_bias", uniform({dim}, k2, rng));
  return p;
}

TemporalAttentionOutput temporal_attention(Tape& tape, Var H, TemporalAttentionParams& p) {
  const Shape& s = H.shape();
  require(s.size() == 3, ErrorCategory::dimension,
          "temporal_attention: expected [B,T,D], got " + to_string(s));
  require(s[1] >= 1, ErrorCategory::empty_sequence, "temporal_attention: empty sequence");
  const std::size_t B = s[0], T = s[1], D = s[2];
  require(p.fc1_weight.value.shape == Shape{D, D}, ErrorCategory::dimension,
          "temporal_attention: FC1 does not match D = " + std::to_string(D));

  Var last = slice(H, 1, T - 1, 1);                                   // [B,1,D]
  Var projected = linear(tape, H, p.fc1_weight, p.fc1_bias);           // [B,T,D]
  Var scores = matmul(projected, transpose(last, 1, 2));               // [B,T,1]
  Var weights = softmax(reshape(scores, {B, T}), 1);                   // [B,T]
  Var context = reshape(matmul(reshape(weights, {B, 1, T}), H), {B, D});
  const std::array<Var, 2> parts{context, reshape(last, {B, D})};
  Var joined = concat(parts, 1);                                       // [B,2D]
  TemporalAttentionOutput out;
  out.vector = tanh(linear(tape, joined, p.fc2_weight, p.fc2_bias));
  out.weights = weights;
  out.context = context;
  return out;
}

}  // namespace sigwav::sequence
