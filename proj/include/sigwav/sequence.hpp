#pragma once

// Bidirectional GRU stack and temporal attention.
//
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sigwav/autodiff.hpp"

namespace sigwav::sequence {

struct GruCellParams {
  Parameter w_ir, w_iz, w_in;  // [D_h, D_in]
  Parameter w_hr, w_hz, w_hn;  // [D_h, D_h]
  Parameter b_ir, b_iz, b_in, b_hr, b_hz, b_hn;

  std::size_t input_size() const { return w_ir.value.shape[1]; }
  std::size_t hidden_size() const { return w_ir.value.shape[0]; }
  std::vector<Parameter*> parameters();
};

// Every entry uniform in +-1/sqrt(D_h).
GruCellParams make_gru_cell(const std::string& prefix, std::size_t input_size,
                            std::size_t hidden_size, std::mt19937_64& rng);

// One step built from primitive ops: x_t [B,D_in], h_prev [B,D_h] -> [B,D_h].
Var gru_cell_step(Tape& tape, Var x_t, Var h_prev, GruCellParams& p);

// Whole-sequence scan as a single tape node: seq [B,T,D_in] -> [B,T,D_h].
// With `reverse` the scan runs t = T-1 ... 0; output stays time-aligned.
// Zero initial state.
Var gru_scan(Tape& tape, Var seq, GruCellParams& p, bool reverse);

// Reference scan unrolled through gru_cell_step.
Var gru_scan_unrolled(Tape& tape, Var seq, GruCellParams& p, bool reverse);

struct BiGruLayer {
  GruCellParams forward, backward;
};

struct BiGruStack {
  std::vector<BiGruLayer> layers;
  double dropout_p = 0.2;

  std::size_t hidden_size() const { return layers.front().forward.hidden_size(); }
  std::size_t output_size() const { return 2 * hidden_size(); }
  std::vector<Parameter*> parameters();
};

BiGruStack make_bigru(const std::string& prefix, std::size_t input_size, std::size_t hidden_size,
                      std::size_t layers, double dropout_p, std::mt19937_64& rng);

// seq [B,T,D_in] -> [B,T,2*D_h]. Inverted Bernoulli dropout between layers
// when `training`, masks drawn from `seed`.
Var bigru_forward(Tape& tape, Var seq, BiGruStack& stack, bool training, std::uint64_t seed);

struct TemporalAttentionParams {
  Parameter fc1_weight;  // [D, D]
  Parameter fc1_bias;    // [D]
  Parameter fc2_weight;  // [D, 2D]
  Parameter fc2_bias;    // [D]

  std::vector<Parameter*> parameters();
};

TemporalAttentionParams make_temporal_attention(const std::string& prefix, std::size_t dim,
                                                std::mt19937_64& rng);

struct TemporalAttentionOutput {
  Var vector;   // V [B,D]
  Var weights;  // A [B,T]
  Var context;  // C [B,D]
};

// Score = FC1(H) . h_last, A = softmax over T, C = sum_t A_t H_t,
// V = tanh(FC2([C; h_last])).
TemporalAttentionOutput temporal_attention(Tape& tape, Var H, TemporalAttentionParams& p);

// x [..., in] -> x W^T + b
Var linear(Tape& tape, Var x, Parameter& weight, Parameter& bias);

}  // namespace sigwav::sequence
