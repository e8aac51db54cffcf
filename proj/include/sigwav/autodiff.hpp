#pragma once

// Reverse-mode differentiation over dense double arrays.
//
// A Tape records one forward pass. Every op appends a node holding its
// value, its parents and a backward closure; Tape::backward walks the
// nodes in reverse order. Parameters enter a pass as leaves through
// Tape::param and receive their gradients in Parameter::grad.
//
// A tape and the Vars on it belong to one thread. Distinct tapes may read
// the same Parameters concurrently as long as nobody writes them.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sigwav/kernels.hpp"
#include "sigwav/tensor.hpp"

namespace sigwav {

class Tape;

// Handle to one node of a tape (an NDValue).
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  // By value: later ops may reallocate the tape.
  Shape shape() const;
  std::size_t size() const;
  std::span<const double> value() const;
  // Empty until backward has reached this node.
  std::span<const double> grad() const;
  bool requires_grad() const;
  double item() const;
  Tensor tensor() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    std::string_view op;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t);
  Var leaf(Tensor t, bool requires_grad = true);
  // Registers `p` once per tape; later calls return the same node.
  Var param(Parameter& p, bool trainable = true);

  // Appends an op result. The backward closure is dropped when gradients are
  // disabled or no parent requires them.
  Var record(std::string_view op, Shape shape, std::vector<double> value,
             std::vector<std::size_t> parents, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 and propagates. Interior gradients are reset on
  // each call; leaf gradients and Parameter::grad accumulate.
  void backward(Var root);

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, zero-allocated on first use.
  std::span<double> grad_buffer(std::size_t id);
  // Parent gradient buffer, or an empty span when that parent needs none.
  std::span<double> parent_grad(std::size_t id, std::size_t parent_slot);

  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_ids_;
  bool grad_enabled_ = true;
};

// ---- pointwise -------------------------------------------------------------

enum class PointwiseKind { sigmoid, tanh, leaky_relu, exp, log, neg, add, mul };

// Generic entry point; binary kinds broadcast numpy-style (equal extents or 1,
// missing leading axes treated as 1).
Var pointwise(PointwiseKind kind, std::span<const Var> operands, double slope = 0.01);

Var sigmoid(Var x);
Var tanh(Var x);
Var leaky_relu(Var x, double slope);
Var exp(Var x);
Var log(Var x);
Var neg(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var affine(Var x, double scale, double shift);  // scale*x + shift
Var pow_scalar(Var x, double p);                // x >= 0 unless p is an integer
Var softplus(Var x);

// ---- convolution -----------------------------------------------------------

struct Padding {
  kernels::PadMode mode = kernels::PadMode::none;
  std::size_t amount = 0;

  static Padding none() { return {}; }
  static Padding zero(std::size_t n) { return {kernels::PadMode::zero, n}; }
  // Right-wraps by dilation*(S-1) samples; output width ceil(W/stride).
  static Padding circular() { return {kernels::PadMode::circular, 0}; }
};

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  Padding padding;
};

// input [B,C,W], weight [K,C,S], bias [K] -> [B,K,W'] (cross-correlation).
Var conv1d(Var input, Var weight, std::optional<Var> bias, ConvOptions opt = {});

// ---- linear algebra and reductions -----------------------------------------

// a [...,M,K] x b [...,K,N] -> [...,M,N]; leading axes broadcast.
Var matmul(Var a, Var b);

enum class ReduceKind { sum, mean };
// Removes `axis`; a rank-1 input reduces to shape [1].
Var reduce(ReduceKind kind, Var x, std::size_t axis);
Var sum(Var x, std::size_t axis);
Var mean(Var x, std::size_t axis);
Var sum_all(Var x);

enum class SoftmaxKind { softmax, log_softmax };
Var softmax_family(SoftmaxKind kind, Var x, std::size_t axis);
Var softmax(Var x, std::size_t axis);
Var log_softmax(Var x, std::size_t axis);

// x [B,C,W]; per-(b,c) standardization over W, then gamma[c]*xhat + beta[c].
Var instance_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

// ---- shape ops ---------------------------------------------------------------

Var reshape(Var x, Shape shape);
Var transpose(Var x, std::size_t axis0, std::size_t axis1);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
Var concat(std::span<const Var> parts, std::size_t axis);
Var reverse(Var x, std::size_t axis);
// x [B,C], index[b] < C -> [B] with x[b, index[b]].
Var pick(Var x, std::span<const std::size_t> index);

}  // namespace sigwav
