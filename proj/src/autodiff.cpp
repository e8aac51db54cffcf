#include "sigwav/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sigwav/error.hpp"

namespace sigwav {

// ---- Var ---------------------------------------------------------------------

Shape Var::shape() const { return tape_->node(id_).shape; }
std::size_t Var::size() const { return tape_->node(id_).value.size(); }
std::span<const double> Var::value() const { return tape_->node(id_).value; }
std::span<const double> Var::grad() const { return tape_->node(id_).grad; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

double Var::item() const {
  require(size() == 1, ErrorCategory::contract,
          "item() on a value of shape " + to_string(shape()));
  return value()[0];
}

Tensor Var::tensor() const {
  const auto& n = tape_->node(id_);
  return Tensor(n.shape, n.value);
}

// ---- Tape --------------------------------------------------------------------

Var Tape::constant(Tensor t) { return leaf(std::move(t), false); }

Var Tape::leaf(Tensor t, bool requires_grad) {
  Node n;
  n.op = "leaf";
  n.shape = std::move(t.shape);
  n.value = std::move(t.data);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p, bool trainable) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var(this, it->second);
  Var v = leaf(p.value, trainable && grad_enabled_);
  nodes_[v.id()].op = "param";
  nodes_[v.id()].param = &p;
  param_ids_.emplace(&p, v.id());
  return v;
}

Var Tape::record(std::string_view op, Shape shape, std::vector<double> value,
                 std::vector<std::size_t> parents, BackwardFn backward) {
  require(value.size() == numel(shape), ErrorCategory::contract,
          std::string(op) + ": value length does not match shape " + to_string(shape));
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.value = std::move(value);
  bool needs = false;
  if (grad_enabled_)
    for (auto p : parents) needs = needs || nodes_[p].requires_grad;
  n.requires_grad = needs;
  n.parents = std::move(parents);
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

std::span<double> Tape::parent_grad(std::size_t id, std::size_t parent_slot) {
  const std::size_t pid = nodes_[id].parents[parent_slot];
  if (!nodes_[pid].requires_grad) return {};
  return grad_buffer(pid);
}

void Tape::backward(Var root) {
  require(root.valid() && &root.tape() == this, ErrorCategory::contract,
          "backward: root does not belong to this tape");
  require(root.size() == 1, ErrorCategory::contract,
          "backward: root must be a scalar, got shape " + to_string(root.shape()));
  for (auto& n : nodes_)
    if (n.op != "leaf" && n.op != "param") n.grad.clear();
  grad_buffer(root.id())[0] += 1.0;

  for (std::size_t id = root.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }

  for (auto& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto& g = n.param->grad.data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    n.param->has_grad = true;
    n.grad.clear();
  }
}

namespace {

void check_same_tape(const Var& a, const Var& b, std::string_view op) {
  require(a.valid() && b.valid() && &a.tape() == &b.tape(), ErrorCategory::contract,
          std::string(op) + ": operands live on different tapes");
}

// ---- unary helper --------------------------------------------------------

template <class F, class DF>
Var unary(std::string_view op, Var x, F f, DF df) {
  auto& tape = x.tape();
  const auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return tape.record(op, x.shape(), std::move(y), {x.id()}, [df](Tape& t, std::size_t self) {
    auto& n = t.node(self);
    auto gx = t.parent_grad(self, 0);
    if (gx.empty()) return;
    const auto& xv = t.node(n.parents[0]).value;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * df(xv[i], n.value[i]);
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---- broadcasting --------------------------------------------------------

Shape broadcast_shape(const Shape& a, const Shape& b, std::string_view op) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ea = i + a.size() >= r ? a[i + a.size() - r] : 1;
    const std::size_t eb = i + b.size() >= r ? b[i + b.size() - r] : 1;
    require(ea == eb || ea == 1 || eb == 1, ErrorCategory::dimension,
            std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) +
                " are not broadcast-compatible");
    out[i] = std::max(ea, eb);
  }
  return out;
}

// Element strides of `in` viewed with the rank of `out`; 0 on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& out, const Shape& in) {
  const std::size_t r = out.size();
  std::vector<std::size_t> strides(r, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t oi = i + r - in.size();
    strides[oi] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  return strides;
}

template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F f) {
  const std::size_t total = numel(out);
  const std::size_t r = out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * idx[d];
      ib -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
}

template <class F, class DA, class DB>
Var binary(std::string_view op, Var a, Var b, F f, DA da, DB db) {
  check_same_tape(a, b, op);
  auto& tape = a.tape();
  const auto av = a.value();
  const auto bv = b.value();
  if (a.shape() == b.shape()) {
    std::vector<double> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(av[i], bv[i]);
    return tape.record(op, a.shape(), std::move(y), {a.id(), b.id()},
                       [da, db](Tape& t, std::size_t self) {
                         auto& n = t.node(self);
                         const auto& x = t.node(n.parents[0]).value;
                         const auto& z = t.node(n.parents[1]).value;
                         auto ga = t.parent_grad(self, 0);
                         auto gb = t.parent_grad(self, 1);
                         for (std::size_t i = 0; i < n.grad.size(); ++i) {
                           if (!ga.empty()) ga[i] += n.grad[i] * da(x[i], z[i]);
                           if (!gb.empty()) gb[i] += n.grad[i] * db(x[i], z[i]);
                         }
                       });
  }
  Shape out = broadcast_shape(a.shape(), b.shape(), op);
  auto sa = broadcast_strides(out, a.shape());
  auto sb = broadcast_strides(out, b.shape());
  std::vector<double> y(numel(out));
  for_each_broadcast(out, sa, sb,
                     [&](std::size_t i, std::size_t ia, std::size_t ib) { y[i] = f(av[ia], bv[ib]); });
  Shape out_copy = out;
  return tape.record(op, std::move(out_copy), std::move(y), {a.id(), b.id()},
                     [da, db, out, sa, sb](Tape& t, std::size_t self) {
                       auto& n = t.node(self);
                       const auto& x = t.node(n.parents[0]).value;
                       const auto& z = t.node(n.parents[1]).value;
                       auto ga = t.parent_grad(self, 0);
                       auto gb = t.parent_grad(self, 1);
                       for_each_broadcast(out, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                         if (!ga.empty()) ga[ia] += n.grad[i] * da(x[ia], z[ib]);
                         if (!gb.empty()) gb[ib] += n.grad[i] * db(x[ia], z[ib]);
                       });
                     });
}

// outer x extent x inner decomposition around `axis`.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, std::string_view op) {
  require(axis < s.size(), ErrorCategory::dimension,
          std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " + to_string(s));
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

// ---- pointwise -----------------------------------------------------------------

Var sigmoid(Var x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Var leaky_relu(Var x, double slope) {
  return unary("leaky_relu", x, [slope](double v) { return v > 0 ? v : slope * v; },
               [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  for (double v : x.value())
    require(v > 0.0, ErrorCategory::domain, "log of non-positive value " + std::to_string(v));
  return unary("log", x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Var neg(Var x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var affine(Var x, double scale, double shift) {
  return unary("affine", x, [scale, shift](double v) { return scale * v + shift; },
               [scale](double, double) { return scale; });
}

Var pow_scalar(Var x, double p) {
  const bool integral = std::floor(p) == p;
  if (!integral)
    for (double v : x.value())
      require(v >= 0.0, ErrorCategory::domain,
              "non-integer power of negative value " + std::to_string(v));
  return unary("pow", x, [p](double v) { return std::pow(v, p); },
               [p](double v, double) {
                 if (p == 0.0) return 0.0;
                 if (v == 0.0) return p == 1.0 ? 1.0 : (p > 1.0 ? 0.0 : HUGE_VAL);
                 return p * std::pow(v, p - 1.0);
               });
}

Var softplus(Var x) {
  return unary("softplus", x,
               [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
               [](double v, double) { return stable_sigmoid(v); });
}

Var add(Var a, Var b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var pointwise(PointwiseKind kind, std::span<const Var> operands, double slope) {
  const bool binary_kind = kind == PointwiseKind::add || kind == PointwiseKind::mul;
  require(operands.size() == (binary_kind ? 2u : 1u), ErrorCategory::contract,
          "pointwise: wrong operand count");
  switch (kind) {
    case PointwiseKind::sigmoid: return sigmoid(operands[0]);
    case PointwiseKind::tanh: return tanh(operands[0]);
    case PointwiseKind::leaky_relu: return leaky_relu(operands[0], slope);
    case PointwiseKind::exp: return exp(operands[0]);
    case PointwiseKind::log: return log(operands[0]);
    case PointwiseKind::neg: return neg(operands[0]);
    case PointwiseKind::add: return add(operands[0], operands[1]);
    case PointwiseKind::mul: return mul(operands[0], operands[1]);
  }
  fail(ErrorCategory::contract, "pointwise: unknown kind");
}

// ---- conv1d --------------------------------------------------------------------

Var conv1d(Var input, Var weight, std::optional<Var> bias, ConvOptions opt) {
  check_same_tape(input, weight, "conv1d");
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  require(is.size() == 3 && ws.size() == 3, ErrorCategory::dimension,
          "conv1d: expected input [B,C,W] and weight [K,C,S], got " + to_string(is) + " and " +
              to_string(ws));
  require(ws[1] == is[1], ErrorCategory::dimension,
          "conv1d: weight expects " + std::to_string(ws[1]) + " channels, input has " +
              std::to_string(is[1]));
  require(opt.stride >= 1 && opt.dilation >= 1, ErrorCategory::dimension,
          "conv1d: stride and dilation must be positive");
  if (bias) {
    check_same_tape(input, *bias, "conv1d");
    require(bias->shape() == Shape{ws[0]}, ErrorCategory::dimension,
            "conv1d: bias shape " + to_string(bias->shape()) + " does not match " +
                std::to_string(ws[0]) + " output channels");
  }

  kernels::ConvGeometry g;
  g.batch = is[0];
  g.in_channels = is[1];
  g.in_width = is[2];
  g.out_channels = ws[0];
  g.kernel = ws[2];
  g.stride = opt.stride;
  g.dilation = opt.dilation;
  g.pad_mode = opt.padding.mode;
  g.pad = opt.padding.amount;
  if (g.pad_mode == kernels::PadMode::circular)
    require(g.in_width >= g.dilation * (g.kernel - 1) + 1, ErrorCategory::input_too_short,
            "conv1d: circular padding needs width >= " +
                std::to_string(g.dilation * (g.kernel - 1) + 1) + ", got " +
                std::to_string(g.in_width));
  const std::size_t out_w = g.out_width();
  require(out_w >= 1, ErrorCategory::input_too_short,
          "conv1d: input width " + std::to_string(g.in_width) + " too short for kernel span " +
              std::to_string(g.dilation * (g.kernel - 1) + 1));

  std::vector<double> out(g.batch * g.out_channels * out_w);
  kernels::conv1d_forward(g, input.value().data(), weight.value().data(),
                          bias ? bias->value().data() : nullptr, out.data());

  std::vector<std::size_t> parents{input.id(), weight.id()};
  if (bias) parents.push_back(bias->id());
  const bool has_bias = bias.has_value();
  return input.tape().record(
      "conv1d", {g.batch, g.out_channels, out_w}, std::move(out), std::move(parents),
      [g, has_bias](Tape& t, std::size_t self) {
        auto& n = t.node(self);
        const auto& in = t.node(n.parents[0]).value;
        const auto& w = t.node(n.parents[1]).value;
        auto gi = t.parent_grad(self, 0);
        auto gw = t.parent_grad(self, 1);
        std::span<double> gb;
        if (has_bias) gb = t.parent_grad(self, 2);
        kernels::conv1d_backward(g, in.data(), w.data(), n.grad.data(),
                                 gi.empty() ? nullptr : gi.data(), gw.empty() ? nullptr : gw.data(),
                                 gb.empty() ? nullptr : gb.data());
      });
}

// ---- matmul --------------------------------------------------------------------

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require(as.size() >= 2 && bs.size() >= 2, ErrorCategory::dimension,
          "matmul: operands must have rank >= 2, got " + to_string(as) + " and " + to_string(bs));
  const std::size_t m = as[as.size() - 2], k = as.back();
  const std::size_t kb = bs[bs.size() - 2], n = bs.back();
  require(k == kb, ErrorCategory::dimension,
          "matmul: inner extents differ: " + to_string(as) + " x " + to_string(bs));

  const Shape abatch(as.begin(), as.end() - 2);
  const Shape bbatch(bs.begin(), bs.end() - 2);
  const Shape obatch = broadcast_shape(abatch, bbatch, "matmul");
  const auto sa = broadcast_strides(obatch, abatch);
  const auto sb = broadcast_strides(obatch, bbatch);
  const std::size_t nb = numel(obatch);

  // batch offsets (in matrices) for a and b per output batch index
  std::vector<std::size_t> aoff(nb), boff(nb);
  for_each_broadcast(obatch, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    aoff[i] = ia;
    boff[i] = ib;
  });

  std::vector<double> out(nb * m * n);
  const auto av = a.value();
  const auto bv = b.value();
  for (std::size_t i = 0; i < nb; ++i)
    kernels::gemm(false, false, m, n, k, av.data() + aoff[i] * m * k, bv.data() + boff[i] * k * n,
                  out.data() + i * m * n, false);

  Shape os = obatch;
  os.push_back(m);
  os.push_back(n);
  return a.tape().record(
      "matmul", os, std::move(out), {a.id(), b.id()},
      [m, n, k, nb, aoff, boff](Tape& t, std::size_t self) {
        auto& node = t.node(self);
        const auto& av = t.node(node.parents[0]).value;
        const auto& bv = t.node(node.parents[1]).value;
        auto ga = t.parent_grad(self, 0);
        auto gb = t.parent_grad(self, 1);
        for (std::size_t i = 0; i < nb; ++i) {
          const double* g = node.grad.data() + i * m * n;
          if (!ga.empty())  // ga = g · b^T
            kernels::gemm(false, true, m, k, n, g, bv.data() + boff[i] * k * n,
                          ga.data() + aoff[i] * m * k, true);
          if (!gb.empty())  // gb = a^T · g
            kernels::gemm(true, false, k, n, m, av.data() + aoff[i] * m * k, g,
                          gb.data() + boff[i] * k * n, true);
        }
      });
}

// ---- reductions ------------------------------------------------------------------

Var reduce(ReduceKind kind, Var x, std::size_t axis) {
  const auto sp = split_axis(x.shape(), axis, "reduce");
  const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(sp.extent) : 1.0;
  const auto xv = x.value();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t e = 0; e < sp.extent; ++e) {
      const double* src = xv.data() + (o * sp.extent + e) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  if (factor != 1.0)
    for (auto& v : out) v *= factor;
  Shape os = x.shape();
  os.erase(os.begin() + static_cast<long>(axis));
  if (os.empty()) os = {1};
  return x.tape().record(kind == ReduceKind::mean ? "mean" : "sum", std::move(os), std::move(out),
                         {x.id()}, [sp, factor](Tape& t, std::size_t self) {
                           auto& n = t.node(self);
                           auto gx = t.parent_grad(self, 0);
                           if (gx.empty()) return;
                           for (std::size_t o = 0; o < sp.outer; ++o)
                             for (std::size_t e = 0; e < sp.extent; ++e) {
                               double* dst = gx.data() + (o * sp.extent + e) * sp.inner;
                               const double* g = n.grad.data() + o * sp.inner;
                               for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += factor * g[i];
                             }
                         });
}

Var sum(Var x, std::size_t axis) { return reduce(ReduceKind::sum, x, axis); }
Var mean(Var x, std::size_t axis) { return reduce(ReduceKind::mean, x, axis); }

Var sum_all(Var x) {
  if (x.shape().size() != 1) x = reshape(x, {x.size()});
  return sum(x, 0);
}

// ---- softmax ---------------------------------------------------------------------

Var softmax_family(SoftmaxKind kind, Var x, std::size_t axis) {
  const auto sp = split_axis(x.shape(), axis, "softmax");
  const auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.extent * sp.inner + i;
      double mx = -HUGE_VAL;
      for (std::size_t e = 0; e < sp.extent; ++e) mx = std::max(mx, xv[base + e * sp.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < sp.extent; ++e) total += std::exp(xv[base + e * sp.inner] - mx);
      const double log_total = std::log(total);
      for (std::size_t e = 0; e < sp.extent; ++e) {
        const double shifted = xv[base + e * sp.inner] - mx;
        y[base + e * sp.inner] =
            kind == SoftmaxKind::log_softmax ? shifted - log_total : std::exp(shifted) / total;
      }
    }
  const bool is_log = kind == SoftmaxKind::log_softmax;
  return x.tape().record(is_log ? "log_softmax" : "softmax", x.shape(), std::move(y), {x.id()},
                         [sp, is_log](Tape& t, std::size_t self) {
                           auto& n = t.node(self);
                           auto gx = t.parent_grad(self, 0);
                           if (gx.empty()) return;
                           for (std::size_t o = 0; o < sp.outer; ++o)
                             for (std::size_t i = 0; i < sp.inner; ++i) {
                               const std::size_t base = o * sp.extent * sp.inner + i;
                               double acc = 0.0;
                               for (std::size_t e = 0; e < sp.extent; ++e) {
                                 const std::size_t j = base + e * sp.inner;
                                 acc += is_log ? n.grad[j] : n.grad[j] * n.value[j];
                               }
                               for (std::size_t e = 0; e < sp.extent; ++e) {
                                 const std::size_t j = base + e * sp.inner;
                                 if (is_log)
                                   gx[j] += n.grad[j] - std::exp(n.value[j]) * acc;
                                 else
                                   gx[j] += n.value[j] * (n.grad[j] - acc);
                               }
                             }
                         });
}

Var softmax(Var x, std::size_t axis) { return softmax_family(SoftmaxKind::softmax, x, axis); }
Var log_softmax(Var x, std::size_t axis) {
  return softmax_family(SoftmaxKind::log_softmax, x, axis);
}

// ---- instance norm ---------------------------------------------------------------

Var instance_norm(Var x, Var gamma, Var beta, double eps) {
  check_same_tape(x, gamma, "instance_norm");
  check_same_tape(x, beta, "instance_norm");
  const Shape& s = x.shape();
  require(s.size() == 3 && s[2] >= 1, ErrorCategory::dimension,
          "instance_norm: expected [B,C,W] with W >= 1, got " + to_string(s));
  const std::size_t B = s[0], C = s[1], W = s[2];
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, ErrorCategory::dimension,
          "instance_norm: gamma/beta must have shape [" + std::to_string(C) + "]");

  const auto xv = x.value();
  const auto gv = gamma.value();
  const auto bv = beta.value();
  std::vector<double> xhat(xv.size()), y(xv.size()), inv_std(B * C);
  for (std::size_t r = 0; r < B * C; ++r) {
    const double* row = xv.data() + r * W;
    double mu = 0.0;
    for (std::size_t i = 0; i < W; ++i) mu += row[i];
    mu /= static_cast<double>(W);
    double var = 0.0;
    for (std::size_t i = 0; i < W; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(W);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    const std::size_t c = r % C;
    for (std::size_t i = 0; i < W; ++i) {
      xhat[r * W + i] = (row[i] - mu) * is;
      y[r * W + i] = gv[c] * xhat[r * W + i] + bv[c];
    }
  }
  return x.tape().record(
      "instance_norm", s, std::move(y), {x.id(), gamma.id(), beta.id()},
      [B, C, W, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        auto& n = t.node(self);
        const auto& gv = t.node(n.parents[1]).value;
        auto gx = t.parent_grad(self, 0);
        auto gg = t.parent_grad(self, 1);
        auto gb = t.parent_grad(self, 2);
        const double invW = 1.0 / static_cast<double>(W);
        for (std::size_t r = 0; r < B * C; ++r) {
          const std::size_t c = r % C;
          const double* g = n.grad.data() + r * W;
          const double* xh = xhat.data() + r * W;
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < W; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * xh[i];
          }
          if (!gg.empty()) gg[c] += sum_gx;
          if (!gb.empty()) gb[c] += sum_g;
          if (gx.empty()) continue;
          const double scale = gv[c] * inv_std[r];
          double* dst = gx.data() + r * W;
          for (std::size_t i = 0; i < W; ++i)
            dst[i] += scale * (g[i] - invW * sum_g - xh[i] * invW * sum_gx);
        }
      });
}

// ---- shape ops ---------------------------------------------------------------------

Var reshape(Var x, Shape shape) {
  require(numel(shape) == x.size(), ErrorCategory::dimension,
          "reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  std::vector<double> v(x.value().begin(), x.value().end());
  return x.tape().record("reshape", std::move(shape), std::move(v), {x.id()},
                         [](Tape& t, std::size_t self) {
                           auto& n = t.node(self);
                           auto gx = t.parent_grad(self, 0);
                           if (gx.empty()) return;
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i];
                         });
}

Var transpose(Var x, std::size_t axis0, std::size_t axis1) {
  const Shape& s = x.shape();
  require(axis0 < s.size() && axis1 < s.size(), ErrorCategory::dimension,
          "transpose: axes invalid for shape " + to_string(s));
  Shape os = s;
  std::swap(os[axis0], os[axis1]);
  // source stride for each output axis
  std::vector<std::size_t> in_strides(s.size(), 1);
  for (std::size_t i = s.size() - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * s[i + 1];
  std::vector<std::size_t> src_strides = in_strides;
  std::swap(src_strides[axis0], src_strides[axis1]);
  const std::vector<std::size_t> zero(os.size(), 0);
  std::vector<std::size_t> map(x.size());
  for_each_broadcast(os, src_strides, zero,
                     [&](std::size_t i, std::size_t src, std::size_t) { map[i] = src; });
  const auto xv = x.value();
  std::vector<double> y(map.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[map[i]];
  return x.tape().record("transpose", std::move(os), std::move(y), {x.id()},
                         [map = std::move(map)](Tape& t, std::size_t self) {
                           auto& n = t.node(self);
                           auto gx = t.parent_grad(self, 0);
                           if (gx.empty()) return;
                           for (std::size_t i = 0; i < map.size(); ++i) gx[map[i]] += n.grad[i];
                         });
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto sp = split_axis(x.shape(), axis, "slice");
  require(length >= 1 && start + length <= sp.extent, ErrorCategory::dimension,
          "slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
              ") outside extent " + std::to_string(sp.extent));
  Shape os = x.shape();
  os[axis] = length;
  const auto xv = x.value();
  std::vector<double> y(sp.outer * length * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(xv.data() + (o * sp.extent + start) * sp.inner, length * sp.inner,
                y.data() + o * length * sp.inner);
  return x.tape().record("slice", std::move(os), std::move(y), {x.id()},
                         [sp, start, length](Tape& t, std::size_t self) {
                           auto& n = t.node(self);
                           auto gx = t.parent_grad(self, 0);
                           if (gx.empty()) return;
                           for (std::size_t o = 0; o < sp.outer; ++o) {
                             double* dst = gx.data() + (o * sp.extent + start) * sp.inner;
                             const double* g = n.grad.data() + o * length * sp.inner;
                             for (std::size_t i = 0; i < length * sp.inner; ++i) dst[i] += g[i];
                           }
                         });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  require(!parts.empty(), ErrorCategory::dimension, "concat: no operands");
  const Shape& s0 = parts[0].shape();
  require(axis < s0.size(), ErrorCategory::dimension, "concat: axis invalid");
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    check_same_tape(parts[0], p, "concat");
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    require(ok, ErrorCategory::dimension,
            "concat: shape " + to_string(s) + " incompatible with " + to_string(s0));
    extents.push_back(s[axis]);
    total += s[axis];
  }
  const auto sp = split_axis(s0, axis, "concat");
  Shape os = s0;
  os[axis] = total;
  std::vector<double> y(sp.outer * total * sp.inner);
  std::vector<std::size_t> parents;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].value();
    const std::size_t chunk = extents[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(v.data() + o * chunk, chunk, y.data() + (o * total + offset) * sp.inner);
    offset += extents[p];
    parents.push_back(parts[p].id());
  }
  return parts[0].tape().record(
      "concat", std::move(os), std::move(y), std::move(parents),
      [sp, total, extents](Tape& t, std::size_t self) {
        auto& n = t.node(self);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
          auto gp = t.parent_grad(self, p);
          const std::size_t chunk = extents[p] * sp.inner;
          if (!gp.empty())
            for (std::size_t o = 0; o < sp.outer; ++o) {
              const double* g = n.grad.data() + (o * total + offset) * sp.inner;
              double* dst = gp.data() + o * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
            }
          offset += extents[p];
        }
      });
}

Var reverse(Var x, std::size_t axis) {
  const auto sp = split_axis(x.shape(), axis, "reverse");
  const auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t e = 0; e < sp.extent; ++e)
      std::copy_n(xv.data() + (o * sp.extent + e) * sp.inner, sp.inner,
                  y.data() + (o * sp.extent + sp.extent - 1 - e) * sp.inner);
  return x.tape().record("reverse", x.shape(), std::move(y), {x.id()},
                         [sp](Tape& t, std::size_t self) {
                           auto& n = t.node(self);
                           auto gx = t.parent_grad(self, 0);
                           if (gx.empty()) return;
                           for (std::size_t o = 0; o < sp.outer; ++o)
                             for (std::size_t e = 0; e < sp.extent; ++e) {
                               double* dst = gx.data() + (o * sp.extent + e) * sp.inner;
                               const double* g =
                                   n.grad.data() + (o * sp.extent + sp.extent - 1 - e) * sp.inner;
                               for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += g[i];
                             }
                         });
}

Var pick(Var x, std::span<const std::size_t> index) {
  const Shape& s = x.shape();
  require(s.size() == 2 && index.size() == s[0], ErrorCategory::dimension,
          "pick: expected [B,C] with B indices, got " + to_string(s));
  const std::size_t C = s[1];
  for (auto i : index)
    require(i < C, ErrorCategory::label,
            "pick: index " + std::to_string(i) + " out of range for " + std::to_string(C) + " classes");
  std::vector<std::size_t> idx(index.begin(), index.end());
  const auto xv = x.value();
  std::vector<double> y(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) y[b] = xv[b * C + idx[b]];
  return x.tape().record("pick", {idx.size()}, std::move(y), {x.id()},
                         [idx, C](Tape& t, std::size_t self) {
                           auto& n = t.node(self);
                           auto gx = t.parent_grad(self, 0);
                           if (gx.empty()) return;
                           for (std::size_t b = 0; b < idx.size(); ++b) gx[b * C + idx[b]] += n.grad[b];
                         });
}

}  // namespace sigwav
