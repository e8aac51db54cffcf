#include "sigwav/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sigwav {

namespace {

double projected(const GraphBuilder& build, const std::vector<Tensor>& inputs, const Tensor& r) {
  Tape tape;
  tape.set_grad_enabled(false);
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.constant(t));
  const auto y = build(tape, leaves).value();
  double f = 0;
  for (std::size_t i = 0; i < y.size(); ++i) f += r[i] * y[i];
  return f;
}

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5});
}

}  // namespace

GradcheckReport gradcheck(const std::string& op, const GraphBuilder& build, std::vector<Tensor> inputs,
                          std::span<Parameter* const> params, std::uint64_t seed, double h) {
  GradcheckReport report{op, 0.0, 0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  for (auto* p : params) p->zero_grad();
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
  Var y = build(tape, leaves);
  Tensor r(y.shape());
  for (auto& v : r.data) v = dist(rng);
  tape.backward(sum_all(mul(y, tape.constant(r))));

  auto check = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double fp = projected(build, inputs, r);
    slot = saved - h;
    const double fm = projected(build, inputs, r);
    slot = saved;
    report.max_rel_error = std::max(report.max_rel_error, rel_error(analytic, (fp - fm) / (2 * h)));
    ++report.entries;
  };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto g = leaves[i].grad();
    for (std::size_t j = 0; j < inputs[i].size(); ++j) check(inputs[i].data[j], g.empty() ? 0.0 : g[j]);
  }
  for (auto* p : params) {
    const std::vector<double> g = p->grad.data;
    for (std::size_t j = 0; j < p->value.size(); ++j) check(p->value.data[j], g[j]);
  }
  return report;
}

}  // namespace sigwav
