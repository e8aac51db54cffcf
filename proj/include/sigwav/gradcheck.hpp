#pragma once

// Central finite-difference check of analytic gradients.
//
// The graph output y is projected to a scalar with a fixed random R,
// f = sum(R * y), so every output entry contributes. Each entry of every
// input and parameter is perturbed by +-h and compared with the analytic
// gradient; the error is |a - n| / max(|a|, |n|, 1e-5).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sigwav/autodiff.hpp"

namespace sigwav {

struct GradcheckReport {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

// `build` must construct the graph from scratch on the tape it is given,
// reading `inputs` through the leaves passed in and `params` via Tape::param.
using GraphBuilder = std::function<Var(Tape&, std::span<const Var>)>;

GradcheckReport gradcheck(const std::string& op, const GraphBuilder& build, std::vector<Tensor> inputs,
                          std::span<Parameter* const> params, std::uint64_t seed, double h = 1e-5);

// One report per differentiable operation of the library.
std::vector<GradcheckReport> gradcheck_suite(std::uint64_t seed);

inline constexpr double kGradcheckTolerance = 1e-4;

}  // namespace sigwav
