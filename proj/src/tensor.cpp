#include "sigwav/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "sigwav/error.hpp"

namespace sigwav {

std::string_view category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::dimension: return "dimension";
    case ErrorCategory::input_too_short: return "input-too-short";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::config: return "config";
    case ErrorCategory::dataset: return "dataset";
    case ErrorCategory::label: return "label";
    case ErrorCategory::format: return "format";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::empty_sequence: return "empty-sequence";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::dataset:
    case ErrorCategory::label:
    case ErrorCategory::format:
    case ErrorCategory::parse:
    case ErrorCategory::input_too_short: return 3;
    case ErrorCategory::numerical:
    case ErrorCategory::domain: return 4;
    default: return 1;
  }
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  require(data.size() == numel(shape), ErrorCategory::dimension,
          "tensor data length " + std::to_string(data.size()) + " does not match shape " +
              to_string(shape));
}

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape, 0.0) {}

void Parameter::zero_grad() {
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
  has_grad = false;
}

}  // namespace sigwav
