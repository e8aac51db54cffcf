#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sigwav {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array of doubles. Plain value type; the autodiff tape
// copies into its own nodes.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }
};

// A named learnable array with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool has_grad = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v);

  void zero_grad();
};

}  // namespace sigwav
