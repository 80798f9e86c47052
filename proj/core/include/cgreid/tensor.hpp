#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgreid {

// Thrown when an operation receives tensors whose shapes do not agree.
// The message names the offending dimension.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major N-dimensional array of doubles. The whole pipeline runs
// in 64-bit precision so every backward pass can be checked against
// central finite differences.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<double> values);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }

  void fill(double v);

  double& operator()(int i) { return data[static_cast<size_t>(i)]; }
  double operator()(int i) const { return data[static_cast<size_t>(i)]; }
  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
  double& operator()(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double operator()(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double& operator()(int i, int j, int k, int l) {
    return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  std::string shape_str() const;
};

int64_t shape_numel(const std::vector<int>& shape);

// Throws ShapeError mentioning `what` when the two shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

// Parameter container: value plus paired gradient and SGD momentum
// buffer, all of identical shape.
struct ParamTensor {
  Tensor value;
  Tensor grad;
  Tensor momentum;

  ParamTensor() = default;
  explicit ParamTensor(std::vector<int> shape)
      : value(shape), grad(shape), momentum(std::move(shape)) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace cgreid
