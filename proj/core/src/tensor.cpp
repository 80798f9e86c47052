#include "cgreid/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cgreid {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(e));
    n *= e;
  }
  return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str());
  }
}

Tensor Tensor::full(std::vector<int> s, double v) {
  Tensor t(std::move(s));
  t.fill(v);
  return t;
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw ShapeError(what + ": shape " + a.shape_str() + " does not match " + b.shape_str());
  }
}

}  // namespace cgreid
