#pragma once

#include <functional>

#include "cgreid/tensor.hpp"

namespace cgreid {

// Central finite differences of a deterministic scalar function with
// respect to every coordinate of `x`: (f(x+h) - f(x-h)) / (2h). The
// function is expected to read `x` by reference; `x` is restored on exit.
Tensor finite_diff_grad(const std::function<double()>& f, Tensor& x, double h = 1e-5);

// Relative disagreement between two gradients:
//   ||a - b||_2 / max(||a||_2, ||b||_2, floor).
double grad_rel_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace cgreid
