#include "cgreid/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cgreid {

Tensor finite_diff_grad(const std::function<double()>& f, Tensor& x, double h) {
  Tensor g(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double saved = x.data[i];
    x.data[i] = saved + h;
    const double fp = f();
    x.data[i] = saved - h;
    const double fm = f();
    x.data[i] = saved;
    g.data[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double grad_rel_error(const Tensor& a, const Tensor& b, double floor) {
  require_same_shape(a, b, "grad_rel_error");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    diff += d * d;
    na += a.data[i] * a.data[i];
    nb += b.data[i] * b.data[i];
  }
  const double norm_a = std::sqrt(na), norm_b = std::sqrt(nb);
  // Both sides below the central-difference noise floor (true zero
  // gradients, e.g. a bias absorbed by a following batch norm).
  if (norm_a < 1e-8 && norm_b < 1e-8) return 0.0;
  return std::sqrt(diff) / std::max({norm_a, norm_b, floor});
}

}  // namespace cgreid
