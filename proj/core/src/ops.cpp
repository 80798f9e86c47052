#include "cgreid/ops.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace cgreid {

namespace {

// C[m,n] += A[m,k] * B[k,n]
void matmul_nn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
void matmul_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    const double* brow = b + static_cast<size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Expands one image (C x H x W) into the column matrix (C*K*K) x (OH*OW).
void im2col(const double* img, int channels, int height, int width, int kernel, int stride,
            int pad, int out_h, int out_w, double* col) {
  const int patch = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    const double* plane = img + static_cast<size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* out = col + (static_cast<size_t>(c) * kernel * kernel + ky * kernel + kx) * patch;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            for (int ox = 0; ox < out_w; ++ox) out[oy * out_w + ox] = 0.0;
            continue;
          }
          const double* row = plane + static_cast<size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            out[oy * out_w + ox] = (ix >= 0 && ix < width) ? row[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Scatters a column-matrix gradient back onto the image, accumulating
// overlapping patches.
void col2im_acc(const double* col, int channels, int height, int width, int kernel, int stride,
                int pad, int out_h, int out_w, double* img) {
  const int patch = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    double* plane = img + static_cast<size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* in = col + (static_cast<size_t>(c) * kernel * kernel + ky * kernel + kx) * patch;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          double* row = plane + static_cast<size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) row[ix] += in[oy * out_w + ox];
          }
        }
      }
    }
  }
}

void check_conv_args(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                     int pad) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be NCHW, got " + input.shape_str());
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be OIKK, got " + weight.shape_str());
  if (weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: kernel must be square, got " + weight.shape_str());
  }
  if (input.dim(1) != weight.dim(1)) {
    throw ShapeError("conv2d: input channels (" + std::to_string(input.dim(1)) +
                     ") do not match weight input channels (" + std::to_string(weight.dim(1)) + ")");
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: bias extent must equal output channels (" +
                     std::to_string(weight.dim(0)) + "), got " + bias.shape_str());
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be positive, got " + std::to_string(stride));
  if (pad < 0) throw ShapeError("conv2d: pad must be non-negative, got " + std::to_string(pad));
}

}  // namespace

int conv_out_extent(int in, int kernel, int stride, int pad) {
  const int padded = in + 2 * pad;
  if (kernel > padded) {
    throw ShapeError("conv2d: kernel " + std::to_string(kernel) + " does not fit padded extent " +
                     std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                      int pad) {
  check_conv_args(input, weight, bias, stride, pad);
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int oc = weight.dim(0), k = weight.dim(2);
  const int oh = conv_out_extent(h, k, stride, pad);
  const int ow = conv_out_extent(w, k, stride, pad);
  const int patch = oh * ow;
  const int ckk = c * k * k;

  Tensor out({n, oc, oh, ow});
  std::vector<double> col(static_cast<size_t>(ckk) * patch);
  for (int i = 0; i < n; ++i) {
    im2col(input.data.data() + static_cast<size_t>(i) * c * h * w, c, h, w, k, stride, pad, oh, ow,
           col.data());
    double* dst = out.data.data() + static_cast<size_t>(i) * oc * patch;
    for (int o = 0; o < oc; ++o) {
      const double b = bias(o);
      for (int p = 0; p < patch; ++p) dst[static_cast<size_t>(o) * patch + p] = b;
    }
    matmul_nn_acc(weight.data.data(), col.data(), dst, oc, ckk, patch);
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                            int stride, int pad) {
  if (input.rank() != 4 || weight.rank() != 4 || grad_out.rank() != 4) {
    throw ShapeError("conv2d_backward: all tensors must be rank 4");
  }
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int oc = weight.dim(0), k = weight.dim(2);
  const int oh = conv_out_extent(h, k, stride, pad);
  const int ow = conv_out_extent(w, k, stride, pad);
  if (grad_out.dim(0) != n || grad_out.dim(1) != oc || grad_out.dim(2) != oh ||
      grad_out.dim(3) != ow) {
    throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                     " does not match forward output [" + std::to_string(n) + "x" +
                     std::to_string(oc) + "x" + std::to_string(oh) + "x" + std::to_string(ow) + "]");
  }
  const int patch = oh * ow;
  const int ckk = c * k * k;

  Conv2dGrads g{Tensor(input.shape), Tensor(weight.shape), Tensor({oc})};
  std::vector<double> col(static_cast<size_t>(ckk) * patch);
  std::vector<double> grad_col(static_cast<size_t>(ckk) * patch);
  for (int i = 0; i < n; ++i) {
    const double* go = grad_out.data.data() + static_cast<size_t>(i) * oc * patch;
    im2col(input.data.data() + static_cast<size_t>(i) * c * h * w, c, h, w, k, stride, pad, oh, ow,
           col.data());
    // grad_weight[o,ckk] += grad_out[o,p] * col[ckk,p]
    matmul_nt_acc(go, col.data(), g.grad_weight.data.data(), oc, patch, ckk);
    // grad_col[ckk,p] = weight[o,ckk]^T * grad_out[o,p]
    std::memset(grad_col.data(), 0, grad_col.size() * sizeof(double));
    matmul_tn_acc(weight.data.data(), go, grad_col.data(), oc, ckk, patch);
    col2im_acc(grad_col.data(), c, h, w, k, stride, pad, oh, ow,
               g.grad_input.data.data() + static_cast<size_t>(i) * c * h * w);
    for (int o = 0; o < oc; ++o) {
      double acc = 0.0;
      for (int p = 0; p < patch; ++p) acc += go[static_cast<size_t>(o) * patch + p];
      g.grad_bias(o) += acc;
    }
  }
  return g;
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2) throw ShapeError("linear: input must be B x I, got " + input.shape_str());
  if (weight.rank() != 2) throw ShapeError("linear: weight must be O x I, got " + weight.shape_str());
  if (input.dim(1) != weight.dim(1)) {
    throw ShapeError("linear: input features (" + std::to_string(input.dim(1)) +
                     ") do not match weight features (" + std::to_string(weight.dim(1)) + ")");
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("linear: bias extent must equal output features (" +
                     std::to_string(weight.dim(0)) + "), got " + bias.shape_str());
  }
  const int b = input.dim(0), in = input.dim(1), out = weight.dim(0);
  Tensor y({b, out});
  for (int i = 0; i < b; ++i) {
    for (int o = 0; o < out; ++o) y(i, o) = bias(o);
  }
  matmul_nt_acc(input.data.data(), weight.data.data(), y.data.data(), b, in, out);
  return y;
}

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight) {
  if (grad_out.rank() != 2 || grad_out.dim(0) != input.dim(0) || grad_out.dim(1) != weight.dim(0)) {
    throw ShapeError("linear_backward: grad_out shape " + grad_out.shape_str() +
                     " does not match [" + std::to_string(input.dim(0)) + "x" +
                     std::to_string(weight.dim(0)) + "]");
  }
  const int b = input.dim(0), in = input.dim(1), out = weight.dim(0);
  LinearGrads g{Tensor(input.shape), Tensor(weight.shape), Tensor({out})};
  // grad_input[b,i] = grad_out[b,o] * weight[o,i]
  matmul_nn_acc(grad_out.data.data(), weight.data.data(), g.grad_input.data.data(), b, out, in);
  // grad_weight[o,i] = grad_out[b,o]^T * input[b,i]
  matmul_tn_acc(grad_out.data.data(), input.data.data(), g.grad_weight.data.data(), b, out, in);
  for (int i = 0; i < b; ++i) {
    for (int o = 0; o < out; ++o) g.grad_bias(o) += grad_out(i, o);
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor y(input.shape);
  for (size_t i = 0; i < input.data.size(); ++i) y.data[i] = input.data[i] > 0.0 ? input.data[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
  require_same_shape(grad_out, input, "relu_backward");
  Tensor g(input.shape);
  for (size_t i = 0; i < input.data.size(); ++i) g.data[i] = input.data[i] > 0.0 ? grad_out.data[i] : 0.0;
  return g;
}

namespace {

// Shared batch-norm core. The input is viewed as `rows` groups of
// `features` values each, with `row_stride` elements between consecutive
// rows of one feature: 1d uses (B rows, stride D), 2d folds N*H*W positions
// per channel through an index table instead, so the 2d paths below gather
// explicitly.

void bn_train_stats(const Tensor& x, int features, const std::vector<size_t>& offsets,
                    size_t feature_stride, Tensor& mean, Tensor& var) {
  const double m = static_cast<double>(offsets.size());
  for (int f = 0; f < features; ++f) {
    double acc = 0.0;
    for (size_t off : offsets) acc += x.data[off + f * feature_stride];
    mean(f) = acc / m;
  }
  for (int f = 0; f < features; ++f) {
    double acc = 0.0;
    for (size_t off : offsets) {
      const double d = x.data[off + f * feature_stride] - mean(f);
      acc += d * d;
    }
    var(f) = acc / m;
  }
}

}  // namespace

Tensor batchnorm1d_forward_train(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                 Tensor& running_mean, Tensor& running_var, double momentum,
                                 double eps, BatchNormCache& cache) {
  if (input.rank() != 2) throw ShapeError("batchnorm1d: input must be B x D, got " + input.shape_str());
  const int b = input.dim(0), d = input.dim(1);
  if (b < 2) {
    throw ShapeError("batchnorm1d: train mode requires batch size >= 2, got " + std::to_string(b));
  }
  if (gamma.dim(0) != d || beta.dim(0) != d) {
    throw ShapeError("batchnorm1d: parameter extent does not match feature count " + std::to_string(d));
  }
  Tensor mean({d}), var({d});
  std::vector<size_t> offsets(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) offsets[static_cast<size_t>(i)] = static_cast<size_t>(i) * d;
  bn_train_stats(input, d, offsets, 1, mean, var);

  cache.x_hat = Tensor(input.shape);
  cache.inv_std = Tensor({d});
  Tensor y(input.shape);
  for (int f = 0; f < d; ++f) cache.inv_std(f) = 1.0 / std::sqrt(var(f) + eps);
  for (int i = 0; i < b; ++i) {
    for (int f = 0; f < d; ++f) {
      const double xh = (input(i, f) - mean(f)) * cache.inv_std(f);
      cache.x_hat(i, f) = xh;
      y(i, f) = gamma(f) * xh + beta(f);
    }
  }
  for (int f = 0; f < d; ++f) {
    running_mean(f) = (1.0 - momentum) * running_mean(f) + momentum * mean(f);
    running_var(f) = (1.0 - momentum) * running_var(f) + momentum * var(f);
  }
  return y;
}

Tensor batchnorm1d_forward_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                const Tensor& running_mean, const Tensor& running_var, double eps) {
  if (input.rank() != 2) throw ShapeError("batchnorm1d: input must be B x D, got " + input.shape_str());
  const int b = input.dim(0), d = input.dim(1);
  Tensor y(input.shape);
  for (int f = 0; f < d; ++f) {
    const double inv = 1.0 / std::sqrt(running_var(f) + eps);
    const double g = gamma(f), m = running_mean(f), bt = beta(f);
    for (int i = 0; i < b; ++i) y(i, f) = g * (input(i, f) - m) * inv + bt;
  }
  return y;
}

BatchNormGrads batchnorm1d_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                    const Tensor& gamma) {
  require_same_shape(grad_out, cache.x_hat, "batchnorm1d_backward");
  const int b = grad_out.dim(0), d = grad_out.dim(1);
  BatchNormGrads g{Tensor(grad_out.shape), Tensor({d}), Tensor({d})};
  for (int f = 0; f < d; ++f) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < b; ++i) {
      sum_dy += grad_out(i, f);
      sum_dy_xhat += grad_out(i, f) * cache.x_hat(i, f);
    }
    g.grad_beta(f) = sum_dy;
    g.grad_gamma(f) = sum_dy_xhat;
    const double scale = gamma(f) * cache.inv_std(f) / static_cast<double>(b);
    for (int i = 0; i < b; ++i) {
      g.grad_input(i, f) = scale * (static_cast<double>(b) * grad_out(i, f) - sum_dy -
                                    cache.x_hat(i, f) * sum_dy_xhat);
    }
  }
  return g;
}

Tensor batchnorm2d_forward_train(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                 Tensor& running_mean, Tensor& running_var, double momentum,
                                 double eps, BatchNormCache& cache) {
  if (input.rank() != 4) throw ShapeError("batchnorm2d: input must be NCHW, got " + input.shape_str());
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t m = static_cast<int64_t>(n) * h * w;
  if (m < 2) throw ShapeError("batchnorm2d: train mode requires N*H*W >= 2");
  if (gamma.dim(0) != c || beta.dim(0) != c) {
    throw ShapeError("batchnorm2d: parameter extent does not match channel count " + std::to_string(c));
  }
  const int hw = h * w;
  Tensor mean({c}), var({c});
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* plane = input.data.data() + (static_cast<size_t>(i) * c + ch) * hw;
      for (int p = 0; p < hw; ++p) acc += plane[p];
    }
    mean(ch) = acc / static_cast<double>(m);
    double vacc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* plane = input.data.data() + (static_cast<size_t>(i) * c + ch) * hw;
      for (int p = 0; p < hw; ++p) {
        const double d = plane[p] - mean(ch);
        vacc += d * d;
      }
    }
    var(ch) = vacc / static_cast<double>(m);
  }

  cache.x_hat = Tensor(input.shape);
  cache.inv_std = Tensor({c});
  Tensor y(input.shape);
  for (int ch = 0; ch < c; ++ch) cache.inv_std(ch) = 1.0 / std::sqrt(var(ch) + eps);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
      const double mu = mean(ch), inv = cache.inv_std(ch), gm = gamma(ch), bt = beta(ch);
      for (int p = 0; p < hw; ++p) {
        const double xh = (input.data[base + p] - mu) * inv;
        cache.x_hat.data[base + p] = xh;
        y.data[base + p] = gm * xh + bt;
      }
    }
  }
  for (int ch = 0; ch < c; ++ch) {
    running_mean(ch) = (1.0 - momentum) * running_mean(ch) + momentum * mean(ch);
    running_var(ch) = (1.0 - momentum) * running_var(ch) + momentum * var(ch);
  }
  return y;
}

Tensor batchnorm2d_forward_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                const Tensor& running_mean, const Tensor& running_var, double eps) {
  if (input.rank() != 4) throw ShapeError("batchnorm2d: input must be NCHW, got " + input.shape_str());
  const int n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor y(input.shape);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
      const double inv = 1.0 / std::sqrt(running_var(ch) + eps);
      const double gm = gamma(ch), mu = running_mean(ch), bt = beta(ch);
      for (int p = 0; p < hw; ++p) y.data[base + p] = gm * (input.data[base + p] - mu) * inv + bt;
    }
  }
  return y;
}

BatchNormGrads batchnorm2d_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                    const Tensor& gamma) {
  require_same_shape(grad_out, cache.x_hat, "batchnorm2d_backward");
  const int n = grad_out.dim(0), c = grad_out.dim(1), hw = grad_out.dim(2) * grad_out.dim(3);
  const double m = static_cast<double>(static_cast<int64_t>(n) * hw);
  BatchNormGrads g{Tensor(grad_out.shape), Tensor({c}), Tensor({c})};
  for (int ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
      for (int p = 0; p < hw; ++p) {
        sum_dy += grad_out.data[base + p];
        sum_dy_xhat += grad_out.data[base + p] * cache.x_hat.data[base + p];
      }
    }
    g.grad_beta(ch) = sum_dy;
    g.grad_gamma(ch) = sum_dy_xhat;
    const double scale = gamma(ch) * cache.inv_std(ch) / m;
    for (int i = 0; i < n; ++i) {
      const size_t base = (static_cast<size_t>(i) * c + ch) * hw;
      for (int p = 0; p < hw; ++p) {
        g.grad_input.data[base + p] = scale * (m * grad_out.data[base + p] - sum_dy -
                                               cache.x_hat.data[base + p] * sum_dy_xhat);
      }
    }
  }
  return g;
}

Tensor global_avg_pool(const Tensor& input) {
  if (input.rank() != 4) throw ShapeError("global_avg_pool: input must be NCHW, got " + input.shape_str());
  const int n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor y({n, c});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = input.data.data() + (static_cast<size_t>(i) * c + ch) * hw;
      double acc = 0.0;
      for (int p = 0; p < hw; ++p) acc += plane[p];
      y(i, ch) = acc / static_cast<double>(hw);
    }
  }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, int height, int width) {
  if (grad_out.rank() != 2) throw ShapeError("global_avg_pool_backward: grad must be N x C");
  const int n = grad_out.dim(0), c = grad_out.dim(1), hw = height * width;
  Tensor g({n, c, height, width});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double v = grad_out(i, ch) / static_cast<double>(hw);
      double* plane = g.data.data() + (static_cast<size_t>(i) * c + ch) * hw;
      for (int p = 0; p < hw; ++p) plane[p] = v;
    }
  }
  return g;
}

Tensor stripe_avg_pool(const Tensor& input, int row_begin, int row_end) {
  if (input.rank() != 4) throw ShapeError("stripe_avg_pool: input must be NCHW");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (row_begin < 0 || row_end > h || row_begin >= row_end) {
    throw ShapeError("stripe_avg_pool: row band [" + std::to_string(row_begin) + "," +
                     std::to_string(row_end) + ") out of range for height " + std::to_string(h));
  }
  const int rows = row_end - row_begin;
  Tensor y({n, c});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = input.data.data() + (static_cast<size_t>(i) * c + ch) * h * w;
      double acc = 0.0;
      for (int r = row_begin; r < row_end; ++r) {
        for (int x = 0; x < w; ++x) acc += plane[static_cast<size_t>(r) * w + x];
      }
      y(i, ch) = acc / static_cast<double>(rows * w);
    }
  }
  return y;
}

Tensor stripe_avg_pool_backward(const Tensor& grad_out, int height, int width, int row_begin,
                                int row_end) {
  const int n = grad_out.dim(0), c = grad_out.dim(1);
  const int rows = row_end - row_begin;
  Tensor g({n, c, height, width});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double v = grad_out(i, ch) / static_cast<double>(rows * width);
      double* plane = g.data.data() + (static_cast<size_t>(i) * c + ch) * height * width;
      for (int r = row_begin; r < row_end; ++r) {
        for (int x = 0; x < width; ++x) plane[static_cast<size_t>(r) * width + x] = v;
      }
    }
  }
  return g;
}

SoftmaxCEResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be B x K");
  const int b = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(b));
  }
  SoftmaxCEResult r{Tensor({b}), Tensor(logits.shape)};
  for (int i = 0; i < b; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) +
                              " out of range [0," + std::to_string(k) + ")");
    }
    double mx = logits(i, 0);
    for (int j = 1; j < k; ++j) mx = std::max(mx, logits(i, j));
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(logits(i, j) - mx);
    const double log_denom = std::log(denom);
    r.per_sample_loss(i) = -(logits(i, y) - mx - log_denom);
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(logits(i, j) - mx) / denom;
      r.grad_logits(i, j) = p - (j == y ? 1.0 : 0.0);
    }
  }
  return r;
}

void sgd_step(const std::vector<ParamTensor*>& params, double lr, double momentum,
              double weight_decay) {
  for (ParamTensor* p : params) {
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      const double v = momentum * p->momentum.data[i] + p->grad.data[i] + weight_decay * p->value.data[i];
      p->momentum.data[i] = v;
      p->value.data[i] -= lr * v;
    }
  }
}

void LinearParams::init(int out_features, int in_features, Rng& rng) {
  weight = ParamTensor({out_features, in_features});
  bias = ParamTensor({out_features});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  for (double& v : weight.value.data) v = rng.uniform(-bound, bound);
  for (double& v : bias.value.data) v = rng.uniform(-bound, bound);
}

void Conv2dParams::init(int out_channels, int in_channels, int kernel, int stride_, int pad_,
                        Rng& rng) {
  weight = ParamTensor({out_channels, in_channels, kernel, kernel});
  bias = ParamTensor({out_channels});
  stride = stride_;
  pad = pad_;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * kernel * kernel);
  for (double& v : weight.value.data) v = rng.uniform(-bound, bound);
  for (double& v : bias.value.data) v = rng.uniform(-bound, bound);
}

void BatchNormParams::init(int features) {
  gamma = ParamTensor({features});
  beta = ParamTensor({features});
  gamma.value.fill(1.0);
  running_mean = Tensor({features});
  running_var = Tensor::full({features}, 1.0);
}

}  // namespace cgreid
