#pragma once

#include <vector>

#include "cgreid/rng.hpp"
#include "cgreid/tensor.hpp"

namespace cgreid {

enum class Mode { kTrain, kEval };

// ---------------------------------------------------------------------------
// Convolution (NCHW input, OIKK weight). Forward uses im2col + matmul;
// the direct six-loop reference lives in the tests as an independent oracle.
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      int stride, int pad);

struct Conv2dGrads {
  Tensor grad_input;
  Tensor grad_weight;
  Tensor grad_bias;
};

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                            int stride, int pad);

// Output extent of one spatial dimension under standard convolution
// arithmetic; throws if the kernel does not fit the padded input.
int conv_out_extent(int in, int kernel, int stride, int pad);

// ---------------------------------------------------------------------------
// Fully connected: out[b,o] = sum_i in[b,i] * w[o,i] + bias[o].
// ---------------------------------------------------------------------------

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
  Tensor grad_input;
  Tensor grad_weight;
  Tensor grad_bias;
};

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight);

// ---------------------------------------------------------------------------
// ReLU. The subgradient at exactly zero is zero.
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

// ---------------------------------------------------------------------------
// Batch normalization. Train mode normalizes with biased batch variance and
// updates running statistics by exponential moving average (no unbiased
// correction); eval mode uses the running statistics. The backward pass
// differentiates through the batch mean and variance.
// ---------------------------------------------------------------------------

inline constexpr double kBatchNormEps = 1e-5;

struct BatchNormCache {
  Tensor x_hat;     // normalized input, same shape as x
  Tensor inv_std;   // per-feature 1/sqrt(var + eps)
};

// input B x D, statistics per feature over the batch. Requires B >= 2 in
// train mode.
Tensor batchnorm1d_forward_train(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                 Tensor& running_mean, Tensor& running_var, double momentum,
                                 double eps, BatchNormCache& cache);
Tensor batchnorm1d_forward_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                const Tensor& running_mean, const Tensor& running_var, double eps);

struct BatchNormGrads {
  Tensor grad_input;
  Tensor grad_gamma;
  Tensor grad_beta;
};

BatchNormGrads batchnorm1d_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                    const Tensor& gamma);

// input N x C x H x W, statistics per channel over N*H*W positions.
Tensor batchnorm2d_forward_train(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                 Tensor& running_mean, Tensor& running_var, double momentum,
                                 double eps, BatchNormCache& cache);
Tensor batchnorm2d_forward_eval(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                const Tensor& running_mean, const Tensor& running_var, double eps);
BatchNormGrads batchnorm2d_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                    const Tensor& gamma);

// ---------------------------------------------------------------------------
// Global average pooling NCHW -> N x C; backward spreads the gradient
// uniformly over the spatial positions.
// ---------------------------------------------------------------------------

Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out, int height, int width);

// Mean over a horizontal band of rows [row_begin, row_end); used by the
// stripe head.
Tensor stripe_avg_pool(const Tensor& input, int row_begin, int row_end);
Tensor stripe_avg_pool_backward(const Tensor& grad_out, int height, int width, int row_begin,
                                int row_end);

// ---------------------------------------------------------------------------
// Softmax cross-entropy with max-subtraction stabilization. Labels are
// 0-based class ids. `grad_logits` is the gradient of the summed per-sample
// losses, i.e. softmax(logits) - one_hot(label) per row; callers apply the
// batch-mean scaling.
// ---------------------------------------------------------------------------

struct SoftmaxCEResult {
  Tensor per_sample_loss;  // [B]
  Tensor grad_logits;      // B x K
};

SoftmaxCEResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// SGD with momentum and weight decay:
//   v <- momentum * v + grad + weight_decay * value
//   value <- value - lr * v
// ---------------------------------------------------------------------------

void sgd_step(const std::vector<ParamTensor*>& params, double lr, double momentum,
              double weight_decay);

// ---------------------------------------------------------------------------
// Parameter bundles shared by backbone and head. Weight and bias draw from
// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), weight first.
// ---------------------------------------------------------------------------

struct LinearParams {
  ParamTensor weight;  // O x I
  ParamTensor bias;    // O

  void init(int out_features, int in_features, Rng& rng);
  std::vector<ParamTensor*> params() { return {&weight, &bias}; }
};

struct Conv2dParams {
  ParamTensor weight;  // O x I x K x K
  ParamTensor bias;    // O
  int stride = 1;
  int pad = 0;

  void init(int out_channels, int in_channels, int kernel, int stride_, int pad_, Rng& rng);
  std::vector<ParamTensor*> params() { return {&weight, &bias}; }
};

struct BatchNormParams {
  ParamTensor gamma;
  ParamTensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = kBatchNormEps;

  void init(int features);
  std::vector<ParamTensor*> params() { return {&gamma, &beta}; }
};

}  // namespace cgreid
