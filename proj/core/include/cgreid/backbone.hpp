#pragma once

#include <utility>
#include <vector>

#include "cgreid/ops.hpp"
#include "cgreid/rng.hpp"
#include "cgreid/tensor.hpp"

namespace cgreid {

// Plain conv -> batchnorm -> relu stack. Stands in for a deep residual
// backbone at desk scale; the interesting machinery lives in the head.
struct BackboneSpec {
  std::vector<int> stage_channels{16, 32, 64};
  std::vector<int> stage_strides{2, 2, 1};
  int last_stride = 1;  // stride of the final stage, 1 or 2
  int kernel = 3;
  int in_channels = 3;

  int out_channels() const { return stage_channels.back(); }
  // Spatial extents after the stride chain; throws on fractional sizes.
  std::pair<int, int> output_hw(int height, int width) const;
  void validate() const;

  static BackboneSpec with_last_stride(int ls);
};

class Backbone {
 public:
  Backbone(const BackboneSpec& spec, Rng& rng);

  const BackboneSpec& spec() const { return spec_; }

  // images N x in_channels x H x W -> feature maps N x C x H' x W'.
  Tensor forward(const Tensor& images, Mode mode);
  // Requires forward to have run in train mode; accumulates parameter
  // gradients and returns the gradient with respect to the images.
  Tensor backward(const Tensor& grad_out);

  struct Stage {
    Conv2dParams conv;
    BatchNormParams bn;
  };
  std::vector<Stage>& stages() { return stages_; }

  void collect_params(std::vector<ParamTensor*>& out);
  void collect_named_state(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor*>>& out);

 private:
  BackboneSpec spec_;
  std::vector<Stage> stages_;

  struct StageCache {
    Tensor conv_in;
    BatchNormCache bn;
    Tensor relu_in;
  };
  std::vector<StageCache> caches_;
  bool has_cache_ = false;
};

}  // namespace cgreid
