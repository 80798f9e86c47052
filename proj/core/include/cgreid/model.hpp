#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cgreid/backbone.hpp"
#include "cgreid/head.hpp"

namespace cgreid {

struct ModelSpec {
  BackboneSpec backbone;
  HeadSpec head;

  void validate() const;
};

// Backbone -> global average pooling -> head (plus the stripe head on the
// pre-pooling feature maps when enabled).
class Model {
 public:
  Model(const ModelSpec& spec, uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  Backbone& backbone() { return backbone_; }
  Head& head() { return head_; }

  struct Forward {
    std::vector<Tensor> branch_logits;
    DescriptorSet descriptors;
  };

  Forward forward(const Tensor& images, Mode mode);

  // Empty grad vectors are treated as zeros. Must follow a train-mode
  // forward on the same batch.
  void backward(const std::vector<Tensor>& grad_logits, const std::vector<Tensor>& grad_groups,
                const std::vector<Tensor>& grad_stripes);

  void zero_grad();
  std::vector<ParamTensor*> params();
  std::vector<std::pair<std::string, Tensor*>> named_state();
  int64_t param_count();

 private:
  ModelSpec spec_;
  Backbone backbone_;
  Head head_;
  int maps_h_ = 0, maps_w_ = 0;
  std::vector<int> maps_shape_;
};

}  // namespace cgreid
