#include "cgreid/backbone.hpp"

#include <stdexcept>
#include <string>

namespace cgreid {

BackboneSpec BackboneSpec::with_last_stride(int ls) {
  BackboneSpec s;
  s.last_stride = ls;
  s.stage_strides.back() = ls;
  return s;
}

void BackboneSpec::validate() const {
  if (stage_channels.empty() || stage_channels.size() != stage_strides.size()) {
    throw std::invalid_argument("backbone: stage_channels and stage_strides must have equal length >= 1");
  }
  if (last_stride != 1 && last_stride != 2) {
    throw std::invalid_argument("backbone: last_stride must be 1 or 2, got " + std::to_string(last_stride));
  }
  if (stage_strides.back() != last_stride) {
    throw std::invalid_argument("backbone: final stage stride must equal last_stride");
  }
  for (int s : stage_strides) {
    if (s != 1 && s != 2) throw std::invalid_argument("backbone: stage strides must be 1 or 2");
  }
  if (kernel % 2 != 1 || kernel < 1) {
    throw std::invalid_argument("backbone: kernel must be odd and positive");
  }
}

std::pair<int, int> BackboneSpec::output_hw(int height, int width) const {
  int h = height, w = width;
  for (size_t i = 0; i < stage_strides.size(); ++i) {
    const int s = stage_strides[i];
    if (s == 2 && (h % 2 != 0 || w % 2 != 0)) {
      throw ShapeError("backbone: stage " + std::to_string(i) + " halves " + std::to_string(h) + "x" +
                       std::to_string(w) + ", which is not evenly divisible");
    }
    h = s == 2 ? h / 2 : h;
    w = s == 2 ? w / 2 : w;
    if (h < 1 || w < 1) throw ShapeError("backbone: spatial size vanished at stage " + std::to_string(i));
  }
  return {h, w};
}

Backbone::Backbone(const BackboneSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  const int pad = spec_.kernel / 2;
  int in_c = spec_.in_channels;
  for (size_t i = 0; i < spec_.stage_channels.size(); ++i) {
    Stage st;
    st.conv.init(spec_.stage_channels[i], in_c, spec_.kernel, spec_.stage_strides[i], pad, rng);
    st.bn.init(spec_.stage_channels[i]);
    stages_.push_back(std::move(st));
    in_c = spec_.stage_channels[i];
  }
  caches_.resize(stages_.size());
}

Tensor Backbone::forward(const Tensor& images, Mode mode) {
  if (images.rank() != 4 || images.dim(1) != spec_.in_channels) {
    throw ShapeError("backbone: expected N x " + std::to_string(spec_.in_channels) +
                     " x H x W input, got " + images.shape_str());
  }
  spec_.output_hw(images.dim(2), images.dim(3));  // reject incompatible sizes up front

  Tensor x = images;
  for (size_t i = 0; i < stages_.size(); ++i) {
    Stage& st = stages_[i];
    StageCache& cc = caches_[i];
    if (mode == Mode::kTrain) cc.conv_in = x;
    Tensor y = conv2d_forward(x, st.conv.weight.value, st.conv.bias.value, st.conv.stride, st.conv.pad);
    if (mode == Mode::kTrain) {
      y = batchnorm2d_forward_train(y, st.bn.gamma.value, st.bn.beta.value, st.bn.running_mean,
                                    st.bn.running_var, st.bn.momentum, st.bn.eps, cc.bn);
    } else {
      y = batchnorm2d_forward_eval(y, st.bn.gamma.value, st.bn.beta.value, st.bn.running_mean,
                                   st.bn.running_var, st.bn.eps);
    }
    if (mode == Mode::kTrain) cc.relu_in = y;
    x = relu(y);
  }
  has_cache_ = mode == Mode::kTrain;
  return x;
}

Tensor Backbone::backward(const Tensor& grad_out) {
  if (!has_cache_) throw std::logic_error("backbone: backward called before train-mode forward");
  Tensor g = grad_out;
  for (size_t i = stages_.size(); i-- > 0;) {
    Stage& st = stages_[i];
    StageCache& cc = caches_[i];
    g = relu_backward(g, cc.relu_in);
    BatchNormGrads bng = batchnorm2d_backward(g, cc.bn, st.bn.gamma.value);
    for (size_t j = 0; j < bng.grad_gamma.data.size(); ++j) {
      st.bn.gamma.grad.data[j] += bng.grad_gamma.data[j];
      st.bn.beta.grad.data[j] += bng.grad_beta.data[j];
    }
    Conv2dGrads cg = conv2d_backward(bng.grad_input, cc.conv_in, st.conv.weight.value,
                                     st.conv.stride, st.conv.pad);
    for (size_t j = 0; j < cg.grad_weight.data.size(); ++j) st.conv.weight.grad.data[j] += cg.grad_weight.data[j];
    for (size_t j = 0; j < cg.grad_bias.data.size(); ++j) st.conv.bias.grad.data[j] += cg.grad_bias.data[j];
    g = std::move(cg.grad_input);
  }
  return g;
}

void Backbone::collect_params(std::vector<ParamTensor*>& out) {
  for (Stage& st : stages_) {
    for (ParamTensor* p : st.conv.params()) out.push_back(p);
    for (ParamTensor* p : st.bn.params()) out.push_back(p);
  }
}

void Backbone::collect_named_state(const std::string& prefix,
                                   std::vector<std::pair<std::string, Tensor*>>& out) {
  for (size_t i = 0; i < stages_.size(); ++i) {
    const std::string base = prefix + "stage" + std::to_string(i) + ".";
    Stage& st = stages_[i];
    out.emplace_back(base + "conv.weight", &st.conv.weight.value);
    out.emplace_back(base + "conv.bias", &st.conv.bias.value);
    out.emplace_back(base + "bn.gamma", &st.bn.gamma.value);
    out.emplace_back(base + "bn.beta", &st.bn.beta.value);
    out.emplace_back(base + "bn.running_mean", &st.bn.running_mean);
    out.emplace_back(base + "bn.running_var", &st.bn.running_var);
  }
}

}  // namespace cgreid
