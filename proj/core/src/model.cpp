#include "cgreid/model.hpp"

#include <stdexcept>

namespace cgreid {

void ModelSpec::validate() const {
  backbone.validate();
  head.validate();
  if (backbone.out_channels() != head.c_total) {
    throw std::invalid_argument("model: backbone output channels (" +
                                std::to_string(backbone.out_channels()) +
                                ") do not match head c_total (" + std::to_string(head.c_total) + ")");
  }
}

namespace {

ModelSpec normalize(ModelSpec s) {
  s.head = s.head.normalized();
  return s;
}

}  // namespace

Model::Model(const ModelSpec& spec, uint64_t seed)
    : spec_(normalize(spec)),
      backbone_([&] {
        Rng rng(derive_seed(seed, {seed_tag::backbone}));
        return Backbone(spec_.backbone, rng);
      }()),
      head_([&] {
        Rng rng(derive_seed(seed, {seed_tag::head}));
        return Head(spec_.head, rng);
      }()) {
  spec_.validate();
}

Model::Forward Model::forward(const Tensor& images, Mode mode) {
  Tensor maps = backbone_.forward(images, mode);
  maps_h_ = maps.dim(2);
  maps_w_ = maps.dim(3);
  maps_shape_ = maps.shape;
  Tensor pooled = global_avg_pool(maps);
  Head::Forward hf = head_.forward(pooled, &maps, mode);
  return Forward{std::move(hf.branch_logits), std::move(hf.descriptors)};
}

void Model::backward(const std::vector<Tensor>& grad_logits, const std::vector<Tensor>& grad_groups,
                     const std::vector<Tensor>& grad_stripes) {
  Tensor grad_maps;
  Tensor* grad_maps_ptr = nullptr;
  if (spec_.head.part_stripes > 0) {
    grad_maps = Tensor(maps_shape_);
    grad_maps_ptr = &grad_maps;
  }
  Tensor grad_pooled = head_.backward(grad_logits, grad_groups, grad_stripes, grad_maps_ptr);
  Tensor g = global_avg_pool_backward(grad_pooled, maps_h_, maps_w_);
  if (grad_maps_ptr != nullptr) {
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += grad_maps.data[i];
  }
  backbone_.backward(g);
}

void Model::zero_grad() {
  for (ParamTensor* p : params()) p->zero_grad();
}

std::vector<ParamTensor*> Model::params() {
  std::vector<ParamTensor*> out;
  backbone_.collect_params(out);
  head_.collect_params(out);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  backbone_.collect_named_state("backbone.", out);
  head_.collect_named_state("head.", out);
  return out;
}

int64_t Model::param_count() {
  int64_t n = 0;
  for (ParamTensor* p : params()) n += p->value.numel();
  return n;
}

}  // namespace cgreid
