#pragma once

#include <string>
#include <vector>

#include "cgreid/ops.hpp"
#include "cgreid/rng.hpp"
#include "cgreid/tensor.hpp"

namespace cgreid {

// The five head architectures:
//   A  channel groups, one embed per group (optionally shared), one
//      classifier per group
//   B  single embed on the full feature, single classifier
//   C  grouped embed (independent per-group transforms) concatenated into
//      a single classifier
//   D  single embed on the full feature fanned out to n_c classifiers
//   E  n_c independent embeds on the full feature, one classifier each
enum class Variant { A, B, C, D, E };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct HeadSpec {
  Variant variant = Variant::A;
  int n_c = 8;
  int c_total = 64;
  int embed_dim = 16;
  int n_id = 0;
  bool shared_embed = true;
  int part_stripes = 0;  // 0 disables the horizontal-stripe head

  int c_group() const { return c_total / n_c; }

  // Applies the structural rules: variant B collapses to one branch, and
  // the shared flag is canonicalized where only one embed exists.
  HeadSpec normalized() const;
  void validate() const;
};

// Exact trainable scalar count of the head (embeds, batch-norm affine
// parameters, classifiers, stripe head).
int64_t head_param_count(const HeadSpec& spec);

// Uniform channel partition: group i holds channels
// [i*C_g, (i+1)*C_g), disjoint and covering F.
std::vector<Tensor> slice_channel_groups(const Tensor& features, int n_c);

Tensor concat_columns(const std::vector<Tensor>& parts);
Tensor concat_columns_subset(const std::vector<Tensor>& parts, const std::vector<int>& indices);

// Per-image inference features: one transformed vector per channel group,
// plus stripe vectors when the part head is enabled.
struct DescriptorSet {
  std::vector<Tensor> groups;   // each B x D
  std::vector<Tensor> stripes;  // each B x D
  int dim = 0;
};

// Sum of per-branch cross-entropy losses; each branch loss is the batch
// mean, the total is the plain sum over branches.
struct HeadLossResult {
  double total = 0.0;
  std::vector<double> per_branch;
  std::vector<Tensor> grad_logits;  // gradient of `total` per branch
};

HeadLossResult head_loss(const std::vector<Tensor>& branch_logits, const std::vector<int>& labels);

class Head {
 public:
  Head(const HeadSpec& spec, Rng& rng);

  const HeadSpec& spec() const { return spec_; }
  int n_channel_branches() const { return n_branches_; }
  int n_groups() const { return n_groups_; }

  struct Forward {
    std::vector<Tensor> branch_logits;  // channel branches, then stripe branches
    DescriptorSet descriptors;
  };

  // features: B x C from global average pooling. feature_maps must be
  // supplied when the stripe head is enabled and may be null otherwise.
  Forward forward(const Tensor& features, const Tensor* feature_maps, Mode mode);

  // Accumulates parameter gradients and returns the gradient with respect
  // to the pooled features. Empty grad vectors are treated as zeros. When
  // the stripe head is enabled, the stripe contribution is accumulated
  // into *grad_feature_maps.
  Tensor backward(const std::vector<Tensor>& grad_logits, const std::vector<Tensor>& grad_groups,
                  const std::vector<Tensor>& grad_stripes, Tensor* grad_feature_maps);

  std::vector<LinearParams>& embeds() { return embeds_; }
  std::vector<BatchNormParams>& bns() { return bns_; }
  std::vector<LinearParams>& classifiers() { return classifiers_; }

  void collect_params(std::vector<ParamTensor*>& out);
  void collect_named_state(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor*>>& out);

 private:
  HeadSpec spec_;
  int n_branches_ = 0;
  int n_embeds_ = 0;
  int n_groups_ = 0;

  std::vector<LinearParams> embeds_;
  std::vector<BatchNormParams> bns_;
  std::vector<LinearParams> classifiers_;

  LinearParams part_embed_;
  BatchNormParams part_bn_;
  std::vector<LinearParams> part_classifiers_;

  struct BranchCache {
    Tensor embed_in;
    BatchNormCache bn;
    Tensor relu_in;
    Tensor cls_in;
  };
  std::vector<BranchCache> caches_;
  std::vector<BranchCache> part_caches_;
  int maps_h_ = 0, maps_w_ = 0;
  bool has_cache_ = false;

  int embed_index(int branch) const { return n_embeds_ == 1 ? 0 : branch; }
};

}  // namespace cgreid
