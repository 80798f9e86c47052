#include "cgreid/head.hpp"

#include <stdexcept>

namespace cgreid {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::A: return "A";
    case Variant::B: return "B";
    case Variant::C: return "C";
    case Variant::D: return "D";
    case Variant::E: return "E";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "A" || name == "a") return Variant::A;
  if (name == "B" || name == "b") return Variant::B;
  if (name == "C" || name == "c") return Variant::C;
  if (name == "D" || name == "d") return Variant::D;
  if (name == "E" || name == "e") return Variant::E;
  throw std::invalid_argument("unknown head variant '" + name + "'");
}

HeadSpec HeadSpec::normalized() const {
  HeadSpec s = *this;
  if (s.variant == Variant::B) s.n_c = 1;
  // The shared flag only distinguishes architectures when several embeds
  // could exist (variants A and E with n_c > 1); canonicalize elsewhere so
  // equivalent specs compare equal.
  switch (s.variant) {
    case Variant::A:
    case Variant::E:
      if (s.n_c == 1) s.shared_embed = true;
      break;
    case Variant::B:
    case Variant::D:
      s.shared_embed = true;
      break;
    case Variant::C:
      s.shared_embed = false;
      break;
  }
  return s;
}

void HeadSpec::validate() const {
  if (n_c < 1) throw std::invalid_argument("head: n_c must be >= 1, got " + std::to_string(n_c));
  if (variant == Variant::B && n_c != 1) {
    throw std::invalid_argument("head: variant B uses a single branch; normalize the spec first");
  }
  if (c_total < 1 || c_total % n_c != 0) {
    throw std::invalid_argument("head: c_total " + std::to_string(c_total) +
                                " is not divisible into " + std::to_string(n_c) + " channel groups");
  }
  if (embed_dim < 1) throw std::invalid_argument("head: embed_dim must be positive");
  if (n_id < 1) throw std::invalid_argument("head: n_id must be positive");
  if (part_stripes < 0) throw std::invalid_argument("head: part_stripes must be non-negative");
}

int64_t head_param_count(const HeadSpec& raw) {
  const HeadSpec s = raw.normalized();
  const int64_t d = s.embed_dim, nid = s.n_id, nc = s.n_c;
  const int64_t cg = s.c_group(), c = s.c_total;
  auto linear_count = [](int64_t out, int64_t in) { return out * in + out; };

  int64_t count = 0;
  switch (s.variant) {
    case Variant::A:
    case Variant::B: {
      const int64_t n_embeds = s.shared_embed ? 1 : nc;
      count += n_embeds * (linear_count(d, cg) + 2 * d);
      count += nc * linear_count(nid, d);
      break;
    }
    case Variant::C:
      count += nc * linear_count(d, cg) + 2 * (nc * d);
      count += linear_count(nid, nc * d);
      break;
    case Variant::D:
      count += linear_count(d, c) + 2 * d;
      count += nc * linear_count(nid, d);
      break;
    case Variant::E: {
      const int64_t n_embeds = s.shared_embed ? 1 : nc;
      count += n_embeds * (linear_count(d, c) + 2 * d);
      count += nc * linear_count(nid, d);
      break;
    }
  }
  if (s.part_stripes > 0) {
    count += linear_count(d, c) + 2 * d;
    count += s.part_stripes * linear_count(nid, d);
  }
  return count;
}

std::vector<Tensor> slice_channel_groups(const Tensor& features, int n_c) {
  if (features.rank() != 2) {
    throw ShapeError("slice_channel_groups: features must be B x C, got " + features.shape_str());
  }
  const int b = features.dim(0), c = features.dim(1);
  if (n_c < 1 || c % n_c != 0) {
    throw ShapeError("slice_channel_groups: C=" + std::to_string(c) + " is not divisible by n_c=" +
                     std::to_string(n_c));
  }
  const int cg = c / n_c;
  std::vector<Tensor> groups;
  groups.reserve(static_cast<size_t>(n_c));
  for (int i = 0; i < n_c; ++i) {
    Tensor g({b, cg});
    for (int r = 0; r < b; ++r) {
      for (int j = 0; j < cg; ++j) g(r, j) = features(r, i * cg + j);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

Tensor concat_columns(const std::vector<Tensor>& parts) {
  std::vector<int> all(parts.size());
  for (size_t i = 0; i < parts.size(); ++i) all[i] = static_cast<int>(i);
  return concat_columns_subset(parts, all);
}

Tensor concat_columns_subset(const std::vector<Tensor>& parts, const std::vector<int>& indices) {
  if (indices.empty()) throw ShapeError("concat_columns: empty selection");
  const int b = parts[static_cast<size_t>(indices[0])].dim(0);
  int total = 0;
  for (int idx : indices) {
    if (idx < 0 || idx >= static_cast<int>(parts.size())) {
      throw std::out_of_range("concat_columns: part index " + std::to_string(idx) + " out of range");
    }
    const Tensor& p = parts[static_cast<size_t>(idx)];
    if (p.rank() != 2 || p.dim(0) != b) throw ShapeError("concat_columns: parts must share the batch extent");
    total += p.dim(1);
  }
  Tensor out({b, total});
  int col = 0;
  for (int idx : indices) {
    const Tensor& p = parts[static_cast<size_t>(idx)];
    const int w = p.dim(1);
    for (int r = 0; r < b; ++r) {
      for (int j = 0; j < w; ++j) out(r, col + j) = p(r, j);
    }
    col += w;
  }
  return out;
}

HeadLossResult head_loss(const std::vector<Tensor>& branch_logits, const std::vector<int>& labels) {
  if (branch_logits.empty()) throw std::invalid_argument("head_loss: at least one branch required");
  HeadLossResult r;
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  for (const Tensor& logits : branch_logits) {
    SoftmaxCEResult ce = softmax_cross_entropy(logits, labels);
    double mean = 0.0;
    for (double v : ce.per_sample_loss.data) mean += v;
    mean *= inv_b;
    r.per_branch.push_back(mean);
    r.total += mean;
    for (double& v : ce.grad_logits.data) v *= inv_b;
    r.grad_logits.push_back(std::move(ce.grad_logits));
  }
  return r;
}

Head::Head(const HeadSpec& spec, Rng& rng) : spec_(spec.normalized()) {
  spec_.validate();
  const int nc = spec_.n_c, d = spec_.embed_dim, c = spec_.c_total, cg = spec_.c_group();

  switch (spec_.variant) {
    case Variant::A:
    case Variant::B:
      n_branches_ = nc;
      n_embeds_ = spec_.shared_embed ? 1 : nc;
      n_groups_ = nc;
      for (int i = 0; i < n_embeds_; ++i) {
        embeds_.emplace_back().init(d, cg, rng);
        bns_.emplace_back().init(d);
      }
      for (int i = 0; i < nc; ++i) classifiers_.emplace_back().init(spec_.n_id, d, rng);
      caches_.resize(static_cast<size_t>(nc));
      break;
    case Variant::C:
      n_branches_ = 1;
      n_embeds_ = nc;
      n_groups_ = nc;
      for (int i = 0; i < nc; ++i) embeds_.emplace_back().init(d, cg, rng);
      bns_.emplace_back().init(nc * d);
      classifiers_.emplace_back().init(spec_.n_id, nc * d, rng);
      caches_.resize(static_cast<size_t>(nc));
      break;
    case Variant::D:
      n_branches_ = nc;
      n_embeds_ = 1;
      n_groups_ = 1;
      embeds_.emplace_back().init(d, c, rng);
      bns_.emplace_back().init(d);
      for (int i = 0; i < nc; ++i) classifiers_.emplace_back().init(spec_.n_id, d, rng);
      caches_.resize(1);
      break;
    case Variant::E:
      n_branches_ = nc;
      n_embeds_ = spec_.shared_embed ? 1 : nc;
      n_groups_ = nc;
      for (int i = 0; i < n_embeds_; ++i) {
        embeds_.emplace_back().init(d, c, rng);
        bns_.emplace_back().init(d);
      }
      for (int i = 0; i < nc; ++i) classifiers_.emplace_back().init(spec_.n_id, d, rng);
      caches_.resize(static_cast<size_t>(nc));
      break;
  }

  if (spec_.part_stripes > 0) {
    part_embed_.init(d, c, rng);
    part_bn_.init(d);
    for (int s = 0; s < spec_.part_stripes; ++s) part_classifiers_.emplace_back().init(spec_.n_id, d, rng);
    part_caches_.resize(static_cast<size_t>(spec_.part_stripes));
  }
}

Head::Forward Head::forward(const Tensor& features, const Tensor* feature_maps, Mode mode) {
  if (features.rank() != 2 || features.dim(1) != spec_.c_total) {
    throw ShapeError("head: expected B x " + std::to_string(spec_.c_total) + " features, got " +
                     features.shape_str());
  }
  const bool train = mode == Mode::kTrain;
  const int nc = spec_.n_c, d = spec_.embed_dim;
  Forward out;
  out.descriptors.dim = d;

  auto run_bn = [&](BatchNormParams& bn, const Tensor& z, BatchNormCache& cache) {
    if (train) {
      return batchnorm1d_forward_train(z, bn.gamma.value, bn.beta.value, bn.running_mean,
                                       bn.running_var, bn.momentum, bn.eps, cache);
    }
    return batchnorm1d_forward_eval(z, bn.gamma.value, bn.beta.value, bn.running_mean,
                                    bn.running_var, bn.eps);
  };

  switch (spec_.variant) {
    case Variant::A:
    case Variant::B:
    case Variant::E: {
      const bool grouped = spec_.variant != Variant::E;
      std::vector<Tensor> groups;
      if (grouped) groups = slice_channel_groups(features, nc);
      for (int i = 0; i < nc; ++i) {
        const Tensor& in = grouped ? groups[static_cast<size_t>(i)] : features;
        LinearParams& e = embeds_[static_cast<size_t>(embed_index(i))];
        BatchNormParams& bn = bns_[static_cast<size_t>(embed_index(i))];
        BranchCache& cc = caches_[static_cast<size_t>(i)];
        Tensor z = linear_forward(in, e.weight.value, e.bias.value);
        Tensor h = run_bn(bn, z, cc.bn);
        Tensor dsc = relu(h);
        Tensor logits = linear_forward(dsc, classifiers_[static_cast<size_t>(i)].weight.value,
                                       classifiers_[static_cast<size_t>(i)].bias.value);
        if (train) {
          cc.embed_in = in;
          cc.relu_in = std::move(h);
          cc.cls_in = dsc;
        }
        out.branch_logits.push_back(std::move(logits));
        out.descriptors.groups.push_back(std::move(dsc));
      }
      break;
    }
    case Variant::C: {
      std::vector<Tensor> groups = slice_channel_groups(features, nc);
      std::vector<Tensor> zs;
      for (int i = 0; i < nc; ++i) {
        LinearParams& e = embeds_[static_cast<size_t>(i)];
        if (train) caches_[static_cast<size_t>(i)].embed_in = groups[static_cast<size_t>(i)];
        zs.push_back(linear_forward(groups[static_cast<size_t>(i)], e.weight.value, e.bias.value));
      }
      Tensor zcat = concat_columns(zs);
      Tensor h = run_bn(bns_[0], zcat, caches_[0].bn);
      Tensor dsc = relu(h);
      Tensor logits = linear_forward(dsc, classifiers_[0].weight.value, classifiers_[0].bias.value);
      if (train) {
        caches_[0].relu_in = std::move(h);
        caches_[0].cls_in = dsc;
      }
      out.branch_logits.push_back(std::move(logits));
      // Transformed groups are the column slices of the post-ReLU feature.
      out.descriptors.groups = slice_channel_groups(dsc, nc);
      break;
    }
    case Variant::D: {
      LinearParams& e = embeds_[0];
      BranchCache& cc = caches_[0];
      Tensor z = linear_forward(features, e.weight.value, e.bias.value);
      Tensor h = run_bn(bns_[0], z, cc.bn);
      Tensor dsc = relu(h);
      for (int i = 0; i < nc; ++i) {
        out.branch_logits.push_back(linear_forward(dsc, classifiers_[static_cast<size_t>(i)].weight.value,
                                                   classifiers_[static_cast<size_t>(i)].bias.value));
      }
      if (train) {
        cc.embed_in = features;
        cc.relu_in = std::move(h);
        cc.cls_in = dsc;
      }
      out.descriptors.groups.push_back(std::move(dsc));
      break;
    }
  }

  if (spec_.part_stripes > 0) {
    if (feature_maps == nullptr) {
      throw std::invalid_argument("head: stripe head enabled but no feature maps supplied");
    }
    const int h = feature_maps->dim(2), w = feature_maps->dim(3);
    const int p = spec_.part_stripes;
    if (h % p != 0) {
      throw ShapeError("head: feature map height " + std::to_string(h) + " is not divisible into " +
                       std::to_string(p) + " stripes");
    }
    maps_h_ = h;
    maps_w_ = w;
    const int band = h / p;
    for (int s = 0; s < p; ++s) {
      BranchCache& cc = part_caches_[static_cast<size_t>(s)];
      Tensor f = stripe_avg_pool(*feature_maps, s * band, (s + 1) * band);
      Tensor z = linear_forward(f, part_embed_.weight.value, part_embed_.bias.value);
      Tensor hh = run_bn(part_bn_, z, cc.bn);
      Tensor dsc = relu(hh);
      Tensor logits = linear_forward(dsc, part_classifiers_[static_cast<size_t>(s)].weight.value,
                                     part_classifiers_[static_cast<size_t>(s)].bias.value);
      if (train) {
        cc.embed_in = std::move(f);
        cc.relu_in = std::move(hh);
        cc.cls_in = dsc;
      }
      out.branch_logits.push_back(std::move(logits));
      out.descriptors.stripes.push_back(std::move(dsc));
    }
  }

  has_cache_ = train;
  return out;
}

namespace {

void acc_into(ParamTensor& p, const Tensor& g) {
  for (size_t i = 0; i < g.data.size(); ++i) p.grad.data[i] += g.data[i];
}

void add_tensors(Tensor& dst, const Tensor& src) {
  for (size_t i = 0; i < src.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

Tensor Head::backward(const std::vector<Tensor>& grad_logits, const std::vector<Tensor>& grad_groups,
                      const std::vector<Tensor>& grad_stripes, Tensor* grad_feature_maps) {
  if (!has_cache_) throw std::logic_error("head: backward called before train-mode forward");
  const int nc = spec_.n_c, d = spec_.embed_dim, cg = spec_.c_group();
  const int b = caches_[0].bn.x_hat.dim(0);
  Tensor grad_f({b, spec_.c_total});

  auto logits_grad = [&](int branch) -> const Tensor* {
    if (branch < static_cast<int>(grad_logits.size()) && grad_logits[static_cast<size_t>(branch)].numel() > 0) {
      return &grad_logits[static_cast<size_t>(branch)];
    }
    return nullptr;
  };
  auto group_grad = [&](int g) -> const Tensor* {
    if (g < static_cast<int>(grad_groups.size()) && grad_groups[static_cast<size_t>(g)].numel() > 0) {
      return &grad_groups[static_cast<size_t>(g)];
    }
    return nullptr;
  };

  switch (spec_.variant) {
    case Variant::A:
    case Variant::B:
    case Variant::E: {
      const bool grouped = spec_.variant != Variant::E;
      for (int i = 0; i < nc; ++i) {
        BranchCache& cc = caches_[static_cast<size_t>(i)];
        LinearParams& cls = classifiers_[static_cast<size_t>(i)];
        LinearParams& e = embeds_[static_cast<size_t>(embed_index(i))];
        BatchNormParams& bn = bns_[static_cast<size_t>(embed_index(i))];

        Tensor g_d({b, d});
        if (const Tensor* gl = logits_grad(i)) {
          LinearGrads cg_ = linear_backward(*gl, cc.cls_in, cls.weight.value);
          acc_into(cls.weight, cg_.grad_weight);
          acc_into(cls.bias, cg_.grad_bias);
          g_d = std::move(cg_.grad_input);
        }
        if (const Tensor* gg = group_grad(i)) add_tensors(g_d, *gg);

        Tensor g_h = relu_backward(g_d, cc.relu_in);
        BatchNormGrads bng = batchnorm1d_backward(g_h, cc.bn, bn.gamma.value);
        acc_into(bn.gamma, bng.grad_gamma);
        acc_into(bn.beta, bng.grad_beta);
        LinearGrads lg = linear_backward(bng.grad_input, cc.embed_in, e.weight.value);
        acc_into(e.weight, lg.grad_weight);
        acc_into(e.bias, lg.grad_bias);
        if (grouped) {
          for (int r = 0; r < b; ++r) {
            for (int j = 0; j < cg; ++j) grad_f(r, i * cg + j) += lg.grad_input(r, j);
          }
        } else {
          add_tensors(grad_f, lg.grad_input);
        }
      }
      break;
    }
    case Variant::C: {
      Tensor g_d({b, nc * d});
      if (const Tensor* gl = logits_grad(0)) {
        LinearGrads cg_ = linear_backward(*gl, caches_[0].cls_in, classifiers_[0].weight.value);
        acc_into(classifiers_[0].weight, cg_.grad_weight);
        acc_into(classifiers_[0].bias, cg_.grad_bias);
        g_d = std::move(cg_.grad_input);
      }
      for (int i = 0; i < nc; ++i) {
        if (const Tensor* gg = group_grad(i)) {
          for (int r = 0; r < b; ++r) {
            for (int j = 0; j < d; ++j) g_d(r, i * d + j) += (*gg)(r, j);
          }
        }
      }
      Tensor g_h = relu_backward(g_d, caches_[0].relu_in);
      BatchNormGrads bng = batchnorm1d_backward(g_h, caches_[0].bn, bns_[0].gamma.value);
      acc_into(bns_[0].gamma, bng.grad_gamma);
      acc_into(bns_[0].beta, bng.grad_beta);
      for (int i = 0; i < nc; ++i) {
        Tensor g_z({b, d});
        for (int r = 0; r < b; ++r) {
          for (int j = 0; j < d; ++j) g_z(r, j) = bng.grad_input(r, i * d + j);
        }
        LinearParams& e = embeds_[static_cast<size_t>(i)];
        LinearGrads lg = linear_backward(g_z, caches_[static_cast<size_t>(i)].embed_in, e.weight.value);
        acc_into(e.weight, lg.grad_weight);
        acc_into(e.bias, lg.grad_bias);
        for (int r = 0; r < b; ++r) {
          for (int j = 0; j < cg; ++j) grad_f(r, i * cg + j) += lg.grad_input(r, j);
        }
      }
      break;
    }
    case Variant::D: {
      BranchCache& cc = caches_[0];
      Tensor g_d({b, d});
      for (int i = 0; i < nc; ++i) {
        if (const Tensor* gl = logits_grad(i)) {
          LinearParams& cls = classifiers_[static_cast<size_t>(i)];
          LinearGrads cg_ = linear_backward(*gl, cc.cls_in, cls.weight.value);
          acc_into(cls.weight, cg_.grad_weight);
          acc_into(cls.bias, cg_.grad_bias);
          add_tensors(g_d, cg_.grad_input);
        }
      }
      if (const Tensor* gg = group_grad(0)) add_tensors(g_d, *gg);
      Tensor g_h = relu_backward(g_d, cc.relu_in);
      BatchNormGrads bng = batchnorm1d_backward(g_h, cc.bn, bns_[0].gamma.value);
      acc_into(bns_[0].gamma, bng.grad_gamma);
      acc_into(bns_[0].beta, bng.grad_beta);
      LinearGrads lg = linear_backward(bng.grad_input, cc.embed_in, embeds_[0].weight.value);
      acc_into(embeds_[0].weight, lg.grad_weight);
      acc_into(embeds_[0].bias, lg.grad_bias);
      add_tensors(grad_f, lg.grad_input);
      break;
    }
  }

  if (spec_.part_stripes > 0) {
    if (grad_feature_maps == nullptr) {
      throw std::invalid_argument("head: stripe head enabled but no grad_feature_maps supplied");
    }
    const int p = spec_.part_stripes;
    const int band = maps_h_ / p;
    for (int s = 0; s < p; ++s) {
      BranchCache& cc = part_caches_[static_cast<size_t>(s)];
      Tensor g_d({b, d});
      if (const Tensor* gl = logits_grad(n_branches_ + s)) {
        LinearParams& cls = part_classifiers_[static_cast<size_t>(s)];
        LinearGrads cg_ = linear_backward(*gl, cc.cls_in, cls.weight.value);
        acc_into(cls.weight, cg_.grad_weight);
        acc_into(cls.bias, cg_.grad_bias);
        g_d = std::move(cg_.grad_input);
      }
      if (s < static_cast<int>(grad_stripes.size()) && grad_stripes[static_cast<size_t>(s)].numel() > 0) {
        add_tensors(g_d, grad_stripes[static_cast<size_t>(s)]);
      }
      Tensor g_h = relu_backward(g_d, cc.relu_in);
      BatchNormGrads bng = batchnorm1d_backward(g_h, cc.bn, part_bn_.gamma.value);
      acc_into(part_bn_.gamma, bng.grad_gamma);
      acc_into(part_bn_.beta, bng.grad_beta);
      LinearGrads lg = linear_backward(bng.grad_input, cc.embed_in, part_embed_.weight.value);
      acc_into(part_embed_.weight, lg.grad_weight);
      acc_into(part_embed_.bias, lg.grad_bias);
      Tensor g_maps = stripe_avg_pool_backward(lg.grad_input, maps_h_, maps_w_, s * band, (s + 1) * band);
      add_tensors(*grad_feature_maps, g_maps);
    }
  }

  return grad_f;
}

void Head::collect_params(std::vector<ParamTensor*>& out) {
  for (LinearParams& e : embeds_) {
    for (ParamTensor* p : e.params()) out.push_back(p);
  }
  for (BatchNormParams& bn : bns_) {
    for (ParamTensor* p : bn.params()) out.push_back(p);
  }
  for (LinearParams& c : classifiers_) {
    for (ParamTensor* p : c.params()) out.push_back(p);
  }
  if (spec_.part_stripes > 0) {
    for (ParamTensor* p : part_embed_.params()) out.push_back(p);
    for (ParamTensor* p : part_bn_.params()) out.push_back(p);
    for (LinearParams& c : part_classifiers_) {
      for (ParamTensor* p : c.params()) out.push_back(p);
    }
  }
}

void Head::collect_named_state(const std::string& prefix,
                               std::vector<std::pair<std::string, Tensor*>>& out) {
  for (size_t i = 0; i < embeds_.size(); ++i) {
    out.emplace_back(prefix + "embed" + std::to_string(i) + ".weight", &embeds_[i].weight.value);
    out.emplace_back(prefix + "embed" + std::to_string(i) + ".bias", &embeds_[i].bias.value);
  }
  for (size_t i = 0; i < bns_.size(); ++i) {
    const std::string base = prefix + "bn" + std::to_string(i) + ".";
    out.emplace_back(base + "gamma", &bns_[i].gamma.value);
    out.emplace_back(base + "beta", &bns_[i].beta.value);
    out.emplace_back(base + "running_mean", &bns_[i].running_mean);
    out.emplace_back(base + "running_var", &bns_[i].running_var);
  }
  for (size_t i = 0; i < classifiers_.size(); ++i) {
    out.emplace_back(prefix + "cls" + std::to_string(i) + ".weight", &classifiers_[i].weight.value);
    out.emplace_back(prefix + "cls" + std::to_string(i) + ".bias", &classifiers_[i].bias.value);
  }
  if (spec_.part_stripes > 0) {
    out.emplace_back(prefix + "part.embed.weight", &part_embed_.weight.value);
    out.emplace_back(prefix + "part.embed.bias", &part_embed_.bias.value);
    out.emplace_back(prefix + "part.bn.gamma", &part_bn_.gamma.value);
    out.emplace_back(prefix + "part.bn.beta", &part_bn_.beta.value);
    out.emplace_back(prefix + "part.bn.running_mean", &part_bn_.running_mean);
    out.emplace_back(prefix + "part.bn.running_var", &part_bn_.running_var);
    for (size_t i = 0; i < part_classifiers_.size(); ++i) {
      out.emplace_back(prefix + "part.cls" + std::to_string(i) + ".weight", &part_classifiers_[i].weight.value);
      out.emplace_back(prefix + "part.cls" + std::to_string(i) + ".bias", &part_classifiers_[i].bias.value);
    }
  }
}

}  // namespace cgreid
