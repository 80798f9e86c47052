#include "json_util.hpp"

#include <set>

#include "cgreid/errors.hpp"

namespace cgreid::json_util {

void check_keys(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected a JSON object");
  std::set<std::string> ok;
  for (const char* k : allowed) ok.insert(k);
  for (const auto& item : j.items()) {
    if (ok.find(item.key()) == ok.end()) {
      throw ConfigError(ctx + ": unknown key '" + item.key() + "'");
    }
  }
}

json to_json(const Nuisance& n) {
  return json{{"shift_px", n.shift_px},
              {"brightness_jitter", n.brightness_jitter},
              {"noise_sigma", n.noise_sigma},
              {"occlusion_prob", n.occlusion_prob}};
}

Nuisance nuisance_from_json(const json& j) {
  check_keys(j, "data.nuisance", {"shift_px", "brightness_jitter", "noise_sigma", "occlusion_prob"});
  Nuisance n;
  n.shift_px = j.value("shift_px", n.shift_px);
  n.brightness_jitter = j.value("brightness_jitter", n.brightness_jitter);
  n.noise_sigma = j.value("noise_sigma", n.noise_sigma);
  n.occlusion_prob = j.value("occlusion_prob", n.occlusion_prob);
  return n;
}

json to_json(const SynthSpec& s) {
  return json{{"n_train_ids", s.n_train_ids},
              {"n_test_ids", s.n_test_ids},
              {"images_per_id", s.images_per_id},
              {"test_images_per_id", s.test_images_per_id},
              {"height", s.height},
              {"width", s.width},
              {"nuisance", to_json(s.nuisance)},
              {"camera_tint", s.camera_tint},
              {"label_corruption", s.label_corruption},
              {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  check_keys(j, "data",
             {"n_train_ids", "n_test_ids", "images_per_id", "test_images_per_id", "height", "width",
              "nuisance", "camera_tint", "label_corruption", "seed"});
  SynthSpec s;
  s.n_train_ids = j.value("n_train_ids", s.n_train_ids);
  s.n_test_ids = j.value("n_test_ids", s.n_test_ids);
  s.images_per_id = j.value("images_per_id", s.images_per_id);
  s.test_images_per_id = j.value("test_images_per_id", s.test_images_per_id);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  if (j.contains("nuisance")) s.nuisance = nuisance_from_json(j.at("nuisance"));
  s.camera_tint = j.value("camera_tint", s.camera_tint);
  s.label_corruption = j.value("label_corruption", s.label_corruption);
  s.seed = j.value("seed", s.seed);
  return s;
}

json to_json(const BackboneSpec& s) {
  return json{{"stage_channels", s.stage_channels},
              {"stage_strides", s.stage_strides},
              {"last_stride", s.last_stride},
              {"kernel", s.kernel},
              {"in_channels", s.in_channels}};
}

BackboneSpec backbone_spec_from_json(const json& j) {
  check_keys(j, "backbone", {"stage_channels", "stage_strides", "last_stride", "kernel", "in_channels"});
  BackboneSpec s;
  s.last_stride = j.value("last_stride", s.last_stride);
  if (j.contains("stage_channels")) s.stage_channels = j.at("stage_channels").get<std::vector<int>>();
  if (j.contains("stage_strides")) {
    s.stage_strides = j.at("stage_strides").get<std::vector<int>>();
  } else {
    s.stage_strides.assign(s.stage_channels.size(), 2);
    s.stage_strides.back() = s.last_stride;
  }
  s.kernel = j.value("kernel", s.kernel);
  s.in_channels = j.value("in_channels", s.in_channels);
  return s;
}

json to_json(const HeadSpec& s) {
  return json{{"variant", variant_name(s.variant)},
              {"n_c", s.n_c},
              {"c_total", s.c_total},
              {"embed_dim", s.embed_dim},
              {"n_id", s.n_id},
              {"shared_embed", s.shared_embed},
              {"part_stripes", s.part_stripes}};
}

HeadSpec head_spec_from_json(const json& j) {
  check_keys(j, "head", {"variant", "n_c", "c_total", "embed_dim", "n_id", "shared_embed", "part_stripes"});
  HeadSpec s;
  if (j.contains("variant")) s.variant = variant_from_name(j.at("variant").get<std::string>());
  s.n_c = j.value("n_c", s.n_c);
  s.c_total = j.value("c_total", s.c_total);
  s.embed_dim = j.value("embed_dim", s.embed_dim);
  s.n_id = j.value("n_id", s.n_id);
  s.shared_embed = j.value("shared_embed", s.shared_embed);
  s.part_stripes = j.value("part_stripes", s.part_stripes);
  return s;
}

json to_json(const ModelSpec& s) {
  return json{{"backbone", to_json(s.backbone)}, {"head", to_json(s.head)}};
}

ModelSpec model_spec_from_json(const json& j) {
  check_keys(j, "model", {"backbone", "head"});
  ModelSpec s;
  if (j.contains("backbone")) s.backbone = backbone_spec_from_json(j.at("backbone"));
  if (j.contains("head")) s.head = head_spec_from_json(j.at("head"));
  return s;
}

json to_json(const TrainSpec& s) {
  return json{{"epochs", s.epochs},
              {"lr", s.lr},
              {"lr_decay_factor", s.lr_decay_factor},
              {"lr_milestones", s.lr_milestones},
              {"momentum", s.momentum},
              {"weight_decay", s.weight_decay},
              {"p", s.pk.p},
              {"k", s.pk.k},
              {"loss_mode", loss_mode_name(s.loss_mode)},
              {"augment", s.augment},
              {"seed", s.seed},
              {"eval_every", s.eval_every},
              {"val_fraction", s.val_fraction},
              {"triplet_margin", s.triplet.margin},
              {"triplet_soft_margin", s.triplet.soft_margin}};
}

TrainSpec train_spec_from_json(const json& j) {
  check_keys(j, "train",
             {"epochs", "lr", "lr_decay_factor", "lr_milestones", "momentum", "weight_decay", "p", "k",
              "loss_mode", "augment", "seed", "eval_every", "val_fraction", "triplet_margin",
              "triplet_soft_margin"});
  TrainSpec s;
  s.epochs = j.value("epochs", s.epochs);
  s.lr = j.value("lr", s.lr);
  s.lr_decay_factor = j.value("lr_decay_factor", s.lr_decay_factor);
  if (j.contains("lr_milestones")) s.lr_milestones = j.at("lr_milestones").get<std::vector<int>>();
  s.momentum = j.value("momentum", s.momentum);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.pk.p = j.value("p", s.pk.p);
  s.pk.k = j.value("k", s.pk.k);
  if (j.contains("loss_mode")) s.loss_mode = loss_mode_from_name(j.at("loss_mode").get<std::string>());
  s.augment = j.value("augment", s.augment);
  s.seed = j.value("seed", s.seed);
  s.eval_every = j.value("eval_every", s.eval_every);
  s.val_fraction = j.value("val_fraction", s.val_fraction);
  s.triplet.margin = j.value("triplet_margin", s.triplet.margin);
  s.triplet.soft_margin = j.value("triplet_soft_margin", s.triplet.soft_margin);
  return s;
}

}  // namespace cgreid::json_util
