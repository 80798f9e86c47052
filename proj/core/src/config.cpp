#include "cgreid/config.hpp"

#include <fstream>

#include <json.hpp>

#include "cgreid/errors.hpp"
#include "json_util.hpp"

namespace cgreid {

ModelSpec RunConfig::model_spec() const {
  ModelSpec ms;
  ms.backbone = backbone;
  ms.head = head;
  ms.head.c_total = backbone.out_channels();
  ms.head.n_id = data.n_train_ids;
  return ms;
}

void RunConfig::validate() const {
  data.validate();
  model_spec().validate();
  train.validate();
  if (eval_k_max < 1) throw ConfigError("eval: k_max must be >= 1");
  if (eval_settings.empty()) throw ConfigError("eval: at least one setting required");
}

namespace {

using nlohmann::json;

CompareSpec compare_from_json(const json& j, const TrainSpec& default_budget) {
  json_util::check_keys(j, "compare", {"variants", "n_c", "shared", "seeds", "budget", "jobs", "k_max"});
  CompareSpec c;
  c.budget = default_budget;
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_name(v.get<std::string>()));
  }
  if (j.contains("n_c")) c.n_c_list = j.at("n_c").get<std::vector<int>>();
  if (j.contains("shared")) c.shared_flags = j.at("shared").get<std::vector<bool>>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (j.contains("budget")) c.budget = json_util::train_spec_from_json(j.at("budget"));
  c.jobs = j.value("jobs", c.jobs);
  c.k_max = j.value("k_max", c.k_max);
  return c;
}

json compare_to_json(const CompareSpec& c) {
  json j;
  json variants = json::array();
  for (Variant v : c.variants) variants.push_back(variant_name(v));
  j["variants"] = variants;
  j["n_c"] = c.n_c_list;
  j["shared"] = c.shared_flags;
  j["seeds"] = c.seeds;
  j["budget"] = json_util::to_json(c.budget);
  j["jobs"] = c.jobs;
  j["k_max"] = c.k_max;
  return j;
}

}  // namespace

RunConfig parse_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  json_util::check_keys(j, "config",
                        {"schema_version", "seed", "data", "backbone", "head", "train", "eval", "compare"});
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != 1) {
    throw ConfigError("config: unsupported schema_version");
  }

  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("data")) cfg.data = json_util::synth_spec_from_json(j.at("data"));
  if (!j.contains("data") || !j.at("data").contains("seed")) {
    cfg.data.seed = derive_seed(cfg.seed, {seed_tag::data});
  }
  if (j.contains("backbone")) cfg.backbone = json_util::backbone_spec_from_json(j.at("backbone"));
  if (j.contains("head")) {
    cfg.head = json_util::head_spec_from_json(j.at("head"));
    if (j.at("head").contains("c_total") && cfg.head.c_total != cfg.backbone.out_channels()) {
      throw ConfigError("head.c_total must match the backbone output channels (" +
                        std::to_string(cfg.backbone.out_channels()) + ")");
    }
    if (j.at("head").contains("n_id") && cfg.head.n_id != cfg.data.n_train_ids) {
      throw ConfigError("head.n_id is derived from data.n_train_ids and cannot disagree");
    }
  }
  if (j.contains("train")) cfg.train = json_util::train_spec_from_json(j.at("train"));
  if (!j.contains("train") || !j.at("train").contains("seed")) cfg.train.seed = cfg.seed;

  if (j.contains("eval")) {
    json_util::check_keys(j.at("eval"), "eval", {"settings", "k_max", "plurality_voting"});
    if (j.at("eval").contains("settings")) {
      cfg.eval_settings.clear();
      for (const auto& s : j.at("eval").at("settings")) {
        cfg.eval_settings.push_back(InferenceSetting::parse(s.get<std::string>()));
      }
    }
    cfg.eval_k_max = j.at("eval").value("k_max", cfg.eval_k_max);
    cfg.plurality_voting = j.at("eval").value("plurality_voting", cfg.plurality_voting);
  }

  cfg.compare.budget = cfg.train;
  if (j.contains("compare")) cfg.compare = compare_from_json(j.at("compare"), cfg.train);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_config_json(text);
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = cfg.seed;
  j["data"] = json_util::to_json(cfg.data);
  j["backbone"] = json_util::to_json(cfg.backbone);
  j["head"] = json_util::to_json(cfg.head);
  // derived at model assembly time, not part of the user-facing config
  j["head"].erase("n_id");
  j["head"].erase("c_total");
  j["train"] = json_util::to_json(cfg.train);
  json settings = json::array();
  for (const InferenceSetting& s : cfg.eval_settings) settings.push_back(s.to_string());
  j["eval"] = json{{"settings", settings}, {"k_max", cfg.eval_k_max}, {"plurality_voting", cfg.plurality_voting}};
  j["compare"] = compare_to_json(cfg.compare);
  return j.dump(2);
}

}  // namespace cgreid
