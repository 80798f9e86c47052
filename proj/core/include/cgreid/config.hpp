#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgreid/evalmetrics.hpp"
#include "cgreid/trainer.hpp"

namespace cgreid {

// Unified run configuration covering every pipeline stage. Parsed strictly:
// unknown keys are rejected with a ConfigError naming the key.
struct RunConfig {
  uint64_t seed = 1;
  SynthSpec data;
  BackboneSpec backbone;
  HeadSpec head;
  TrainSpec train;
  std::vector<InferenceSetting> eval_settings{InferenceSetting{}};
  int eval_k_max = 20;
  bool plurality_voting = false;
  CompareSpec compare;

  // Head n_id filled from the data spec, seeds threaded through.
  ModelSpec model_spec() const;
  void validate() const;
};

RunConfig parse_config_json(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& cfg);

}  // namespace cgreid
