#pragma once

// Internal JSON (de)serialization helpers. Parsing is strict: every object
// is checked against its set of allowed keys so config typos fail loudly.

#include <json.hpp>

#include <initializer_list>
#include <string>

#include "cgreid/config.hpp"

namespace cgreid::json_util {

using nlohmann::json;

void check_keys(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed);

json to_json(const Nuisance& n);
Nuisance nuisance_from_json(const json& j);

json to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const json& j);

json to_json(const BackboneSpec& s);
BackboneSpec backbone_spec_from_json(const json& j);

json to_json(const HeadSpec& s);
HeadSpec head_spec_from_json(const json& j);

json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const json& j);

json to_json(const TrainSpec& s);
TrainSpec train_spec_from_json(const json& j);

}  // namespace cgreid::json_util
