#include "cgreid/checkpoint.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "binio.hpp"
#include "cgreid/errors.hpp"
#include "json_util.hpp"

namespace cgreid {

namespace {

constexpr char kMagic[8] = {'C', 'G', 'R', 'E', 'I', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  binio::write_u32(os, kVersion);

  const std::string spec_json = json_util::to_json(model.spec()).dump();
  binio::write_u32(os, static_cast<uint32_t>(spec_json.size()));
  os.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));

  const auto named = model.named_state();
  binio::write_u32(os, static_cast<uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    binio::write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::write_u32(os, static_cast<uint32_t>(tensor->rank()));
    for (int e : tensor->shape) binio::write_u64(os, static_cast<uint64_t>(e));
    for (double v : tensor->data) binio::write_f64(os, v);
  }
  if (!os) throw FormatError("failed writing " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);

  char magic[8];
  binio::read_exact(is, magic, sizeof(magic), "checkpoint magic");
  if (std::string(magic, 8) != std::string(kMagic, 8)) {
    throw FormatError(path + " is not a checkpoint (bad magic)");
  }
  const uint32_t version = binio::read_u32(is, "checkpoint version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }

  const uint32_t json_len = binio::read_u32(is, "spec length");
  std::string spec_json(json_len, '\0');
  binio::read_exact(is, spec_json.data(), json_len, "model spec");
  ModelSpec spec;
  try {
    spec = json_util::model_spec_from_json(nlohmann::json::parse(spec_json));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint spec echo: " + std::string(e.what()));
  }

  auto model = std::make_unique<Model>(spec, 0);
  std::map<std::string, Tensor*> by_name;
  for (auto& [name, tensor] : model->named_state()) by_name[name] = tensor;

  const uint32_t n_tensors = binio::read_u32(is, "tensor count");
  if (n_tensors != by_name.size()) {
    throw FormatError("checkpoint holds " + std::to_string(n_tensors) + " tensors, model expects " +
                      std::to_string(by_name.size()));
  }
  for (uint32_t t = 0; t < n_tensors; ++t) {
    const uint32_t name_len = binio::read_u32(is, "tensor name length");
    std::string name(name_len, '\0');
    binio::read_exact(is, name.data(), name_len, "tensor name");
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint tensor '" + name + "' is not part of the model");
    const uint32_t rank = binio::read_u32(is, "tensor rank");
    std::vector<int> shape(rank);
    for (uint32_t r = 0; r < rank; ++r) shape[r] = static_cast<int>(binio::read_u64(is, "tensor extent"));
    if (shape != it->second->shape) {
      throw FormatError("checkpoint tensor '" + name + "' shape mismatch");
    }
    for (double& v : it->second->data) v = binio::read_f64(is, "tensor data");
  }
  return model;
}

}  // namespace cgreid
