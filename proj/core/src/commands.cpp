#include "cgreid/commands.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "binio.hpp"
#include "cgreid/checkpoint.hpp"
#include "cgreid/errors.hpp"

namespace cgreid {

void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  Dataset ds = generate_dataset(cfg.data);
  save_dataset(ds, out_dir);
}

TrainLog cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
  Dataset ds = load_dataset(data_dir);
  TrainResult result = train(cfg.model_spec(), ds, cfg.train);

  std::filesystem::create_directories(out_dir);
  save_checkpoint(*result.model, out_dir + "/checkpoint.bin");
  std::ofstream os(out_dir + "/train_log.jsonl");
  if (!os) throw FormatError("cannot write " + out_dir + "/train_log.jsonl");
  os << train_log_to_jsonl(result.log);
  return std::move(result.log);
}

std::vector<EvalReport> cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
                                 const std::vector<InferenceSetting>& settings, int k_max,
                                 bool plurality_voting) {
  std::unique_ptr<Model> model = load_checkpoint(checkpoint_path);
  Dataset ds = load_dataset(data_dir);
  std::vector<EvalReport> reports;
  reports.reserve(settings.size());
  for (const InferenceSetting& s : settings) {
    reports.push_back(evaluate_setting(*model, ds, s, k_max, plurality_voting));
  }
  return reports;
}

std::string cmd_compare_variants(const RunConfig& cfg, const std::string& data_dir,
                                 const std::string& out_path) {
  Dataset ds = load_dataset(data_dir);
  std::vector<GridCellResult> results = compare_variants(cfg.compare, cfg.model_spec(), ds);
  const std::string doc = grid_to_json(cfg.compare, results);
  std::ofstream os(out_path);
  if (!os) throw FormatError("cannot write " + out_path);
  os << doc << '\n';
  return doc;
}

namespace {

constexpr char kFeatureMagic[8] = {'C', 'G', 'R', 'E', 'I', 'D', 'F', 'T'};
constexpr uint32_t kFeatureVersion = 1;

const std::vector<Sample>& split_samples(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "query") return ds.query;
  if (split == "gallery") return ds.gallery;
  throw ConfigError("unknown split '" + split + "' (expected train, query, or gallery)");
}

}  // namespace

void write_feature_matrix(const Tensor& values, const RetrievalMeta& meta,
                          const std::string& setting, const std::string& path) {
  if (values.rank() != 2) throw ShapeError("feature matrix must be N x D");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kFeatureMagic, sizeof(kFeatureMagic));
  binio::write_u32(os, kFeatureVersion);
  binio::write_u32(os, static_cast<uint32_t>(values.dim(0)));
  binio::write_u32(os, static_cast<uint32_t>(values.dim(1)));
  for (double v : values.data) binio::write_f64(os, v);
  if (!os) throw FormatError("failed writing " + path);

  nlohmann::json side;
  side["schema_version"] = 1;
  side["setting"] = setting;
  side["count"] = values.dim(0);
  side["descriptor_dim"] = values.dim(1);
  side["identities"] = meta.identities;
  side["cameras"] = meta.cameras;
  std::ofstream js(path + ".json");
  if (!js) throw FormatError("cannot write " + path + ".json");
  js << side.dump(2) << '\n';
}

FeatureMatrix read_feature_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[8];
  binio::read_exact(is, magic, sizeof(magic), "feature magic");
  if (std::string(magic, 8) != std::string(kFeatureMagic, 8)) {
    throw FormatError(path + " is not a feature matrix (bad magic)");
  }
  if (binio::read_u32(is, "feature version") != kFeatureVersion) {
    throw FormatError("unsupported feature matrix version");
  }
  const int n = static_cast<int>(binio::read_u32(is, "feature count"));
  const int d = static_cast<int>(binio::read_u32(is, "feature dim"));
  FeatureMatrix fm;
  fm.values = Tensor({n, d});
  for (double& v : fm.values.data) v = binio::read_f64(is, "feature data");

  std::ifstream js(path + ".json");
  if (js) {
    nlohmann::json side;
    try {
      js >> side;
      fm.meta.identities = side.at("identities").get<std::vector<int>>();
      fm.meta.cameras = side.at("cameras").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("feature sidecar: " + std::string(e.what()));
    }
  }
  return fm;
}

void cmd_export_features(const std::string& checkpoint_path, const std::string& data_dir,
                         const std::string& split, const InferenceSetting& setting,
                         const std::string& out_path) {
  if (setting.kind == InferenceSetting::Kind::kVoting) {
    throw ConfigError("export-features: voting is a ranking rule, not a descriptor setting");
  }
  std::unique_ptr<Model> model = load_checkpoint(checkpoint_path);
  Dataset ds = load_dataset(data_dir);
  const std::vector<Sample>& samples = split_samples(ds, split);
  if (samples.empty()) throw ConfigError("export-features: split '" + split + "' is empty");
  DescriptorMatrix dm = compute_descriptors(*model, samples);
  int dim = 0;
  Tensor desc = infer_descriptors(dm, setting, &dim);
  write_feature_matrix(desc, dm.meta, setting.to_string(), out_path);
}

}  // namespace cgreid
