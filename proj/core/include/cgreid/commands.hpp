#pragma once

#include <string>
#include <vector>

#include "cgreid/config.hpp"

namespace cgreid {

// Pipeline entry points shared by the command-line tool and the test
// suites. Each is idempotent for identical configuration and inputs.

// Writes manifest.json plus raw float32 image blobs into out_dir.
void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir);

// Trains on the dataset in data_dir and writes out_dir/checkpoint.bin and
// out_dir/train_log.jsonl. Returns the deterministic log.
TrainLog cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir);

// Evaluates the checkpoint for each requested setting; returns one report
// per setting (also serialized by the CLI as single-line JSON).
std::vector<EvalReport> cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
                                 const std::vector<InferenceSetting>& settings, int k_max,
                                 bool plurality_voting);

// Runs the comparison grid and writes the JSON grid document to out_path.
std::string cmd_compare_variants(const RunConfig& cfg, const std::string& data_dir,
                                 const std::string& out_path);

// Exports the descriptor matrix of one split (binary matrix file plus a
// JSON sidecar at out_path + ".json").
void cmd_export_features(const std::string& checkpoint_path, const std::string& data_dir,
                         const std::string& split, const InferenceSetting& setting,
                         const std::string& out_path);

// Feature file format helpers (magic, version, u32 N, u32 D, f64 data).
struct FeatureMatrix {
  Tensor values;  // N x D
  RetrievalMeta meta;
};
void write_feature_matrix(const Tensor& values, const RetrievalMeta& meta,
                          const std::string& setting, const std::string& path);
FeatureMatrix read_feature_matrix(const std::string& path);

}  // namespace cgreid
