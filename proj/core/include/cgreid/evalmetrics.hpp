#pragma once

#include <string>
#include <vector>

#include "cgreid/model.hpp"
#include "cgreid/synth.hpp"
#include "cgreid/tensor.hpp"

namespace cgreid {

struct RetrievalMeta {
  std::vector<int> identities;
  std::vector<int> cameras;
};

struct DistanceMatrix {
  int q = 0;
  int g = 0;
  std::vector<double> values;  // row-major Q x G, Euclidean
  RetrievalMeta query_meta;
  RetrievalMeta gallery_meta;

  double at(int qi, int gi) const { return values[static_cast<size_t>(qi) * g + gi]; }
  double& at(int qi, int gi) { return values[static_cast<size_t>(qi) * g + gi]; }
};

// Euclidean distances between every query/gallery descriptor pair.
// One pair costs D multiply operations; the reports account for that.
DistanceMatrix distance_matrix(const Tensor& query_desc, const Tensor& gallery_desc,
                               RetrievalMeta query_meta, RetrievalMeta gallery_meta);

// Gallery indices sorted by ascending distance; ties break toward the
// lower gallery index.
std::vector<int> rank_list(const DistanceMatrix& dm, int query_index);

struct EvalReport {
  std::vector<double> cmc;  // rank-1..rank-k accuracies
  double map = 0.0;
  std::string setting = "standard";
  int descriptor_dim = 0;
  int distance_ops_per_pair = 0;
  int num_queries = 0;
  int num_excluded_queries = 0;  // queries with no valid correct match

  double rank1() const { return cmc.empty() ? 0.0 : cmc.front(); }
};

// Single-query protocol with the cross-camera validity filter: a gallery
// item counts for a query unless it shares both identity and camera.
// Queries without any valid correct match are excluded and counted.
EvalReport cmc_map(const DistanceMatrix& dm, int k_max);

// Metric core on explicit per-query rankings and masks; `rankings[q]` is a
// permutation of gallery indices, best first.
EvalReport cmc_map_from_rankings(const std::vector<std::vector<int>>& rankings,
                                 const std::vector<std::vector<char>>& valid,
                                 const std::vector<std::vector<char>>& correct, int k_max);

// Borda rank aggregation over the per-group distance matrices: each gallery
// item's score is the sum of its per-group rank positions; ties resolve by
// the fallback (concatenated-descriptor) distance, then gallery index.
// The plurality flag switches to top-1 vote counting instead.
std::vector<std::vector<int>> voting_rank(const std::vector<DistanceMatrix>& per_group,
                                          const DistanceMatrix& fallback, bool plurality = false);

// --- inference settings -------------------------------------------------

struct InferenceSetting {
  enum class Kind { kStandard, kFast, kConcatK, kVoting };
  Kind kind = Kind::kStandard;
  int group_index = 0;  // fast
  int concat_k = 0;     // concat

  static InferenceSetting parse(const std::string& text);  // standard | fast:i | concat:k | voting
  std::string to_string() const;
};

// Stacked per-image descriptors for a sample set, eval-mode forward in
// mini-batches. groups[i] is N x D; stripes likewise when enabled.
struct DescriptorMatrix {
  std::vector<Tensor> groups;
  std::vector<Tensor> stripes;
  int dim = 0;
  RetrievalMeta meta;
};

DescriptorMatrix compute_descriptors(Model& model, const std::vector<Sample>& samples,
                                     int batch_size = 32);

// Materializes the descriptor for a setting: standard concatenates all
// groups (stripe features appended when present), fast takes one group,
// concat:k the first k groups. Voting has no single matrix and is handled
// by evaluate_setting.
Tensor infer_descriptors(const DescriptorMatrix& dm, const InferenceSetting& setting, int* dim_out);

EvalReport evaluate_setting(Model& model, const Dataset& ds, const InferenceSetting& setting,
                            int k_max = 20, bool plurality_voting = false);

std::string eval_report_to_json(const EvalReport& report);

// Binary export: u32 Q, u32 G header then row-major float64, little-endian.
void write_distance_matrix(const DistanceMatrix& dm, const std::string& path);
DistanceMatrix read_distance_matrix(const std::string& path);

}  // namespace cgreid
