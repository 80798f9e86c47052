#include "cgreid/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "binio.hpp"
#include "cgreid/errors.hpp"

namespace cgreid {

DistanceMatrix distance_matrix(const Tensor& query_desc, const Tensor& gallery_desc,
                               RetrievalMeta query_meta, RetrievalMeta gallery_meta) {
  if (query_desc.rank() != 2 || gallery_desc.rank() != 2) {
    throw ShapeError("distance_matrix: descriptors must be rank-2 matrices");
  }
  if (query_desc.dim(1) != gallery_desc.dim(1)) {
    throw ShapeError("distance_matrix: descriptor dims differ (" + std::to_string(query_desc.dim(1)) +
                     " vs " + std::to_string(gallery_desc.dim(1)) + ")");
  }
  const int q = query_desc.dim(0), g = gallery_desc.dim(0), d = query_desc.dim(1);
  if (static_cast<int>(query_meta.identities.size()) != q ||
      static_cast<int>(gallery_meta.identities.size()) != g) {
    throw ShapeError("distance_matrix: metadata lengths do not match descriptor counts");
  }
  DistanceMatrix dm;
  dm.q = q;
  dm.g = g;
  dm.values.assign(static_cast<size_t>(q) * g, 0.0);
  dm.query_meta = std::move(query_meta);
  dm.gallery_meta = std::move(gallery_meta);
  for (int i = 0; i < q; ++i) {
    const double* qv = query_desc.data.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < g; ++j) {
      const double* gv = gallery_desc.data.data() + static_cast<size_t>(j) * d;
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = qv[k] - gv[k];
        acc += diff * diff;
      }
      dm.at(i, j) = std::sqrt(acc);
    }
  }
  return dm;
}

std::vector<int> rank_list(const DistanceMatrix& dm, int query_index) {
  if (query_index < 0 || query_index >= dm.q) {
    throw std::out_of_range("rank_list: query index out of range");
  }
  std::vector<int> order(static_cast<size_t>(dm.g));
  std::iota(order.begin(), order.end(), 0);
  const double* row = dm.values.data() + static_cast<size_t>(query_index) * dm.g;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return row[a] < row[b]; });
  return order;
}

EvalReport cmc_map_from_rankings(const std::vector<std::vector<int>>& rankings,
                                 const std::vector<std::vector<char>>& valid,
                                 const std::vector<std::vector<char>>& correct, int k_max) {
  const int q = static_cast<int>(rankings.size());
  if (k_max < 1) throw std::invalid_argument("cmc_map: k_max must be >= 1");
  EvalReport rep;
  rep.cmc.assign(static_cast<size_t>(k_max), 0.0);
  int counted = 0;
  double ap_sum = 0.0;
  for (int i = 0; i < q; ++i) {
    int valid_rank = 0;
    int hits = 0;
    int first_hit_rank = -1;
    double ap = 0.0;
    for (int gal : rankings[static_cast<size_t>(i)]) {
      if (!valid[static_cast<size_t>(i)][static_cast<size_t>(gal)]) continue;
      ++valid_rank;
      if (correct[static_cast<size_t>(i)][static_cast<size_t>(gal)]) {
        ++hits;
        if (first_hit_rank < 0) first_hit_rank = valid_rank;
        ap += static_cast<double>(hits) / static_cast<double>(valid_rank);
      }
    }
    if (hits == 0) {
      ++rep.num_excluded_queries;
      continue;
    }
    ++counted;
    ap_sum += ap / static_cast<double>(hits);
    for (int k = first_hit_rank; k <= k_max; ++k) rep.cmc[static_cast<size_t>(k - 1)] += 1.0;
  }
  rep.num_queries = counted;
  if (counted > 0) {
    for (double& v : rep.cmc) v /= static_cast<double>(counted);
    rep.map = ap_sum / static_cast<double>(counted);
  }
  return rep;
}

EvalReport cmc_map(const DistanceMatrix& dm, int k_max) {
  k_max = std::min(k_max, dm.g);
  std::vector<std::vector<int>> rankings;
  std::vector<std::vector<char>> valid, correct;
  rankings.reserve(static_cast<size_t>(dm.q));
  for (int i = 0; i < dm.q; ++i) {
    rankings.push_back(rank_list(dm, i));
    std::vector<char> v(static_cast<size_t>(dm.g)), c(static_cast<size_t>(dm.g));
    for (int j = 0; j < dm.g; ++j) {
      const bool same_id = dm.query_meta.identities[static_cast<size_t>(i)] ==
                           dm.gallery_meta.identities[static_cast<size_t>(j)];
      const bool same_cam = dm.query_meta.cameras[static_cast<size_t>(i)] ==
                            dm.gallery_meta.cameras[static_cast<size_t>(j)];
      v[static_cast<size_t>(j)] = !(same_id && same_cam);
      c[static_cast<size_t>(j)] = same_id;
    }
    valid.push_back(std::move(v));
    correct.push_back(std::move(c));
  }
  return cmc_map_from_rankings(rankings, valid, correct, k_max);
}

std::vector<std::vector<int>> voting_rank(const std::vector<DistanceMatrix>& per_group,
                                          const DistanceMatrix& fallback, bool plurality) {
  if (per_group.size() < 2) {
    throw std::invalid_argument("voting_rank: needs at least 2 channel groups");
  }
  const int q = per_group.front().q, g = per_group.front().g;
  for (const DistanceMatrix& dm : per_group) {
    if (dm.q != q || dm.g != g) throw ShapeError("voting_rank: distance matrices disagree in shape");
  }
  if (fallback.q != q || fallback.g != g) {
    throw ShapeError("voting_rank: fallback matrix disagrees in shape");
  }

  std::vector<std::vector<int>> final_rankings;
  final_rankings.reserve(static_cast<size_t>(q));
  std::vector<int64_t> score(static_cast<size_t>(g));
  for (int i = 0; i < q; ++i) {
    std::fill(score.begin(), score.end(), 0);
    for (const DistanceMatrix& dm : per_group) {
      const std::vector<int> order = rank_list(dm, i);
      if (plurality) {
        // Top-1 vote counting; negated so lower is better like Borda.
        score[static_cast<size_t>(order.front())] -= 1;
      } else {
        for (int pos = 0; pos < g; ++pos) score[static_cast<size_t>(order[static_cast<size_t>(pos)])] += pos;
      }
    }
    std::vector<int> order(static_cast<size_t>(g));
    std::iota(order.begin(), order.end(), 0);
    const double* frow = fallback.values.data() + static_cast<size_t>(i) * g;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (score[static_cast<size_t>(a)] != score[static_cast<size_t>(b)]) {
        return score[static_cast<size_t>(a)] < score[static_cast<size_t>(b)];
      }
      return frow[a] < frow[b];
    });
    final_rankings.push_back(std::move(order));
  }
  return final_rankings;
}

InferenceSetting InferenceSetting::parse(const std::string& text) {
  InferenceSetting s;
  if (text == "standard") {
    s.kind = Kind::kStandard;
  } else if (text == "voting") {
    s.kind = Kind::kVoting;
  } else if (text == "fast" || text.rfind("fast:", 0) == 0) {
    s.kind = Kind::kFast;
    s.group_index = text == "fast" ? 0 : std::stoi(text.substr(5));
  } else if (text.rfind("concat:", 0) == 0) {
    s.kind = Kind::kConcatK;
    s.concat_k = std::stoi(text.substr(7));
  } else {
    throw ConfigError("unknown inference setting '" + text +
                      "' (expected standard, fast:i, concat:k, or voting)");
  }
  return s;
}

std::string InferenceSetting::to_string() const {
  switch (kind) {
    case Kind::kStandard: return "standard";
    case Kind::kFast: return "fast:" + std::to_string(group_index);
    case Kind::kConcatK: return "concat:" + std::to_string(concat_k);
    case Kind::kVoting: return "voting";
  }
  return "?";
}

DescriptorMatrix compute_descriptors(Model& model, const std::vector<Sample>& samples,
                                     int batch_size) {
  if (samples.empty()) throw std::invalid_argument("compute_descriptors: empty sample set");
  const int n = static_cast<int>(samples.size());
  const int d = model.spec().head.embed_dim;

  DescriptorMatrix out;
  out.dim = d;
  out.meta.identities.reserve(static_cast<size_t>(n));
  out.meta.cameras.reserve(static_cast<size_t>(n));
  for (const Sample& s : samples) {
    out.meta.identities.push_back(s.identity);
    out.meta.cameras.push_back(s.camera);
  }

  for (int begin = 0; begin < n; begin += batch_size) {
    const int end = std::min(n, begin + batch_size);
    const int b = end - begin;
    const Tensor& first = samples[static_cast<size_t>(begin)].image;
    Tensor images({b, first.dim(0), first.dim(1), first.dim(2)});
    for (int i = 0; i < b; ++i) {
      const Tensor& img = samples[static_cast<size_t>(begin + i)].image;
      std::copy(img.data.begin(), img.data.end(),
                images.data.begin() + static_cast<size_t>(i) * img.numel());
    }
    Model::Forward fwd = model.forward(images, Mode::kEval);
    if (out.groups.empty()) {
      for (size_t gi = 0; gi < fwd.descriptors.groups.size(); ++gi) out.groups.emplace_back(Tensor({n, d}));
      for (size_t si = 0; si < fwd.descriptors.stripes.size(); ++si) out.stripes.emplace_back(Tensor({n, d}));
    }
    for (size_t gi = 0; gi < fwd.descriptors.groups.size(); ++gi) {
      const Tensor& src = fwd.descriptors.groups[gi];
      std::copy(src.data.begin(), src.data.end(),
                out.groups[gi].data.begin() + static_cast<size_t>(begin) * d);
    }
    for (size_t si = 0; si < fwd.descriptors.stripes.size(); ++si) {
      const Tensor& src = fwd.descriptors.stripes[si];
      std::copy(src.data.begin(), src.data.end(),
                out.stripes[si].data.begin() + static_cast<size_t>(begin) * d);
    }
  }
  return out;
}

Tensor infer_descriptors(const DescriptorMatrix& dm, const InferenceSetting& setting, int* dim_out) {
  Tensor desc;
  switch (setting.kind) {
    case InferenceSetting::Kind::kStandard: {
      std::vector<Tensor> parts = dm.groups;
      for (const Tensor& s : dm.stripes) parts.push_back(s);
      desc = concat_columns(parts);
      break;
    }
    case InferenceSetting::Kind::kFast: {
      if (setting.group_index < 0 || setting.group_index >= static_cast<int>(dm.groups.size())) {
        throw std::out_of_range("fast setting: group index " + std::to_string(setting.group_index) +
                                " out of range (n_groups=" + std::to_string(dm.groups.size()) + ")");
      }
      desc = dm.groups[static_cast<size_t>(setting.group_index)];
      break;
    }
    case InferenceSetting::Kind::kConcatK: {
      if (setting.concat_k < 1 || setting.concat_k > static_cast<int>(dm.groups.size())) {
        throw std::out_of_range("concat setting: k " + std::to_string(setting.concat_k) +
                                " out of range (n_groups=" + std::to_string(dm.groups.size()) + ")");
      }
      std::vector<int> idx(static_cast<size_t>(setting.concat_k));
      std::iota(idx.begin(), idx.end(), 0);
      desc = concat_columns_subset(dm.groups, idx);
      break;
    }
    case InferenceSetting::Kind::kVoting:
      throw std::invalid_argument("voting has no single descriptor matrix");
  }
  if (dim_out != nullptr) *dim_out = desc.dim(1);
  return desc;
}

EvalReport evaluate_setting(Model& model, const Dataset& ds, const InferenceSetting& setting,
                            int k_max, bool plurality_voting) {
  DescriptorMatrix qd = compute_descriptors(model, ds.query);
  DescriptorMatrix gd = compute_descriptors(model, ds.gallery);

  if (setting.kind == InferenceSetting::Kind::kVoting) {
    // Voting aggregates the channel-group rankings; the concatenated
    // descriptor breaks ties.
    std::vector<DistanceMatrix> per_group;
    for (size_t gi = 0; gi < qd.groups.size(); ++gi) {
      per_group.push_back(distance_matrix(qd.groups[gi], gd.groups[gi], qd.meta, gd.meta));
    }
    Tensor qcat = concat_columns(qd.groups);
    Tensor gcat = concat_columns(gd.groups);
    DistanceMatrix fallback = distance_matrix(qcat, gcat, qd.meta, gd.meta);
    std::vector<std::vector<int>> rankings = voting_rank(per_group, fallback, plurality_voting);

    std::vector<std::vector<char>> valid, correct;
    for (int i = 0; i < fallback.q; ++i) {
      std::vector<char> v(static_cast<size_t>(fallback.g)), c(static_cast<size_t>(fallback.g));
      for (int j = 0; j < fallback.g; ++j) {
        const bool same_id = qd.meta.identities[static_cast<size_t>(i)] == gd.meta.identities[static_cast<size_t>(j)];
        const bool same_cam = qd.meta.cameras[static_cast<size_t>(i)] == gd.meta.cameras[static_cast<size_t>(j)];
        v[static_cast<size_t>(j)] = !(same_id && same_cam);
        c[static_cast<size_t>(j)] = same_id;
      }
      valid.push_back(std::move(v));
      correct.push_back(std::move(c));
    }
    EvalReport rep = cmc_map_from_rankings(rankings, valid, correct, std::min(k_max, fallback.g));
    rep.setting = setting.to_string();
    rep.descriptor_dim = qcat.dim(1);
    rep.distance_ops_per_pair = qcat.dim(1);
    return rep;
  }

  int dim = 0;
  Tensor qdesc = infer_descriptors(qd, setting, &dim);
  Tensor gdesc = infer_descriptors(gd, setting, nullptr);
  DistanceMatrix dm = distance_matrix(qdesc, gdesc, qd.meta, gd.meta);
  EvalReport rep = cmc_map(dm, k_max);
  rep.setting = setting.to_string();
  rep.descriptor_dim = dim;
  rep.distance_ops_per_pair = dim;
  return rep;
}

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["setting"] = report.setting;
  j["descriptor_dim"] = report.descriptor_dim;
  j["distance_ops_per_pair"] = report.distance_ops_per_pair;
  j["num_queries"] = report.num_queries;
  j["num_excluded_queries"] = report.num_excluded_queries;
  j["rank1"] = report.rank1();
  j["map"] = report.map;
  j["cmc"] = report.cmc;
  return j.dump();
}

void write_distance_matrix(const DistanceMatrix& dm, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  binio::write_u32(os, static_cast<uint32_t>(dm.q));
  binio::write_u32(os, static_cast<uint32_t>(dm.g));
  for (double v : dm.values) binio::write_f64(os, v);
  if (!os) throw FormatError("failed writing " + path);
}

DistanceMatrix read_distance_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  DistanceMatrix dm;
  dm.q = static_cast<int>(binio::read_u32(is, "distance matrix Q"));
  dm.g = static_cast<int>(binio::read_u32(is, "distance matrix G"));
  dm.values.resize(static_cast<size_t>(dm.q) * dm.g);
  for (double& v : dm.values) v = binio::read_f64(is, "distance matrix values");
  return dm;
}

}  // namespace cgreid
