#pragma once

#include <vector>

#include "cgreid/tensor.hpp"

namespace cgreid {

struct TripletConfig {
  double margin = 0.3;
  bool soft_margin = false;
};

struct TripletResult {
  double loss = 0.0;
  Tensor grad_embeddings;  // B x D
  // Hardest positive / negative picked for each anchor (-1 when the anchor
  // had no valid pair and was skipped).
  std::vector<int> hardest_positive;
  std::vector<int> hardest_negative;
};

// Batch-hard triplet loss on Euclidean distances: per anchor, the farthest
// same-label sample and the closest different-label sample, hinged on the
// margin and averaged over anchors. Ties break toward the lowest index.
TripletResult triplet_hard_loss(const Tensor& embeddings, const std::vector<int>& labels,
                                const TripletConfig& cfg);

}  // namespace cgreid
