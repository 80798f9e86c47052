#pragma once

// Independent reference implementations used as oracles. These stay
// deliberately naive (direct loops, long-double accumulation, exhaustive
// search) and must not share code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cgreid/rng.hpp"
#include "cgreid/tensor.hpp"

namespace testutil {

using cgreid::Rng;
using cgreid::Tensor;

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Direct six-loop convolution, NCHW x OIKK.
inline Tensor direct_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                            int stride, int pad) {
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int oc = weight.dim(0), k = weight.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  Tensor out({n, oc, oh, ow});
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < oc; ++o) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias(o);
          for (int ic = 0; ic < c; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
                  acc += input(i, ic, iy, ix) * weight(o, ic, ky, kx);
                }
              }
            }
          }
          out(i, o, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

// Double-loop matrix product for the linear layer: out = in * w^T + bias.
inline Tensor naive_linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  const int b = input.dim(0), in = input.dim(1), out_f = weight.dim(0);
  Tensor out({b, out_f});
  for (int i = 0; i < b; ++i) {
    for (int o = 0; o < out_f; ++o) {
      double acc = bias(o);
      for (int j = 0; j < in; ++j) acc += input(i, j) * weight(o, j);
      out(i, o) = acc;
    }
  }
  return out;
}

// Eq-style cross entropy evaluated directly in long double, without the
// max-subtraction trick.
inline long double direct_cross_entropy(const Tensor& logits, int row, int label) {
  const int k = logits.dim(1);
  long double denom = 0.0L;
  for (int j = 0; j < k; ++j) denom += expl(static_cast<long double>(logits(row, j)));
  const long double p = expl(static_cast<long double>(logits(row, label))) / denom;
  return -logl(p);
}

// Exhaustive batch-hard triplet selection: scans every (anchor, positive,
// negative) triple and keeps the hardest pair per anchor, then applies the
// hinge. Euclidean distances recomputed per pair.
struct BruteTriplet {
  double loss = 0.0;
  std::vector<int> hardest_positive;
  std::vector<int> hardest_negative;
};

inline double pair_dist(const Tensor& e, int a, int b) {
  double acc = 0.0;
  for (int k = 0; k < e.dim(1); ++k) {
    const double d = e(a, k) - e(b, k);
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline BruteTriplet brute_triplet_hard(const Tensor& emb, const std::vector<int>& labels,
                                       double margin) {
  const int b = emb.dim(0);
  BruteTriplet r;
  r.hardest_positive.assign(static_cast<size_t>(b), -1);
  r.hardest_negative.assign(static_cast<size_t>(b), -1);
  double total = 0.0;
  int counted = 0;
  for (int a = 0; a < b; ++a) {
    double dp = -1.0, dn = -1.0;
    for (int p = 0; p < b; ++p) {
      if (p == a || labels[static_cast<size_t>(p)] != labels[static_cast<size_t>(a)]) continue;
      const double d = pair_dist(emb, a, p);
      if (d > dp) {
        dp = d;
        r.hardest_positive[static_cast<size_t>(a)] = p;
      }
    }
    for (int ng = 0; ng < b; ++ng) {
      if (labels[static_cast<size_t>(ng)] == labels[static_cast<size_t>(a)]) continue;
      const double d = pair_dist(emb, a, ng);
      if (dn < 0.0 || d < dn) {
        dn = d;
        r.hardest_negative[static_cast<size_t>(a)] = ng;
      }
    }
    if (dp < 0.0 || dn < 0.0) continue;
    total += std::max(0.0, margin + dp - dn);
    ++counted;
  }
  r.loss = counted > 0 ? total / counted : 0.0;
  return r;
}

// Brute-force CMC/AP on explicit masks. Ranking by repeated minimum
// extraction (selection rather than sort), ties toward the lower index.
struct BruteRetrieval {
  std::vector<double> cmc;
  double map = 0.0;
  int counted = 0;
  int excluded = 0;
};

inline BruteRetrieval brute_cmc_map(const std::vector<std::vector<double>>& dist,
                                    const std::vector<std::vector<char>>& valid,
                                    const std::vector<std::vector<char>>& correct, int k_max) {
  const int q = static_cast<int>(dist.size());
  BruteRetrieval r;
  r.cmc.assign(static_cast<size_t>(k_max), 0.0);
  double ap_sum = 0.0;
  for (int i = 0; i < q; ++i) {
    const int g = static_cast<int>(dist[static_cast<size_t>(i)].size());
    std::vector<char> used(static_cast<size_t>(g), 0);
    int valid_rank = 0, hits = 0, first_hit = -1;
    double ap = 0.0;
    for (int step = 0; step < g; ++step) {
      int best = -1;
      for (int j = 0; j < g; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        if (best < 0 || dist[static_cast<size_t>(i)][static_cast<size_t>(j)] <
                            dist[static_cast<size_t>(i)][static_cast<size_t>(best)]) {
          best = j;
        }
      }
      used[static_cast<size_t>(best)] = 1;
      if (!valid[static_cast<size_t>(i)][static_cast<size_t>(best)]) continue;
      ++valid_rank;
      if (correct[static_cast<size_t>(i)][static_cast<size_t>(best)]) {
        ++hits;
        if (first_hit < 0) first_hit = valid_rank;
        ap += static_cast<double>(hits) / static_cast<double>(valid_rank);
      }
    }
    if (hits == 0) {
      ++r.excluded;
      continue;
    }
    ++r.counted;
    ap_sum += ap / hits;
    for (int k = first_hit; k <= k_max; ++k) r.cmc[static_cast<size_t>(k - 1)] += 1.0;
  }
  if (r.counted > 0) {
    for (double& v : r.cmc) v /= r.counted;
    r.map = ap_sum / r.counted;
  }
  return r;
}

}  // namespace testutil
