#include "cgreid/triplet.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace cgreid {

namespace {

constexpr double kDistEps = 1e-12;

}  // namespace

TripletResult triplet_hard_loss(const Tensor& embeddings, const std::vector<int>& labels,
                                const TripletConfig& cfg) {
  if (embeddings.rank() != 2) {
    throw ShapeError("triplet_hard_loss: embeddings must be B x D, got " + embeddings.shape_str());
  }
  const int b = embeddings.dim(0), d = embeddings.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw ShapeError("triplet_hard_loss: label count does not match batch size");
  }
  if (cfg.margin < 0.0) throw std::invalid_argument("triplet_hard_loss: margin must be >= 0");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw std::invalid_argument("triplet_hard_loss: batch contains a single identity");
  }

  // Pairwise Euclidean distances.
  std::vector<double> dist(static_cast<size_t>(b) * b, 0.0);
  for (int i = 0; i < b; ++i) {
    for (int j = i + 1; j < b; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = embeddings(i, k) - embeddings(j, k);
        acc += diff * diff;
      }
      const double dv = std::sqrt(acc);
      dist[static_cast<size_t>(i) * b + j] = dv;
      dist[static_cast<size_t>(j) * b + i] = dv;
    }
  }

  TripletResult r;
  r.grad_embeddings = Tensor(embeddings.shape);
  r.hardest_positive.assign(static_cast<size_t>(b), -1);
  r.hardest_negative.assign(static_cast<size_t>(b), -1);

  struct Active {
    int anchor, pos, neg;
    double weight;  // d(loss_a)/d(d_p - d_n)
  };
  std::vector<Active> active;
  double total = 0.0;
  int counted = 0;

  for (int a = 0; a < b; ++a) {
    int pos = -1, neg = -1;
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      const double dv = dist[static_cast<size_t>(a) * b + j];
      if (labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(a)]) {
        if (pos < 0 || dv > dist[static_cast<size_t>(a) * b + pos]) pos = j;
      } else {
        if (neg < 0 || dv < dist[static_cast<size_t>(a) * b + neg]) neg = j;
      }
    }
    if (pos < 0) continue;  // anchor has no positive in this batch
    r.hardest_positive[static_cast<size_t>(a)] = pos;
    r.hardest_negative[static_cast<size_t>(a)] = neg;
    const double gap = dist[static_cast<size_t>(a) * b + pos] - dist[static_cast<size_t>(a) * b + neg];
    ++counted;
    if (cfg.soft_margin) {
      // softplus(gap), computed stably
      const double l = gap > 0.0 ? gap + std::log1p(std::exp(-gap)) : std::log1p(std::exp(gap));
      total += l;
      active.push_back({a, pos, neg, 1.0 / (1.0 + std::exp(-gap))});
    } else {
      const double l = cfg.margin + gap;
      if (l > 0.0) {
        total += l;
        active.push_back({a, pos, neg, 1.0});
      }
    }
  }
  if (counted == 0) {
    throw std::invalid_argument("triplet_hard_loss: no anchor has a positive sample");
  }

  r.loss = total / static_cast<double>(counted);
  const double scale = 1.0 / static_cast<double>(counted);
  for (const Active& t : active) {
    const double dp = dist[static_cast<size_t>(t.anchor) * b + t.pos];
    const double dn = dist[static_cast<size_t>(t.anchor) * b + t.neg];
    const double w = t.weight * scale;
    for (int k = 0; k < d; ++k) {
      if (dp > kDistEps) {
        const double dir = (embeddings(t.anchor, k) - embeddings(t.pos, k)) / dp;
        r.grad_embeddings(t.anchor, k) += w * dir;
        r.grad_embeddings(t.pos, k) -= w * dir;
      }
      if (dn > kDistEps) {
        const double dir = (embeddings(t.anchor, k) - embeddings(t.neg, k)) / dn;
        r.grad_embeddings(t.anchor, k) -= w * dir;
        r.grad_embeddings(t.neg, k) += w * dir;
      }
    }
  }
  return r;
}

}  // namespace cgreid
