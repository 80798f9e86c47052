#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgreid/rng.hpp"
#include "cgreid/tensor.hpp"

namespace cgreid {

struct Nuisance {
  int shift_px = 2;
  double brightness_jitter = 0.15;
  double noise_sigma = 0.03;
  double occlusion_prob = 0.25;
};

// Deterministic synthetic re-id benchmark: procedural person-like figures
// with per-identity color/texture signatures, nuisance transforms, and a
// global tint per camera. Train and test identity sets are disjoint.
struct SynthSpec {
  int n_train_ids = 32;
  int n_test_ids = 16;
  int images_per_id = 16;      // images per train identity
  int test_images_per_id = 8;  // images per test identity, split query/gallery
  int height = 64;
  int width = 32;
  Nuisance nuisance;
  // Cross-camera domain gap: camera 1 scales the RGB channels by
  // (1-t, 1, 1+t). Queries and galleries sit on different cameras, so this
  // directly controls retrieval difficulty.
  double camera_tint = 0.15;
  double label_corruption = 0.0;  // fraction of train labels reassigned at random
  uint64_t seed = 12345;

  void validate() const;
};

enum class Split { kTrain, kQuery, kGallery };

struct Sample {
  Tensor image;  // 3 x H x W in [0,1]; values quantized to float32 grid
  int identity;
  int camera;
  Split split;
};

struct Dataset {
  SynthSpec spec;
  std::vector<Sample> train;
  std::vector<Sample> query;
  std::vector<Sample> gallery;

  int n_train_ids() const { return spec.n_train_ids; }
};

Dataset generate_dataset(const SynthSpec& spec);

// --- train-time augmentation -----------------------------------------------

Tensor hflip(const Tensor& image);
// Zero-pads by `pad` pixels and crops back to the original size displaced
// by (dy, dx); (0, 0) is the identity. |dy|, |dx| <= pad.
Tensor pad_crop(const Tensor& image, int dy, int dx, int pad = 4);
// 50% horizontal flip then random pad-4 crop, clamped to [0,1].
Tensor augment(const Tensor& image, uint64_t seed);

// --- PK batch sampling ------------------------------------------------------

struct PkBatchSpec {
  int p = 8;  // identities per batch
  int k = 4;  // images per identity

  int batch_size() const { return p * k; }
  void validate() const;
};

// Yields index batches over the train split: every batch holds exactly p
// distinct identities with k images each, sampled without replacement
// within an epoch. Identities left over when the count is not divisible
// by p sit out that epoch (the shuffle rotates who).
class PkSampler {
 public:
  // `subset` restricts sampling to the given train indices (empty = all).
  // An identity with fewer than k images is an error unless
  // `allow_short_identities` is set (label corruption can underpopulate an
  // identity), in which case it sits out entirely.
  PkSampler(const Dataset& ds, PkBatchSpec pk, uint64_t seed, const std::vector<int>& subset = {},
            bool allow_short_identities = false);

  std::vector<std::vector<int>> epoch_batches(int epoch) const;
  int batches_per_epoch() const;

 private:
  std::vector<std::vector<int>> by_identity_;  // train indices per label value
  PkBatchSpec pk_;
  uint64_t seed_;
};

// --- dataset directory format -----------------------------------------------
// manifest.json plus one raw little-endian float32 blob per split.

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace cgreid
