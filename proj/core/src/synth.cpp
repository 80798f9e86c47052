#include "cgreid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "binio.hpp"
#include "cgreid/errors.hpp"
#include "json_util.hpp"

namespace cgreid {

void SynthSpec::validate() const {
  if (n_train_ids < 2) throw ConfigError("data: n_train_ids must be >= 2");
  if (n_test_ids < 2) throw ConfigError("data: n_test_ids must be >= 2");
  if (images_per_id < 2) throw ConfigError("data: images_per_id must be >= 2");
  if (test_images_per_id < 2) throw ConfigError("data: test_images_per_id must be >= 2");
  if (height < 16 || width < 8) throw ConfigError("data: image must be at least 16x8");
  if (nuisance.shift_px < 0 || nuisance.brightness_jitter < 0 || nuisance.noise_sigma < 0 ||
      nuisance.occlusion_prob < 0 || nuisance.occlusion_prob > 1) {
    throw ConfigError("data: nuisance values out of range");
  }
  if (camera_tint < 0 || camera_tint >= 1) {
    throw ConfigError("data: camera_tint must be in [0, 1)");
  }
  if (label_corruption < 0 || label_corruption >= 1) {
    throw ConfigError("data: label_corruption must be in [0, 1)");
  }
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct TexturePattern {
  int type;  // 0 h-stripes, 1 v-stripes, 2 checker, 3 plain
  double freq;
  double phase;
  double amp;
};

struct Appearance {
  double head_color[3];
  double torso_color[3];
  double legs_color[3];
  double bg_gray;
  TexturePattern torso_tex;
  TexturePattern legs_tex;
  double torso_halfw;    // fractions of width
  double head_halfw;
  double leg_halfw;
  double leg_offset;
  double head_end;       // fractions of height
  double torso_end;
};

// Everything per-identity lives here; the per-image generator only draws
// nuisance transforms, so zeroed nuisance reproduces an identity's render
// bit for bit. Identities differ along several weak cues (muted colors,
// two texture patterns, body geometry) rather than one strong one, so
// telling them apart takes more than a single dominant feature.
Appearance make_appearance(uint64_t root_seed, int identity) {
  Rng rng(derive_seed(root_seed, {seed_tag::identity, static_cast<uint64_t>(identity)}));
  Appearance a;
  for (double& c : a.head_color) c = rng.uniform(0.30, 0.70);
  for (double& c : a.torso_color) c = rng.uniform(0.30, 0.70);
  for (double& c : a.legs_color) c = rng.uniform(0.30, 0.70);
  a.bg_gray = rng.uniform(0.40, 0.60);
  auto draw_tex = [&rng] {
    TexturePattern t;
    t.type = rng.uniform_int(4);
    t.freq = 2.0 + rng.uniform_int(5);
    t.phase = rng.uniform(0.0, 2.0 * kPi);
    t.amp = rng.uniform(0.25, 0.45);
    return t;
  };
  a.torso_tex = draw_tex();
  a.legs_tex = draw_tex();
  a.torso_halfw = rng.uniform(0.22, 0.34);
  a.head_halfw = rng.uniform(0.13, 0.19);
  a.leg_halfw = rng.uniform(0.07, 0.11);
  a.leg_offset = rng.uniform(0.10, 0.16);
  a.head_end = rng.uniform(0.16, 0.22);
  a.torso_end = rng.uniform(0.58, 0.68);
  return a;
}

double texture_mod(const TexturePattern& t, double yf, double xf) {
  switch (t.type) {
    case 0: return t.amp * std::sin(2.0 * kPi * t.freq * yf + t.phase);
    case 1: return t.amp * std::sin(2.0 * kPi * t.freq * xf + t.phase);
    case 2: {
      const double s = std::sin(2.0 * kPi * t.freq * yf + t.phase) *
                       std::sin(2.0 * kPi * t.freq * xf + t.phase);
      return t.amp * (s >= 0.0 ? 0.8 : -0.8);
    }
    default: return 0.0;
  }
}

Tensor render_image(const Appearance& a, const Nuisance& nu, double camera_tint, int camera,
                    int height, int width, Rng& rng) {
  Tensor img({3, height, width});
  img.fill(a.bg_gray);

  const int dy = nu.shift_px > 0 ? rng.uniform_int(2 * nu.shift_px + 1) - nu.shift_px : 0;
  const int dx = nu.shift_px > 0 ? rng.uniform_int(2 * nu.shift_px + 1) - nu.shift_px : 0;

  const double cx = 0.5 * width + dx;
  const double top = 0.06 * height + dy;
  const double head_end = top + a.head_end * height;
  const double torso_end = top + a.torso_end * height;
  const double legs_end = top + 0.90 * height;

  for (int y = 0; y < height; ++y) {
    const double yf = (y - top) / height;
    for (int x = 0; x < width; ++x) {
      const double off = std::abs(x - cx);
      const double* color = nullptr;
      double mod = 0.0;
      if (y >= top && y < head_end && off <= a.head_halfw * width) {
        color = a.head_color;
      } else if (y >= head_end && y < torso_end && off <= a.torso_halfw * width) {
        color = a.torso_color;
        mod = texture_mod(a.torso_tex, yf, static_cast<double>(x - cx) / width);
      } else if (y >= torso_end && y < legs_end) {
        const double l1 = std::abs(x - (cx - a.leg_offset * width));
        const double l2 = std::abs(x - (cx + a.leg_offset * width));
        if (l1 <= a.leg_halfw * width || l2 <= a.leg_halfw * width) {
          color = a.legs_color;
          mod = texture_mod(a.legs_tex, yf, static_cast<double>(x - cx) / width);
        }
      }
      if (color != nullptr) {
        for (int c = 0; c < 3; ++c) img(c, y, x) = color[c] * (1.0 + mod);
      }
    }
  }

  const double brightness = 1.0 + nu.brightness_jitter * rng.uniform(-1.0, 1.0);
  for (double& v : img.data) v *= brightness;

  if (nu.noise_sigma > 0.0) {
    for (double& v : img.data) v += rng.normal(0.0, nu.noise_sigma);
  }

  if (rng.bernoulli(nu.occlusion_prob)) {
    const int oh = static_cast<int>(height * rng.uniform(0.15, 0.35));
    const int ow = static_cast<int>(width * rng.uniform(0.30, 0.60));
    const int oy = rng.uniform_int(std::max(1, height - oh));
    const int ox = rng.uniform_int(std::max(1, width - ow));
    for (int y = oy; y < std::min(height, oy + oh); ++y) {
      for (int x = ox; x < std::min(width, ox + ow); ++x) {
        for (int c = 0; c < 3; ++c) img(c, y, x) = 0.5;
      }
    }
  }

  // Cross-camera domain gap: camera 1 carries a fixed global tint.
  if (camera == 1) {
    const double tint[3] = {1.0 - camera_tint, 1.0, 1.0 + camera_tint};
    for (int c = 0; c < 3; ++c) {
      for (int p = 0; p < height * width; ++p) img.data[static_cast<size_t>(c) * height * width + p] *= tint[c];
    }
  }

  for (double& v : img.data) {
    v = std::clamp(v, 0.0, 1.0);
    // Pin every pixel to the float32 grid so the on-disk blob format
    // round-trips exactly.
    v = static_cast<double>(static_cast<float>(v));
  }
  return img;
}

}  // namespace

Dataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;

  for (int id = 0; id < spec.n_train_ids; ++id) {
    const Appearance a = make_appearance(spec.seed, id);
    for (int j = 0; j < spec.images_per_id; ++j) {
      Rng rng(derive_seed(spec.seed, {seed_tag::image, static_cast<uint64_t>(id), static_cast<uint64_t>(j)}));
      const int cam = j % 2;
      ds.train.push_back({render_image(a, spec.nuisance, spec.camera_tint, cam, spec.height, spec.width, rng), id, cam,
                          Split::kTrain});
    }
  }

  const int n_query = spec.test_images_per_id / 2;
  for (int t = 0; t < spec.n_test_ids; ++t) {
    const int id = spec.n_train_ids + t;
    const Appearance a = make_appearance(spec.seed, id);
    for (int j = 0; j < spec.test_images_per_id; ++j) {
      Rng rng(derive_seed(spec.seed, {seed_tag::image, static_cast<uint64_t>(id), static_cast<uint64_t>(j)}));
      const bool is_query = j < n_query;
      const int cam = is_query ? 0 : 1;
      Sample s{render_image(a, spec.nuisance, spec.camera_tint, cam, spec.height, spec.width, rng), id, cam,
               is_query ? Split::kQuery : Split::kGallery};
      (is_query ? ds.query : ds.gallery).push_back(std::move(s));
    }
  }

  if (spec.label_corruption > 0.0) {
    Rng rng(derive_seed(spec.seed, {seed_tag::corruption}));
    std::vector<int> order(ds.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    const int n_corrupt = static_cast<int>(std::lround(spec.label_corruption * static_cast<double>(ds.train.size())));
    for (int i = 0; i < n_corrupt; ++i) {
      Sample& s = ds.train[static_cast<size_t>(order[static_cast<size_t>(i)])];
      const int shifted = 1 + rng.uniform_int(spec.n_train_ids - 1);
      s.identity = (s.identity + shifted) % spec.n_train_ids;
    }
  }

  return ds;
}

Tensor hflip(const Tensor& image) {
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out(ch, y, x) = image(ch, y, w - 1 - x);
    }
  }
  return out;
}

Tensor pad_crop(const Tensor& image, int dy, int dx, int pad) {
  if (std::abs(dy) > pad || std::abs(dx) > pad) {
    throw std::invalid_argument("pad_crop: displacement exceeds padding");
  }
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      const int sy = y + dy;
      for (int x = 0; x < w; ++x) {
        const int sx = x + dx;
        out(ch, y, x) = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? image(ch, sy, sx) : 0.0;
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& image, uint64_t seed) {
  Rng rng(seed);
  constexpr int kPad = 4;
  Tensor out = rng.bernoulli(0.5) ? hflip(image) : image;
  const int dy = rng.uniform_int(2 * kPad + 1) - kPad;
  const int dx = rng.uniform_int(2 * kPad + 1) - kPad;
  out = pad_crop(out, dy, dx, kPad);
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

void PkBatchSpec::validate() const {
  if (p < 2) throw ConfigError("pk: p must be >= 2");
  if (k < 2) throw ConfigError("pk: k must be >= 2");
}

PkSampler::PkSampler(const Dataset& ds, PkBatchSpec pk, uint64_t seed,
                     const std::vector<int>& subset, bool allow_short_identities)
    : pk_(pk), seed_(seed) {
  pk_.validate();
  by_identity_.assign(static_cast<size_t>(ds.n_train_ids()), {});
  if (subset.empty()) {
    for (size_t i = 0; i < ds.train.size(); ++i) {
      by_identity_[static_cast<size_t>(ds.train[i].identity)].push_back(static_cast<int>(i));
    }
  } else {
    for (int i : subset) {
      by_identity_[static_cast<size_t>(ds.train[static_cast<size_t>(i)].identity)].push_back(i);
    }
  }
  std::vector<std::vector<int>> kept;
  for (size_t id = 0; id < by_identity_.size(); ++id) {
    auto& g = by_identity_[id];
    if (static_cast<int>(g.size()) >= pk_.k) {
      kept.push_back(std::move(g));
    } else if (!g.empty() && !allow_short_identities) {
      throw std::invalid_argument("pk_sampler: identity " + std::to_string(id) + " has " +
                                  std::to_string(g.size()) + " images, fewer than k=" +
                                  std::to_string(pk_.k));
    }
  }
  by_identity_ = std::move(kept);
  if (static_cast<int>(by_identity_.size()) < pk_.p) {
    throw std::invalid_argument("pk_sampler: fewer than p identities have k images");
  }
}

int PkSampler::batches_per_epoch() const {
  return static_cast<int>(by_identity_.size()) / pk_.p;
}

std::vector<std::vector<int>> PkSampler::epoch_batches(int epoch) const {
  Rng rng(derive_seed(seed_, {seed_tag::sampler, static_cast<uint64_t>(epoch)}));
  std::vector<int> id_order(by_identity_.size());
  for (size_t i = 0; i < id_order.size(); ++i) id_order[i] = static_cast<int>(i);
  rng.shuffle(id_order);

  std::vector<std::vector<int>> batches;
  const int n_batches = batches_per_epoch();
  for (int b = 0; b < n_batches; ++b) {
    std::vector<int> batch;
    batch.reserve(static_cast<size_t>(pk_.batch_size()));
    for (int j = 0; j < pk_.p; ++j) {
      std::vector<int> imgs = by_identity_[static_cast<size_t>(id_order[static_cast<size_t>(b * pk_.p + j)])];
      rng.shuffle(imgs);
      for (int t = 0; t < pk_.k; ++t) batch.push_back(imgs[static_cast<size_t>(t)]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

// --- dataset directory -------------------------------------------------

namespace {

void write_split_blob(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  for (const Sample& s : samples) {
    for (double v : s.image.data) binio::write_f32(os, static_cast<float>(v));
  }
  if (!os) throw FormatError("failed writing " + path);
}

std::vector<Sample> read_split_blob(const std::string& path, const nlohmann::json& meta, Split split,
                                    int channels, int height, int width) {
  const auto identities = meta.at("identities").get<std::vector<int>>();
  const auto cameras = meta.at("cameras").get<std::vector<int>>();
  const size_t count = meta.at("count").get<size_t>();
  if (identities.size() != count || cameras.size() != count) {
    throw FormatError("dataset manifest: identity/camera lengths disagree with count");
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  std::vector<Sample> out;
  out.reserve(count);
  const int numel = channels * height * width;
  for (size_t i = 0; i < count; ++i) {
    Sample s;
    s.image = Tensor({channels, height, width});
    for (int j = 0; j < numel; ++j) {
      s.image.data[static_cast<size_t>(j)] = static_cast<double>(binio::read_f32(is, "image blob"));
    }
    s.identity = identities[i];
    s.camera = cameras[i];
    s.split = split;
    out.push_back(std::move(s));
  }
  char extra;
  if (is.read(&extra, 1)) throw FormatError("dataset blob " + path + " has trailing bytes");
  return out;
}

nlohmann::json split_meta(const std::vector<Sample>& samples, const std::string& file) {
  nlohmann::json j;
  j["file"] = file;
  j["count"] = samples.size();
  std::vector<int> ids, cams;
  ids.reserve(samples.size());
  cams.reserve(samples.size());
  for (const Sample& s : samples) {
    ids.push_back(s.identity);
    cams.push_back(s.camera);
  }
  j["identities"] = ids;
  j["cameras"] = cams;
  return j;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["image_shape"] = {3, ds.spec.height, ds.spec.width};
  manifest["seed"] = ds.spec.seed;
  manifest["spec"] = json_util::to_json(ds.spec);
  manifest["splits"]["train"] = split_meta(ds.train, "train.bin");
  manifest["splits"]["query"] = split_meta(ds.query, "query.bin");
  manifest["splits"]["gallery"] = split_meta(ds.gallery, "gallery.bin");

  write_split_blob(ds.train, dir + "/train.bin");
  write_split_blob(ds.query, dir + "/query.bin");
  write_split_blob(ds.gallery, dir + "/gallery.bin");

  std::ofstream os(dir + "/manifest.json");
  if (!os) throw FormatError("cannot write " + dir + "/manifest.json");
  os << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw FormatError("cannot open " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  if (manifest.value("schema_version", 0) != 1) {
    throw FormatError("dataset manifest: unsupported schema_version");
  }
  Dataset ds;
  ds.spec = json_util::synth_spec_from_json(manifest.at("spec"));
  const auto shape = manifest.at("image_shape").get<std::vector<int>>();
  if (shape.size() != 3 || shape[0] != 3) throw FormatError("dataset manifest: bad image_shape");
  const auto& splits = manifest.at("splits");
  ds.train = read_split_blob(dir + "/" + splits.at("train").at("file").get<std::string>(),
                             splits.at("train"), Split::kTrain, shape[0], shape[1], shape[2]);
  ds.query = read_split_blob(dir + "/" + splits.at("query").at("file").get<std::string>(),
                             splits.at("query"), Split::kQuery, shape[0], shape[1], shape[2]);
  ds.gallery = read_split_blob(dir + "/" + splits.at("gallery").at("file").get<std::string>(),
                               splits.at("gallery"), Split::kGallery, shape[0], shape[1], shape[2]);
  return ds;
}

}  // namespace cgreid
