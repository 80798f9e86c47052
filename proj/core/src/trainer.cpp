#include "cgreid/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "cgreid/errors.hpp"
#include "json_util.hpp"

namespace cgreid {

namespace {

constexpr double kLossCeiling = 1e6;
constexpr uint64_t kValSplitTag = 41;

}  // namespace

std::string loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::kClassification: return "classification";
    case LossMode::kTriplet: return "triplet";
    case LossMode::kBoth: return "both";
  }
  return "?";
}

LossMode loss_mode_from_name(const std::string& name) {
  if (name == "classification") return LossMode::kClassification;
  if (name == "triplet") return LossMode::kTriplet;
  if (name == "both") return LossMode::kBoth;
  throw ConfigError("unknown loss_mode '" + name + "'");
}

void TrainSpec::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (lr <= 0.0) throw ConfigError("train: lr must be positive");
  if (lr_decay_factor <= 0.0) throw ConfigError("train: lr_decay_factor must be positive");
  for (size_t i = 1; i < lr_milestones.size(); ++i) {
    if (lr_milestones[i] <= lr_milestones[i - 1]) {
      throw ConfigError("train: lr_milestones must be strictly increasing");
    }
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  pk.validate();
  if (eval_every < 0) throw ConfigError("train: eval_every must be >= 0");
  if (val_fraction < 0.0 || val_fraction > 0.5) throw ConfigError("train: val_fraction must be in [0, 0.5]");
  if (triplet.margin < 0.0) throw ConfigError("train: triplet margin must be >= 0");
}

std::vector<int> TrainSpec::effective_milestones() const {
  if (!lr_milestones.empty()) return lr_milestones;
  const int m = 2 * epochs / 3;
  if (m >= 1 && m < epochs) return {m};
  return {};
}

double TrainSpec::lr_at_epoch(int epoch) const {
  double v = lr;
  for (int m : effective_milestones()) {
    if (epoch >= m) v *= lr_decay_factor;
  }
  return v;
}

namespace {

Tensor stack_batch(const Dataset& ds, const std::vector<int>& indices, bool do_augment,
                   uint64_t seed, int epoch, int batch_index) {
  const Tensor& first = ds.train[static_cast<size_t>(indices.front())].image;
  Tensor images({static_cast<int>(indices.size()), first.dim(0), first.dim(1), first.dim(2)});
  for (size_t s = 0; s < indices.size(); ++s) {
    const Tensor& img = ds.train[static_cast<size_t>(indices[s])].image;
    if (do_augment) {
      Tensor aug = augment(img, derive_seed(seed, {seed_tag::augment, static_cast<uint64_t>(epoch),
                                                   static_cast<uint64_t>(batch_index),
                                                   static_cast<uint64_t>(s)}));
      std::copy(aug.data.begin(), aug.data.end(), images.data.begin() + s * static_cast<size_t>(img.numel()));
    } else {
      std::copy(img.data.begin(), img.data.end(), images.data.begin() + s * static_cast<size_t>(img.numel()));
    }
  }
  return images;
}

double validation_accuracy(Model& model, const Dataset& ds, const std::vector<int>& val_indices) {
  if (val_indices.empty()) return -1.0;
  int correct = 0;
  constexpr int kChunk = 32;
  for (size_t begin = 0; begin < val_indices.size(); begin += kChunk) {
    const size_t end = std::min(val_indices.size(), begin + kChunk);
    std::vector<int> chunk(val_indices.begin() + static_cast<std::ptrdiff_t>(begin),
                           val_indices.begin() + static_cast<std::ptrdiff_t>(end));
    Tensor images = stack_batch(ds, chunk, false, 0, 0, 0);
    Model::Forward fwd = model.forward(images, Mode::kEval);
    // Branch ensemble: argmax of summed branch logits.
    Tensor sum = fwd.branch_logits.front();
    for (size_t b = 1; b < fwd.branch_logits.size(); ++b) {
      for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += fwd.branch_logits[b].data[i];
    }
    for (size_t s = 0; s < chunk.size(); ++s) {
      int arg = 0;
      for (int k = 1; k < sum.dim(1); ++k) {
        if (sum(static_cast<int>(s), k) > sum(static_cast<int>(s), arg)) arg = k;
      }
      if (arg == ds.train[static_cast<size_t>(chunk[s])].identity) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(val_indices.size());
}

}  // namespace

TrainResult train(const ModelSpec& model_spec, const Dataset& ds, const TrainSpec& spec) {
  if (spec.lr < 0.0) throw ConfigError("train: lr must be >= 0");
  ModelSpec ms = model_spec;
  ms.head.n_id = ds.n_train_ids();
  ms.validate();

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res;
  res.model = std::make_unique<Model>(ms, spec.seed);

  // Optional held-out image split (same identities) for classification
  // accuracy curves.
  std::vector<int> train_subset, val_indices;
  if (spec.val_fraction > 0.0) {
    Rng rng(derive_seed(spec.seed, {kValSplitTag}));
    std::vector<std::vector<int>> by_id(static_cast<size_t>(ds.n_train_ids()));
    for (size_t i = 0; i < ds.train.size(); ++i) {
      by_id[static_cast<size_t>(ds.train[i].identity)].push_back(static_cast<int>(i));
    }
    for (auto& group : by_id) {
      rng.shuffle(group);
      const int n_val = static_cast<int>(std::floor(spec.val_fraction * static_cast<double>(group.size())));
      for (size_t j = 0; j < group.size(); ++j) {
        (static_cast<int>(j) < n_val ? val_indices : train_subset).push_back(group[j]);
      }
    }
    std::sort(train_subset.begin(), train_subset.end());
    std::sort(val_indices.begin(), val_indices.end());
  }

  PkSampler sampler(ds, spec.pk, spec.seed, train_subset, ds.spec.label_corruption > 0.0);
  const bool use_cls = spec.loss_mode != LossMode::kTriplet;
  const bool use_tri = spec.loss_mode != LossMode::kClassification;
  std::vector<ParamTensor*> params = res.model->params();

  int global_step = 0;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const double lr = spec.lr_at_epoch(epoch);
    const std::vector<std::vector<int>> batches = sampler.epoch_batches(epoch);
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const std::vector<int>& batch = batches[bi];
      Tensor images = stack_batch(ds, batch, spec.augment, spec.seed, epoch, static_cast<int>(bi));
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (int idx : batch) labels.push_back(ds.train[static_cast<size_t>(idx)].identity);

      res.model->zero_grad();
      Model::Forward fwd = res.model->forward(images, Mode::kTrain);

      double total = 0.0;
      std::vector<double> branch_losses;
      std::vector<Tensor> grad_logits, grad_groups, grad_stripes;

      if (use_cls) {
        HeadLossResult hl = head_loss(fwd.branch_logits, labels);
        total += hl.total;
        branch_losses = hl.per_branch;
        grad_logits = std::move(hl.grad_logits);
      }
      if (use_tri) {
        // Batch-hard loss drives the standard-setting descriptor: the
        // concatenation of all transformed groups (plus stripes).
        std::vector<Tensor> parts = fwd.descriptors.groups;
        for (const Tensor& s : fwd.descriptors.stripes) parts.push_back(s);
        Tensor embedding = concat_columns(parts);
        TripletResult tr = triplet_hard_loss(embedding, labels, spec.triplet);
        total += tr.loss;
        branch_losses.push_back(tr.loss);
        const int d = fwd.descriptors.dim;
        const int b = embedding.dim(0);
        const int n_groups = static_cast<int>(fwd.descriptors.groups.size());
        const int n_parts = static_cast<int>(parts.size());
        for (int pi = 0; pi < n_parts; ++pi) {
          Tensor g({b, d});
          for (int r = 0; r < b; ++r) {
            for (int j = 0; j < d; ++j) g(r, j) = tr.grad_embeddings(r, pi * d + j);
          }
          if (pi < n_groups) {
            grad_groups.push_back(std::move(g));
          } else {
            grad_stripes.push_back(std::move(g));
          }
        }
      }

      if (!std::isfinite(total) || total > kLossCeiling) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + " step " +
                              std::to_string(global_step) + ": loss = " + std::to_string(total));
      }

      res.model->backward(grad_logits, grad_groups, grad_stripes);
      sgd_step(params, lr, spec.momentum, spec.weight_decay);

      StepLog sl;
      sl.step = global_step++;
      sl.epoch = epoch;
      sl.total_loss = total;
      sl.branch_losses = std::move(branch_losses);
      sl.lr = lr;
      res.log.steps.push_back(std::move(sl));
    }

    if (spec.eval_every > 0 && (epoch + 1) % spec.eval_every == 0) {
      EvalSnapshot snap;
      snap.epoch = epoch;
      snap.report = evaluate_setting(*res.model, ds, InferenceSetting{});
      snap.val_accuracy = validation_accuracy(*res.model, ds, val_indices);
      res.log.evals.push_back(std::move(snap));
    }
  }

  res.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::string train_log_to_jsonl(const TrainLog& log) {
  std::string out = nlohmann::json{{"type", "meta"}, {"schema_version", 1}}.dump();
  out += '\n';
  for (const StepLog& s : log.steps) {
    nlohmann::json j{{"type", "step"},
                     {"step", s.step},
                     {"epoch", s.epoch},
                     {"total_loss", s.total_loss},
                     {"branch_losses", s.branch_losses},
                     {"lr", s.lr}};
    out += j.dump();
    out += '\n';
  }
  for (const EvalSnapshot& e : log.evals) {
    nlohmann::json j{{"type", "eval"}, {"epoch", e.epoch}};
    j["report"] = nlohmann::json::parse(eval_report_to_json(e.report));
    if (e.val_accuracy >= 0.0) j["val_accuracy"] = e.val_accuracy;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<GridCell> CompareSpec::cells() const {
  std::vector<GridCell> out;
  std::set<std::tuple<int, int, bool>> seen;
  for (Variant v : variants) {
    for (int nc : n_c_list) {
      for (bool sh : shared_flags) {
        HeadSpec h;
        h.variant = v;
        h.n_c = nc;
        h.shared_embed = sh;
        const HeadSpec n = h.normalized();
        const auto key = std::make_tuple(static_cast<int>(v), n.n_c, n.shared_embed);
        if (seen.insert(key).second) out.push_back({v, n.n_c, n.shared_embed});
      }
    }
  }
  return out;
}

std::vector<GridCellResult> compare_variants(const CompareSpec& spec, const ModelSpec& base,
                                             const Dataset& ds) {
  const std::vector<GridCell> cells = spec.cells();
  if (cells.empty()) throw ConfigError("compare: empty grid");
  if (spec.seeds.empty()) throw ConfigError("compare: at least one seed required");

  std::vector<GridCellResult> results(cells.size());
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    results[ci].cell = cells[ci];
    results[ci].rank1_runs.assign(spec.seeds.size(), 0.0);
    results[ci].map_runs.assign(spec.seeds.size(), 0.0);
  }

  struct Task {
    size_t cell;
    size_t seed;
  };
  std::vector<Task> tasks;
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    for (size_t si = 0; si < spec.seeds.size(); ++si) tasks.push_back({ci, si});
  }

  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      try {
        const Task& task = tasks[t];
        ModelSpec ms = base;
        ms.head.variant = cells[task.cell].variant;
        ms.head.n_c = cells[task.cell].n_c;
        ms.head.shared_embed = cells[task.cell].shared;
        TrainSpec budget = spec.budget;
        budget.seed = spec.seeds[task.seed];
        budget.eval_every = 0;
        TrainResult tr = train(ms, ds, budget);
        EvalReport rep = evaluate_setting(*tr.model, ds, InferenceSetting{}, spec.k_max);
        results[task.cell].rank1_runs[task.seed] = rep.rank1();
        results[task.cell].map_runs[task.seed] = rep.map;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (GridCellResult& r : results) {
    auto stats = [](const std::vector<double>& xs) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
      return std::make_pair(mean, sd);
    };
    std::tie(r.rank1_mean, r.rank1_sd) = stats(r.rank1_runs);
    std::tie(r.map_mean, r.map_sd) = stats(r.map_runs);
  }
  return results;
}

std::string grid_to_json(const CompareSpec& spec, const std::vector<GridCellResult>& results) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["setting"] = "standard";
  j["seeds"] = spec.seeds;
  j["budget"] = json_util::to_json(spec.budget);
  j["budget"].erase("seed");
  nlohmann::json cells = nlohmann::json::array();
  for (const GridCellResult& r : results) {
    cells.push_back(nlohmann::json{{"variant", variant_name(r.cell.variant)},
                                   {"n_c", r.cell.n_c},
                                   {"shared", r.cell.shared},
                                   {"rank1_mean", r.rank1_mean},
                                   {"rank1_sd", r.rank1_sd},
                                   {"map_mean", r.map_mean},
                                   {"map_sd", r.map_sd},
                                   {"rank1_runs", r.rank1_runs},
                                   {"map_runs", r.map_runs}});
  }
  j["cells"] = cells;
  return j.dump(2);
}

}  // namespace cgreid
