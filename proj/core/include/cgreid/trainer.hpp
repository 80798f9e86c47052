#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgreid/evalmetrics.hpp"
#include "cgreid/model.hpp"
#include "cgreid/synth.hpp"
#include "cgreid/triplet.hpp"

namespace cgreid {

enum class LossMode { kClassification, kTriplet, kBoth };

std::string loss_mode_name(LossMode m);
LossMode loss_mode_from_name(const std::string& name);

struct TrainSpec {
  int epochs = 40;
  double lr = 0.01;
  double lr_decay_factor = 0.1;
  std::vector<int> lr_milestones;  // defaults to {2*epochs/3} when empty
  double momentum = 0.9;
  double weight_decay = 5e-4;
  PkBatchSpec pk;
  LossMode loss_mode = LossMode::kClassification;
  bool augment = true;
  uint64_t seed = 1;
  int eval_every = 0;        // epochs between retrieval snapshots; 0 disables
  double val_fraction = 0.0; // held-out fraction of train images for
                             // classification-accuracy curves
  TripletConfig triplet;

  void validate() const;
  std::vector<int> effective_milestones() const;
  double lr_at_epoch(int epoch) const;
};

struct StepLog {
  int step = 0;
  int epoch = 0;
  double total_loss = 0.0;
  std::vector<double> branch_losses;
  double lr = 0.0;
};

struct EvalSnapshot {
  int epoch = 0;
  EvalReport report;
  double val_accuracy = -1.0;  // -1 when no validation split configured
};

struct TrainLog {
  std::vector<StepLog> steps;
  std::vector<EvalSnapshot> evals;
  double wall_seconds = 0.0;  // informational; not part of the on-disk log
};

struct TrainResult {
  std::unique_ptr<Model> model;
  TrainLog log;
};

// Deterministic training loop: PK sampling with augmentation, Eq-style
// summed branch losses in classification mode, batch-hard triplet on the
// concatenated descriptor in triplet mode, their sum in both mode.
TrainResult train(const ModelSpec& model_spec, const Dataset& ds, const TrainSpec& spec);

// JSON-lines serialization of the deterministic log content (wall time is
// deliberately excluded so identical runs produce identical files).
std::string train_log_to_jsonl(const TrainLog& log);

// --- variant comparison grid -------------------------------------------

struct GridCell {
  Variant variant = Variant::A;
  int n_c = 8;
  bool shared = true;
};

struct GridCellResult {
  GridCell cell;
  std::vector<double> rank1_runs;
  std::vector<double> map_runs;
  double rank1_mean = 0.0, rank1_sd = 0.0;
  double map_mean = 0.0, map_sd = 0.0;
};

struct CompareSpec {
  std::vector<Variant> variants{Variant::A, Variant::B, Variant::C, Variant::D, Variant::E};
  std::vector<int> n_c_list{8};
  std::vector<bool> shared_flags{true};
  std::vector<uint64_t> seeds{1, 2, 3};
  TrainSpec budget;          // seed field is overridden per run
  int k_max = 20;
  int jobs = 1;

  // Cross product with per-variant normalization and deduplication.
  std::vector<GridCell> cells() const;
};

// Trains every cell once per seed on the shared dataset and budget,
// evaluating the standard setting. Cells run on `jobs` workers; results
// are independent of the worker count.
std::vector<GridCellResult> compare_variants(const CompareSpec& spec, const ModelSpec& base,
                                             const Dataset& ds);

std::string grid_to_json(const CompareSpec& spec, const std::vector<GridCellResult>& results);

}  // namespace cgreid
