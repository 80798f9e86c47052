// Acceptance suite: one pass/fail line per criterion, exit code equals the
// number of failures. Training-based criteria share a cache of seeded runs
// executed on a small worker pool (--jobs N, default 2).

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "cgreid/checkpoint.hpp"
#include "cgreid/commands.hpp"
#include "cgreid/config.hpp"
#include "gradsuite.hpp"
#include "testutil.hpp"

using namespace cgreid;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << " (" << name << "): "
            << detail << "\n";
  if (!pass) ++g_failures;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// criterion 1: gradient suite
// ---------------------------------------------------------------------------

void criterion_1() {
  const double t0 = now_seconds();
  bool pass = true;
  std::string worst_desc;
  double worst = 0.0;

  for (const auto& r : gradsuite::run_per_op_suite(20, 0xACCE97)) {
    if (r.worst_rel >= 1e-5) pass = false;
    if (r.worst_rel > worst) {
      worst = r.worst_rel;
      worst_desc = r.op;
    }
  }
  for (const auto& r : gradsuite::run_composite_suite(3, 0xACCE98)) {
    if (r.worst_rel >= 1e-4) pass = false;
    if (r.worst_rel > worst) {
      worst = r.worst_rel;
      worst_desc = r.op;
    }
  }
  const double dt = now_seconds() - t0;
  if (dt >= 60.0) pass = false;
  report(1, "gradient suite", pass,
         "worst rel err " + fmt(worst, 9) + " at " + worst_desc + ", " + fmt(dt, 1) + " s (< 60 s)");
}

// ---------------------------------------------------------------------------
// criterion 2: exact structural identities
// ---------------------------------------------------------------------------

void criterion_2() {
  bool pass = true;
  std::string detail;

  // partition / reconstruction, bitwise
  {
    Rng rng(202);
    for (int n_c : {1, 2, 4, 8, 16, 32}) {
      Tensor f = testutil::random_tensor({6, 64}, rng);
      Tensor back = concat_columns(slice_channel_groups(f, n_c));
      if (back.data != f.data) {
        pass = false;
        detail += " partition(n_c=" + std::to_string(n_c) + ") not bitwise;";
      }
    }
  }

  // loss additivity within 1e-12
  {
    Rng rng(203);
    std::vector<Tensor> logits;
    for (int i = 0; i < 5; ++i) logits.push_back(testutil::random_tensor({6, 9}, rng));
    std::vector<int> labels{0, 3, 8, 2, 5, 1};
    HeadLossResult hl = head_loss(logits, labels);
    double sum = 0.0;
    for (double b : hl.per_branch) sum += b;
    if (std::abs(hl.total - sum) > 1e-12) {
      pass = false;
      detail += " loss additivity violated;";
    }
  }

  // variant A(n_c=1) and variant B: bitwise identical forward, loss, grads
  {
    ModelSpec base;
    base.backbone.stage_channels = {4, 8};
    base.backbone.stage_strides = {2, 1};
    base.head.c_total = 8;
    base.head.embed_dim = 4;
    base.head.n_id = 4;
    ModelSpec sa = base, sb = base;
    sa.head.variant = Variant::A;
    sa.head.n_c = 1;
    sb.head.variant = Variant::B;
    sb.head.n_c = 1;
    Model ma(sa, 4242), mb(sb, 4242);

    Rng rng(204);
    Tensor images = testutil::random_tensor({4, 3, 8, 8}, rng, 0.0, 1.0);
    std::vector<int> labels{0, 1, 2, 3};
    Model::Forward fa = ma.forward(images, Mode::kTrain);
    Model::Forward fb = mb.forward(images, Mode::kTrain);
    HeadLossResult la = head_loss(fa.branch_logits, labels);
    HeadLossResult lb = head_loss(fb.branch_logits, labels);
    ma.backward(la.grad_logits, {}, {});
    mb.backward(lb.grad_logits, {}, {});

    bool same = la.total == lb.total &&
                fa.branch_logits[0].data == fb.branch_logits[0].data &&
                fa.descriptors.groups[0].data == fb.descriptors.groups[0].data;
    auto pa = ma.params(), pb = mb.params();
    same = same && pa.size() == pb.size();
    for (size_t i = 0; same && i < pa.size(); ++i) same = pa[i]->grad.data == pb[i]->grad.data;
    if (!same) {
      pass = false;
      detail += " A(1) != B bitwise;";
    }
  }

  // squared distance decomposition within 1e-12
  {
    Rng rng(205);
    const int d = 8, n_c = 8;
    DescriptorMatrix qd, gd;
    qd.dim = gd.dim = d;
    for (int i = 0; i < n_c; ++i) {
      qd.groups.push_back(testutil::random_tensor({5, d}, rng));
      gd.groups.push_back(testutil::random_tensor({7, d}, rng));
    }
    RetrievalMeta qm, gm;
    for (int i = 0; i < 5; ++i) {
      qm.identities.push_back(i);
      qm.cameras.push_back(0);
    }
    for (int j = 0; j < 7; ++j) {
      gm.identities.push_back(j);
      gm.cameras.push_back(1);
    }
    Tensor qs = infer_descriptors(qd, InferenceSetting{}, nullptr);
    Tensor gs = infer_descriptors(gd, InferenceSetting{}, nullptr);
    DistanceMatrix full = distance_matrix(qs, gs, qm, gm);
    std::vector<DistanceMatrix> parts;
    for (int i = 0; i < n_c; ++i) parts.push_back(distance_matrix(qd.groups[i], gd.groups[i], qm, gm));
    for (int i = 0; i < 5 && pass; ++i) {
      for (int j = 0; j < 7; ++j) {
        double sum_sq = 0.0;
        for (int g = 0; g < n_c; ++g) sum_sq += parts[g].at(i, j) * parts[g].at(i, j);
        if (std::abs(full.at(i, j) * full.at(i, j) - sum_sq) > 1e-12) {
          pass = false;
          detail += " distance decomposition violated;";
          break;
        }
      }
    }
  }

  // parameter-count sharing laws, exact
  {
    auto spec = [](Variant v, int n_c, bool shared) {
      HeadSpec s;
      s.variant = v;
      s.n_c = n_c;
      s.c_total = 64;
      s.embed_dim = 16;
      s.n_id = 32;
      s.shared_embed = shared;
      return s;
    };
    const int64_t shared_embed_block = head_param_count(spec(Variant::A, 1, true)) -
                                       (16LL * 32 + 32);  // minus one classifier
    bool laws = true;
    for (int n_c : {2, 4, 8}) {
      const int64_t cls = static_cast<int64_t>(n_c) * (16LL * 32 + 32);
      const int64_t embed_one = (64LL / n_c) * 16 + 16 + 32;
      laws = laws && head_param_count(spec(Variant::A, n_c, true)) == embed_one + cls;
      laws = laws && head_param_count(spec(Variant::A, n_c, false)) == n_c * embed_one + cls;
    }
    laws = laws && head_param_count(spec(Variant::B, 1, true)) == head_param_count(spec(Variant::A, 1, true));
    laws = laws && shared_embed_block == 64LL * 16 + 16 + 32;
    if (!laws) {
      pass = false;
      detail += " param_count laws violated;";
    }
  }

  report(2, "structural identities", pass, pass ? "partition, additivity, A(1)=B, distance sum, param laws all exact" : detail);
}

// ---------------------------------------------------------------------------
// criterion 3: metric oracle
// ---------------------------------------------------------------------------

void criterion_3() {
  Rng rng(303);
  bool pass = true;
  int checked = 0;
  double worst = 0.0;

  for (int trial = 0; trial < 120; ++trial) {
    const int q = 1 + rng.uniform_int(8), g = 2 + rng.uniform_int(31);
    DistanceMatrix dm;
    dm.q = q;
    dm.g = g;
    dm.values.resize(static_cast<size_t>(q) * g);
    for (double& v : dm.values) v = rng.uniform();
    for (int i = 0; i < q; ++i) {
      dm.query_meta.identities.push_back(rng.uniform_int(5));
      dm.query_meta.cameras.push_back(rng.uniform_int(2));
    }
    for (int j = 0; j < g; ++j) {
      dm.gallery_meta.identities.push_back(rng.uniform_int(5));
      dm.gallery_meta.cameras.push_back(rng.uniform_int(2));
    }
    const int k_max = std::min(20, g);
    EvalReport rep = cmc_map(dm, k_max);

    std::vector<std::vector<double>> dist(static_cast<size_t>(q), std::vector<double>(static_cast<size_t>(g)));
    std::vector<std::vector<char>> valid(static_cast<size_t>(q), std::vector<char>(static_cast<size_t>(g)));
    std::vector<std::vector<char>> correct(static_cast<size_t>(q), std::vector<char>(static_cast<size_t>(g)));
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < g; ++j) {
        dist[i][j] = dm.at(i, j);
        const bool same_id = dm.query_meta.identities[i] == dm.gallery_meta.identities[j];
        const bool same_cam = dm.query_meta.cameras[i] == dm.gallery_meta.cameras[j];
        valid[i][j] = !(same_id && same_cam);
        correct[i][j] = same_id;
      }
    }
    testutil::BruteRetrieval want = testutil::brute_cmc_map(dist, valid, correct, k_max);
    if (rep.num_queries != want.counted || rep.num_excluded_queries != want.excluded) pass = false;
    worst = std::max(worst, std::abs(rep.map - want.map));
    for (int k = 0; k < k_max; ++k) worst = std::max(worst, std::abs(rep.cmc[k] - want.cmc[k]));
    ++checked;

    // the ranking core against fully random (mask, correctness) patterns
    std::vector<std::vector<int>> rankings;
    for (int i = 0; i < q; ++i) rankings.push_back(rank_list(dm, i));
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < g; ++j) {
        valid[i][j] = rng.bernoulli(0.8);
        correct[i][j] = rng.bernoulli(0.3);
      }
    }
    EvalReport rep2 = cmc_map_from_rankings(rankings, valid, correct, k_max);
    testutil::BruteRetrieval want2 = testutil::brute_cmc_map(dist, valid, correct, k_max);
    if (rep2.num_queries != want2.counted || rep2.num_excluded_queries != want2.excluded) pass = false;
    worst = std::max(worst, std::abs(rep2.map - want2.map));
    for (int k = 0; k < k_max; ++k) worst = std::max(worst, std::abs(rep2.cmc[k] - want2.cmc[k]));
  }
  if (worst >= 1e-12) pass = false;

  // perfect retrieval scores exactly 1.0
  {
    Tensor desc = testutil::random_tensor({6, 5}, rng);
    RetrievalMeta qm, gm;
    for (int i = 0; i < 6; ++i) {
      qm.identities.push_back(i);
      qm.cameras.push_back(0);
      gm.identities.push_back(i);
      gm.cameras.push_back(1);
    }
    EvalReport rep = cmc_map(distance_matrix(desc, desc, qm, gm), 6);
    if (rep.rank1() != 1.0 || rep.map != 1.0) pass = false;
  }

  report(3, "metric oracle", pass,
         std::to_string(checked) + " random matrices x2 mask regimes, worst |err| = " + fmt(worst, 15) +
             ", perfect retrieval exact");
}

// ---------------------------------------------------------------------------
// criterion 4: triplet baseline oracle
// ---------------------------------------------------------------------------

void criterion_4() {
  Rng rng(404);
  bool pass = true;
  double worst = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const int p = 4, k = 4;
    Tensor emb = testutil::random_tensor({p * k, 6}, rng);
    std::vector<int> labels;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < k; ++j) labels.push_back(i);
    }
    TripletResult got = triplet_hard_loss(emb, labels, TripletConfig{});
    testutil::BruteTriplet want = testutil::brute_triplet_hard(emb, labels, 0.3);
    worst = std::max(worst, std::abs(got.loss - want.loss));
    if (got.hardest_positive != want.hardest_positive || got.hardest_negative != want.hardest_negative) {
      pass = false;
    }
  }
  if (worst >= 1e-12) pass = false;

  double worst_inv = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor emb = testutil::random_tensor({8, 3}, rng);
    std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
    const double base = triplet_hard_loss(emb, labels, TripletConfig{}).loss;

    Tensor shifted = emb;
    const double tx = rng.uniform(-5, 5), ty = rng.uniform(-5, 5), tz = rng.uniform(-5, 5);
    for (int i = 0; i < 8; ++i) {
      shifted(i, 0) += tx;
      shifted(i, 1) += ty;
      shifted(i, 2) += tz;
    }
    worst_inv = std::max(worst_inv, std::abs(triplet_hard_loss(shifted, labels, TripletConfig{}).loss - base));

    const double th = rng.uniform(0, 6.28);
    Tensor rotated({8, 3});
    for (int i = 0; i < 8; ++i) {
      rotated(i, 0) = std::cos(th) * emb(i, 0) - std::sin(th) * emb(i, 1);
      rotated(i, 1) = std::sin(th) * emb(i, 0) + std::cos(th) * emb(i, 1);
      rotated(i, 2) = emb(i, 2);
    }
    worst_inv = std::max(worst_inv, std::abs(triplet_hard_loss(rotated, labels, TripletConfig{}).loss - base));
  }
  if (worst_inv >= 1e-9) pass = false;

  report(4, "triplet oracle", pass,
         "100 exhaustive P=4,K=4 batches, worst |err| = " + fmt(worst, 15) +
             "; invariance worst = " + fmt(worst_inv, 12));
}

// ---------------------------------------------------------------------------
// training run cache for criteria 5-7, 9
// ---------------------------------------------------------------------------

struct RunKey {
  Variant variant;
  int n_c;
  bool shared;
  LossMode loss;
  bool corrupt;
  uint64_t seed;

  bool operator<(const RunKey& o) const {
    return std::tie(variant, n_c, shared, loss, corrupt, seed) <
           std::tie(o.variant, o.n_c, o.shared, o.loss, o.corrupt, o.seed);
  }
};

struct RunOutcome {
  double rank1_standard = 0.0;
  double map_standard = 0.0;
  double rank1_fast0 = -1.0;
  double rank1_voting = -1.0;
  int ops_standard = 0;
  int ops_fast = 0;
  double train_seconds = 0.0;
};

constexpr uint64_t kDataSeed = 777;
const std::vector<uint64_t> kSeeds{1, 2, 3};

SynthSpec accept_data_spec(bool corrupt) {
  SynthSpec s;  // the default desk-scale benchmark
  s.seed = kDataSeed;
  if (corrupt) s.label_corruption = 0.10;
  return s;
}

TrainSpec accept_budget() {
  TrainSpec t;
  t.epochs = 150;
  t.lr = 0.005;
  t.momentum = 0.9;
  t.weight_decay = 5e-4;
  t.pk = {8, 4};
  return t;
}

// Grouped heads lift each C/n_c-channel slice twofold; ungrouped heads get
// the full square transform. Every cell's standard descriptor then carries
// the same information budget (rank <= C), so the grid compares supervision
// structure rather than descriptor width.
int accept_embed_dim(Variant v, int n_c) {
  const int c = 64;
  switch (v) {
    case Variant::A:
    case Variant::C:
      return 2 * (c / n_c);
    case Variant::B:
    case Variant::D:
    case Variant::E:
      return c;
  }
  return c;
}

ModelSpec accept_model(Variant v, int n_c, bool shared, LossMode) {
  ModelSpec ms;  // default backbone: [16, 32, 64], last stride 1
  ms.head.variant = v;
  ms.head.n_c = n_c;
  ms.head.c_total = 64;
  ms.head.embed_dim = accept_embed_dim(v, n_c);
  ms.head.shared_embed = shared;
  return ms;
}

void run_key_batch(const std::vector<RunKey>& keys, const Dataset& clean, const Dataset& corrupt,
                   int jobs, std::map<RunKey, RunOutcome>& result) {
  std::vector<RunOutcome> outcomes(keys.size());
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;

  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= keys.size()) return;
      try {
        const RunKey& key = keys[i];
        const Dataset& ds = key.corrupt ? corrupt : clean;
        ModelSpec ms = accept_model(key.variant, key.n_c, key.shared, key.loss);
        TrainSpec budget = accept_budget();
        budget.loss_mode = key.loss;
        budget.seed = key.seed;
        const double rt0 = now_seconds();
        TrainResult tr = train(ms, ds, budget);
        RunOutcome& out = outcomes[i];
        out.train_seconds = now_seconds() - rt0;
        EvalReport std_rep = evaluate_setting(*tr.model, ds, InferenceSetting{}, 20);
        out.rank1_standard = std_rep.rank1();
        out.map_standard = std_rep.map;
        out.ops_standard = std_rep.distance_ops_per_pair;
        if (key.variant == Variant::A && key.n_c == 8 && key.shared &&
            key.loss == LossMode::kClassification && !key.corrupt) {
          EvalReport fast = evaluate_setting(*tr.model, ds, InferenceSetting::parse("fast:0"), 20);
          EvalReport voting = evaluate_setting(*tr.model, ds, InferenceSetting::parse("voting"), 20);
          out.rank1_fast0 = fast.rank1();
          out.rank1_voting = voting.rank1();
          out.ops_fast = fast.distance_ops_per_pair;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < std::max(1, jobs); ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  for (size_t i = 0; i < keys.size(); ++i) result[keys[i]] = outcomes[i];
}

// Phase one is exactly the criterion-5 grid and is timed against its
// 15-minute budget; phase two adds the sharing and robustness cells.
std::map<RunKey, RunOutcome> run_training_grid(int jobs, double* trend_wall_out) {
  auto add = [](std::vector<RunKey>& keys, Variant v, int n_c, bool shared, LossMode loss,
                bool corrupt) {
    for (uint64_t s : kSeeds) keys.push_back({v, n_c, shared, loss, corrupt, s});
  };

  std::vector<RunKey> trend_keys;
  add(trend_keys, Variant::A, 8, true, LossMode::kClassification, false);
  add(trend_keys, Variant::B, 1, true, LossMode::kClassification, false);
  add(trend_keys, Variant::C, 8, false, LossMode::kClassification, false);
  add(trend_keys, Variant::D, 8, true, LossMode::kClassification, false);

  std::vector<RunKey> extra_keys;
  add(extra_keys, Variant::A, 4, true, LossMode::kClassification, false);
  add(extra_keys, Variant::A, 4, false, LossMode::kClassification, false);
  add(extra_keys, Variant::A, 8, false, LossMode::kClassification, false);
  add(extra_keys, Variant::A, 8, true, LossMode::kTriplet, false);
  add(extra_keys, Variant::A, 8, true, LossMode::kClassification, true);
  add(extra_keys, Variant::A, 8, true, LossMode::kTriplet, true);

  const Dataset clean = generate_dataset(accept_data_spec(false));
  const Dataset corrupt = generate_dataset(accept_data_spec(true));

  std::map<RunKey, RunOutcome> result;
  const double t0 = now_seconds();
  run_key_batch(trend_keys, clean, corrupt, jobs, result);
  *trend_wall_out = now_seconds() - t0;
  run_key_batch(extra_keys, clean, corrupt, jobs, result);
  return result;
}

double mean_rank1(const std::map<RunKey, RunOutcome>& runs, Variant v, int n_c, bool shared,
                  LossMode loss, bool corrupt) {
  double acc = 0.0;
  for (uint64_t s : kSeeds) acc += runs.at({v, n_c, shared, loss, corrupt, s}).rank1_standard;
  return acc / static_cast<double>(kSeeds.size());
}

// Frozen seeded regression values, captured from the first verified run of
// this suite on the fixed seeds above. A drift beyond 1e-9 means the
// seeded pipeline changed.
constexpr bool kHaveFrozenValues = false;
const std::map<std::string, double> kFrozenMeanRank1 = {};

void criteria_5_6_7_9(int jobs) {
  double wall = 0.0;
  std::map<RunKey, RunOutcome> runs;
  try {
    runs = run_training_grid(jobs, &wall);
  } catch (const std::exception& e) {
    report(5, "directional trend", false, std::string("training grid failed: ") + e.what());
    report(6, "sharing trend", false, "training grid failed");
    report(7, "inference-cost accounting", false, "training grid failed");
    report(9, "robustness probe", false, "training grid failed");
    return;
  }

  const double a8 = mean_rank1(runs, Variant::A, 8, true, LossMode::kClassification, false);
  const double b = mean_rank1(runs, Variant::B, 1, true, LossMode::kClassification, false);
  const double c8 = mean_rank1(runs, Variant::C, 8, false, LossMode::kClassification, false);
  const double d8 = mean_rank1(runs, Variant::D, 8, true, LossMode::kClassification, false);

  // criterion 5
  {
    bool pass = a8 > d8 && d8 > b;
    pass = pass && (a8 - b >= 0.03);
    pass = pass && (d8 - b >= 0.01);
    pass = pass && (c8 - b < a8 - b);
    pass = pass && wall < 900.0;
    std::string detail = "mean Rank-1: A(8,sh)=" + fmt(a8) + " D=" + fmt(d8) + " C=" + fmt(c8) +
                         " B=" + fmt(b) + "; grid wall " + fmt(wall, 1) + " s";
    if (kHaveFrozenValues) {
      auto check_frozen = [&](const char* name, double v) {
        auto it = kFrozenMeanRank1.find(name);
        if (it == kFrozenMeanRank1.end() || std::abs(it->second - v) > 1e-9) {
          pass = false;
          detail += std::string(" frozen mismatch at ") + name + " (got " + fmt(v, 9) + ")";
        }
      };
      check_frozen("A8_shared", a8);
      check_frozen("B", b);
      check_frozen("C8", c8);
      check_frozen("D8", d8);
    } else {
      detail += " [frozen values not yet recorded: A8=" + fmt(a8, 9) + " B=" + fmt(b, 9) +
                " C8=" + fmt(c8, 9) + " D8=" + fmt(d8, 9) + "]";
    }
    report(5, "directional trend", pass, detail);
  }

  // criterion 6
  {
    const double a4s = mean_rank1(runs, Variant::A, 4, true, LossMode::kClassification, false);
    const double a4u = mean_rank1(runs, Variant::A, 4, false, LossMode::kClassification, false);
    const double a8u = mean_rank1(runs, Variant::A, 8, false, LossMode::kClassification, false);
    const bool pass = a4s >= a4u - 0.005 && a8 >= a8u - 0.005;
    report(6, "sharing trend", pass,
           "n_c=4 shared " + fmt(a4s) + " vs unshared " + fmt(a4u) + "; n_c=8 shared " + fmt(a8) +
               " vs unshared " + fmt(a8u) + " (ties within 0.5 pt allowed)");
  }

  // criterion 7
  {
    double fast_mean = 0.0, voting_mean = 0.0;
    bool ops_ok = true;
    for (uint64_t s : kSeeds) {
      const RunOutcome& out = runs.at({Variant::A, 8, true, LossMode::kClassification, false, s});
      fast_mean += out.rank1_fast0;
      voting_mean += out.rank1_voting;
      ops_ok = ops_ok && out.ops_fast * 8 == out.ops_standard;
    }
    fast_mean /= static_cast<double>(kSeeds.size());
    voting_mean /= static_cast<double>(kSeeds.size());
    bool pass = ops_ok;
    pass = pass && std::abs(fast_mean - a8) <= 0.05;
    pass = pass && voting_mean >= a8 - 0.005;
    report(7, "inference-cost accounting", pass,
           "ops fast = standard/8 " + std::string(ops_ok ? "exact" : "VIOLATED") + "; Rank-1 standard " +
               fmt(a8) + ", fast " + fmt(fast_mean) + ", voting " + fmt(voting_mean));
  }

  // criterion 9
  {
    const double cls_clean = a8;
    const double cls_corrupt = mean_rank1(runs, Variant::A, 8, true, LossMode::kClassification, true);
    const double tri_clean = mean_rank1(runs, Variant::A, 8, true, LossMode::kTriplet, false);
    const double tri_corrupt = mean_rank1(runs, Variant::A, 8, true, LossMode::kTriplet, true);
    const double deg_cls = cls_clean - cls_corrupt;
    const double deg_tri = tri_clean - tri_corrupt;
    const bool pass = deg_cls <= deg_tri;
    report(9, "robustness probe", pass,
           "Rank-1 degradation under 10% label noise: classification " + fmt(deg_cls) + " (" +
               fmt(cls_clean) + " -> " + fmt(cls_corrupt) + "), triplet " + fmt(deg_tri) + " (" +
               fmt(tri_clean) + " -> " + fmt(tri_corrupt) + ")");
  }
}

// ---------------------------------------------------------------------------
// criterion 8: bitwise pipeline determinism
// ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void criterion_8() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "cgreid_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);

  const std::string config_text = R"({
    "seed": 99,
    "data": {"n_train_ids": 8, "n_test_ids": 4, "images_per_id": 4, "test_images_per_id": 4,
             "height": 32, "width": 16},
    "backbone": {"stage_channels": [8, 16], "stage_strides": [2, 1], "last_stride": 1},
    "head": {"variant": "A", "n_c": 4, "embed_dim": 8},
    "train": {"epochs": 3, "lr": 0.02, "p": 4, "k": 4}
  })";

  bool pass = true;
  std::string detail;
  try {
    RunConfig cfg = parse_config_json(config_text);
    std::vector<std::string> eval_lines(2);
    for (int round = 0; round < 2; ++round) {
      const fs::path dir = root / ("round" + std::to_string(round));
      cmd_gen_data(cfg, (dir / "data").string());
      cmd_train(cfg, (dir / "data").string(), (dir / "run").string());
      auto reports = cmd_eval((dir / "run" / "checkpoint.bin").string(), (dir / "data").string(),
                              {InferenceSetting{}, InferenceSetting::parse("fast:0")}, 10, false);
      for (const auto& r : reports) eval_lines[round] += eval_report_to_json(r) + "\n";
    }
    for (const char* f : {"data/manifest.json", "data/train.bin", "data/query.bin", "data/gallery.bin",
                          "run/checkpoint.bin", "run/train_log.jsonl"}) {
      if (slurp((root / "round0" / f).string()) != slurp((root / "round1" / f).string())) {
        pass = false;
        detail += std::string(" ") + f + " differs;";
      }
    }
    if (eval_lines[0] != eval_lines[1]) {
      pass = false;
      detail += " eval reports differ;";
    }
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("pipeline failed: ") + e.what();
  }
  fs::remove_all(root);
  report(8, "pipeline determinism", pass,
         pass ? "two gen-data -> train -> eval rounds byte-identical" : detail);
}

}  // namespace

int main(int argc, char** argv) {
  int jobs = 2;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) jobs = std::atoi(argv[++i]);
  }

  std::cout << "cgreid acceptance suite (jobs=" << jobs << ")\n";
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criteria_5_6_7_9(jobs);
  criterion_8();

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED\n"
                                : std::to_string(g_failures) + " CRITERIA FAILED\n");
  return g_failures;
}
