#include <benchmark/benchmark.h>

#include "cgreid/evalmetrics.hpp"
#include "cgreid/model.hpp"
#include "cgreid/ops.hpp"
#include "cgreid/rng.hpp"
#include "cgreid/triplet.hpp"

namespace {

using namespace cgreid;

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor input = random_tensor({8, c, 32, 16}, 1);
  Tensor weight = random_tensor({2 * c, c, 3, 3}, 2);
  Tensor bias = random_tensor({2 * c}, 3);
  for (auto _ : state) {
    Tensor out = conv2d_forward(input, weight, bias, 1, 1);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor input = random_tensor({8, c, 32, 16}, 1);
  Tensor weight = random_tensor({2 * c, c, 3, 3}, 2);
  Tensor bias = random_tensor({2 * c}, 3);
  Tensor out = conv2d_forward(input, weight, bias, 1, 1);
  Tensor upstream = random_tensor(out.shape, 4);
  for (auto _ : state) {
    Conv2dGrads g = conv2d_backward(upstream, input, weight, 1, 1);
    benchmark::DoNotOptimize(g.grad_input.data.data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(16);

void BM_DistanceMatrix(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Tensor q = random_tensor({64, d}, 5);
  Tensor g = random_tensor({64, d}, 6);
  RetrievalMeta qm, gm;
  for (int i = 0; i < 64; ++i) {
    qm.identities.push_back(i);
    qm.cameras.push_back(0);
    gm.identities.push_back(i);
    gm.cameras.push_back(1);
  }
  for (auto _ : state) {
    DistanceMatrix dm = distance_matrix(q, g, qm, gm);
    benchmark::DoNotOptimize(dm.values.data());
  }
  state.SetComplexityN(d);
}
BENCHMARK(BM_DistanceMatrix)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_CmcMap(benchmark::State& state) {
  Rng rng(7);
  DistanceMatrix dm;
  dm.q = 64;
  dm.g = static_cast<int>(state.range(0));
  dm.values.resize(static_cast<size_t>(dm.q) * dm.g);
  for (double& v : dm.values) v = rng.uniform();
  for (int i = 0; i < dm.q; ++i) {
    dm.query_meta.identities.push_back(i % 16);
    dm.query_meta.cameras.push_back(0);
  }
  for (int j = 0; j < dm.g; ++j) {
    dm.gallery_meta.identities.push_back(j % 16);
    dm.gallery_meta.cameras.push_back(1);
  }
  for (auto _ : state) {
    EvalReport rep = cmc_map(dm, 20);
    benchmark::DoNotOptimize(rep.map);
  }
}
BENCHMARK(BM_CmcMap)->Arg(64)->Arg(256)->Arg(1024);

void BM_TripletHard(benchmark::State& state) {
  Tensor emb = random_tensor({32, static_cast<int>(state.range(0))}, 8);
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 4; ++j) labels.push_back(i);
  }
  for (auto _ : state) {
    TripletResult r = triplet_hard_loss(emb, labels, TripletConfig{});
    benchmark::DoNotOptimize(r.loss);
  }
}
BENCHMARK(BM_TripletHard)->Arg(32)->Arg(128);

void BM_ModelTrainStep(benchmark::State& state) {
  ModelSpec ms;
  ms.head.n_id = 32;
  Model model(ms, 1);
  Tensor images = random_tensor({32, 3, 64, 32}, 9);
  for (double& v : images.data) v = 0.5 + 0.25 * v;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 4; ++j) labels.push_back(i);
  }
  std::vector<ParamTensor*> params = model.params();
  for (auto _ : state) {
    model.zero_grad();
    Model::Forward fwd = model.forward(images, Mode::kTrain);
    HeadLossResult hl = head_loss(fwd.branch_logits, labels);
    model.backward(hl.grad_logits, {}, {});
    sgd_step(params, 0.01, 0.9, 5e-4);
    benchmark::DoNotOptimize(hl.total);
  }
}
BENCHMARK(BM_ModelTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
