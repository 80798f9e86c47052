#include <doctest.h>

#include "cgreid/backbone.hpp"
#include "cgreid/gradcheck.hpp"
#include "testutil.hpp"

using namespace cgreid;
using testutil::random_tensor;

TEST_SUITE_BEGIN("backbone");

TEST_CASE("stride arithmetic: last_stride 1 vs 2 on a 32x16 input") {
  const BackboneSpec s1 = BackboneSpec::with_last_stride(1);
  const BackboneSpec s2 = BackboneSpec::with_last_stride(2);
  CHECK(s1.output_hw(32, 16) == std::pair<int, int>{8, 4});
  CHECK(s2.output_hw(32, 16) == std::pair<int, int>{4, 2});
  // Dropping the final downsampling quadruples the positions.
  CHECK(8 * 4 == 4 * (4 * 2));
}

TEST_CASE("incompatible spatial sizes are rejected") {
  const BackboneSpec spec = BackboneSpec::with_last_stride(1);
  CHECK_THROWS_AS(spec.output_hw(30, 16), ShapeError);  // 15 cannot halve again
  Rng rng(1);
  Backbone bb(spec, rng);
  CHECK_THROWS_AS(bb.forward(Tensor({1, 3, 30, 16}), Mode::kEval), ShapeError);
}

TEST_CASE("spec validation") {
  BackboneSpec s;
  s.last_stride = 3;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = BackboneSpec();
  s.stage_strides = {2, 2};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = BackboneSpec();
  s.stage_strides.back() = 2;  // disagrees with last_stride = 1
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("identity construction: center-tap kernels with bypassed batchnorm replicate channels") {
  BackboneSpec spec;
  spec.stage_channels = {6};
  spec.stage_strides = {1};
  spec.last_stride = 1;
  Rng rng(2);
  Backbone bb(spec, rng);

  auto& st = bb.stages()[0];
  st.conv.weight.value.fill(0.0);
  st.conv.bias.value.fill(0.0);
  for (int o = 0; o < 6; ++o) st.conv.weight.value(o, o % 3, 1, 1) = 1.0;
  // eval mode with unit running stats and (gamma, beta) = (1, 0); the eps
  // inflation of the denominator is the only deviation from identity
  st.bn.running_mean.fill(0.0);
  st.bn.running_var.fill(1.0);

  Rng data_rng(3);
  Tensor images = random_tensor({2, 3, 6, 6}, data_rng, 0.1, 0.9);
  Tensor out = bb.forward(images, Mode::kEval);
  REQUIRE(out.shape == std::vector<int>{2, 6, 6, 6});
  const double scale = 1.0 / std::sqrt(1.0 + kBatchNormEps);
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 6; ++o) {
      for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) {
          CHECK(out(n, o, y, x) == doctest::Approx(images(n, o % 3, y, x) * scale).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("backward before forward is an error; zero upstream yields zero gradients") {
  BackboneSpec spec;
  spec.stage_channels = {4};
  spec.stage_strides = {2};
  spec.last_stride = 2;
  Rng rng(4);
  Backbone bb(spec, rng);
  CHECK_THROWS_AS(bb.backward(Tensor({1, 4, 4, 4})), std::logic_error);

  Rng data_rng(5);
  Tensor images = random_tensor({1, 3, 8, 8}, data_rng, 0.0, 1.0);
  Tensor maps = bb.forward(images, Mode::kTrain);
  Tensor gi = bb.backward(Tensor(maps.shape));
  for (double v : gi.data) CHECK(v == 0.0);
  for (double v : bb.stages()[0].conv.weight.grad.data) CHECK(v == 0.0);
}

TEST_CASE("full-stack gradient matches finite differences on a 1x3x8x8 input") {
  BackboneSpec spec;
  spec.stage_channels = {4, 5};
  spec.stage_strides = {2, 1};
  spec.last_stride = 1;
  Rng rng(6);
  Backbone bb(spec, rng);

  Rng data_rng(7);
  Tensor images = random_tensor({1, 3, 8, 8}, data_rng, 0.0, 1.0);
  Tensor weights;  // scalarization weights, fixed
  {
    Tensor probe = bb.forward(images, Mode::kTrain);
    weights = random_tensor(probe.shape, data_rng);
  }

  auto loss = [&] {
    Tensor out = bb.forward(images, Mode::kTrain);
    double acc = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * weights.data[i];
    return acc;
  };

  // analytic pass
  Tensor out = bb.forward(images, Mode::kTrain);
  Tensor grad_images = bb.backward(weights);

  Tensor fd_images = finite_diff_grad(loss, images);
  CHECK(grad_rel_error(grad_images, fd_images) < 1e-5);

  Tensor fd_w0 = finite_diff_grad(loss, bb.stages()[0].conv.weight.value);
  CHECK(grad_rel_error(bb.stages()[0].conv.weight.grad, fd_w0) < 1e-5);
  Tensor fd_g1 = finite_diff_grad(loss, bb.stages()[1].bn.gamma.value);
  CHECK(grad_rel_error(bb.stages()[1].bn.gamma.grad, fd_g1) < 1e-5);
}

TEST_SUITE_END();
