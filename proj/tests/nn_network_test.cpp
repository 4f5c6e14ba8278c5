#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "eyedrive/nn/adam.hpp"
#include "eyedrive/nn/gradient_check.hpp"
#include "eyedrive/nn/network.hpp"
#include "eyedrive/nn/weights_io.hpp"

using namespace eyedrive;
using namespace eyedrive::nn;

namespace {

template <typename T>
BasicTensor<T> random_input(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  BasicTensor<T> t(std::move(shape));
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Distinct values spaced 0.01 apart, so a 1e-3 nudge never changes a max or a ReLU sign.
BasicTensor<double> spaced_input(Shape shape, std::uint64_t seed) {
  BasicTensor<double> t(std::move(shape));
  std::vector<double> vals(t.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * (static_cast<double>(i) + 0.5) - 0.005 * vals.size();
  Rng rng(seed);
  rng.shuffle(vals.begin(), vals.end());
  std::copy(vals.begin(), vals.end(), t.data());
  return t;
}

std::vector<LayerSpec> scaled_gaze_blocks() {
  return {LayerSpec::conv2d(8), LayerSpec::relu(), LayerSpec::dropout(0.4), LayerSpec::maxpool2x2(),
          LayerSpec::conv2d(16), LayerSpec::relu(), LayerSpec::dropout(0.4), LayerSpec::maxpool2x2(),
          LayerSpec::flatten(), LayerSpec::dense(32), LayerSpec::relu(), LayerSpec::dropout(0.4),
          LayerSpec::dense(5), LayerSpec::softmax()};
}

}  // namespace

TEST_CASE("network shape inference and validation") {
  BasicNetwork<float> net({16, 16, 1}, scaled_gaze_blocks(), 7);
  CHECK(net.output_shape() == Shape{5});
  CHECK(net.layer_shapes()[4] == Shape{8, 8, 8});
  CHECK(net.layer_shapes()[9] == Shape{256});
  // 8*9+8 + 16*72+16 + 256*32+32 + 32*5+5
  CHECK(net.parameter_count() == 80 + 1168 + 8224 + 165);

  CHECK_THROWS_AS(Network({16, 16, 1}, {LayerSpec::dense(3)}, 1), ShapeError);
  CHECK_THROWS_AS(Network({15, 16, 1}, {LayerSpec::maxpool2x2()}, 1), ShapeError);
  CHECK_THROWS_AS(Network({4}, {LayerSpec::dropout(1.5)}, 1), ConfigError);
  CHECK_THROWS_AS(Network({4}, {LayerSpec::dense(0)}, 1), ConfigError);

  Network ok({16, 16, 1}, scaled_gaze_blocks(), 1);
  CHECK_THROWS_AS(ok.forward(Tensor({16, 15, 1})), ShapeError);
  CHECK_THROWS_AS(ok.forward(Tensor({32, 32, 1})), ShapeError);
}

TEST_CASE("initialisation is seeded and bounded") {
  Network a({16, 16, 1}, scaled_gaze_blocks(), 42);
  Network b({16, 16, 1}, scaled_gaze_blocks(), 42);
  Network c({16, 16, 1}, scaled_gaze_blocks(), 43);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->value == pb[i]->value);
    any_diff = any_diff || !(pa[i]->value == pc[i]->value);
  }
  CHECK(any_diff);

  // He-uniform for the first conv (fan_in 9), Glorot-uniform for the output dense (32 -> 5).
  const double he = std::sqrt(6.0 / 9.0);
  for (float v : pa[0]->value.values()) CHECK(std::abs(v) <= he);
  const double glorot = std::sqrt(6.0 / 37.0);
  for (float v : pa[6]->value.values()) CHECK(std::abs(v) <= glorot);
  for (float v : pa[1]->value.values()) CHECK(v == 0.0f);
}

TEST_CASE("backward before forward is a state error") {
  Network net({4}, {LayerSpec::dense(3), LayerSpec::softmax()}, 1);
  CHECK_THROWS_AS(net.backward(Tensor({3})), StateError);
  CHECK_THROWS_AS(net.backward_cross_entropy(0), StateError);
  CHECK_THROWS_AS(net.forward(Tensor({4}), Mode::kReplay), StateError);
}

TEST_CASE("zero loss gradient leaves parameter gradients at zero") {
  Network net({16, 16, 1}, scaled_gaze_blocks(), 3);
  net.forward(random_input<float>({16, 16, 1}, 1), Mode::kTraining);
  net.backward(Tensor({5}, 0.0f));
  for (auto* p : net.parameters()) {
    for (double g : p->grad) CHECK(g == 0.0);
  }
}

TEST_CASE("single dense layer gradient is the outer product") {
  BasicNetwork<double> net({3}, {LayerSpec::dense(2)}, 1);
  BasicTensor<double> x({3}, {1.0, -2.0, 0.5});
  BasicTensor<double> dy({2}, {0.25, -4.0});
  net.forward(x, Mode::kTraining);
  BasicTensor<double> dx = net.backward(dy, true);
  auto params = net.parameters();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(params[0]->grad[i * 2 + j] == x[i] * dy[j]);
  }
  CHECK(params[1]->grad == std::vector<double>{0.25, -4.0});
  const auto& w = params[0]->value;
  for (std::size_t i = 0; i < 3; ++i) CHECK(dx[i] == doctest::Approx(w[i * 2] * 0.25 + w[i * 2 + 1] * -4.0));
}

TEST_CASE("softmax + cross-entropy gradient is probs minus target") {
  BasicNetwork<double> net({3}, {LayerSpec::softmax()}, 1);
  BasicTensor<double> x({3}, {0.2, -1.0, 3.0});
  const auto probs = net.forward(x, Mode::kTraining);
  BasicTensor<double> g = net.backward_cross_entropy(2, 1.0, true);
  CHECK(g[0] == doctest::Approx(probs[0]));
  CHECK(g[1] == doctest::Approx(probs[1]));
  CHECK(g[2] == doctest::Approx(probs[2] - 1.0));
}

TEST_CASE("gradient check: each layer kind in isolation") {
  GradientCheckOptions opts;
  opts.samples_per_tensor = 0;

  SUBCASE("Conv2D") {
    BasicNetwork<double> net({6, 5, 2}, {LayerSpec::conv2d(3)}, 5);
    auto r = gradient_check(net, random_input<double>({6, 5, 2}, 9), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
  }
  SUBCASE("ReLU") {
    BasicNetwork<double> net({4, 4, 3}, {LayerSpec::relu()}, 5);
    auto r = gradient_check(net, spaced_input({4, 4, 3}, 2), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
  }
  SUBCASE("MaxPool2x2") {
    BasicNetwork<double> net({6, 4, 2}, {LayerSpec::maxpool2x2()}, 5);
    auto r = gradient_check(net, spaced_input({6, 4, 2}, 3), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
  }
  SUBCASE("Dropout") {
    BasicNetwork<double> net({5, 5, 2}, {LayerSpec::dropout(0.4)}, 5);
    auto r = gradient_check(net, random_input<double>({5, 5, 2}, 4), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
  }
  SUBCASE("Flatten") {
    BasicNetwork<double> net({3, 2, 2}, {LayerSpec::flatten()}, 5);
    auto r = gradient_check(net, random_input<double>({3, 2, 2}, 4), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
  }
  SUBCASE("Dense") {
    BasicNetwork<double> net({7}, {LayerSpec::dense(4)}, 5);
    auto r = gradient_check(net, random_input<double>({7}, 4), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
  }
  SUBCASE("Softmax") {
    BasicNetwork<double> net({5}, {LayerSpec::softmax()}, 5);
    opts.include_input = true;
    // Projection loss: exercises the softmax Jacobian rather than the combined CE shortcut.
    BasicNetwork<double> probe({5}, {LayerSpec::dense(5), LayerSpec::softmax(), LayerSpec::dense(3)}, 5);
    auto r = gradient_check(probe, random_input<double>({5}, 4), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
    auto r2 = gradient_check(net, random_input<double>({5}, 6), opts);
    CHECK_MESSAGE(r2.max_relative_error < 1e-4, r2.worst);
  }
}

TEST_CASE("gradient check: linear single-layer net") {
  BasicNetwork<double> net({4, 4, 1}, {LayerSpec::flatten(), LayerSpec::dense(5)}, 2);
  GradientCheckOptions opts;
  opts.samples_per_tensor = 0;
  auto r = gradient_check(net, random_input<double>({4, 4, 1}, 1), opts);
  CHECK_MESSAGE(r.max_relative_error < 1e-7, r.worst);
}

TEST_CASE("gradient check: scaled gaze architecture, 16x16, two conv blocks") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    BasicNetwork<double> net({16, 16, 1}, scaled_gaze_blocks(), seed);
    GradientCheckOptions opts;
    opts.samples_per_tensor = 40;
    opts.seed = seed;
    opts.target = seed % 5;
    auto r = gradient_check(net, random_input<double>({16, 16, 1}, seed + 100, 0.0, 1.0), opts);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst);
    // Dropped units give exact zeros, which are skipped as unresolved.
    CHECK(r.checked > 120);
    CHECK(r.skipped_kinks * 3 < r.checked);
  }
}

TEST_CASE("gradient check catches a corrupted gradient") {
  BasicNetwork<double> net({16, 16, 1}, scaled_gaze_blocks(), 1);
  GradientCheckOptions opts;
  opts.tamper = [](std::size_t index, std::vector<double>& grad) {
    if (index == 4) {
      for (double& g : grad) g *= 1.1;
    }
  };
  auto r = gradient_check(net, random_input<double>({16, 16, 1}, 5, 0.0, 1.0), opts);
  CHECK(r.max_relative_error > 1e-2);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient on a fresh state leaves parameters unchanged") {
    Network net({3}, {LayerSpec::dense(2)}, 1);
    auto params = net.parameters();
    const Tensor before = params[0]->value;
    AdamState<float> state(params);
    adam_step(state, params);
    CHECK(params[0]->value == before);
    CHECK(state.step == 1);
  }

  SUBCASE("first step moves each parameter by about lr against the gradient sign") {
    BasicNetwork<double> net({2}, {LayerSpec::dense(2)}, 1);
    auto params = net.parameters();
    const auto before = params[0]->value;
    std::fill(params[0]->grad.begin(), params[0]->grad.end(), 0.37);
    params[0]->grad[1] = -5.0;
    AdamState<double> state(params);
    adam_step(state, params);
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double moved = params[0]->value[i] - before[i];
      CHECK(std::abs(moved) == doctest::Approx(1e-3).epsilon(1e-4));
      CHECK((moved < 0) == (params[0]->grad[i] > 0));
    }
  }

  SUBCASE("two steps reduce a 1-D quadratic") {
    // loss = (w - 3)^2 on the single weight of a 1x1 dense layer
    BasicNetwork<double> net({1}, {LayerSpec::dense(1)}, 1);
    auto params = net.parameters();
    params[0]->value[0] = 0.0;
    AdamState<double> state(params, {0.1, 0.9, 0.999, 1e-8});
    auto loss = [&] { return std::pow(params[0]->value[0] - 3.0, 2); };
    const double start = loss();
    double prev = start;
    for (int step = 0; step < 2; ++step) {
      params[0]->grad[0] = 2.0 * (params[0]->value[0] - 3.0);
      params[1]->grad[0] = 0.0;
      adam_step(state, params);
      CHECK(loss() < prev);
      prev = loss();
    }
  }

  SUBCASE("shape mismatch") {
    Network a({3}, {LayerSpec::dense(2)}, 1);
    Network b({4}, {LayerSpec::dense(2)}, 1);
    AdamState<float> state(a.parameters());
    CHECK_THROWS_AS(adam_step(state, b.parameters()), ShapeError);
    Network c({3}, {LayerSpec::dense(2), LayerSpec::dense(2)}, 1);
    CHECK_THROWS_AS(adam_step(state, c.parameters()), ShapeError);
  }
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  auto run = [](std::uint64_t seed) {
    Network net({16, 16, 1}, scaled_gaze_blocks(), seed);
    auto params = net.parameters();
    AdamState<float> state(params);
    for (int step = 0; step < 3; ++step) {
      net.zero_grad();
      for (std::uint64_t s = 0; s < 4; ++s) {
        net.forward(random_input<float>({16, 16, 1}, s, 0.0, 1.0), Mode::kTraining);
        net.backward_cross_entropy(s % 5, 0.25);
      }
      adam_step(state, params);
    }
    return serialize_network(net);
  };
  CHECK(run(11) == run(11));
  CHECK(run(11) != run(12));
}

TEST_CASE("weight file round trip is bit exact") {
  Network net({16, 16, 1}, scaled_gaze_blocks(), 21);
  const auto bytes = serialize_network(net);
  CHECK(bytes[0] == 'G');
  CHECK(bytes[3] == 'N');
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  Network back = deserialize_network(bytes);
  CHECK(back.specs() == net.specs());
  CHECK(back.input_shape() == net.input_shape());
  auto pa = net.parameters(), pb = back.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(std::equal(pa[i]->value.values().begin(), pa[i]->value.values().end(),
                       pb[i]->value.values().begin(), [](float x, float y) {
                         return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
                       }));
  }
  CHECK(serialize_network(back) == bytes);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_network(bad), IoError);
  auto truncated = std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 3);
  CHECK_THROWS_AS(deserialize_network(truncated), IoError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(deserialize_network(version), IoError);
}

TEST_CASE("converted network computes the same function") {
  Network net({16, 16, 1}, scaled_gaze_blocks(), 4);
  BasicNetwork<double> wide = net.converted<double>();
  const auto x = random_input<float>({16, 16, 1}, 3, 0.0, 1.0);
  const Tensor y = net.forward(x);
  const auto yd = wide.forward(x.cast<double>());
  for (std::size_t i = 0; i < 5; ++i) CHECK(y[i] == doctest::Approx(yd[i]).epsilon(1e-5));
}
