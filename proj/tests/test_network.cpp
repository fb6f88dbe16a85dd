#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ordpool/network.hpp"
#include "ordpool/rng.hpp"

using namespace ordpool;

namespace {

Tensor<float> random_image(RngStream& rng) {
  Tensor<float> img(Shape{28, 28, 1});
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return img;
}

NetworkSpec spec_of(const std::string& name, PoolingChoice pooling,
                    Activation act = Activation::relu, InitScheme init = InitScheme::average) {
  return NetworkSpec{name, pooling, act, init};
}

}  // namespace

TEST_CASE("layer shapes compose through every architecture") {
  for (const std::string name : {"baseline", "baseline2", "lenet5"}) {
    for (const PoolingChoice pooling : {PoolingChoice::classic_avg, PoolingChoice::ordinal}) {
      Network<float> net(spec_of(name, pooling), Shape{28, 28, 1});
      CHECK(net.output_shape() == Shape{10});
    }
  }
  CHECK_THROWS_AS(Network<float>(spec_of("resnet", PoolingChoice::classic_avg), Shape{28, 28, 1}),
                  ConfigError);
}

TEST_CASE("parameter accounting matches the architecture arithmetic") {
  const Shape in{28, 28, 1};
  Network<float> baseline(spec_of("baseline", PoolingChoice::classic_avg), in);
  Network<float> baseline_ord(spec_of("baseline", PoolingChoice::ordinal), in);
  CHECK(baseline.param_count() == 52746);
  CHECK(baseline_ord.param_count() - baseline.param_count() == 4224);  // 2*2*32 + 8*8*64

  Network<float> b2(spec_of("baseline2", PoolingChoice::classic_avg), in);
  Network<float> b2_ord(spec_of("baseline2", PoolingChoice::ordinal), in);
  CHECK(b2.param_count() == 23946);
  CHECK(b2_ord.param_count() - b2.param_count() == 3328);  // 2*2*16 + 2*2*32 + 7*7*64

  Network<float> lenet(spec_of("lenet5", PoolingChoice::classic_avg), in);
  Network<float> lenet_ord(spec_of("lenet5", PoolingChoice::ordinal), in);
  CHECK(lenet.param_count() == 61706);
  CHECK(lenet_ord.param_count() - lenet.param_count() == 88);  // 2*2*6 + 2*2*16

  // relative deltas as reported: +8.0%, +13.9%, +0.14%
  CHECK(100.0 * 4224 / 52746 == doctest::Approx(8.0).epsilon(0.01));
  CHECK(100.0 * 3328 / 23946 == doctest::Approx(13.9).epsilon(0.01));
  CHECK(100.0 * 88 / 61706 == doctest::Approx(0.14).epsilon(0.05));
}

TEST_CASE("paired networks share non-pooling parameters and outputs under average init") {
  for (const std::string name : {"baseline", "baseline2", "lenet5"}) {
    auto pair = build_paired<float>(spec_of(name, PoolingChoice::classic_avg),
                                    spec_of(name, PoolingChoice::ordinal), 1);
    RngStream rng(99);
    for (int i = 0; i < 3; ++i) {
      const auto img = random_image(rng);
      const auto& lc = pair.classic.forward(img);
      const std::vector<float> logits_classic(lc.values().begin(), lc.values().end());
      const auto& lo = pair.ordinal.forward(img);
      for (std::int64_t k = 0; k < lo.size(); ++k)
        CHECK(std::abs(logits_classic[static_cast<std::size_t>(k)] - lo[k]) <= 1e-6f);
    }
  }
}

TEST_CASE("build_paired validates its spec pair") {
  CHECK_THROWS_AS(build_paired<float>(spec_of("baseline", PoolingChoice::classic_avg),
                                      spec_of("baseline2", PoolingChoice::ordinal), 1),
                  ConfigError);
  CHECK_THROWS_AS(build_paired<float>(spec_of("baseline", PoolingChoice::ordinal),
                                      spec_of("baseline", PoolingChoice::ordinal), 1),
                  ConfigError);
  CHECK_THROWS_AS(build_paired<float>(spec_of("baseline", PoolingChoice::classic_avg),
                                      spec_of("baseline", PoolingChoice::classic_max), 1),
                  ConfigError);
  CHECK_THROWS_AS(build_paired<float>(spec_of("baseline", PoolingChoice::classic_avg, Activation::relu),
                                      spec_of("baseline", PoolingChoice::ordinal, Activation::tanh), 1),
                  ConfigError);
}

TEST_CASE("sgd step semantics") {
  // momentum 0, lr 1: p' = p - g
  Network<double> net(spec_of("lenet5", PoolingChoice::classic_avg), Shape{28, 28, 1});
  RngStream prng(derive_seed(5, 0)), krng(derive_seed(5, 1));
  net.init_params(prng, krng);

  auto* fc = dynamic_cast<FcLayer<double>*>(net.layers()[7].get());
  REQUIRE(fc != nullptr);
  const auto before = fc->param_views();
  std::vector<double> snapshot(before[0].data, before[0].data + before[0].size);

  // zero grads: parameters unchanged
  net.zero_grad();
  net.sgd_step(1.0, 0.0);
  for (std::int64_t i = 0; i < before[0].size; ++i) CHECK(before[0].data[i] == snapshot[static_cast<std::size_t>(i)]);

  // inject a known gradient g: expect p - g
  auto grads = fc->grad_views();
  for (std::int64_t i = 0; i < grads[0].size; ++i) grads[0].data[i] = 0.5;
  net.sgd_step(1.0, 0.0);
  for (std::int64_t i = 0; i < before[0].size; ++i)
    CHECK(before[0].data[i] == doctest::Approx(snapshot[static_cast<std::size_t>(i)] - 0.5).epsilon(1e-12));
}

TEST_CASE("ordinal kernels stay on the simplex through noisy optimizer steps") {
  Network<double> net(spec_of("baseline", PoolingChoice::ordinal), Shape{28, 28, 1});
  RngStream prng(derive_seed(6, 0)), krng(derive_seed(6, 1));
  net.init_params(prng, krng);

  RngStream noise(123);
  for (int step = 0; step < 200; ++step) {
    for (auto* k : net.ordinal_kernels()) {
      // poke adversarial pseudo-gradients straight into the kernels
      for (auto& w : k->raw()) w += noise.uniform(-0.3, 0.3);
    }
    net.sgd_step(0.05, 0.9);  // projection happens inside the step
    for (auto* k : net.ordinal_kernels()) k->validate(1e-9);
  }
}

TEST_CASE("max/min initialized ordinal networks keep the global pool on average init") {
  Network<float> net(spec_of("baseline", PoolingChoice::ordinal, Activation::relu, InitScheme::max),
                     Shape{28, 28, 1});
  RngStream prng(derive_seed(7, 0)), krng(derive_seed(7, 1));
  net.init_params(prng, krng);
  const auto kernels = net.ordinal_kernels();
  REQUIRE(kernels.size() == 2);
  // 2x2 layer: max init = weight 1 on rank 0
  CHECK(kernels[0]->channel(0)[0] == 1.0);
  CHECK(kernels[0]->channel(0)[1] == 0.0);
  // 8x8 global layer: average init regardless of the configured scheme
  CHECK(kernels[1]->m() == 8);
  CHECK(kernels[1]->channel(0)[0] == doctest::Approx(1.0 / 64.0).epsilon(1e-15));
}

TEST_CASE("network JSON checkpoints are byte-stable and value-exact") {
  auto pair = build_paired<float>(spec_of("baseline2", PoolingChoice::classic_avg),
                                  spec_of("baseline2", PoolingChoice::ordinal), 3);
  const std::string a = network_to_json(pair.ordinal);
  const std::string b = network_to_json(pair.ordinal);
  CHECK(a == b);

  // reload into a freshly built (differently seeded) network: forwards agree exactly
  auto other = build_paired<float>(spec_of("baseline2", PoolingChoice::classic_avg),
                                   spec_of("baseline2", PoolingChoice::ordinal), 77);
  network_load_json(other.ordinal, a);
  CHECK(network_to_json(other.ordinal) == a);

  RngStream rng(11);
  const auto img = random_image(rng);
  const auto& l1 = pair.ordinal.forward(img);
  const std::vector<float> v1(l1.values().begin(), l1.values().end());
  const auto& l2 = other.ordinal.forward(img);
  for (std::int64_t i = 0; i < l2.size(); ++i) CHECK(v1[static_cast<std::size_t>(i)] == l2[i]);
}
