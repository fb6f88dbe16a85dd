#include <benchmark/benchmark.h>

#include "ordpool/experiment.hpp"
#include "ordpool/network.hpp"
#include "ordpool/pooling.hpp"
#include "ordpool/rng.hpp"

using namespace ordpool;

namespace {

Tensor<float> random_map(std::uint64_t seed, const Shape& shape) {
  RngStream rng(seed);
  Tensor<float> t(shape);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

OrdinalKernelSet uniform_kernels(std::int64_t m, std::int64_t n, std::int64_t c) {
  RngStream rng(1);
  return init_kernels(InitScheme::uniform, m, n, c, rng);
}

}  // namespace

static void ClassicAvgPool2x2(benchmark::State& state) {
  const auto map = random_map(1, Shape{24, 24, 32});
  PoolMode mode;
  mode.op = PoolOp::avg;
  ClassicPoolResult<float> res;
  for (auto _ : state) {
    classic_pool_forward_into(map, mode, res);
    benchmark::DoNotOptimize(res.out.data());
  }
}
BENCHMARK(ClassicAvgPool2x2);

static void OrdinalPool2x2(benchmark::State& state) {
  const auto map = random_map(1, Shape{24, 24, 32});
  PoolMode mode;
  mode.op = PoolOp::ordinal;
  const auto kernels = uniform_kernels(2, 2, 32);
  OrdinalPoolResult<float> res;
  for (auto _ : state) {
    ordinal_pool_forward_into(map, mode, kernels, res);
    benchmark::DoNotOptimize(res.out.data());
  }
}
BENCHMARK(OrdinalPool2x2);

static void OrdinalPoolGlobal8x8(benchmark::State& state) {
  const auto map = random_map(1, Shape{8, 8, 64});
  PoolMode mode;
  mode.op = PoolOp::ordinal;
  mode.global = true;
  const auto kernels = uniform_kernels(8, 8, 64);
  OrdinalPoolResult<float> res;
  for (auto _ : state) {
    ordinal_pool_forward_into(map, mode, kernels, res);
    benchmark::DoNotOptimize(res.out.data());
  }
}
BENCHMARK(OrdinalPoolGlobal8x8);

static void OrdinalPoolBackward2x2(benchmark::State& state) {
  const auto map = random_map(1, Shape{24, 24, 32});
  PoolMode mode;
  mode.op = PoolOp::ordinal;
  const auto kernels = uniform_kernels(2, 2, 32);
  const auto fwd = ordinal_pool_forward(map, mode, kernels);
  Tensor<float> gout(fwd.out.shape(), 0.1f);
  Tensor<float> gin(map.shape());
  std::vector<double> gw(static_cast<std::size_t>(kernels.param_count()), 0.0);
  for (auto _ : state) {
    std::fill(gin.values().begin(), gin.values().end(), 0.0f);
    ordinal_pool_backward_acc(gout, fwd.grid, kernels, fwd.perms, fwd.sorted_windows, gin,
                              std::span<double>(gw));
    benchmark::DoNotOptimize(gin.data());
  }
}
BENCHMARK(OrdinalPoolBackward2x2);

static void ProjectSimplex64(benchmark::State& state) {
  RngStream rng(3);
  std::vector<double> v = rng.uniform_vec(64, -1.0, 1.0);
  for (auto _ : state) {
    auto x = project_simplex(v);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(ProjectSimplex64);

static void Conv2dForwardBaselineSecond(benchmark::State& state) {
  // the hot layer of the "baseline" network: 12x12x32 -> 8x8x64, 5x5 kernel
  const auto x = random_map(1, Shape{12, 12, 32});
  RngStream rng(2);
  Tensor<float> w(Shape{5, 5, 32, 64});
  for (auto& v : w.values()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  std::vector<float> b(64, 0.0f);
  for (auto _ : state) {
    auto out = conv2d_forward(x, w, std::span<const float>(b), false);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(Conv2dForwardBaselineSecond);

static void BaselinePairedStep(benchmark::State& state) {
  // one forward+backward+update of both arms on one image
  NetworkSpec classic{"baseline", PoolingChoice::classic_avg, Activation::relu, InitScheme::average};
  NetworkSpec ordinal{"baseline", PoolingChoice::ordinal, Activation::relu, InitScheme::average};
  auto pair = build_paired<float>(classic, ordinal, 1);
  const auto img = random_map(7, Shape{28, 28, 1});
  Tensor<float> grad(Shape{10}, 0.05f);
  for (auto _ : state) {
    for (Network<float>* net : {&pair.classic, &pair.ordinal}) {
      net->zero_grad();
      benchmark::DoNotOptimize(net->forward(img).data());
      net->backward(grad);
      net->sgd_step(0.01, 0.9);
    }
  }
}
BENCHMARK(BaselinePairedStep);

BENCHMARK_MAIN();
