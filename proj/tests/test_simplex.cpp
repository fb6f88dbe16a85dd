#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ordpool/pooling.hpp"
#include "ordpool/rng.hpp"
#include "support/oracles.hpp"

using namespace ordpool;
using testsupport::euclid_dist;
using testsupport::simplex_grid_min;
using testsupport::simplex_grid_min_enum;

TEST_CASE("simplex projection on the worked examples") {
  const std::vector<double> on_simplex{0.25, 0.25, 0.25, 0.25};
  CHECK(project_simplex(on_simplex) == on_simplex);

  const std::vector<double> v{1.0, 0.5, -0.5, 0.0};
  const auto p = project_simplex(v);
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[2] == 0.0);
  CHECK(p[3] == 0.0);

  const auto vertex = project_simplex(std::vector<double>{2.0, 0.0, 0.0, 0.0});
  CHECK(vertex == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("grid oracle: greedy repair agrees with full enumeration") {
  RngStream rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 2 + rng.below(3);
    std::vector<double> v = rng.uniform_vec(static_cast<std::int64_t>(dim), -1.5, 1.5);
    const int steps = 100 + static_cast<int>(rng.below(3)) * 50;
    const auto fast = simplex_grid_min(v, steps);
    const auto full = simplex_grid_min_enum(v, steps);
    CHECK(euclid_dist(fast, v) == doctest::Approx(euclid_dist(full, v)).epsilon(1e-12));
  }
}

TEST_CASE("projection matches the brute-force grid on the worked example at step 1e-3") {
  const std::vector<double> v{1.0, 0.5, -0.5, 0.0};
  const auto p = project_simplex(v);
  const auto grid_enum = simplex_grid_min_enum(v, 1000);
  const auto grid_fast = simplex_grid_min(v, 1000);
  CHECK(euclid_dist(grid_enum, v) == doctest::Approx(euclid_dist(grid_fast, v)).epsilon(1e-12));
  CHECK(euclid_dist(p, v) <= euclid_dist(grid_enum, v) + 1e-9);
  CHECK(euclid_dist(grid_enum, v) - euclid_dist(p, v) <= 2e-3);
}

TEST_CASE("projection is optimal against the grid oracle on random vectors") {
  RngStream rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<double> v = rng.uniform_vec(4, -2.0, 2.0);
    const auto p = project_simplex(v);
    const auto g = simplex_grid_min(v, 1000);
    const double dp = euclid_dist(p, v);
    const double dg = euclid_dist(g, v);
    CHECK(dp <= dg + 1e-9);       // the projection can never lose to a grid point
    CHECK(dg - dp <= 2e-3);       // and the grid comes within its resolution
  }
}

TEST_CASE("projection is idempotent and lands on the simplex") {
  RngStream rng(107);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + rng.below(8);
    const std::vector<double> v = rng.uniform_vec(static_cast<std::int64_t>(dim), -3.0, 3.0);
    const auto p = project_simplex(v);
    double sum = 0.0;
    for (double x : p) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    const auto pp = project_simplex(p);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(pp[i] - p[i]) <= 1e-12);
  }
}

TEST_CASE("kernel initialization schemes") {
  RngStream rng(109);
  const auto avg = init_kernels(InitScheme::average, 2, 2, 3, rng);
  CHECK(avg.channels() == 3);
  for (std::int64_t c = 0; c < 3; ++c)
    for (double w : avg.channel(c)) CHECK(w == 0.25);

  const auto kmax = init_kernels(InitScheme::max, 2, 2, 1, rng);
  CHECK(std::vector<double>(kmax.channel(0).begin(), kmax.channel(0).end()) ==
        std::vector<double>{1, 0, 0, 0});

  const auto kmin = init_kernels(InitScheme::min, 2, 2, 1, rng);
  CHECK(std::vector<double>(kmin.channel(0).begin(), kmin.channel(0).end()) ==
        std::vector<double>{0, 0, 0, 1});

  RngStream r1(7), r2(7);
  const auto u1 = init_kernels(InitScheme::uniform, 2, 2, 5, r1);
  const auto u2 = init_kernels(InitScheme::uniform, 2, 2, 5, r2);
  CHECK(u1 == u2);
  u1.validate(1e-12);

  // average over a 7x7 global window: entries 1/49
  RngStream unused(0);
  const auto global = init_kernels(InitScheme::average, 7, 7, 2, unused);
  global.validate(1e-12);
  CHECK(global.channel(0)[0] == doctest::Approx(1.0 / 49.0).epsilon(1e-15));
}

TEST_CASE("kernel validation catches violations") {
  OrdinalKernelSet k(2, 2, 1);
  auto w = k.channel(0);
  w[0] = 0.7;
  w[1] = 0.4;  // sums to 1.1
  CHECK_THROWS_AS(k.validate(1e-9), KernelError);
  w[1] = 0.3;
  CHECK_NOTHROW(k.validate(1e-9));
  w[0] = 1.3;
  w[1] = -0.3;
  CHECK_THROWS_AS(k.validate(1e-9), KernelError);
}
