#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ordpool/error.hpp"
#include "ordpool/gradcheck.hpp"

using namespace ordpool;

TEST_CASE("all layer kinds pass the finite-difference check") {
  GradCheckOptions opts;
  opts.trials = 10;  // the acceptance suite runs the full 50
  const auto reports = run_gradcheck(opts);
  CHECK(reports.size() >= 12);
  for (const auto& r : reports) {
    INFO(r.kind);
    CHECK(r.max_rel_err <= 1e-5);
  }
}

TEST_CASE("an injected gradient fault is detected") {
  GradCheckOptions opts;
  opts.trials = 3;
  opts.inject_fault = true;
  const auto reports = run_gradcheck(opts);
  CHECK(max_rel_err(reports) > 1e-5);
}

TEST_CASE("trial count is validated") {
  GradCheckOptions opts;
  opts.trials = 0;
  CHECK_THROWS_AS(run_gradcheck(opts), RangeError);
}
