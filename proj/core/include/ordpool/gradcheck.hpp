#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ordpool {

struct GradCheckReport {
  std::string kind;
  double max_rel_err = 0.0;
  int trials = 0;
};

struct GradCheckOptions {
  int trials = 50;          // per layer kind
  std::uint64_t seed = 1234;
  double step = 1e-5;       // central-difference step
  bool inject_fault = false;  // negative-control hook: corrupts one analytic gradient
};

/// 64-bit central finite-difference checks across every layer kind (conv, fc,
/// activations, all pool modes, softmax-CE) plus a small end-to-end network.
/// Pooling inputs are constructed with pairwise-distinct window values so the
/// sort is locally constant under the probe step. Relative error is
/// |analytic - fd| / max(1, |analytic|, |fd|).
std::vector<GradCheckReport> run_gradcheck(const GradCheckOptions& opts);

double max_rel_err(const std::vector<GradCheckReport>& reports);

}  // namespace ordpool
