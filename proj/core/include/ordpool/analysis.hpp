#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ordpool/pooling.hpp"

namespace ordpool {

/// One of the 2^(mn)-1 idealized pooling behaviors: uniform weight 1/|S| on a
/// nonempty support set S of rank positions, zero elsewhere. For a 2x2 window
/// these are the 15 kernels w1..w1234.
struct TemplateKernel {
  std::vector<int> support;      // 0-based rank indices, ascending
  std::vector<double> weights;   // length m*n
  std::string id;                // "w" + 1-based ranks ("_"-separated when mn > 9)

  int support_size() const { return static_cast<int>(support.size()); }
};

/// All nonempty-support templates for an m*n window, ordered canonically by
/// (support size, lexicographic support). Guarded at mn > 16, where the
/// enumeration stops being meaningful.
std::vector<TemplateKernel> enumerate_templates(std::int64_t m, std::int64_t n);

struct NearestTemplate {
  int index = -1;
  std::string id;
  double distance = 0.0;
};

/// Template at minimal Euclidean distance from w; distance ties resolve to
/// the earlier canonical template.
NearestTemplate nearest_template(std::span<const double> w, const std::vector<TemplateKernel>& templates);

/// Rank index (1-based) of the kernel's largest weight; ties resolve to the
/// better (lower) rank.
int argmax_rank(std::span<const double> w);

enum class GroupBy { support_size, argmax };

struct DistributionRow {
  std::string template_id;  // empty for argmax-only classification (global kernels)
  int support_size = 0;     // of the matched template; 0 when unclassified
  int argmax_rank = 0;      // 1-based
  std::string run_id;
  std::int64_t count = 0;
};

struct KernelDistribution {
  GroupBy group_by = GroupBy::support_size;
  std::vector<DistributionRow> rows;        // canonical order, counts > 0
  std::map<int, std::int64_t> group_totals; // key: support size or argmax rank
  std::int64_t total = 0;
};

/// Classifies every channel kernel of every set exactly once. Sets must share
/// one window geometry. Windows larger than 16 positions are grouped by
/// argmax only (the template enumeration is intractable there); requesting
/// support-size grouping for them is an error.
KernelDistribution distribution(const std::vector<const OrdinalKernelSet*>& kernel_sets, GroupBy group_by,
                                const std::vector<std::string>& run_ids = {});

/// CSV form: template_id,support_size,argmax_rank,count,run_id
std::string distribution_csv(const KernelDistribution& dist);

}  // namespace ordpool
