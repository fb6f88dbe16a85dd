#include "ordpool/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace ordpool {

std::vector<TemplateKernel> enumerate_templates(std::int64_t m, std::int64_t n) {
  const std::int64_t ranks = m * n;
  if (ranks < 1) throw ShapeError("enumerate_templates needs m*n >= 1");
  if (ranks > 16)
    throw RangeError("enumerate_templates: window of " + std::to_string(ranks) +
                     " positions exceeds the enumeration guard (16)");

  std::vector<TemplateKernel> out;
  out.reserve((1u << ranks) - 1);
  for (std::uint32_t mask = 1; mask < (1u << ranks); ++mask) {
    TemplateKernel t;
    for (int r = 0; r < ranks; ++r)
      if (mask & (1u << r)) t.support.push_back(r);
    t.weights.assign(static_cast<std::size_t>(ranks), 0.0);
    const double w = 1.0 / static_cast<double>(t.support.size());
    for (int r : t.support) t.weights[static_cast<std::size_t>(r)] = w;
    std::string id = "w";
    for (std::size_t i = 0; i < t.support.size(); ++i) {
      if (i && ranks > 9) id += "_";
      id += std::to_string(t.support[i] + 1);
    }
    t.id = std::move(id);
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const TemplateKernel& a, const TemplateKernel& b) {
    if (a.support.size() != b.support.size()) return a.support.size() < b.support.size();
    return a.support < b.support;
  });
  return out;
}

NearestTemplate nearest_template(std::span<const double> w, const std::vector<TemplateKernel>& templates) {
  if (templates.empty()) throw RangeError("nearest_template: empty template list");
  NearestTemplate best;
  double best_sq = 0.0;
  for (std::size_t t = 0; t < templates.size(); ++t) {
    const auto& weights = templates[t].weights;
    if (weights.size() != w.size())
      throw ShapeError("nearest_template: kernel has " + std::to_string(w.size()) + " weights, template " +
                       std::to_string(weights.size()));
    double sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w[i] - weights[i];
      sq += d * d;
    }
    if (best.index < 0 || sq < best_sq) {
      best.index = static_cast<int>(t);
      best.id = templates[t].id;
      best_sq = sq;
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

int argmax_rank(std::span<const double> w) {
  if (w.empty()) throw RangeError("argmax_rank: empty kernel");
  std::size_t best = 0;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i] > w[best]) best = i;
  return static_cast<int>(best) + 1;
}

KernelDistribution distribution(const std::vector<const OrdinalKernelSet*>& kernel_sets, GroupBy group_by,
                                const std::vector<std::string>& run_ids) {
  if (kernel_sets.empty()) throw RangeError("distribution: no kernel sets given");
  if (!run_ids.empty() && run_ids.size() != kernel_sets.size())
    throw RangeError("distribution: run_ids must match kernel_sets");
  const std::int64_t m = kernel_sets[0]->m();
  const std::int64_t n = kernel_sets[0]->n();
  for (const auto* k : kernel_sets)
    if (k->m() != m || k->n() != n)
      throw ShapeError("distribution: mixed kernel shapes (" + std::to_string(m) + "x" + std::to_string(n) +
                       " vs " + std::to_string(k->m()) + "x" + std::to_string(k->n()) + ")");

  const bool enumerable = m * n <= 16;
  if (!enumerable && group_by == GroupBy::support_size)
    throw RangeError("distribution: support-size grouping needs an enumerable window (m*n <= 16); "
                     "use argmax grouping for global kernels");
  std::vector<TemplateKernel> templates;
  if (enumerable) templates = enumerate_templates(m, n);

  // key -> count, keyed canonically so the output order is deterministic
  struct Key {
    int template_index;
    int argmax;
    std::string run_id;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::int64_t> counts;
  KernelDistribution dist;
  dist.group_by = group_by;

  for (std::size_t s = 0; s < kernel_sets.size(); ++s) {
    const auto* set = kernel_sets[s];
    const std::string run = run_ids.empty() ? "" : run_ids[s];
    for (std::int64_t c = 0; c < set->channels(); ++c) {
      const auto w = set->channel(c);
      const int am = argmax_rank(w);
      int tidx = -1;
      if (enumerable) tidx = nearest_template(w, templates).index;
      ++counts[Key{tidx, am, run}];
      ++dist.total;
    }
  }

  for (const auto& [key, count] : counts) {
    DistributionRow row;
    if (key.template_index >= 0) {
      row.template_id = templates[static_cast<std::size_t>(key.template_index)].id;
      row.support_size = templates[static_cast<std::size_t>(key.template_index)].support_size();
    }
    row.argmax_rank = key.argmax;
    row.run_id = key.run_id;
    row.count = count;
    dist.rows.push_back(std::move(row));
    const int group_key = group_by == GroupBy::support_size
                              ? templates[static_cast<std::size_t>(key.template_index)].support_size()
                              : key.argmax;
    dist.group_totals[group_key] += count;
  }
  return dist;
}

std::string distribution_csv(const KernelDistribution& dist) {
  std::string csv = "template_id,support_size,argmax_rank,count,run_id\n";
  for (const auto& row : dist.rows) {
    csv += row.template_id + "," + std::to_string(row.support_size) + "," + std::to_string(row.argmax_rank) +
           "," + std::to_string(row.count) + "," + row.run_id + "\n";
  }
  return csv;
}

}  // namespace ordpool
