#include "ordpool/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ordpool/rng.hpp"

namespace ordpool {

using nlohmann::json;

const char* to_string(PoolOp op) {
  switch (op) {
    case PoolOp::avg: return "avg";
    case PoolOp::max: return "max";
    case PoolOp::min: return "min";
    case PoolOp::ordinal: return "ordinal";
  }
  return "?";
}

const char* to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::average: return "average";
    case InitScheme::max: return "max";
    case InitScheme::min: return "min";
    case InitScheme::uniform: return "uniform";
  }
  return "?";
}

PoolOp pool_op_from_string(const std::string& s) {
  if (s == "avg" || s == "average") return PoolOp::avg;
  if (s == "max") return PoolOp::max;
  if (s == "min") return PoolOp::min;
  if (s == "ordinal") return PoolOp::ordinal;
  throw ConfigError("unknown pooling mode '" + s + "' (expected avg|max|min|ordinal)");
}

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "average" || s == "avg") return InitScheme::average;
  if (s == "max") return InitScheme::max;
  if (s == "min") return InitScheme::min;
  if (s == "uniform") return InitScheme::uniform;
  throw ConfigError("unknown init scheme '" + s + "' (expected average|max|min|uniform)");
}

OrdinalKernelSet::OrdinalKernelSet(std::int64_t m, std::int64_t n, std::int64_t channels)
    : m_(m), n_(n), channels_(channels) {
  if (m < 1 || n < 1 || channels < 1) throw ShapeError("ordinal kernel set needs m, n, C >= 1");
  weights_.assign(static_cast<std::size_t>(m * n * channels), 0.0);
}

void OrdinalKernelSet::validate(double tol) const {
  for (std::int64_t c = 0; c < channels_; ++c) {
    double sum = 0.0;
    for (double w : channel(c)) {
      if (!std::isfinite(w)) throw KernelError("kernel channel " + std::to_string(c) + " has non-finite weight");
      if (w < -tol) throw KernelError("kernel channel " + std::to_string(c) + " has negative weight " + std::to_string(w));
      sum += w;
    }
    if (std::abs(sum - 1.0) > tol)
      throw KernelError("kernel channel " + std::to_string(c) + " weights sum to " + std::to_string(sum));
  }
}

OrdinalKernelSet init_kernels(InitScheme scheme, std::int64_t m, std::int64_t n, std::int64_t channels,
                              RngStream& rng) {
  OrdinalKernelSet k(m, n, channels);
  const std::int64_t ranks = m * n;
  for (std::int64_t c = 0; c < channels; ++c) {
    auto w = k.channel(c);
    switch (scheme) {
      case InitScheme::average:
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(ranks));
        break;
      case InitScheme::max:
        w[0] = 1.0;
        break;
      case InitScheme::min:
        w[static_cast<std::size_t>(ranks - 1)] = 1.0;
        break;
      case InitScheme::uniform: {
        double sum = 0.0;
        for (auto& x : w) {
          x = rng.uniform(0.0, 1.0);
          sum += x;
        }
        if (sum <= 0.0) {  // all-zero draw; fall back to the simplex center
          std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(ranks));
          break;
        }
        for (auto& x : w) x /= sum;
        break;
      }
    }
  }
  return k;
}

std::vector<double> project_simplex(std::span<const double> v) {
  std::vector<double> x(v.begin(), v.end());
  project_simplex_inplace(x);
  return x;
}

void project_simplex_inplace(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0) throw RangeError("project_simplex needs at least one coordinate");
  for (double x : v)
    if (!std::isfinite(x)) throw RangeError("project_simplex requires finite input");

  // Sort descending, then find the largest rho with u_rho - tau > 0 where
  // tau = (sum of the top rho entries - 1) / rho.
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < n; ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho = j + 1;
      tau = t;
    }
  }
  (void)rho;
  for (auto& x : v) x = std::max(0.0, x - tau);
}

std::string kernel_set_to_json(const OrdinalKernelSet& k) {
  json j;
  j["m"] = k.m();
  j["n"] = k.n();
  j["C"] = k.channels();
  json weights = json::array();
  for (std::int64_t c = 0; c < k.channels(); ++c) {
    json row = json::array();
    for (double w : k.channel(c)) row.push_back(w);
    weights.push_back(std::move(row));
  }
  j["weights"] = std::move(weights);
  return j.dump();
}

OrdinalKernelSet kernel_set_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw IoError("kernel JSON: parse error");
  if (!j.contains("m") || !j.contains("n") || !j.contains("C") || !j.contains("weights"))
    throw IoError("kernel JSON: missing m/n/C/weights");
  const auto m = j["m"].get<std::int64_t>();
  const auto n = j["n"].get<std::int64_t>();
  const auto channels = j["C"].get<std::int64_t>();
  OrdinalKernelSet k(m, n, channels);
  const auto& weights = j["weights"];
  if (!weights.is_array() || weights.size() != static_cast<std::size_t>(channels))
    throw IoError("kernel JSON: weights must hold C rows");
  for (std::int64_t c = 0; c < channels; ++c) {
    const auto& row = weights[static_cast<std::size_t>(c)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(m * n))
      throw IoError("kernel JSON: weight row " + std::to_string(c) + " must hold m*n values");
    auto dst = k.channel(c);
    for (std::int64_t r = 0; r < m * n; ++r) dst[static_cast<std::size_t>(r)] = row[static_cast<std::size_t>(r)].get<double>();
  }
  return k;
}

}  // namespace ordpool
