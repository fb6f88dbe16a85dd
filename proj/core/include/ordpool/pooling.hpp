#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ordpool/error.hpp"
#include "ordpool/tensor.hpp"

namespace ordpool {

enum class PoolOp { avg, max, min, ordinal };

enum class InitScheme { average, max, min, uniform };

const char* to_string(PoolOp op);
const char* to_string(InitScheme scheme);
PoolOp pool_op_from_string(const std::string& s);
InitScheme init_scheme_from_string(const std::string& s);

/// Pooling geometry plus operator choice. Stride 0 means "same as window";
/// `global` resolves the window to the full map extent at bind time.
struct PoolMode {
  PoolOp op = PoolOp::avg;
  std::int64_t win_h = 2, win_w = 2;
  std::int64_t stride_h = 0, stride_w = 0;
  bool global = false;

  WindowGrid grid_for(const Shape& map) const {
    if (map.rank() != 3) throw PartitionError("pooling expects an [H, W, C] map, got " + map.str());
    const std::int64_t m = global ? map[0] : win_h;
    const std::int64_t n = global ? map[1] : win_w;
    const std::int64_t sh = global ? m : (stride_h > 0 ? stride_h : win_h);
    const std::int64_t sw = global ? n : (stride_w > 0 ? stride_w : win_w);
    return WindowGrid(map, m, n, sh, sw);
  }
};

/// Trainable rank-order weight kernels: one m*n kernel per channel, each
/// constrained to the probability simplex. Weights are stored in rank order,
/// so weight 0 multiplies the largest window value and weight m*n-1 the
/// smallest. Kernels are kept in double precision regardless of the
/// activation precision so the simplex invariant (sum 1 within 1e-9, entries
/// nonnegative) survives long training runs.
class OrdinalKernelSet {
 public:
  OrdinalKernelSet() = default;
  OrdinalKernelSet(std::int64_t m, std::int64_t n, std::int64_t channels);

  std::int64_t m() const { return m_; }
  std::int64_t n() const { return n_; }
  std::int64_t channels() const { return channels_; }
  std::int64_t ranks() const { return m_ * n_; }
  std::int64_t param_count() const { return m_ * n_ * channels_; }

  std::span<double> channel(std::int64_t c) {
    return {weights_.data() + c * ranks(), static_cast<std::size_t>(ranks())};
  }
  std::span<const double> channel(std::int64_t c) const {
    return {weights_.data() + c * ranks(), static_cast<std::size_t>(ranks())};
  }
  std::span<double> raw() { return weights_; }
  std::span<const double> raw() const { return weights_; }

  /// Throws KernelError unless every channel is nonnegative (within tol) and
  /// sums to 1 within tol.
  void validate(double tol = 1e-9) const;

  bool operator==(const OrdinalKernelSet&) const = default;

 private:
  std::int64_t m_ = 0, n_ = 0, channels_ = 0;
  std::vector<double> weights_;
};

class RngStream;

/// Builds C kernels per the named scheme: average = 1/(mn) everywhere,
/// max = weight 1 on rank 0, min = weight 1 on the last rank, uniform =
/// i.i.d. U(0,1) draws renormalized per kernel.
OrdinalKernelSet init_kernels(InitScheme scheme, std::int64_t m, std::int64_t n, std::int64_t channels,
                              RngStream& rng);

/// Euclidean projection onto {x : x >= 0, sum x = 1} (sort-based exact
/// algorithm). Idempotent; simplex points map to themselves.
std::vector<double> project_simplex(std::span<const double> v);
void project_simplex_inplace(std::span<double> v);

/// JSON form {m, n, C, weights: [[...], ...]} with weights in rank order;
/// serialization is 64-bit decimal and round-trips value-exactly.
std::string kernel_set_to_json(const OrdinalKernelSet& k);
OrdinalKernelSet kernel_set_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Ordering function
// ---------------------------------------------------------------------------

/// Sorts `region` (row-major window values) in non-increasing order and
/// records, for each rank r, the source position holding the r-th largest
/// value. Ties keep row-major order: the earlier position gets the better
/// rank. `sorted` and `perm` must hold `count` elements. Values must be
/// finite; ordering is undefined for NaN.
template <typename T>
void ord_into(const T* region, int count, T* sorted, std::uint8_t* perm) {
  for (int i = 0; i < count; ++i) perm[i] = static_cast<std::uint8_t>(i);
  // insertion sort, stable, windows are small
  for (int i = 1; i < count; ++i) {
    const std::uint8_t p = perm[i];
    const T v = region[p];
    int j = i - 1;
    while (j >= 0 && region[perm[j]] < v) {
      perm[j + 1] = perm[j];
      --j;
    }
    perm[j + 1] = p;
  }
  for (int i = 0; i < count; ++i) sorted[i] = region[perm[i]];
}

template <typename T>
struct OrdResult {
  std::vector<T> sorted;           // non-increasing, row-major read
  std::vector<int> perm;           // perm[r] = source position of rank r
};

template <typename T>
OrdResult<T> ord(std::span<const T> region) {
  const int count = static_cast<int>(region.size());
  if (count > 256) throw RangeError("ord supports windows up to 256 elements");
  std::vector<std::uint8_t> perm8(static_cast<std::size_t>(count));
  OrdResult<T> out;
  out.sorted.resize(region.size());
  ord_into(region.data(), count, out.sorted.data(), perm8.data());
  out.perm.assign(perm8.begin(), perm8.end());
  return out;
}

// ---------------------------------------------------------------------------
// Classic pooling (avg / max / min)
// ---------------------------------------------------------------------------

template <typename T>
struct ClassicPoolResult {
  Tensor<T> out;                        // [out_h, out_w, C]
  WindowGrid grid;
  std::vector<std::int32_t> argselect;  // max/min: window-local source index per (window, channel)
};

/// Buffer-reusing forward; `res` keeps its allocations across calls.
template <typename T>
void classic_pool_forward_into(const Tensor<T>& t, const PoolMode& mode, ClassicPoolResult<T>& res) {
  if (mode.op == PoolOp::ordinal) throw ConfigError("classic_pool_forward does not take ordinal mode");
  const WindowGrid grid = mode.grid_for(t.shape());
  const std::int64_t c_count = grid.channels;
  const std::int64_t wsize = grid.window_size();
  res.grid = grid;
  if (res.out.shape() != Shape{grid.out_h, grid.out_w, c_count})
    res.out = Tensor<T>(Shape{grid.out_h, grid.out_w, c_count});
  if (mode.op != PoolOp::avg) res.argselect.assign(static_cast<std::size_t>(grid.count() * c_count), 0);

  const T* in = t.data();
  const std::int64_t row = t.shape()[1] * c_count;
  for (std::int64_t i = 0; i < grid.count(); ++i) {
    auto [oy, ox] = grid.origin(i);
    const T* base = in + oy * row + ox * c_count;
    for (std::int64_t c = 0; c < c_count; ++c) {
      if (mode.op == PoolOp::avg) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < grid.win_h; ++j)
          for (std::int64_t k = 0; k < grid.win_w; ++k) acc += static_cast<double>(base[j * row + k * c_count + c]);
        res.out[i * c_count + c] = static_cast<T>(acc / static_cast<double>(wsize));
      } else {
        T best = base[c];
        std::int32_t best_at = 0;
        std::int32_t flat = 0;
        for (std::int64_t j = 0; j < grid.win_h; ++j) {
          for (std::int64_t k = 0; k < grid.win_w; ++k, ++flat) {
            const T v = base[j * row + k * c_count + c];
            const bool better = (mode.op == PoolOp::max) ? (v > best) : (v < best);
            if (better) {
              best = v;
              best_at = flat;
            }
          }
        }
        res.out[i * c_count + c] = best;
        res.argselect[static_cast<std::size_t>(i * c_count + c)] = best_at;
      }
    }
  }
}

template <typename T>
ClassicPoolResult<T> classic_pool_forward(const Tensor<T>& t, const PoolMode& mode) {
  ClassicPoolResult<T> res;
  classic_pool_forward_into(t, mode, res);
  return res;
}

template <typename T>
void classic_pool_backward_acc(const Tensor<T>& grad_out, const PoolMode& mode, const WindowGrid& grid,
                               const std::vector<std::int32_t>& argselect, Tensor<T>& grad_in) {
  if (grad_out.shape() != Shape{grid.out_h, grid.out_w, grid.channels})
    throw ShapeError("classic_pool_backward: grad_out shape " + grad_out.shape().str() +
                     " does not match forward output");
  if (grad_in.shape() != Shape{grid.in_h, grid.in_w, grid.channels})
    throw ShapeError("classic_pool_backward: grad_in shape mismatch");
  if (mode.op != PoolOp::avg &&
      argselect.size() != static_cast<std::size_t>(grid.count() * grid.channels))
    throw ShapeError("classic_pool_backward: argselect size mismatch");

  const std::int64_t c_count = grid.channels;
  const std::int64_t row = grid.in_w * c_count;
  T* gin = grad_in.data();
  const T inv = static_cast<T>(1.0 / static_cast<double>(grid.window_size()));
  for (std::int64_t i = 0; i < grid.count(); ++i) {
    auto [oy, ox] = grid.origin(i);
    T* base = gin + oy * row + ox * c_count;
    for (std::int64_t c = 0; c < c_count; ++c) {
      const T g = grad_out[i * c_count + c];
      if (mode.op == PoolOp::avg) {
        const T share = g * inv;
        for (std::int64_t j = 0; j < grid.win_h; ++j)
          for (std::int64_t k = 0; k < grid.win_w; ++k) base[j * row + k * c_count + c] += share;
      } else {
        const std::int32_t flat = argselect[static_cast<std::size_t>(i * c_count + c)];
        const std::int64_t j = flat / grid.win_w;
        const std::int64_t k = flat % grid.win_w;
        base[j * row + k * c_count + c] += g;
      }
    }
  }
}

template <typename T>
Tensor<T> classic_pool_backward(const Tensor<T>& grad_out, const PoolMode& mode, const WindowGrid& grid,
                                const std::vector<std::int32_t>& argselect) {
  Tensor<T> grad_in(Shape{grid.in_h, grid.in_w, grid.channels});
  classic_pool_backward_acc(grad_out, mode, grid, argselect, grad_in);
  return grad_in;
}

// ---------------------------------------------------------------------------
// Ordinal pooling
// ---------------------------------------------------------------------------

template <typename T>
struct OrdinalPoolResult {
  Tensor<T> out;                    // [out_h, out_w, C]
  WindowGrid grid;
  std::vector<std::uint8_t> perms;  // [window][channel][rank] -> source index
  std::vector<T> sorted_windows;    // [window][channel][rank] sorted values
};

/// Forward pass of the ordinal operator: each output is the dot product of
/// the channel's rank-order kernel with the window values sorted in
/// decreasing order. The permutations are retained for the backward pass.
/// `res` keeps its allocations across calls.
template <typename T>
void ordinal_pool_forward_into(const Tensor<T>& t, const PoolMode& mode, const OrdinalKernelSet& kernels,
                               OrdinalPoolResult<T>& res, double kernel_tol = 1e-3) {
  const WindowGrid grid = mode.grid_for(t.shape());
  if (kernels.channels() != grid.channels)
    throw KernelError("ordinal_pool_forward: kernel set has " + std::to_string(kernels.channels()) +
                      " channels, map has " + std::to_string(grid.channels));
  if (kernels.m() != grid.win_h || kernels.n() != grid.win_w)
    throw KernelError("ordinal_pool_forward: kernel window " + std::to_string(kernels.m()) + "x" +
                      std::to_string(kernels.n()) + " does not match pooling window");
  kernels.validate(kernel_tol);

  const std::int64_t c_count = grid.channels;
  const std::int64_t wsize = grid.window_size();
  if (wsize > 256) throw RangeError("ordinal pooling supports windows up to 256 elements");

  res.grid = grid;
  if (res.out.shape() != Shape{grid.out_h, grid.out_w, c_count})
    res.out = Tensor<T>(Shape{grid.out_h, grid.out_w, c_count});
  res.perms.resize(static_cast<std::size_t>(grid.count() * c_count * wsize));
  res.sorted_windows.resize(static_cast<std::size_t>(grid.count() * c_count * wsize));

  const T* in = t.data();
  const std::int64_t row = t.shape()[1] * c_count;

  if (grid.win_h == 2 && grid.win_w == 2) {
    // 2x2 fast path: branchless stable ranking via pairwise comparisons
    for (std::int64_t i = 0; i < grid.count(); ++i) {
      auto [oy, ox] = grid.origin(i);
      const T* r0 = in + oy * row + ox * c_count;
      const T* r1 = r0 + c_count;
      const T* r2 = r0 + row;
      const T* r3 = r2 + c_count;
      T* sorted = res.sorted_windows.data() + static_cast<std::size_t>(i * c_count * 4);
      std::uint8_t* perm = res.perms.data() + static_cast<std::size_t>(i * c_count * 4);
      T* out = res.out.data() + i * c_count;
      for (std::int64_t c = 0; c < c_count; ++c, sorted += 4, perm += 4) {
        const T v0 = r0[c], v1 = r1[c], v2 = r2[c], v3 = r3[c];
        // rank of element k = earlier elements >= it, plus later elements > it
        const int c0 = (v1 > v0) + (v2 > v0) + (v3 > v0);
        const int c1 = (v0 >= v1) + (v2 > v1) + (v3 > v1);
        const int c2 = (v0 >= v2) + (v1 >= v2) + (v3 > v2);
        const int c3 = (v0 >= v3) + (v1 >= v3) + (v2 >= v3);
        sorted[c0] = v0;
        sorted[c1] = v1;
        sorted[c2] = v2;
        sorted[c3] = v3;
        perm[c0] = 0;
        perm[c1] = 1;
        perm[c2] = 2;
        perm[c3] = 3;
        const double* w = kernels.channel(c).data();
        out[c] = static_cast<T>(w[0] * static_cast<double>(sorted[0]) + w[1] * static_cast<double>(sorted[1]) +
                                w[2] * static_cast<double>(sorted[2]) + w[3] * static_cast<double>(sorted[3]));
      }
    }
    return;
  }

  T window[256];
  for (std::int64_t i = 0; i < grid.count(); ++i) {
    auto [oy, ox] = grid.origin(i);
    const T* base = in + oy * row + ox * c_count;
    for (std::int64_t c = 0; c < c_count; ++c) {
      std::int64_t p = 0;
      for (std::int64_t j = 0; j < grid.win_h; ++j)
        for (std::int64_t k = 0; k < grid.win_w; ++k) window[p++] = base[j * row + k * c_count + c];

      const std::size_t slot = static_cast<std::size_t>((i * c_count + c) * wsize);
      T* sorted = res.sorted_windows.data() + slot;
      std::uint8_t* perm = res.perms.data() + slot;
      ord_into(window, static_cast<int>(wsize), sorted, perm);

      const double* w = kernels.channel(c).data();
      double acc = 0.0;
      for (std::int64_t r = 0; r < wsize; ++r) acc += w[r] * static_cast<double>(sorted[r]);
      res.out[i * c_count + c] = static_cast<T>(acc);
    }
  }
}

template <typename T>
OrdinalPoolResult<T> ordinal_pool_forward(const Tensor<T>& t, const PoolMode& mode,
                                          const OrdinalKernelSet& kernels, double kernel_tol = 1e-3) {
  OrdinalPoolResult<T> res;
  ordinal_pool_forward_into(t, mode, kernels, res, kernel_tol);
  return res;
}

/// Backward pass: the permutation frozen at forward time routes grad_out to
/// the source position of each rank, scaled by that rank's weight; kernel
/// gradients accumulate sorted_value * grad_out per rank, in double.
template <typename T>
void ordinal_pool_backward_acc(const Tensor<T>& grad_out, const WindowGrid& grid,
                               const OrdinalKernelSet& kernels, const std::vector<std::uint8_t>& perms,
                               const std::vector<T>& sorted_windows, Tensor<T>& grad_in,
                               std::span<double> grad_w) {
  const std::int64_t c_count = grid.channels;
  const std::int64_t wsize = grid.window_size();
  if (grad_out.shape() != Shape{grid.out_h, grid.out_w, c_count})
    throw ShapeError("ordinal_pool_backward: grad_out shape mismatch");
  if (grad_in.shape() != Shape{grid.in_h, grid.in_w, c_count})
    throw ShapeError("ordinal_pool_backward: grad_in shape mismatch");
  if (perms.size() != static_cast<std::size_t>(grid.count() * c_count * wsize) ||
      sorted_windows.size() != perms.size())
    throw ShapeError("ordinal_pool_backward: forward artifacts do not match grid");
  if (grad_w.size() != static_cast<std::size_t>(kernels.param_count()))
    throw ShapeError("ordinal_pool_backward: grad_w size mismatch");

  const std::int64_t row = grid.in_w * c_count;
  T* gin = grad_in.data();
  // window-local source index -> offset into the input map (channel 0)
  std::int64_t src_off[256];
  for (std::int64_t s = 0; s < wsize; ++s)
    src_off[s] = (s / grid.win_w) * row + (s % grid.win_w) * c_count;

  for (std::int64_t i = 0; i < grid.count(); ++i) {
    auto [oy, ox] = grid.origin(i);
    T* base = gin + oy * row + ox * c_count;
    for (std::int64_t c = 0; c < c_count; ++c) {
      const T g = grad_out[i * c_count + c];
      const std::size_t slot = static_cast<std::size_t>((i * c_count + c) * wsize);
      const std::uint8_t* perm = perms.data() + slot;
      const T* sorted = sorted_windows.data() + slot;
      const double* w = kernels.channel(c).data();
      double* gw = grad_w.data() + c * wsize;
      for (std::int64_t r = 0; r < wsize; ++r) {
        base[src_off[perm[r]] + c] += static_cast<T>(w[r] * static_cast<double>(g));
        gw[r] += static_cast<double>(sorted[r]) * static_cast<double>(g);
      }
    }
  }
}

template <typename T>
struct OrdinalPoolGrads {
  Tensor<T> grad_in;
  std::vector<double> grad_w;  // [C][m*n], rank order
};

template <typename T>
OrdinalPoolGrads<T> ordinal_pool_backward(const Tensor<T>& grad_out, const WindowGrid& grid,
                                          const OrdinalKernelSet& kernels,
                                          const std::vector<std::uint8_t>& perms,
                                          const std::vector<T>& sorted_windows) {
  OrdinalPoolGrads<T> res;
  res.grad_in = Tensor<T>(Shape{grid.in_h, grid.in_w, grid.channels});
  res.grad_w.assign(static_cast<std::size_t>(kernels.param_count()), 0.0);
  ordinal_pool_backward_acc(grad_out, grid, kernels, perms, sorted_windows, res.grad_in,
                            std::span<double>(res.grad_w));
  return res;
}

}  // namespace ordpool
