#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "ordpool/error.hpp"
#include "ordpool/shape.hpp"

namespace ordpool {

/// Dense row-major tensor. Feature maps are stored channel-last as [H, W, C];
/// a batch dimension, when present, is prepended as [N, H, W, C]. Precision is
/// the template parameter: float for training, double for gradient checks.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_.numel()), T(0)) {}
  Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_.numel()), fill) {}

  static Tensor filled(const Shape& shape, T value) { return Tensor(shape, value); }

  const Shape& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // [H, W, C] access
  T& at(std::int64_t y, std::int64_t x, std::int64_t c) {
    return data_[static_cast<std::size_t>((y * shape_[1] + x) * shape_[2] + c)];
  }
  T at(std::int64_t y, std::int64_t x, std::int64_t c) const {
    return data_[static_cast<std::size_t>((y * shape_[1] + x) * shape_[2] + c)];
  }

  // [H, W] access
  T& at(std::int64_t y, std::int64_t x) { return data_[static_cast<std::size_t>(y * shape_[1] + x)]; }
  T at(std::int64_t y, std::int64_t x) const { return data_[static_cast<std::size_t>(y * shape_[1] + x)]; }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Regular window grid over an [H, W, C] map. Construction rejects geometries
/// whose windows do not tile the map exactly (no partial windows).
struct WindowGrid {
  std::int64_t in_h = 0, in_w = 0, channels = 0;
  std::int64_t win_h = 0, win_w = 0;
  std::int64_t stride_h = 0, stride_w = 0;
  std::int64_t out_h = 0, out_w = 0;

  WindowGrid() = default;

  WindowGrid(const Shape& map, std::int64_t m, std::int64_t n, std::int64_t sh, std::int64_t sw) {
    if (map.rank() != 3) throw PartitionError("window grid expects an [H, W, C] map, got " + map.str());
    in_h = map[0];
    in_w = map[1];
    channels = map[2];
    win_h = m;
    win_w = n;
    stride_h = sh;
    stride_w = sw;
    if (m < 1 || n < 1) throw PartitionError("window extents must be >= 1");
    if (sh < 1 || sw < 1) throw PartitionError("window strides must be >= 1");
    if (m > in_h || n > in_w) {
      throw PartitionError("window " + std::to_string(m) + "x" + std::to_string(n) +
                           " larger than map " + map.str());
    }
    if ((in_h - m) % sh != 0 || (in_w - n) % sw != 0) {
      throw PartitionError("windows do not tile map " + map.str() + ": window " + std::to_string(m) +
                           "x" + std::to_string(n) + ", stride " + std::to_string(sh) + "x" +
                           std::to_string(sw));
    }
    out_h = (in_h - m) / sh + 1;
    out_w = (in_w - n) / sw + 1;
  }

  std::int64_t count() const { return out_h * out_w; }
  std::int64_t window_size() const { return win_h * win_w; }

  // origin (top-left corner) of window i, windows numbered row-major
  std::pair<std::int64_t, std::int64_t> origin(std::int64_t i) const {
    return {(i / out_w) * stride_h, (i % out_w) * stride_w};
  }
};

template <typename T>
struct WindowedRegions {
  WindowGrid grid;
  std::vector<Tensor<T>> regions;                           // each [m, n, C]
  std::vector<std::pair<std::int64_t, std::int64_t>> origins;
};

/// Slices an [H, W, C] map into its pooling regions, row-major window order.
/// Reference path for tests and oracles; the pooling kernels iterate the grid
/// directly instead of materializing copies.
template <typename T>
WindowedRegions<T> window_partition(const Tensor<T>& t, std::int64_t m, std::int64_t n,
                                    std::int64_t stride_h, std::int64_t stride_w) {
  WindowedRegions<T> out;
  out.grid = WindowGrid(t.shape(), m, n, stride_h, stride_w);
  const std::int64_t c_count = out.grid.channels;
  out.regions.reserve(static_cast<std::size_t>(out.grid.count()));
  out.origins.reserve(static_cast<std::size_t>(out.grid.count()));
  for (std::int64_t i = 0; i < out.grid.count(); ++i) {
    auto [oy, ox] = out.grid.origin(i);
    Tensor<T> region(Shape{m, n, c_count});
    for (std::int64_t j = 0; j < m; ++j)
      for (std::int64_t k = 0; k < n; ++k)
        for (std::int64_t c = 0; c < c_count; ++c) region.at(j, k, c) = t.at(oy + j, ox + k, c);
    out.regions.push_back(std::move(region));
    out.origins.emplace_back(oy, ox);
  }
  return out;
}

}  // namespace ordpool
