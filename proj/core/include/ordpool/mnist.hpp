#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordpool/tensor.hpp"

namespace ordpool {

/// MNIST-style image set: N 28x28 grayscale images scaled to [0, 1] plus
/// labels in 0..9.
struct Dataset {
  std::vector<float> pixels;        // N * 784, row-major
  std::vector<std::uint8_t> labels; // N
  std::string split;                // "train" | "test"

  static constexpr std::int64_t kRows = 28;
  static constexpr std::int64_t kCols = 28;

  std::int64_t count() const { return static_cast<std::int64_t>(labels.size()); }

  Tensor<float> image(std::int64_t i) const {
    Tensor<float> img(Shape{kRows, kCols, 1});
    const float* src = pixels.data() + i * kRows * kCols;
    std::copy(src, src + kRows * kCols, img.data());
    return img;
  }

  int label(std::int64_t i) const { return labels[static_cast<std::size_t>(i)]; }

  /// First n samples; deterministic desk-scale subsetting.
  Dataset subset(std::int64_t n) const;
};

/// Parses a big-endian IDX image/label file pair. Image files must carry
/// magic 0x00000803 with dims (N, 28, 28); label files magic 0x00000801 with
/// dim (N); the two counts must agree. Pixels are divided by 255.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       const std::string& split = "train");

/// Writes the canonical IDX encoding (pixel = round(255 * value)).
void save_mnist_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path);

/// Splits named per the standard MNIST file layout inside `dir`
/// (train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-*).
Dataset load_mnist_dir(const std::string& dir, const std::string& split);
bool mnist_dir_present(const std::string& dir);

}  // namespace ordpool
