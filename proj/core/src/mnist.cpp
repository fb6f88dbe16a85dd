#include "ordpool/mnist.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ordpool/error.hpp"

namespace ordpool {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& f, const std::string& path, const char* what) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw IoError(path + ": truncated while reading " + what);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ofstream& f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Dataset Dataset::subset(std::int64_t n) const {
  if (n < 1 || n > count())
    throw RangeError("dataset subset of " + std::to_string(n) + " from " + std::to_string(count()) +
                     " samples");
  Dataset out;
  out.split = split;
  out.pixels.assign(pixels.begin(), pixels.begin() + n * kRows * kCols);
  out.labels.assign(labels.begin(), labels.begin() + n);
  return out;
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       const std::string& split) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError(images_path + ": cannot open image file");
  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw IoError(labels_path + ": cannot open label file");

  const std::uint32_t img_magic = read_be32(imgs, images_path, "image magic");
  if (img_magic != kImagesMagic)
    throw IoError(images_path + ": bad image magic " + hex32(img_magic) + " (expected " +
                  hex32(kImagesMagic) + ")");
  const std::uint32_t n_images = read_be32(imgs, images_path, "image count");
  const std::uint32_t rows = read_be32(imgs, images_path, "row count");
  const std::uint32_t cols = read_be32(imgs, images_path, "column count");
  if (rows != Dataset::kRows || cols != Dataset::kCols)
    throw IoError(images_path + ": unsupported image dims " + std::to_string(rows) + "x" +
                  std::to_string(cols) + " (expected 28x28)");

  const std::uint32_t lbl_magic = read_be32(lbls, labels_path, "label magic");
  if (lbl_magic != kLabelsMagic)
    throw IoError(labels_path + ": bad label magic " + hex32(lbl_magic) + " (expected " +
                  hex32(kLabelsMagic) + ")");
  const std::uint32_t n_labels = read_be32(lbls, labels_path, "label count");
  if (n_images != n_labels)
    throw IoError("image/label count mismatch: " + images_path + " has " + std::to_string(n_images) +
                  ", " + labels_path + " has " + std::to_string(n_labels));

  Dataset data;
  data.split = split;
  const std::size_t pixel_count = static_cast<std::size_t>(n_images) * Dataset::kRows * Dataset::kCols;
  std::vector<unsigned char> raw(pixel_count);
  if (!imgs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixel_count)))
    throw IoError(images_path + ": truncated pixel payload (expected " + std::to_string(pixel_count) +
                  " bytes)");
  data.pixels.resize(pixel_count);
  for (std::size_t i = 0; i < pixel_count; ++i) data.pixels[i] = static_cast<float>(raw[i]) / 255.0f;

  data.labels.resize(n_labels);
  if (!lbls.read(reinterpret_cast<char*>(data.labels.data()), static_cast<std::streamsize>(n_labels)))
    throw IoError(labels_path + ": truncated label payload (expected " + std::to_string(n_labels) +
                  " bytes)");
  for (std::uint8_t l : data.labels)
    if (l > 9) throw IoError(labels_path + ": label " + std::to_string(l) + " out of range 0..9");
  return data;
}

void save_mnist_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path) {
  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError(images_path + ": cannot open for writing");
  write_be32(imgs, kImagesMagic);
  write_be32(imgs, static_cast<std::uint32_t>(data.count()));
  write_be32(imgs, static_cast<std::uint32_t>(Dataset::kRows));
  write_be32(imgs, static_cast<std::uint32_t>(Dataset::kCols));
  std::vector<unsigned char> raw(data.pixels.size());
  for (std::size_t i = 0; i < data.pixels.size(); ++i)
    raw[i] = static_cast<unsigned char>(std::lround(std::min(1.0f, std::max(0.0f, data.pixels[i])) * 255.0f));
  imgs.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));

  std::ofstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw IoError(labels_path + ": cannot open for writing");
  write_be32(lbls, kLabelsMagic);
  write_be32(lbls, static_cast<std::uint32_t>(data.count()));
  lbls.write(reinterpret_cast<const char*>(data.labels.data()), static_cast<std::streamsize>(data.labels.size()));
}

Dataset load_mnist_dir(const std::string& dir, const std::string& split) {
  namespace fs = std::filesystem;
  if (split == "train")
    return load_mnist_idx((fs::path(dir) / "train-images-idx3-ubyte").string(),
                          (fs::path(dir) / "train-labels-idx1-ubyte").string(), split);
  if (split == "test")
    return load_mnist_idx((fs::path(dir) / "t10k-images-idx3-ubyte").string(),
                          (fs::path(dir) / "t10k-labels-idx1-ubyte").string(), split);
  throw ConfigError("load_mnist_dir: split must be train or test, got '" + split + "'");
}

bool mnist_dir_present(const std::string& dir) {
  namespace fs = std::filesystem;
  return fs::exists(fs::path(dir) / "train-images-idx3-ubyte") &&
         fs::exists(fs::path(dir) / "train-labels-idx1-ubyte") &&
         fs::exists(fs::path(dir) / "t10k-images-idx3-ubyte") &&
         fs::exists(fs::path(dir) / "t10k-labels-idx1-ubyte");
}

}  // namespace ordpool
