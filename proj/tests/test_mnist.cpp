#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ordpool/mnist.hpp"
#include "support/synth_digits.hpp"

using namespace ordpool;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("ordpool_mnist_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

void append(std::vector<unsigned char>& dst, const std::vector<unsigned char>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

TEST_CASE("IDX round trip through the canonical encoding") {
  TempDir dir;
  const Dataset out = testsupport::make_synth_digits(64, 7, "train");
  save_mnist_idx(out, dir.file("imgs"), dir.file("lbls"));
  const Dataset in = load_mnist_idx(dir.file("imgs"), dir.file("lbls"), "train");

  CHECK(in.count() == 64);
  CHECK(in.labels == out.labels);
  for (float p : in.pixels) {
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
  }
  // quantization to bytes is the only loss permitted
  for (std::size_t i = 0; i < in.pixels.size(); ++i) CHECK(std::abs(in.pixels[i] - out.pixels[i]) <= 0.5f / 255.0f);
}

TEST_CASE("pixel 255 scales to exactly 1.0") {
  TempDir dir;
  std::vector<unsigned char> imgs;
  append(imgs, be32(0x00000803));
  append(imgs, be32(1));
  append(imgs, be32(28));
  append(imgs, be32(28));
  imgs.resize(imgs.size() + 784, 0);
  imgs[16] = 255;  // first pixel
  write_bytes(dir.file("imgs"), imgs);

  std::vector<unsigned char> lbls;
  append(lbls, be32(0x00000801));
  append(lbls, be32(1));
  lbls.push_back(5);
  write_bytes(dir.file("lbls"), lbls);

  const Dataset d = load_mnist_idx(dir.file("imgs"), dir.file("lbls"));
  CHECK(d.pixels[0] == 1.0f);
  CHECK(d.pixels[1] == 0.0f);
  CHECK(d.label(0) == 5);
}

TEST_CASE("IDX header validation produces distinct errors") {
  TempDir dir;

  // wrong image magic
  std::vector<unsigned char> imgs;
  append(imgs, be32(0x00000807));
  append(imgs, be32(1));
  append(imgs, be32(28));
  append(imgs, be32(28));
  imgs.resize(imgs.size() + 784, 0);
  write_bytes(dir.file("imgs_badmagic"), imgs);

  std::vector<unsigned char> lbls;
  append(lbls, be32(0x00000801));
  append(lbls, be32(1));
  lbls.push_back(1);
  write_bytes(dir.file("lbls_ok"), lbls);

  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs_badmagic"), dir.file("lbls_ok")),
                       doctest::Contains("bad image magic"), IoError);

  // good images
  imgs[3] = 0x03;
  write_bytes(dir.file("imgs_ok"), imgs);

  // wrong label magic
  std::vector<unsigned char> bad_lbls = lbls;
  bad_lbls[3] = 0x02;
  write_bytes(dir.file("lbls_badmagic"), bad_lbls);
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs_ok"), dir.file("lbls_badmagic")),
                       doctest::Contains("bad label magic"), IoError);

  // count mismatch
  std::vector<unsigned char> two_lbls;
  append(two_lbls, be32(0x00000801));
  append(two_lbls, be32(2));
  two_lbls.push_back(1);
  two_lbls.push_back(2);
  write_bytes(dir.file("lbls_two"), two_lbls);
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs_ok"), dir.file("lbls_two")),
                       doctest::Contains("count mismatch"), IoError);

  // truncated pixel payload
  std::vector<unsigned char> short_imgs(imgs.begin(), imgs.begin() + 16 + 100);
  write_bytes(dir.file("imgs_short"), short_imgs);
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs_short"), dir.file("lbls_ok")),
                       doctest::Contains("truncated"), IoError);

  // unsupported dims
  std::vector<unsigned char> odd;
  append(odd, be32(0x00000803));
  append(odd, be32(1));
  append(odd, be32(14));
  append(odd, be32(14));
  odd.resize(odd.size() + 196, 0);
  write_bytes(dir.file("imgs_odd"), odd);
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("imgs_odd"), dir.file("lbls_ok")),
                       doctest::Contains("unsupported image dims"), IoError);

  // missing file
  CHECK_THROWS_WITH_AS(load_mnist_idx(dir.file("nope"), dir.file("lbls_ok")),
                       doctest::Contains("cannot open"), IoError);
}

TEST_CASE("synthetic corpus is deterministic, labeled 0..9 and in range") {
  const Dataset a = testsupport::make_synth_digits(256, 99, "train");
  const Dataset b = testsupport::make_synth_digits(256, 99, "train");
  CHECK(a.pixels == b.pixels);
  CHECK(a.labels == b.labels);

  bool all_classes[10] = {};
  for (auto l : a.labels) {
    CHECK(l <= 9);
    all_classes[l] = true;
  }
  for (bool seen : all_classes) CHECK(seen);

  // images carry actual structure (ink), not just noise
  double mean = 0.0;
  for (float p : a.pixels) mean += p;
  mean /= static_cast<double>(a.pixels.size());
  CHECK(mean > 0.05);
  CHECK(mean < 0.5);
}

TEST_CASE("dataset subsetting") {
  const Dataset a = testsupport::make_synth_digits(100, 1, "test");
  const Dataset s = a.subset(10);
  CHECK(s.count() == 10);
  CHECK(std::equal(s.labels.begin(), s.labels.end(), a.labels.begin()));
  CHECK_THROWS_AS(a.subset(0), RangeError);
  CHECK_THROWS_AS(a.subset(101), RangeError);
}

TEST_CASE("mnist directory loader") {
  TempDir dir;
  CHECK_FALSE(mnist_dir_present(dir.path.string()));
  testsupport::write_synth_mnist_dir(dir.path.string(), 32, 16, 5);
  CHECK(mnist_dir_present(dir.path.string()));
  const Dataset train = load_mnist_dir(dir.path.string(), "train");
  const Dataset test = load_mnist_dir(dir.path.string(), "test");
  CHECK(train.count() == 32);
  CHECK(test.count() == 16);
  CHECK_THROWS_AS(load_mnist_dir(dir.path.string(), "validation"), ConfigError);
}
