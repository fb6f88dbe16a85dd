#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ordpool/layers.hpp"
#include "ordpool/rng.hpp"

using namespace ordpool;

namespace {

Tensor<double> random_tensor(RngStream& rng, const Shape& shape, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

double objective(const Tensor<double>& out, const Tensor<double>& probe) {
  double s = 0.0;
  for (std::int64_t i = 0; i < out.size(); ++i) s += out[i] * probe[i];
  return s;
}

double rel_err(double a, double f) { return std::abs(a - f) / std::max({1.0, std::abs(a), std::abs(f)}); }

}  // namespace

TEST_CASE("1x1 convolution with unit weight is the identity") {
  RngStream rng(1);
  const auto x = random_tensor(rng, Shape{5, 4, 1});
  Tensor<double> w(Shape{1, 1, 1, 1});
  w[0] = 1.0;
  const std::vector<double> b{0.0};
  const auto y = conv2d_forward(x, w, std::span<const double>(b), false);
  CHECK(y.shape() == x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("convolution output extents") {
  // 28x28 in, 5x5 valid -> 24x24; with zero padding the extent is preserved
  CHECK(conv2d_output_shape(Shape{28, 28, 1}, Shape{5, 5, 1, 32}, false) == Shape{24, 24, 32});
  CHECK(conv2d_output_shape(Shape{28, 28, 16}, Shape{3, 3, 16, 32}, true) == Shape{28, 28, 32});
  CHECK_THROWS_AS(conv2d_output_shape(Shape{4, 4, 1}, Shape{5, 5, 1, 8}, false), ShapeError);
  CHECK_THROWS_AS(conv2d_output_shape(Shape{8, 8, 2}, Shape{3, 3, 4, 8}, false), ShapeError);
}

TEST_CASE("convolution gradients match central differences") {
  RngStream rng(2);
  for (const bool zero_pad : {false, true}) {
    auto x = random_tensor(rng, Shape{6, 6, 2});
    auto w = random_tensor(rng, Shape{3, 3, 2, 3}, -0.5, 0.5);
    std::vector<double> b{0.1, -0.2, 0.05};
    const Shape out_shape = conv2d_output_shape(x.shape(), w.shape(), zero_pad);
    const auto probe = random_tensor(rng, out_shape, 0.5, 1.5);

    const auto grads = conv2d_backward(x, w, probe, zero_pad);
    const double h = 1e-5;
    const auto eval = [&] { return objective(conv2d_forward(x, w, std::span<const double>(b), zero_pad), probe); };

    for (std::int64_t i = 0; i < x.size(); ++i) {
      const double s = x[i];
      x[i] = s + h;
      const double jp = eval();
      x[i] = s - h;
      const double jm = eval();
      x[i] = s;
      CHECK(rel_err(grads.grad_x[i], (jp - jm) / (2 * h)) <= 1e-6);
    }
    for (std::int64_t i = 0; i < w.size(); ++i) {
      const double s = w[i];
      w[i] = s + h;
      const double jp = eval();
      w[i] = s - h;
      const double jm = eval();
      w[i] = s;
      CHECK(rel_err(grads.grad_w[i], (jp - jm) / (2 * h)) <= 1e-6);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double s = b[i];
      b[i] = s + h;
      const double jp = eval();
      b[i] = s - h;
      const double jm = eval();
      b[i] = s;
      CHECK(rel_err(grads.grad_b[i], (jp - jm) / (2 * h)) <= 1e-6);
    }
  }
}

TEST_CASE("fully connected identity and bias-only maps") {
  Tensor<double> x(Shape{3});
  x[0] = 1.5;
  x[1] = -2.0;
  x[2] = 0.25;

  Tensor<double> eye(Shape{3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  const std::vector<double> zero{0, 0, 0};
  const auto y = fc_forward(x, eye, std::span<const double>(zero));
  for (std::int64_t i = 0; i < 3; ++i) CHECK(y[i] == x[i]);

  Tensor<double> zeros(Shape{3, 2});
  const std::vector<double> b{1.0, 1.0};
  const auto yb = fc_forward(x, zeros, std::span<const double>(b));
  CHECK(yb[0] == 1.0);
  CHECK(yb[1] == 1.0);
}

TEST_CASE("fully connected gradients match central differences") {
  RngStream rng(3);
  auto x = random_tensor(rng, Shape{7});
  auto w = random_tensor(rng, Shape{7, 4}, -0.5, 0.5);
  std::vector<double> b{0.1, 0.0, -0.1, 0.2};
  const auto probe = random_tensor(rng, Shape{4}, 0.5, 1.5);
  const auto grads = fc_backward(x, w, probe);
  const double h = 1e-5;
  const auto eval = [&] { return objective(fc_forward(x, w, std::span<const double>(b)), probe); };

  for (std::int64_t i = 0; i < w.size(); ++i) {
    const double s = w[i];
    w[i] = s + h;
    const double jp = eval();
    w[i] = s - h;
    const double jm = eval();
    w[i] = s;
    CHECK(rel_err(grads.grad_w[i], (jp - jm) / (2 * h)) <= 1e-6);
  }
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double s = x[i];
    x[i] = s + h;
    const double jp = eval();
    x[i] = s - h;
    const double jm = eval();
    x[i] = s;
    CHECK(rel_err(grads.grad_x[i], (jp - jm) / (2 * h)) <= 1e-6);
  }
}

TEST_CASE("activation functions") {
  Tensor<double> x(Shape{3});
  x[0] = -1.0;
  x[1] = 2.0;
  x[2] = 0.0;

  const auto relu = activation_forward(x, Activation::relu);
  CHECK(relu[0] == 0.0);
  CHECK(relu[1] == 2.0);
  CHECK(relu[2] == 0.0);

  const auto none = activation_forward(x, Activation::none);
  for (std::int64_t i = 0; i < 3; ++i) CHECK(none[i] == x[i]);

  const auto th = activation_forward(x, Activation::tanh);
  CHECK(th[2] == 0.0);
  CHECK(th[1] == doctest::Approx(std::tanh(2.0)).epsilon(1e-15));
}

TEST_CASE("softmax cross-entropy on the worked examples") {
  std::vector<double> uniform(10, 0.0);
  const auto u = softmax_cross_entropy(std::span<const double>(uniform), 3);
  CHECK(u.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  std::vector<double> saturated(10, 0.0);
  saturated[2] = 40.0;
  const auto s = softmax_cross_entropy(std::span<const double>(saturated), 2);
  CHECK(s.loss == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(softmax_cross_entropy(std::span<const double>(uniform), 10), RangeError);
  CHECK_THROWS_AS(softmax_cross_entropy(std::span<const double>(uniform), -1), RangeError);
}

TEST_CASE("softmax gradient matches central differences") {
  RngStream rng(4);
  auto logits = random_tensor(rng, Shape{10}, -2.0, 2.0);
  const int label = 6;
  const auto res = softmax_cross_entropy(logits.values(), label);
  const double h = 1e-5;
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    const double s = logits[i];
    logits[i] = s + h;
    const double jp = softmax_cross_entropy(logits.values(), label).loss;
    logits[i] = s - h;
    const double jm = softmax_cross_entropy(logits.values(), label).loss;
    logits[i] = s;
    CHECK(rel_err(res.grad_logits[static_cast<std::size_t>(i)], (jp - jm) / (2 * h)) <= 1e-6);
  }
}
