#include "ordpool/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ordpool/layers.hpp"
#include "ordpool/network.hpp"
#include "ordpool/pooling.hpp"
#include "ordpool/rng.hpp"
#include "ordpool/tensor.hpp"

namespace ordpool {

namespace {

double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

// Values that stay pairwise distinct (separation >= 0.08) so sorting and
// arg-extremum selection are constant under the probe step.
std::vector<double> distinct_values(RngStream& rng, std::int64_t n) {
  const auto perm = rng.shuffled_indices(n);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    v[static_cast<std::size_t>(i)] = 0.1 * static_cast<double>(perm[static_cast<std::size_t>(i)]) +
                                     rng.uniform(0.0, 0.02) - 0.05 * static_cast<double>(n) * 0.1;
  return v;
}

Tensor<double> random_tensor(RngStream& rng, const Shape& shape, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Tensor<double> distinct_tensor(RngStream& rng, const Shape& shape) {
  Tensor<double> t(shape);
  const auto v = distinct_values(rng, shape.numel());
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

// Scalar objective J = sum(out .* probe); dJ/d(anything) flows through
// backward with grad_out = probe.
Tensor<double> make_probe(RngStream& rng, const Shape& shape) {
  Tensor<double> p(shape);
  for (auto& v : p.values()) v = rng.uniform(0.5, 1.5) * (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
  return p;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Checks one coordinate set: analytic[i] vs central difference of eval().
double check_coords(double* coords, std::int64_t count, const double* analytic, double h,
                    const std::function<double()>& eval) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const double saved = coords[i];
    coords[i] = saved + h;
    const double jp = eval();
    coords[i] = saved - h;
    const double jm = eval();
    coords[i] = saved;
    worst = std::max(worst, rel_err(analytic[i], (jp - jm) / (2.0 * h)));
  }
  return worst;
}

double check_conv(RngStream& rng, double h, bool zero_pad) {
  Tensor<double> x = random_tensor(rng, Shape{6, 6, 2});
  Tensor<double> w = random_tensor(rng, Shape{3, 3, 2, 3}, -0.6, 0.6);
  std::vector<double> b{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
  const Shape out_shape = conv2d_output_shape(x.shape(), w.shape(), zero_pad);
  const Tensor<double> probe = make_probe(rng, out_shape);

  const auto eval = [&] { return dot(conv2d_forward(x, w, std::span<const double>(b), zero_pad), probe); };
  const auto grads = conv2d_backward(x, w, probe, zero_pad);

  double worst = check_coords(x.data(), x.size(), grads.grad_x.data(), h, eval);
  worst = std::max(worst, check_coords(w.data(), w.size(), grads.grad_w.data(), h, eval));
  worst = std::max(worst, check_coords(b.data(), static_cast<std::int64_t>(b.size()), grads.grad_b.data(), h, eval));
  return worst;
}

double check_fc(RngStream& rng, double h, bool inject_fault) {
  Tensor<double> x = random_tensor(rng, Shape{12});
  Tensor<double> w = random_tensor(rng, Shape{12, 5}, -0.5, 0.5);
  std::vector<double> b(5);
  for (auto& v : b) v = rng.uniform(-0.3, 0.3);
  const Tensor<double> probe = make_probe(rng, Shape{5});

  const auto eval = [&] { return dot(fc_forward(x, w, std::span<const double>(b)), probe); };
  auto grads = fc_backward(x, w, probe);
  if (inject_fault) grads.grad_b[0] = grads.grad_b[0] * 1.5 + 0.25;

  double worst = check_coords(x.data(), x.size(), grads.grad_x.data(), h, eval);
  worst = std::max(worst, check_coords(w.data(), w.size(), grads.grad_w.data(), h, eval));
  worst = std::max(worst, check_coords(b.data(), static_cast<std::int64_t>(b.size()), grads.grad_b.data(), h, eval));
  return worst;
}

double check_activation(RngStream& rng, double h, Activation kind) {
  Tensor<double> x(Shape{20});
  for (auto& v : x.values()) {
    // keep relu inputs away from the kink
    v = (0.05 + rng.uniform(0.0, 1.0)) * (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
  }
  const Tensor<double> probe = make_probe(rng, x.shape());
  const auto eval = [&] { return dot(activation_forward(x, kind), probe); };
  const Tensor<double> fwd = activation_forward(x, kind);
  const Tensor<double> grad = activation_backward(fwd, probe, kind);
  return check_coords(x.data(), x.size(), grad.data(), h, eval);
}

double check_classic_pool(RngStream& rng, double h, PoolOp op) {
  PoolMode mode;
  mode.op = op;
  mode.win_h = mode.win_w = 2;
  Tensor<double> x = distinct_tensor(rng, Shape{6, 6, 2});
  const auto fwd = classic_pool_forward(x, mode);
  const Tensor<double> probe = make_probe(rng, fwd.out.shape());
  const auto eval = [&] { return dot(classic_pool_forward(x, mode).out, probe); };
  const Tensor<double> grad = classic_pool_backward(probe, mode, fwd.grid, fwd.argselect);
  return check_coords(x.data(), x.size(), grad.data(), h, eval);
}

double check_ordinal_pool(RngStream& rng, double h, bool global) {
  PoolMode mode;
  mode.op = PoolOp::ordinal;
  mode.win_h = mode.win_w = 2;
  mode.global = global;
  Tensor<double> x = distinct_tensor(rng, global ? Shape{3, 3, 2} : Shape{4, 4, 2});
  const WindowGrid grid = mode.grid_for(x.shape());

  OrdinalKernelSet kernels(grid.win_h, grid.win_w, grid.channels);
  for (std::int64_t c = 0; c < kernels.channels(); ++c) {
    auto ch = kernels.channel(c);
    for (auto& v : ch) v = rng.uniform(0.0, 1.0);
    project_simplex_inplace(ch);
  }

  const auto fwd = ordinal_pool_forward(x, mode, kernels);
  const Tensor<double> probe = make_probe(rng, fwd.out.shape());
  const auto eval = [&] { return dot(ordinal_pool_forward(x, mode, kernels).out, probe); };
  const auto grads = ordinal_pool_backward(probe, fwd.grid, kernels, fwd.perms, fwd.sorted_windows);

  double worst = check_coords(x.data(), x.size(), grads.grad_in.data(), h, eval);
  worst = std::max(worst, check_coords(kernels.raw().data(), kernels.param_count(), grads.grad_w.data(), h, eval));
  return worst;
}

double check_softmax(RngStream& rng, double h) {
  Tensor<double> logits = random_tensor(rng, Shape{10}, -2.0, 2.0);
  const int label = static_cast<int>(rng.below(10));
  const auto eval = [&] { return softmax_cross_entropy(logits.values(), label).loss; };
  const auto res = softmax_cross_entropy(logits.values(), label);
  return check_coords(logits.data(), logits.size(), res.grad_logits.data(), h, eval);
}

// End-to-end check on a miniature net with an ordinal pooling layer:
// conv 3x3x2 -> tanh -> 2x2 ordinal pool -> flatten -> FC(10) -> softmax-CE.
// Every parameter (conv weights/bias, kernels, fc weights/bias) and the input
// image are probed.
double check_network(RngStream& rng, double h) {
  const Shape input_shape{6, 6, 1};
  Tensor<double> image = distinct_tensor(rng, input_shape);
  const int label = static_cast<int>(rng.below(10));

  const std::vector<LayerSpec> specs = {LayerSpec::conv(3, 3, 2, false),
                                        LayerSpec::activation_of(Activation::tanh),
                                        LayerSpec::pool2x2(PoolOp::ordinal), LayerSpec::flatten(),
                                        LayerSpec::fc(10)};
  std::vector<std::unique_ptr<Layer<double>>> layers;
  Shape cur = input_shape;
  for (const auto& ls : specs) {
    std::unique_ptr<Layer<double>> l;
    switch (ls.kind) {
      case LayerSpec::Kind::conv2d: l = std::make_unique<Conv2dLayer<double>>(ls, cur); break;
      case LayerSpec::Kind::activation: l = std::make_unique<ActivationLayer<double>>(ls.act, cur); break;
      case LayerSpec::Kind::pool:
        l = std::make_unique<OrdinalPoolLayer<double>>(ls.pool, cur, InitScheme::uniform);
        break;
      case LayerSpec::Kind::flatten: l = std::make_unique<FlattenLayer<double>>(cur); break;
      case LayerSpec::Kind::fully_connected: l = std::make_unique<FcLayer<double>>(ls.fc_out, cur); break;
    }
    cur = l->output_shape();
    layers.push_back(std::move(l));
  }
  RngStream param_rng(rng.next_u64());
  RngStream kernel_rng(rng.next_u64());
  for (auto& l : layers) l->init_params(param_rng, kernel_rng);

  const auto eval = [&] {
    const Tensor<double>* t = &image;
    for (auto& l : layers) t = &l->forward(*t);
    return softmax_cross_entropy(t->values(), label).loss;
  };

  // single forward/backward accumulates exact loss gradients everywhere
  for (auto& l : layers) l->zero_grad();
  const Tensor<double>* t = &image;
  for (auto& l : layers) t = &l->forward(*t);
  const auto ce = softmax_cross_entropy(t->values(), label);
  Tensor<double> grad_logits(Shape{static_cast<std::int64_t>(ce.grad_logits.size())});
  std::copy(ce.grad_logits.begin(), ce.grad_logits.end(), grad_logits.data());
  const Tensor<double>* g = &grad_logits;
  for (std::size_t i = layers.size(); i-- > 0;) g = &layers[i]->backward(*g, true);
  const Tensor<double> input_grad = *g;

  double worst = check_coords(image.data(), image.size(), input_grad.data(), h, eval);
  for (auto& l : layers) {
    const auto params = l->param_views();
    const auto grads = l->grad_views();
    for (std::size_t v = 0; v < params.size(); ++v)
      worst = std::max(worst, check_coords(params[v].data, params[v].size, grads[v].data, h, eval));
    if (auto* kset = l->kernel_set()) {
      const auto* pool = dynamic_cast<const OrdinalPoolLayer<double>*>(l.get());
      worst = std::max(worst, check_coords(kset->raw().data(), kset->param_count(),
                                           pool->kernel_grad().data(), h, eval));
    }
  }
  return worst;
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck(const GradCheckOptions& opts) {
  if (opts.trials < 1) throw RangeError("gradcheck requires trials >= 1");
  RngStream rng(opts.seed);
  const double h = opts.step;

  std::vector<GradCheckReport> reports;
  const auto run = [&](const std::string& kind, auto&& fn) {
    GradCheckReport r;
    r.kind = kind;
    r.trials = opts.trials;
    for (int t = 0; t < opts.trials; ++t) r.max_rel_err = std::max(r.max_rel_err, fn());
    reports.push_back(std::move(r));
  };

  run("conv2d", [&] { return check_conv(rng, h, /*zero_pad=*/false); });
  run("conv2d_zp", [&] { return check_conv(rng, h, /*zero_pad=*/true); });
  run("fc", [&] { return check_fc(rng, h, opts.inject_fault); });
  run("activation_none", [&] { return check_activation(rng, h, Activation::none); });
  run("activation_relu", [&] { return check_activation(rng, h, Activation::relu); });
  run("activation_tanh", [&] { return check_activation(rng, h, Activation::tanh); });
  run("pool_avg", [&] { return check_classic_pool(rng, h, PoolOp::avg); });
  run("pool_max", [&] { return check_classic_pool(rng, h, PoolOp::max); });
  run("pool_min", [&] { return check_classic_pool(rng, h, PoolOp::min); });
  run("pool_ordinal", [&] { return check_ordinal_pool(rng, h, /*global=*/false); });
  run("pool_ordinal_global", [&] { return check_ordinal_pool(rng, h, /*global=*/true); });
  run("softmax_ce", [&] { return check_softmax(rng, h); });
  run("network", [&] { return check_network(rng, h); });
  return reports;
}

double max_rel_err(const std::vector<GradCheckReport>& reports) {
  double worst = 0.0;
  for (const auto& r : reports) worst = std::max(worst, r.max_rel_err);
  return worst;
}

}  // namespace ordpool
