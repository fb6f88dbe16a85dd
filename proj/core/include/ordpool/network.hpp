#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ordpool/error.hpp"
#include "ordpool/layers.hpp"
#include "ordpool/pooling.hpp"
#include "ordpool/rng.hpp"
#include "ordpool/tensor.hpp"

namespace ordpool {

enum class PoolingChoice { classic_avg, classic_max, classic_min, ordinal };

const char* to_string(PoolingChoice c);
PoolingChoice pooling_choice_from_string(const std::string& s);

/// Declarative description of one of the three baseline networks and how its
/// pooling layers are realized. A classic network and its ordinal
/// counterpart differ only in this choice.
struct NetworkSpec {
  std::string name = "baseline";  // baseline | baseline2 | lenet5
  PoolingChoice pooling = PoolingChoice::classic_avg;
  Activation activation = Activation::relu;  // applied after each conv, before pooling
  InitScheme ordinal_init = InitScheme::average;

  bool operator==(const NetworkSpec&) const = default;
};

struct LayerSpec {
  enum class Kind { conv2d, activation, pool, flatten, fully_connected };
  Kind kind = Kind::conv2d;
  std::int64_t conv_kh = 0, conv_kw = 0, conv_out = 0;
  bool conv_zero_pad = false;
  Activation act = Activation::none;
  PoolMode pool;
  std::int64_t fc_out = 0;

  static LayerSpec conv(std::int64_t kh, std::int64_t kw, std::int64_t out, bool zero_pad) {
    LayerSpec s;
    s.kind = Kind::conv2d;
    s.conv_kh = kh;
    s.conv_kw = kw;
    s.conv_out = out;
    s.conv_zero_pad = zero_pad;
    return s;
  }
  static LayerSpec activation_of(Activation a) {
    LayerSpec s;
    s.kind = Kind::activation;
    s.act = a;
    return s;
  }
  static LayerSpec pool2x2(PoolOp op) {
    LayerSpec s;
    s.kind = Kind::pool;
    s.pool.op = op;
    s.pool.win_h = s.pool.win_w = 2;
    return s;
  }
  static LayerSpec global_pool(PoolOp op) {
    LayerSpec s;
    s.kind = Kind::pool;
    s.pool.op = op;
    s.pool.global = true;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = Kind::flatten;
    return s;
  }
  static LayerSpec fc(std::int64_t out) {
    LayerSpec s;
    s.kind = Kind::fully_connected;
    s.fc_out = out;
    return s;
  }
};

const char* to_string(LayerSpec::Kind k);

/// Expands a NetworkSpec into its ordered layer list:
///   baseline : 5x5 conv x32, 2x2 pool, 5x5 conv x64, 8x8 global pool, FC(10)
///   baseline2: 3x3 conv x16 ZP, 2x2 pool, 3x3 conv x32 ZP, 2x2 pool,
///              3x3 conv x64 ZP, 7x7 global pool, FC(10)
///   lenet5   : 5x5 conv x6 ZP, 2x2 pool, 5x5 conv x16, 2x2 pool, FC(120),
///              ReLU, FC(84), ReLU, FC(10)
/// The configured activation is inserted after every conv; LeNet5 keeps its
/// fixed FC ReLUs. All networks end in softmax handled by the loss.
std::vector<LayerSpec> layer_specs(const NetworkSpec& spec);

// ---------------------------------------------------------------------------
// Layers with state
// ---------------------------------------------------------------------------

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerSpec::Kind kind() const = 0;
  virtual const Shape& output_shape() const = 0;
  virtual const Tensor<T>& forward(const Tensor<T>& x) = 0;
  /// Consumes the upstream gradient; accumulates parameter gradients and
  /// returns the input gradient (meaningful only when want_grad_in).
  virtual const Tensor<T>& backward(const Tensor<T>& grad_out, bool want_grad_in) = 0;
  virtual void init_params(RngStream& /*param_rng*/, RngStream& /*kernel_rng*/) {}
  virtual void zero_grad() {}
  virtual void sgd_step(double /*lr*/, double /*momentum*/, double /*grad_scale*/) {}
  virtual std::int64_t param_count() const { return 0; }
  virtual OrdinalKernelSet* kernel_set() { return nullptr; }

  struct ParamView {
    std::string name;
    T* data;
    std::int64_t size;
  };
  virtual std::vector<ParamView> param_views() { return {}; }
  /// Accumulated gradients in the same order/layout as param_views().
  virtual std::vector<ParamView> grad_views() { return {}; }
};

namespace detail {

template <typename T>
void glorot_uniform(RngStream& rng, T* data, std::int64_t count, std::int64_t fan_in, std::int64_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::int64_t i = 0; i < count; ++i) data[i] = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
void momentum_update(T* p, T* g, T* v, std::int64_t n, double lr, double momentum, double scale) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double vel = momentum * static_cast<double>(v[i]) - lr * static_cast<double>(g[i]) * scale;
    v[i] = static_cast<T>(vel);
    p[i] = static_cast<T>(static_cast<double>(p[i]) + vel);
  }
}

}  // namespace detail

template <typename T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(const LayerSpec& spec, const Shape& in_shape)
      : zero_pad_(spec.conv_zero_pad),
        w_(Shape{spec.conv_kh, spec.conv_kw, in_shape[2], spec.conv_out}),
        grad_w_(w_.shape()),
        vel_w_(w_.shape()),
        bias_(static_cast<std::size_t>(spec.conv_out), T(0)),
        grad_b_(bias_.size(), T(0)),
        vel_b_(bias_.size(), T(0)),
        out_shape_(conv2d_output_shape(in_shape, w_.shape(), zero_pad_)),
        grad_in_(in_shape) {}

  LayerSpec::Kind kind() const override { return LayerSpec::Kind::conv2d; }
  const Shape& output_shape() const override { return out_shape_; }

  const Tensor<T>& forward(const Tensor<T>& x) override {
    x_ = x;
    out_ = conv2d_forward(x, w_, std::span<const T>(bias_), zero_pad_);
    return out_;
  }

  const Tensor<T>& backward(const Tensor<T>& grad_out, bool want_grad_in) override {
    if (want_grad_in) std::fill(grad_in_.values().begin(), grad_in_.values().end(), T(0));
    conv2d_backward_acc(x_, w_, grad_out, zero_pad_, want_grad_in, &grad_in_, grad_w_,
                        std::span<T>(grad_b_));
    return grad_in_;
  }

  void init_params(RngStream& rng, RngStream&) override {
    const auto& ws = w_.shape();
    const std::int64_t fan_in = ws[0] * ws[1] * ws[2];
    const std::int64_t fan_out = ws[0] * ws[1] * ws[3];
    detail::glorot_uniform(rng, w_.data(), w_.size(), fan_in, fan_out);
    std::fill(bias_.begin(), bias_.end(), T(0));
  }

  void zero_grad() override {
    std::fill(grad_w_.values().begin(), grad_w_.values().end(), T(0));
    std::fill(grad_b_.begin(), grad_b_.end(), T(0));
  }

  void sgd_step(double lr, double momentum, double scale) override {
    detail::momentum_update(w_.data(), grad_w_.data(), vel_w_.data(), w_.size(), lr, momentum, scale);
    detail::momentum_update(bias_.data(), grad_b_.data(), vel_b_.data(),
                            static_cast<std::int64_t>(bias_.size()), lr, momentum, scale);
  }

  std::int64_t param_count() const override { return w_.size() + static_cast<std::int64_t>(bias_.size()); }

  std::vector<typename Layer<T>::ParamView> param_views() override {
    return {{"weights", w_.data(), w_.size()},
            {"bias", bias_.data(), static_cast<std::int64_t>(bias_.size())}};
  }
  std::vector<typename Layer<T>::ParamView> grad_views() override {
    return {{"weights", grad_w_.data(), grad_w_.size()},
            {"bias", grad_b_.data(), static_cast<std::int64_t>(grad_b_.size())}};
  }

  const Tensor<T>& weights() const { return w_; }
  std::span<const T> bias() const { return bias_; }

 private:
  bool zero_pad_;
  Tensor<T> w_, grad_w_, vel_w_;
  std::vector<T> bias_, grad_b_, vel_b_;
  Shape out_shape_;
  Tensor<T> x_, out_, grad_in_;
};

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  ActivationLayer(Activation kind, const Shape& in_shape) : kind_(kind), out_shape_(in_shape) {}

  LayerSpec::Kind kind() const override { return LayerSpec::Kind::activation; }
  const Shape& output_shape() const override { return out_shape_; }
  Activation activation() const { return kind_; }

  const Tensor<T>& forward(const Tensor<T>& x) override {
    out_ = activation_forward(x, kind_);
    return out_;
  }

  const Tensor<T>& backward(const Tensor<T>& grad_out, bool) override {
    grad_in_ = activation_backward(out_, grad_out, kind_);
    return grad_in_;
  }

 private:
  Activation kind_;
  Shape out_shape_;
  Tensor<T> out_, grad_in_;
};

template <typename T>
class ClassicPoolLayer final : public Layer<T> {
 public:
  ClassicPoolLayer(const PoolMode& mode, const Shape& in_shape)
      : mode_(mode), grid_(mode.grid_for(in_shape)), out_shape_{grid_.out_h, grid_.out_w, grid_.channels} {}

  LayerSpec::Kind kind() const override { return LayerSpec::Kind::pool; }
  const Shape& output_shape() const override { return out_shape_; }
  const PoolMode& mode() const { return mode_; }

  const Tensor<T>& forward(const Tensor<T>& x) override {
    classic_pool_forward_into(x, mode_, res_);
    return res_.out;
  }

  const Tensor<T>& backward(const Tensor<T>& grad_out, bool) override {
    if (grad_in_.shape() != Shape{grid_.in_h, grid_.in_w, grid_.channels})
      grad_in_ = Tensor<T>(Shape{grid_.in_h, grid_.in_w, grid_.channels});
    std::fill(grad_in_.values().begin(), grad_in_.values().end(), T(0));
    classic_pool_backward_acc(grad_out, mode_, res_.grid, res_.argselect, grad_in_);
    return grad_in_;
  }

 private:
  PoolMode mode_;
  WindowGrid grid_;
  Shape out_shape_;
  ClassicPoolResult<T> res_;
  Tensor<T> grad_in_;
};

template <typename T>
class OrdinalPoolLayer final : public Layer<T> {
 public:
  OrdinalPoolLayer(const PoolMode& mode, const Shape& in_shape, InitScheme init)
      : mode_(mode),
        grid_(mode.grid_for(in_shape)),
        out_shape_{grid_.out_h, grid_.out_w, grid_.channels},
        init_(init),
        kernels_(grid_.win_h, grid_.win_w, grid_.channels),
        grad_k_(static_cast<std::size_t>(kernels_.param_count()), 0.0),
        vel_k_(grad_k_.size(), 0.0),
        grad_in_(in_shape) {}

  LayerSpec::Kind kind() const override { return LayerSpec::Kind::pool; }
  const Shape& output_shape() const override { return out_shape_; }
  const PoolMode& mode() const { return mode_; }
  InitScheme init_scheme() const { return init_; }

  const Tensor<T>& forward(const Tensor<T>& x) override {
    ordinal_pool_forward_into(x, mode_, kernels_, res_);
    return res_.out;
  }

  const Tensor<T>& backward(const Tensor<T>& grad_out, bool) override {
    std::fill(grad_in_.values().begin(), grad_in_.values().end(), T(0));
    ordinal_pool_backward_acc(grad_out, res_.grid, kernels_, res_.perms, res_.sorted_windows, grad_in_,
                              std::span<double>(grad_k_));
    return grad_in_;
  }

  void init_params(RngStream&, RngStream& kernel_rng) override {
    kernels_ = init_kernels(init_, grid_.win_h, grid_.win_w, grid_.channels, kernel_rng);
  }

  void zero_grad() override { std::fill(grad_k_.begin(), grad_k_.end(), 0.0); }

  /// Momentum step on the kernels followed by per-channel projection back
  /// onto the probability simplex, restoring the constraint exactly.
  void sgd_step(double lr, double momentum, double scale) override {
    double* w = kernels_.raw().data();
    for (std::size_t i = 0; i < grad_k_.size(); ++i) {
      vel_k_[i] = momentum * vel_k_[i] - lr * grad_k_[i] * scale;
      w[i] += vel_k_[i];
    }
    for (std::int64_t c = 0; c < kernels_.channels(); ++c) project_simplex_inplace(kernels_.channel(c));
  }

  std::int64_t param_count() const override { return kernels_.param_count(); }
  OrdinalKernelSet* kernel_set() override { return &kernels_; }
  std::span<const double> kernel_grad() const { return grad_k_; }

 private:
  PoolMode mode_;
  WindowGrid grid_;
  Shape out_shape_;
  InitScheme init_;
  OrdinalKernelSet kernels_;
  std::vector<double> grad_k_, vel_k_;
  OrdinalPoolResult<T> res_;
  Tensor<T> grad_in_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  explicit FlattenLayer(const Shape& in_shape) : in_shape_(in_shape), out_shape_{in_shape.numel()} {}

  LayerSpec::Kind kind() const override { return LayerSpec::Kind::flatten; }
  const Shape& output_shape() const override { return out_shape_; }

  const Tensor<T>& forward(const Tensor<T>& x) override {
    out_ = Tensor<T>(out_shape_);
    std::copy(x.values().begin(), x.values().end(), out_.values().begin());
    return out_;
  }

  const Tensor<T>& backward(const Tensor<T>& grad_out, bool) override {
    grad_in_ = Tensor<T>(in_shape_);
    std::copy(grad_out.values().begin(), grad_out.values().end(), grad_in_.values().begin());
    return grad_in_;
  }

 private:
  Shape in_shape_, out_shape_;
  Tensor<T> out_, grad_in_;
};

template <typename T>
class FcLayer final : public Layer<T> {
 public:
  FcLayer(std::int64_t out, const Shape& in_shape)
      : w_(Shape{in_shape.numel(), out}),
        grad_w_(w_.shape()),
        vel_w_(w_.shape()),
        bias_(static_cast<std::size_t>(out), T(0)),
        grad_b_(bias_.size(), T(0)),
        vel_b_(bias_.size(), T(0)),
        out_shape_{out},
        grad_in_(Shape{in_shape.numel()}) {
    if (in_shape.rank() != 1)
      throw ShapeError("fully connected layer expects a flattened input, got " + in_shape.str());
  }

  LayerSpec::Kind kind() const override { return LayerSpec::Kind::fully_connected; }
  const Shape& output_shape() const override { return out_shape_; }

  const Tensor<T>& forward(const Tensor<T>& x) override {
    x_ = x;
    out_ = fc_forward(x, w_, std::span<const T>(bias_));
    return out_;
  }

  const Tensor<T>& backward(const Tensor<T>& grad_out, bool) override {
    std::fill(grad_in_.values().begin(), grad_in_.values().end(), T(0));
    fc_backward_acc(x_, w_, grad_out, grad_in_, grad_w_, std::span<T>(grad_b_));
    return grad_in_;
  }

  void init_params(RngStream& rng, RngStream&) override {
    detail::glorot_uniform(rng, w_.data(), w_.size(), w_.shape()[0], w_.shape()[1]);
    std::fill(bias_.begin(), bias_.end(), T(0));
  }

  void zero_grad() override {
    std::fill(grad_w_.values().begin(), grad_w_.values().end(), T(0));
    std::fill(grad_b_.begin(), grad_b_.end(), T(0));
  }

  void sgd_step(double lr, double momentum, double scale) override {
    detail::momentum_update(w_.data(), grad_w_.data(), vel_w_.data(), w_.size(), lr, momentum, scale);
    detail::momentum_update(bias_.data(), grad_b_.data(), vel_b_.data(),
                            static_cast<std::int64_t>(bias_.size()), lr, momentum, scale);
  }

  std::int64_t param_count() const override { return w_.size() + static_cast<std::int64_t>(bias_.size()); }

  std::vector<typename Layer<T>::ParamView> param_views() override {
    return {{"weights", w_.data(), w_.size()},
            {"bias", bias_.data(), static_cast<std::int64_t>(bias_.size())}};
  }
  std::vector<typename Layer<T>::ParamView> grad_views() override {
    return {{"weights", grad_w_.data(), grad_w_.size()},
            {"bias", grad_b_.data(), static_cast<std::int64_t>(grad_b_.size())}};
  }

 private:
  Tensor<T> w_, grad_w_, vel_w_;
  std::vector<T> bias_, grad_b_, vel_b_;
  Shape out_shape_;
  Tensor<T> x_, out_, grad_in_;
};

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

template <typename T>
class Network {
 public:
  Network(NetworkSpec spec, Shape input_shape) : spec_(std::move(spec)), input_shape_(std::move(input_shape)) {
    Shape cur = input_shape_;
    for (const LayerSpec& ls : layer_specs(spec_)) {
      std::unique_ptr<Layer<T>> layer;
      switch (ls.kind) {
        case LayerSpec::Kind::conv2d:
          layer = std::make_unique<Conv2dLayer<T>>(ls, cur);
          break;
        case LayerSpec::Kind::activation:
          layer = std::make_unique<ActivationLayer<T>>(ls.act, cur);
          break;
        case LayerSpec::Kind::pool:
          if (ls.pool.op == PoolOp::ordinal) {
            // global ordinal kernels always start from average pooling
            const InitScheme init = ls.pool.global ? InitScheme::average : spec_.ordinal_init;
            layer = std::make_unique<OrdinalPoolLayer<T>>(ls.pool, cur, init);
          } else {
            layer = std::make_unique<ClassicPoolLayer<T>>(ls.pool, cur);
          }
          break;
        case LayerSpec::Kind::flatten:
          layer = std::make_unique<FlattenLayer<T>>(cur);
          break;
        case LayerSpec::Kind::fully_connected:
          layer = std::make_unique<FcLayer<T>>(ls.fc_out, cur);
          break;
      }
      cur = layer->output_shape();
      layers_.push_back(std::move(layer));
    }
    output_shape_ = cur;
  }

  const NetworkSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }

  /// Draws every non-pooling parameter from param_rng in fixed layer order,
  /// then initializes ordinal kernels from kernel_rng. Two networks seeded
  /// identically share identical non-pooling parameters regardless of their
  /// pooling choice.
  void init_params(RngStream& param_rng, RngStream& kernel_rng) {
    for (auto& l : layers_) l->init_params(param_rng, kernel_rng);
  }

  const Tensor<T>& forward(const Tensor<T>& image) {
    const Tensor<T>* cur = &image;
    for (auto& l : layers_) cur = &l->forward(*cur);
    return *cur;
  }

  void backward(const Tensor<T>& grad_logits) {
    const Tensor<T>* cur = &grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      cur = &layers_[i]->backward(*cur, /*want_grad_in=*/i > 0);
    }
  }

  /// Backward that also produces the loss gradient w.r.t. the input image
  /// (gradient-check path).
  Tensor<T> backward_with_input_grad(const Tensor<T>& grad_logits) {
    const Tensor<T>* cur = &grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) cur = &layers_[i]->backward(*cur, true);
    return *cur;
  }

  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  void sgd_step(double lr, double momentum, double grad_scale = 1.0) {
    for (auto& l : layers_) l->sgd_step(lr, momentum, grad_scale);
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers_) n += l->param_count();
    return n;
  }

  std::vector<OrdinalKernelSet*> ordinal_kernels() {
    std::vector<OrdinalKernelSet*> out;
    for (auto& l : layers_)
      if (auto* k = l->kernel_set()) out.push_back(k);
    return out;
  }

  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }
  const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }

 private:
  NetworkSpec spec_;
  Shape input_shape_;
  Shape output_shape_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
struct NetworkPair {
  Network<T> classic;
  Network<T> ordinal;
};

/// Builds a (classic, ordinal) pair in exactly the same state: both draw
/// their non-pooling parameters from one stream seeded by `seed`, so with
/// average kernel initialization the two produce identical outputs on any
/// input until the first update.
template <typename T>
NetworkPair<T> build_paired(const NetworkSpec& spec_classic, const NetworkSpec& spec_ordinal,
                            std::uint64_t seed, const Shape& input_shape = Shape{28, 28, 1}) {
  if (spec_classic.name != spec_ordinal.name || spec_classic.activation != spec_ordinal.activation)
    throw ConfigError("build_paired: specs must differ only in their pooling choice");
  if (spec_classic.pooling == PoolingChoice::ordinal)
    throw ConfigError("build_paired: first spec must use classic pooling");
  if (spec_ordinal.pooling != PoolingChoice::ordinal)
    throw ConfigError("build_paired: second spec must use ordinal pooling");

  NetworkPair<T> pair{Network<T>(spec_classic, input_shape), Network<T>(spec_ordinal, input_shape)};
  {
    RngStream params(derive_seed(seed, 0));
    RngStream kernels(derive_seed(seed, 1));
    pair.classic.init_params(params, kernels);
  }
  {
    RngStream params(derive_seed(seed, 0));
    RngStream kernels(derive_seed(seed, 1));
    pair.ordinal.init_params(params, kernels);
  }
  return pair;
}

/// 64-bit-decimal JSON checkpoint of every parameter; byte-stable for
/// identical runs and value-exact on reload.
template <typename T>
std::string network_to_json(const Network<T>& net);
template <typename T>
void network_load_json(Network<T>& net, const std::string& text);

}  // namespace ordpool
