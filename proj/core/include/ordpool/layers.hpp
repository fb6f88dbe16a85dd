#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ordpool/error.hpp"
#include "ordpool/tensor.hpp"

namespace ordpool {

enum class Activation { none, relu, tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::none;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "' (expected none|relu|tanh)");
}

// ---------------------------------------------------------------------------
// 2-D convolution (cross-correlation, stride 1)
// ---------------------------------------------------------------------------
//
// x: [H, W, Cin], weights: [kh, kw, Cin, Cout], bias: [Cout].
// zero_pad pads by (k-1)/2 on each side, preserving the spatial extent for
// odd kernels. The output-channel axis is innermost so the hot loops
// vectorize; per-output summation order is fixed (ky, kx, ci), which keeps
// results bit-reproducible between runs.

inline Shape conv2d_output_shape(const Shape& x, const Shape& w, bool zero_pad) {
  if (x.rank() != 3) throw ShapeError("conv2d expects [H, W, Cin] input, got " + x.str());
  if (w.rank() != 4) throw ShapeError("conv2d expects [kh, kw, Cin, Cout] weights, got " + w.str());
  if (x[2] != w[2])
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(x[2]) + ", weights expect " +
                     std::to_string(w[2]));
  const std::int64_t oh = zero_pad ? x[0] : x[0] - w[0] + 1;
  const std::int64_t ow = zero_pad ? x[1] : x[1] - w[1] + 1;
  if (oh < 1 || ow < 1)
    throw ShapeError("conv2d kernel " + w.str() + " too large for input " + x.str());
  return Shape{oh, ow, w[3]};
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, std::span<const T> bias, bool zero_pad) {
  const Shape out_shape = conv2d_output_shape(x.shape(), w.shape(), zero_pad);
  const std::int64_t kh = w.shape()[0], kw = w.shape()[1];
  const std::int64_t cin = w.shape()[2], cout = w.shape()[3];
  if (bias.size() != static_cast<std::size_t>(cout)) throw ShapeError("conv2d bias size mismatch");
  const std::int64_t h = x.shape()[0], iw = x.shape()[1];
  const std::int64_t ph = zero_pad ? (kh - 1) / 2 : 0;
  const std::int64_t pw = zero_pad ? (kw - 1) / 2 : 0;

  Tensor<T> out(out_shape);
  const T* xp = x.data();
  const T* wp = w.data();
  T* op = out.data();
  const std::int64_t xrow = iw * cin;

  // four output pixels share one pass over the weight rows; each output's
  // accumulation order (ky, kx, ci) is unchanged, so results do not depend
  // on the blocking
  std::vector<T> acc(static_cast<std::size_t>(4 * cout));
  for (std::int64_t oy = 0; oy < out_shape[0]; ++oy) {
    std::int64_t ox = 0;
    while (ox < out_shape[1]) {
      const std::int64_t block = std::min<std::int64_t>(4, out_shape[1] - ox);
      for (std::int64_t b = 0; b < block; ++b)
        std::copy(bias.begin(), bias.end(), acc.begin() + b * cout);
      for (std::int64_t ky = 0; ky < kh; ++ky) {
        const std::int64_t iy = oy + ky - ph;
        if (iy < 0 || iy >= h) continue;
        const T* xline = xp + iy * xrow;
        for (std::int64_t kx = 0; kx < kw; ++kx) {
          const std::int64_t ix0 = ox + kx - pw;
          if (block == 4 && ix0 >= 0 && ix0 + 3 < iw) {
            const T* x0 = xline + ix0 * cin;
            const T* wrow_p = wp + (ky * kw + kx) * cin * cout;
            T* a0 = acc.data();
            T* a1 = a0 + cout;
            T* a2 = a1 + cout;
            T* a3 = a2 + cout;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
              const T v0 = x0[ci];
              const T v1 = x0[cin + ci];
              const T v2 = x0[2 * cin + ci];
              const T v3 = x0[3 * cin + ci];
              const T* wr = wrow_p + ci * cout;
              for (std::int64_t co = 0; co < cout; ++co) {
                a0[co] += v0 * wr[co];
                a1[co] += v1 * wr[co];
                a2[co] += v2 * wr[co];
                a3[co] += v3 * wr[co];
              }
            }
          } else {
            for (std::int64_t b = 0; b < block; ++b) {
              const std::int64_t ix = ix0 + b;
              if (ix < 0 || ix >= iw) continue;
              const T* xcol = xline + ix * cin;
              const T* wrow_p = wp + (ky * kw + kx) * cin * cout;
              T* ab = acc.data() + b * cout;
              for (std::int64_t ci = 0; ci < cin; ++ci) {
                const T v = xcol[ci];
                const T* wr = wrow_p + ci * cout;
                for (std::int64_t co = 0; co < cout; ++co) ab[co] += v * wr[co];
              }
            }
          }
        }
      }
      for (std::int64_t b = 0; b < block; ++b)
        std::copy(acc.begin() + b * cout, acc.begin() + (b + 1) * cout, op + (oy * out_shape[1] + ox + b) * cout);
      ox += block;
    }
  }
  return out;
}

/// Accumulating backward: adds into grad_w/grad_b, writes grad_x when
/// want_grad_x (the input-layer convolution skips it). grad_x must be
/// pre-zeroed by the caller when wanted.
template <typename T>
void conv2d_backward_acc(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out, bool zero_pad,
                         bool want_grad_x, Tensor<T>* grad_x, Tensor<T>& grad_w, std::span<T> grad_b) {
  const Shape out_shape = conv2d_output_shape(x.shape(), w.shape(), zero_pad);
  if (grad_out.shape() != out_shape)
    throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape().str() + " != " + out_shape.str());
  if (grad_w.shape() != w.shape()) throw ShapeError("conv2d_backward: grad_w shape mismatch");
  const std::int64_t kh = w.shape()[0], kw = w.shape()[1];
  const std::int64_t cin = w.shape()[2], cout = w.shape()[3];
  if (grad_b.size() != static_cast<std::size_t>(cout)) throw ShapeError("conv2d_backward: grad_b size mismatch");
  const std::int64_t h = x.shape()[0], iw = x.shape()[1];
  const std::int64_t ph = zero_pad ? (kh - 1) / 2 : 0;
  const std::int64_t pw = zero_pad ? (kw - 1) / 2 : 0;
  const std::int64_t xrow = iw * cin;

  const T* xp = x.data();
  const T* gp = grad_out.data();
  T* gwp = grad_w.data();

  // weights transposed to [kh, kw, Cout, Cin] so grad_x accumulation runs
  // with ci innermost
  std::vector<T> wt;
  T* gxp = nullptr;
  if (want_grad_x) {
    if (grad_x == nullptr || grad_x->shape() != x.shape())
      throw ShapeError("conv2d_backward: grad_x shape mismatch");
    gxp = grad_x->data();
    wt.resize(static_cast<std::size_t>(kh * kw * cin * cout));
    const T* wp = w.data();
    for (std::int64_t k = 0; k < kh * kw; ++k)
      for (std::int64_t ci = 0; ci < cin; ++ci)
        for (std::int64_t co = 0; co < cout; ++co)
          wt[static_cast<std::size_t>((k * cout + co) * cin + ci)] = wp[(k * cin + ci) * cout + co];
  }

  for (std::int64_t oy = 0; oy < out_shape[0]; ++oy) {
    std::int64_t ox = 0;
    while (ox < out_shape[1]) {
      const std::int64_t block = std::min<std::int64_t>(4, out_shape[1] - ox);
      const T* grow0 = gp + (oy * out_shape[1] + ox) * cout;
      for (std::int64_t b = 0; b < block; ++b)
        for (std::int64_t co = 0; co < cout; ++co) grad_b[static_cast<std::size_t>(co)] += grow0[b * cout + co];

      for (std::int64_t ky = 0; ky < kh; ++ky) {
        const std::int64_t iy = oy + ky - ph;
        if (iy < 0 || iy >= h) continue;
        const T* xline = xp + iy * xrow;
        T* gxline = want_grad_x ? gxp + iy * xrow : nullptr;
        for (std::int64_t kx = 0; kx < kw; ++kx) {
          const std::int64_t ix0 = ox + kx - pw;
          if (block == 4 && ix0 >= 0 && ix0 + 3 < iw) {
            const T* x0 = xline + ix0 * cin;
            T* gw_base = gwp + (ky * kw + kx) * cin * cout;
            const T* g0 = grow0;
            const T* g1 = g0 + cout;
            const T* g2 = g1 + cout;
            const T* g3 = g2 + cout;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
              const T v0 = x0[ci];
              const T v1 = x0[cin + ci];
              const T v2 = x0[2 * cin + ci];
              const T v3 = x0[3 * cin + ci];
              T* gw = gw_base + ci * cout;
              for (std::int64_t co = 0; co < cout; ++co)
                gw[co] += v0 * g0[co] + v1 * g1[co] + v2 * g2[co] + v3 * g3[co];
            }
            if (want_grad_x) {
              T* gx0 = gxline + ix0 * cin;
              const T* wt_base = wt.data() + (ky * kw + kx) * cout * cin;
              for (std::int64_t co = 0; co < cout; ++co) {
                const T ga = g0[co];
                const T gb = g1[co];
                const T gc = g2[co];
                const T gd = g3[co];
                const T* wr = wt_base + co * cin;
                for (std::int64_t ci = 0; ci < cin; ++ci) {
                  gx0[ci] += ga * wr[ci];
                  gx0[cin + ci] += gb * wr[ci];
                  gx0[2 * cin + ci] += gc * wr[ci];
                  gx0[3 * cin + ci] += gd * wr[ci];
                }
              }
            }
          } else {
            for (std::int64_t b = 0; b < block; ++b) {
              const std::int64_t ix = ix0 + b;
              if (ix < 0 || ix >= iw) continue;
              const T* xcol = xline + ix * cin;
              const T* grow = grow0 + b * cout;
              T* gw_base = gwp + (ky * kw + kx) * cin * cout;
              for (std::int64_t ci = 0; ci < cin; ++ci) {
                const T v = xcol[ci];
                T* gw = gw_base + ci * cout;
                for (std::int64_t co = 0; co < cout; ++co) gw[co] += v * grow[co];
              }
              if (want_grad_x) {
                T* gx = gxline + ix * cin;
                const T* wt_base = wt.data() + (ky * kw + kx) * cout * cin;
                for (std::int64_t co = 0; co < cout; ++co) {
                  const T g = grow[co];
                  const T* wr = wt_base + co * cin;
                  for (std::int64_t ci = 0; ci < cin; ++ci) gx[ci] += g * wr[ci];
                }
              }
            }
          }
        }
      }
      ox += block;
    }
  }
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  std::vector<T> grad_b;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                               bool zero_pad) {
  Conv2dGrads<T> g;
  g.grad_x = Tensor<T>(x.shape());
  g.grad_w = Tensor<T>(w.shape());
  g.grad_b.assign(static_cast<std::size_t>(w.shape()[3]), T(0));
  conv2d_backward_acc(x, w, grad_out, zero_pad, /*want_grad_x=*/true, &g.grad_x, g.grad_w,
                      std::span<T>(g.grad_b));
  return g;
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------
//
// x: [in], W: [in, out] row-major, b: [out].

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const Tensor<T>& w, std::span<const T> bias) {
  if (x.shape().rank() != 1) throw ShapeError("fc expects a flat input, got " + x.shape().str());
  if (w.shape().rank() != 2 || w.shape()[0] != x.shape()[0])
    throw ShapeError("fc weight shape " + w.shape().str() + " does not match input " + x.shape().str());
  const std::int64_t in = w.shape()[0], out_n = w.shape()[1];
  if (bias.size() != static_cast<std::size_t>(out_n)) throw ShapeError("fc bias size mismatch");
  Tensor<T> out(Shape{out_n});
  T* op = out.data();
  std::copy(bias.begin(), bias.end(), op);
  const T* xp = x.data();
  const T* wp = w.data();
  for (std::int64_t i = 0; i < in; ++i) {
    const T v = xp[i];
    const T* wr = wp + i * out_n;
    for (std::int64_t o = 0; o < out_n; ++o) op[o] += v * wr[o];
  }
  return out;
}

template <typename T>
void fc_backward_acc(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                     Tensor<T>& grad_x, Tensor<T>& grad_w, std::span<T> grad_b) {
  const std::int64_t in = w.shape()[0], out_n = w.shape()[1];
  if (grad_out.shape() != Shape{out_n}) throw ShapeError("fc_backward: grad_out shape mismatch");
  if (grad_x.shape() != x.shape() || grad_w.shape() != w.shape() ||
      grad_b.size() != static_cast<std::size_t>(out_n))
    throw ShapeError("fc_backward: gradient buffer shape mismatch");
  const T* gp = grad_out.data();
  const T* xp = x.data();
  const T* wp = w.data();
  T* gxp = grad_x.data();
  T* gwp = grad_w.data();
  for (std::int64_t o = 0; o < out_n; ++o) grad_b[static_cast<std::size_t>(o)] += gp[o];
  for (std::int64_t i = 0; i < in; ++i) {
    const T v = xp[i];
    const T* wr = wp + i * out_n;
    T* gw = gwp + i * out_n;
    T acc = T(0);
    for (std::int64_t o = 0; o < out_n; ++o) {
      gw[o] += v * gp[o];
      acc += wr[o] * gp[o];
    }
    gxp[i] += acc;
  }
}

template <typename T>
struct FcGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  std::vector<T> grad_b;
};

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out) {
  FcGrads<T> g;
  g.grad_x = Tensor<T>(x.shape());
  g.grad_w = Tensor<T>(w.shape());
  g.grad_b.assign(static_cast<std::size_t>(w.shape()[1]), T(0));
  fc_backward_acc(x, w, grad_out, g.grad_x, g.grad_w, std::span<T>(g.grad_b));
  return g;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation kind) {
  Tensor<T> out = x;
  switch (kind) {
    case Activation::none:
      break;
    case Activation::relu:
      for (auto& v : out.values()) v = std::max(T(0), v);
      break;
    case Activation::tanh:
      for (auto& v : out.values()) v = std::tanh(v);
      break;
  }
  return out;
}

/// Backward from the frozen forward output: relu masks where output > 0,
/// tanh uses 1 - y^2.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& forward_out, const Tensor<T>& grad_out, Activation kind) {
  if (forward_out.shape() != grad_out.shape()) throw ShapeError("activation_backward: shape mismatch");
  Tensor<T> grad_in = grad_out;
  switch (kind) {
    case Activation::none:
      break;
    case Activation::relu:
      for (std::int64_t i = 0; i < grad_in.size(); ++i)
        if (!(forward_out[i] > T(0))) grad_in[i] = T(0);
      break;
    case Activation::tanh:
      for (std::int64_t i = 0; i < grad_in.size(); ++i) {
        const T y = forward_out[i];
        grad_in[i] = grad_out[i] * (T(1) - y * y);
      }
      break;
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

template <typename T>
struct SoftmaxCeResult {
  double loss = 0.0;
  std::vector<T> grad_logits;
};

/// Numerically stabilized (max-subtracted) softmax with negative
/// log-likelihood loss; gradient is p - onehot(label).
template <typename T>
SoftmaxCeResult<T> softmax_cross_entropy(std::span<const T> logits, int label) {
  const int k = static_cast<int>(logits.size());
  if (label < 0 || label >= k)
    throw RangeError("softmax label " + std::to_string(label) + " out of range [0, " + std::to_string(k) + ")");
  double max_logit = static_cast<double>(logits[0]);
  for (const T v : logits) max_logit = std::max(max_logit, static_cast<double>(v));
  double denom = 0.0;
  std::vector<double> e(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    e[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(logits[static_cast<std::size_t>(i)]) - max_logit);
    denom += e[static_cast<std::size_t>(i)];
  }
  SoftmaxCeResult<T> res;
  res.loss = -(static_cast<double>(logits[static_cast<std::size_t>(label)]) - max_logit - std::log(denom));
  res.grad_logits.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double p = e[static_cast<std::size_t>(i)] / denom;
    res.grad_logits[static_cast<std::size_t>(i)] = static_cast<T>(p - (i == label ? 1.0 : 0.0));
  }
  return res;
}

template <typename T>
SoftmaxCeResult<T> softmax_cross_entropy(std::span<T> logits, int label) {
  return softmax_cross_entropy(std::span<const T>(logits), label);
}

}  // namespace ordpool
