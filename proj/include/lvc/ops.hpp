// Copyright (c) the LVC Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Differentiable tensor operations. Each op appends one node to the graph;
// backward closures recompute cheap intermediates from stored node values
// instead of saving extra tensors.
//
// FLOP accounting convention (used by the evaluation kit): one
// multiply-accumulate counts as 2 FLOPs; elementwise ops count one per
// output element; bilinear sampling counts 8 per output element; pure data
// movement (concat/slice/pad/crop) is free.

#ifndef LVC_OPS_HPP_
#define LVC_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "lvc/graph.hpp"
#include "lvc/kernels.hpp"
#include "lvc/mathfn.hpp"

namespace lvc::ops {

// Routes float work through the dispatched kernel table; other dtypes use
// the scalar references directly.
template <typename T>
struct Ew {
  static void add(const T* a, const T* b, T* o, i64 n) {
    kern::add_ref<T>(a, b, o, n);
  }
  static void sub(const T* a, const T* b, T* o, i64 n) {
    kern::sub_ref<T>(a, b, o, n);
  }
  static void mul(const T* a, const T* b, T* o, i64 n) {
    kern::mul_ref<T>(a, b, o, n);
  }
  static void leaky_fwd(const T* x, T* o, i64 n, T s) {
    kern::leaky_fwd_ref<T>(x, o, n, s);
  }
  static void leaky_bwd(const T* x, const T* g, T* o, i64 n, T s) {
    kern::leaky_bwd_ref<T>(x, g, o, n, s);
  }
  static void conv_fwd(const T* in, const T* w, const T* b, T* out,
                       const kern::ConvShape& s) {
    kern::conv2d_fwd_ref<T>(in, w, b, out, s);
  }
  static void conv_wgrad(const T* in, const T* g, T* wg,
                         const kern::ConvShape& s) {
    kern::conv2d_wgrad_ref<T>(in, g, wg, s);
  }
};

template <>
struct Ew<float> {
  static void add(const float* a, const float* b, float* o, i64 n) {
    kern::active_kernels().add(a, b, o, n);
  }
  static void sub(const float* a, const float* b, float* o, i64 n) {
    kern::active_kernels().sub(a, b, o, n);
  }
  static void mul(const float* a, const float* b, float* o, i64 n) {
    kern::active_kernels().mul(a, b, o, n);
  }
  static void leaky_fwd(const float* x, float* o, i64 n, float s) {
    kern::active_kernels().leaky_fwd(x, o, n, s);
  }
  static void leaky_bwd(const float* x, const float* g, float* o, i64 n,
                        float s) {
    kern::active_kernels().leaky_bwd(x, g, o, n, s);
  }
  static void conv_fwd(const float* in, const float* w, const float* b,
                       float* out, const kern::ConvShape& s) {
    kern::active_kernels().conv2d_fwd(in, w, b, out, s);
  }
  static void conv_wgrad(const float* in, const float* g, float* wg,
                         const kern::ConvShape& s) {
    kern::active_kernels().conv2d_wgrad(in, g, wg, s);
  }
};

// Appends a node whose backward closure needs its own handle (to read the
// incoming gradient). Node ids are assigned sequentially, so the handle can
// be formed before insertion.
template <typename T, typename BwFactory>
Var<T> node(Graph<T>& g, Tensor<T> value, bool rg, i64 flops, BwFactory f) {
  if (!rg || !g.grad_enabled()) {
    return g.make(std::move(value), false, nullptr, flops);
  }
  Var<T> self{&g, g.size()};
  return g.make(std::move(value), true, f(self), flops);
}

template <typename T>
bool any_grad(Graph<T>& g, std::initializer_list<Var<T>> vars) {
  for (Var<T> v : vars) {
    if (g.requires_grad(v)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------
// Convolution. x:(N,Ci,H,W), w:(Co,Ci,k,k), optional bias:(1,Co,1,1).

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> bias, i64 stride, i64 pad) {
  Graph<T>& g = *x.g;
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  LVC_CHECK(ws.h == ws.w, "conv kernel must be square, got ", ws.str());
  LVC_CHECK(ws.c == xs.c, "conv channel mismatch: input ", xs.str(),
            " vs weights ", ws.str());
  LVC_CHECK(pad <= ws.h - 1, "conv pad ", pad, " too large for k=", ws.h);
  if (bias.valid()) {
    LVC_CHECK(bias.shape() == (Shape{1, ws.n, 1, 1}), "conv bias shape ",
              bias.shape().str(), " does not match weights ", ws.str());
  }
  const kern::ConvShape cs =
      kern::make_conv_shape(xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, stride, pad);

  Tensor<T> out(Shape{cs.n, cs.co, cs.ho, cs.wo});
  Ew<T>::conv_fwd(g.val(x).data(), g.val(w).data(),
                  bias.valid() ? g.val(bias).data() : nullptr, out.data(), cs);

  const bool rg = any_grad(g, {x, w, bias});
  return node(g, std::move(out), rg, cs.flops(), [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      if (gr.requires_grad(x)) {
        // grad wrt input: stride-1 convolution of the zero-stuffed output
        // gradient with the flipped, channel-transposed weights.
        const i64 k = cs.k;
        const i64 ah = (cs.hi + 2 * cs.pad - k) - (cs.ho - 1) * cs.stride;
        const i64 aw = (cs.wi + 2 * cs.pad - k) - (cs.wo - 1) * cs.stride;
        const i64 hs = (cs.ho - 1) * cs.stride + 1 + ah;
        const i64 wss = (cs.wo - 1) * cs.stride + 1 + aw;
        Tensor<T> stuffed(Shape{cs.n, cs.co, hs, wss});
        for (i64 n = 0; n < cs.n; ++n) {
          for (i64 c = 0; c < cs.co; ++c) {
            for (i64 y = 0; y < cs.ho; ++y) {
              for (i64 xx = 0; xx < cs.wo; ++xx) {
                stuffed.at(n, c, y * cs.stride, xx * cs.stride) =
                    go.at(n, c, y, xx);
              }
            }
          }
        }
        const Tensor<T>& wt_src = gr.val(w);
        Tensor<T> wt(Shape{cs.ci, cs.co, k, k});
        for (i64 co = 0; co < cs.co; ++co) {
          for (i64 ci = 0; ci < cs.ci; ++ci) {
            for (i64 ky = 0; ky < k; ++ky) {
              for (i64 kx = 0; kx < k; ++kx) {
                wt.at(ci, co, ky, kx) =
                    wt_src.at(co, ci, k - 1 - ky, k - 1 - kx);
              }
            }
          }
        }
        const kern::ConvShape bs = kern::make_conv_shape(
            cs.n, cs.co, hs, wss, cs.ci, k, 1, k - 1 - cs.pad);
        LVC_CHECK(bs.ho == cs.hi && bs.wo == cs.wi,
                  "conv grad-input dims mismatch");
        Tensor<T> gx(Shape{cs.n, cs.ci, cs.hi, cs.wi});
        Ew<T>::conv_fwd(stuffed.data(), wt.data(), nullptr, gx.data(), bs);
        gr.accum_grad(x, std::move(gx));
      }
      if (gr.requires_grad(w)) {
        Tensor<T> gw(Shape{cs.co, cs.ci, cs.k, cs.k});
        Ew<T>::conv_wgrad(gr.val(x).data(), go.data(), gw.data(), cs);
        gr.accum_grad(w, std::move(gw));
      }
      if (bias.valid() && gr.requires_grad(bias)) {
        Tensor<T> gb(Shape{1, cs.co, 1, 1});
        kern::conv2d_bgrad_ref<T>(go.data(), gb.data(), cs);
        gr.accum_grad(bias, std::move(gb));
      }
    };
  });
}

// ---------------------------------------------------------------------
// Transposed convolution. x:(N,Ci,H,W), w:(Ci,Co,k,k), bias:(1,Co,1,1).
// Output is ((H-1)*stride - 2*pad + k + out_pad) square-wise; the codec
// stacks use k=3, stride=2, pad=1, out_pad=1 for an exact 2x upsample.

template <typename T>
Var<T> deconv2d(Var<T> x, Var<T> w, Var<T> bias, i64 stride, i64 pad,
                i64 out_pad) {
  Graph<T>& g = *x.g;
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  LVC_CHECK(ws.h == ws.w, "deconv kernel must be square, got ", ws.str());
  LVC_CHECK(ws.n == xs.c, "deconv channel mismatch: input ", xs.str(),
            " vs weights ", ws.str());
  LVC_CHECK(out_pad < stride, "deconv out_pad ", out_pad, " >= stride ",
            stride);
  const i64 k = ws.h, ci = xs.c, co = ws.c;
  const i64 ho = (xs.h - 1) * stride - 2 * pad + k + out_pad;
  const i64 wo = (xs.w - 1) * stride - 2 * pad + k + out_pad;
  LVC_CHECK(ho >= 1 && wo >= 1, "deconv output collapsed for input ",
            xs.str());
  if (bias.valid()) {
    LVC_CHECK(bias.shape() == (Shape{1, co, 1, 1}), "deconv bias shape ",
              bias.shape().str(), " does not match weights ", ws.str());
  }

  Tensor<T> out(Shape{xs.n, co, ho, wo});
  kern::deconv2d_fwd_ref<T>(g.val(x).data(), g.val(w).data(),
                            bias.valid() ? g.val(bias).data() : nullptr,
                            out.data(), xs.n, ci, xs.h, xs.w, co, k, stride,
                            pad, ho, wo);

  const i64 flops = 2 * xs.n * ci * co * k * k * xs.h * xs.w;
  const bool rg = any_grad(g, {x, w, bias});
  return node(g, std::move(out), rg, flops, [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      // Both gradients are convolutions with swapped roles:
      //   gx = conv(go, w) with this op's stride/pad (w already (Ci,Co,k,k)
      //        = conv layout with Ci as the output channel);
      //   gw[ci,co,..] = wgrad with x as the "output gradient" and go as
      //        the "input".
      const kern::ConvShape bs =
          kern::make_conv_shape(xs.n, co, ho, wo, ci, k, stride, pad);
      LVC_CHECK(bs.ho == xs.h && bs.wo == xs.w, "deconv grad dims mismatch");
      if (gr.requires_grad(x)) {
        Tensor<T> gx(Shape{xs.n, ci, xs.h, xs.w});
        Ew<T>::conv_fwd(go.data(), gr.val(w).data(), nullptr, gx.data(), bs);
        gr.accum_grad(x, std::move(gx));
      }
      if (gr.requires_grad(w)) {
        Tensor<T> gw(Shape{ci, co, k, k});
        Ew<T>::conv_wgrad(go.data(), gr.val(x).data(), gw.data(), bs);
        gr.accum_grad(w, std::move(gw));
      }
      if (bias.valid() && gr.requires_grad(bias)) {
        // Sum of go over (n, y, x) per output channel.
        Tensor<T> gb(Shape{1, co, 1, 1});
        kern::ConvShape gs{};
        gs.n = xs.n;
        gs.co = co;
        gs.ho = ho;
        gs.wo = wo;
        kern::conv2d_bgrad_ref<T>(go.data(), gb.data(), gs);
        gr.accum_grad(bias, std::move(gb));
      }
    };
  });
}

// ---------------------------------------------------------------------
// Elementwise arithmetic.

template <typename T>
void check_same_shape(Var<T> a, Var<T> b, const char* opname) {
  LVC_CHECK(a.shape() == b.shape(), opname, " shape mismatch ",
            a.shape().str(), " vs ", b.shape().str());
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.g;
  check_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  Ew<T>::add(g.val(a).data(), g.val(b).data(), out.data(), out.numel());
  return node(g, std::move(out), any_grad(g, {a, b}), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  if (gr.requires_grad(a)) gr.accum_grad(a, Tensor<T>(go));
                  if (gr.requires_grad(b)) gr.accum_grad(b, Tensor<T>(go));
                };
              });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.g;
  check_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  Ew<T>::sub(g.val(a).data(), g.val(b).data(), out.data(), out.numel());
  return node(g, std::move(out), any_grad(g, {a, b}), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  if (gr.requires_grad(a)) gr.accum_grad(a, Tensor<T>(go));
                  if (gr.requires_grad(b)) {
                    Tensor<T> gb(go.shape());
                    for (i64 i = 0; i < gb.numel(); ++i) gb[i] = -go[i];
                    gr.accum_grad(b, std::move(gb));
                  }
                };
              });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.g;
  check_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  Ew<T>::mul(g.val(a).data(), g.val(b).data(), out.data(), out.numel());
  return node(g, std::move(out), any_grad(g, {a, b}), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  if (gr.requires_grad(a)) {
                    Tensor<T> ga(go.shape());
                    Ew<T>::mul(go.data(), gr.val(b).data(), ga.data(),
                               ga.numel());
                    gr.accum_grad(a, std::move(ga));
                  }
                  if (gr.requires_grad(b)) {
                    Tensor<T> gb(go.shape());
                    Ew<T>::mul(go.data(), gr.val(a).data(), gb.data(),
                               gb.numel());
                    gr.accum_grad(b, std::move(gb));
                  }
                };
              });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.g;
  check_same_shape(a, b, "div");
  Tensor<T> out(a.shape());
  const Tensor<T>& av = g.val(a);
  const Tensor<T>& bv = g.val(b);
  for (i64 i = 0; i < out.numel(); ++i) out[i] = av[i] / bv[i];
  return node(g, std::move(out), any_grad(g, {a, b}), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  const Tensor<T>& ov = gr.val(self);
                  const Tensor<T>& den = gr.val(b);
                  if (gr.requires_grad(a)) {
                    Tensor<T> ga(go.shape());
                    for (i64 i = 0; i < ga.numel(); ++i) {
                      ga[i] = go[i] / den[i];
                    }
                    gr.accum_grad(a, std::move(ga));
                  }
                  if (gr.requires_grad(b)) {
                    Tensor<T> gb(go.shape());
                    for (i64 i = 0; i < gb.numel(); ++i) {
                      gb[i] = -(go[i] * ov[i]) / den[i];
                    }
                    gr.accum_grad(b, std::move(gb));
                  }
                };
              });
}

// out = a*x + b with scalar coefficients.
template <typename T>
Var<T> affine(Var<T> x, T a, T b) {
  Graph<T>& g = *x.g;
  Tensor<T> out(x.shape());
  const Tensor<T>& xv = g.val(x);
  for (i64 i = 0; i < out.numel(); ++i) out[i] = a * xv[i] + b;
  return node(g, std::move(out), g.requires_grad(x), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  Tensor<T> gx(go.shape());
                  for (i64 i = 0; i < gx.numel(); ++i) gx[i] = a * go[i];
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope) {
  Graph<T>& g = *x.g;
  Tensor<T> out(x.shape());
  Ew<T>::leaky_fwd(g.val(x).data(), out.data(), out.numel(), slope);
  return node(g, std::move(out), g.requires_grad(x), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  Tensor<T> gx(go.shape());
                  Ew<T>::leaky_bwd(gr.val(x).data(), go.data(), gx.data(),
                                   gx.numel(), slope);
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Graph<T>& g = *x.g;
  Tensor<T> out(x.shape());
  const Tensor<T>& xv = g.val(x);
  for (i64 i = 0; i < out.numel(); ++i) out[i] = math::sigmoid_<T>(xv[i]);
  return node(g, std::move(out), g.requires_grad(x), 4 * out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  const Tensor<T>& ov = gr.val(self);
                  Tensor<T> gx(go.shape());
                  for (i64 i = 0; i < gx.numel(); ++i) {
                    gx[i] = go[i] * ov[i] * (T(1) - ov[i]);
                  }
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

template <typename T>
Var<T> softplus(Var<T> x) {
  Graph<T>& g = *x.g;
  Tensor<T> out(x.shape());
  const Tensor<T>& xv = g.val(x);
  for (i64 i = 0; i < out.numel(); ++i) out[i] = math::softplus_<T>(xv[i]);
  return node(g, std::move(out), g.requires_grad(x), 4 * out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  const Tensor<T>& xv2 = gr.val(x);
                  Tensor<T> gx(go.shape());
                  for (i64 i = 0; i < gx.numel(); ++i) {
                    gx[i] = go[i] * math::sigmoid_<T>(xv2[i]);
                  }
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

// Natural log; inputs must be positive (likelihoods are clamped upstream).
template <typename T>
Var<T> lognat(Var<T> x) {
  Graph<T>& g = *x.g;
  Tensor<T> out(x.shape());
  const Tensor<T>& xv = g.val(x);
  for (i64 i = 0; i < out.numel(); ++i) out[i] = math::log_<T>(xv[i]);
  return node(g, std::move(out), g.requires_grad(x), 4 * out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  const Tensor<T>& xv2 = gr.val(x);
                  Tensor<T> gx(go.shape());
                  for (i64 i = 0; i < gx.numel(); ++i) {
                    gx[i] = go[i] / xv2[i];
                  }
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

// x^p for positive x (clamp upstream when needed).
template <typename T>
Var<T> pow_const(Var<T> x, T p) {
  Graph<T>& g = *x.g;
  Tensor<T> out(x.shape());
  const Tensor<T>& xv = g.val(x);
  for (i64 i = 0; i < out.numel(); ++i) {
    LVC_CHECK(xv[i] > T(0), "pow_const requires positive base, got ", xv[i]);
    out[i] = math::exp_<T>(p * math::log_<T>(xv[i]));
  }
  return node(g, std::move(out), g.requires_grad(x), 8 * out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  const Tensor<T>& ov = gr.val(self);
                  const Tensor<T>& xv2 = gr.val(x);
                  Tensor<T> gx(go.shape());
                  for (i64 i = 0; i < gx.numel(); ++i) {
                    gx[i] = go[i] * p * ov[i] / xv2[i];
                  }
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

// Clamp with pass-through gradient inside the (inclusive) interval.
template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi) {
  Graph<T>& g = *x.g;
  Tensor<T> out(x.shape());
  const Tensor<T>& xv = g.val(x);
  for (i64 i = 0; i < out.numel(); ++i) {
    out[i] = std::min(hi, std::max(lo, xv[i]));
  }
  return node(g, std::move(out), g.requires_grad(x), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  const Tensor<T>& xv2 = gr.val(x);
                  Tensor<T> gx(go.shape());
                  for (i64 i = 0; i < gx.numel(); ++i) {
                    gx[i] = (xv2[i] >= lo && xv2[i] <= hi) ? go[i] : T(0);
                  }
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

// ---------------------------------------------------------------------
// Channel concat / slice.

template <typename T>
Var<T> concat_c(const std::vector<Var<T>>& xs) {
  LVC_CHECK(!xs.empty(), "concat of zero tensors");
  Graph<T>& g = *xs[0].g;
  const Shape s0 = xs[0].shape();
  i64 ctot = 0;
  bool rg = false;
  for (const auto& v : xs) {
    const Shape s = v.shape();
    LVC_CHECK(s.n == s0.n && s.h == s0.h && s.w == s0.w,
              "concat spatial/batch mismatch: ", s.str(), " vs ", s0.str());
    ctot += s.c;
    rg = rg || g.requires_grad(v);
  }
  Tensor<T> out(Shape{s0.n, ctot, s0.h, s0.w});
  const i64 plane = s0.h * s0.w;
  for (i64 n = 0; n < s0.n; ++n) {
    i64 cofs = 0;
    for (const auto& v : xs) {
      const Tensor<T>& xv = g.val(v);
      const i64 cc = xv.shape().c;
      std::copy_n(xv.data() + n * cc * plane, cc * plane,
                  out.data() + (n * ctot + cofs) * plane);
      cofs += cc;
    }
  }
  std::vector<Var<T>> inputs = xs;
  return node(g, std::move(out), rg, 0, [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      i64 cofs = 0;
      for (const auto& v : inputs) {
        const i64 cc = v.shape().c;
        if (gr.requires_grad(v)) {
          Tensor<T> gv(v.shape());
          for (i64 n = 0; n < s0.n; ++n) {
            std::copy_n(go.data() + (n * ctot + cofs) * plane, cc * plane,
                        gv.data() + n * cc * plane);
          }
          gr.accum_grad(v, std::move(gv));
        }
        cofs += cc;
      }
    };
  });
}

template <typename T>
Var<T> slice_c(Var<T> x, i64 c0, i64 c1) {
  Graph<T>& g = *x.g;
  const Shape s = x.shape();
  LVC_CHECK(0 <= c0 && c0 < c1 && c1 <= s.c, "slice_c [", c0, ",", c1,
            ") out of range for ", s.str());
  const i64 cc = c1 - c0;
  const i64 plane = s.h * s.w;
  Tensor<T> out(Shape{s.n, cc, s.h, s.w});
  const Tensor<T>& xv = g.val(x);
  for (i64 n = 0; n < s.n; ++n) {
    std::copy_n(xv.data() + (n * s.c + c0) * plane, cc * plane,
                out.data() + n * cc * plane);
  }
  return node(g, std::move(out), g.requires_grad(x), 0, [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      Tensor<T> gx(s);  // zero-filled
      for (i64 n = 0; n < s.n; ++n) {
        std::copy_n(go.data() + n * cc * plane, cc * plane,
                    gx.data() + (n * s.c + c0) * plane);
      }
      gr.accum_grad(x, std::move(gx));
    };
  });
}

// ---------------------------------------------------------------------
// Bilinear warping. flow:(N,2,H,W), channel 0 = dx, channel 1 = dy, in
// pixels. Out-of-range samples clamp to the border. A sample landing
// exactly on a grid point copies the source value bit-for-bit.

template <typename T>
inline T bilerp_at(const Tensor<T>& src, i64 n, i64 c, T sy, T sx) {
  const i64 h = src.shape().h, w = src.shape().w;
  const T fyf = std::floor(sy), fxf = std::floor(sx);
  const T fy = sy - fyf, fx = sx - fxf;
  const i64 y0 = i64(fyf), x0 = i64(fxf);
  const i64 yi0 = std::clamp<i64>(y0, 0, h - 1);
  const i64 yi1 = std::clamp<i64>(y0 + 1, 0, h - 1);
  const i64 xi0 = std::clamp<i64>(x0, 0, w - 1);
  const i64 xi1 = std::clamp<i64>(x0 + 1, 0, w - 1);
  if (fx == T(0) && fy == T(0)) return src.at(n, c, yi0, xi0);
  const T v00 = src.at(n, c, yi0, xi0), v01 = src.at(n, c, yi0, xi1);
  const T v10 = src.at(n, c, yi1, xi0), v11 = src.at(n, c, yi1, xi1);
  const T top = (T(1) - fx) * v00 + fx * v01;
  const T bot = (T(1) - fx) * v10 + fx * v11;
  return (T(1) - fy) * top + fy * bot;
}

template <typename T>
Var<T> warp(Var<T> src, Var<T> flow) {
  Graph<T>& g = *src.g;
  const Shape ss = src.shape();
  const Shape fs = flow.shape();
  LVC_CHECK(fs.c == 2 && fs.n == ss.n && fs.h == ss.h && fs.w == ss.w,
            "warp flow shape ", fs.str(), " does not match source ",
            ss.str());
  const Tensor<T>& sv = g.val(src);
  const Tensor<T>& fv = g.val(flow);
  Tensor<T> out(ss);
  for (i64 n = 0; n < ss.n; ++n) {
    for (i64 y = 0; y < ss.h; ++y) {
      for (i64 x = 0; x < ss.w; ++x) {
        const T sx = T(x) + fv.at(n, 0, y, x);
        const T sy = T(y) + fv.at(n, 1, y, x);
        for (i64 c = 0; c < ss.c; ++c) {
          out.at(n, c, y, x) = bilerp_at(sv, n, c, sy, sx);
        }
      }
    }
  }
  const bool rg = any_grad(g, {src, flow});
  return node(g, std::move(out), rg, 8 * ss.numel(), [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      const Tensor<T>& sv2 = gr.val(src);
      const Tensor<T>& fv2 = gr.val(flow);
      const bool need_src = gr.requires_grad(src);
      const bool need_flow = gr.requires_grad(flow);
      Tensor<T> gsrc = need_src ? Tensor<T>(ss) : Tensor<T>();
      Tensor<T> gflow = need_flow ? Tensor<T>(fs) : Tensor<T>();
      const i64 h = ss.h, w = ss.w;
      for (i64 n = 0; n < ss.n; ++n) {
        for (i64 y = 0; y < h; ++y) {
          for (i64 x = 0; x < w; ++x) {
            const T sx = T(x) + fv2.at(n, 0, y, x);
            const T sy = T(y) + fv2.at(n, 1, y, x);
            const T fyf = std::floor(sy), fxf = std::floor(sx);
            const T fy = sy - fyf, fx = sx - fxf;
            const i64 y0 = i64(fyf), x0 = i64(fxf);
            const i64 yi0 = std::clamp<i64>(y0, 0, h - 1);
            const i64 yi1 = std::clamp<i64>(y0 + 1, 0, h - 1);
            const i64 xi0 = std::clamp<i64>(x0, 0, w - 1);
            const i64 xi1 = std::clamp<i64>(x0 + 1, 0, w - 1);
            const T w00 = (T(1) - fy) * (T(1) - fx);
            const T w01 = (T(1) - fy) * fx;
            const T w10 = fy * (T(1) - fx);
            const T w11 = fy * fx;
            T gdx = T(0), gdy = T(0);
            for (i64 c = 0; c < ss.c; ++c) {
              const T gv = go.at(n, c, y, x);
              if (need_src) {
                gsrc.at(n, c, yi0, xi0) += gv * w00;
                gsrc.at(n, c, yi0, xi1) += gv * w01;
                gsrc.at(n, c, yi1, xi0) += gv * w10;
                gsrc.at(n, c, yi1, xi1) += gv * w11;
              }
              if (need_flow) {
                const T v00 = sv2.at(n, c, yi0, xi0);
                const T v01 = sv2.at(n, c, yi0, xi1);
                const T v10 = sv2.at(n, c, yi1, xi0);
                const T v11 = sv2.at(n, c, yi1, xi1);
                gdx += gv * ((T(1) - fy) * (v01 - v00) + fy * (v11 - v10));
                gdy += gv * ((T(1) - fx) * (v10 - v00) + fx * (v11 - v01));
              }
            }
            if (need_flow) {
              gflow.at(n, 0, y, x) = gdx;
              gflow.at(n, 1, y, x) = gdy;
            }
          }
        }
      }
      if (need_src) gr.accum_grad(src, std::move(gsrc));
      if (need_flow) gr.accum_grad(flow, std::move(gflow));
    };
  });
}

// ---------------------------------------------------------------------
// 2x average pooling (trailing odd row/column dropped).

template <typename T>
Var<T> avg_pool2(Var<T> x) {
  Graph<T>& g = *x.g;
  const Shape s = x.shape();
  const i64 ho = s.h / 2, wo = s.w / 2;
  LVC_CHECK(ho >= 1 && wo >= 1, "avg_pool2 on degenerate input ", s.str());
  const Tensor<T>& xv = g.val(x);
  Tensor<T> out(Shape{s.n, s.c, ho, wo});
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 c = 0; c < s.c; ++c) {
      for (i64 y = 0; y < ho; ++y) {
        for (i64 xx = 0; xx < wo; ++xx) {
          const T sum = (xv.at(n, c, 2 * y, 2 * xx) +
                         xv.at(n, c, 2 * y, 2 * xx + 1)) +
                        (xv.at(n, c, 2 * y + 1, 2 * xx) +
                         xv.at(n, c, 2 * y + 1, 2 * xx + 1));
          out.at(n, c, y, xx) = sum * T(0.25);
        }
      }
    }
  }
  return node(g, std::move(out), g.requires_grad(x), s.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const Tensor<T>& go = gr.grad(self);
                  Tensor<T> gx(s);
                  for (i64 n = 0; n < s.n; ++n) {
                    for (i64 c = 0; c < s.c; ++c) {
                      for (i64 y = 0; y < ho; ++y) {
                        for (i64 xx = 0; xx < wo; ++xx) {
                          const T gv = go.at(n, c, y, xx) * T(0.25);
                          gx.at(n, c, 2 * y, 2 * xx) = gv;
                          gx.at(n, c, 2 * y, 2 * xx + 1) = gv;
                          gx.at(n, c, 2 * y + 1, 2 * xx) = gv;
                          gx.at(n, c, 2 * y + 1, 2 * xx + 1) = gv;
                        }
                      }
                    }
                  }
                  gr.accum_grad(x, std::move(gx));
                };
              });
}

// ---------------------------------------------------------------------
// 2x bilinear upsampling (half-pixel aligned, border clamped).

template <typename T>
Var<T> upsample2_bilinear(Var<T> x) {
  Graph<T>& g = *x.g;
  const Shape s = x.shape();
  const i64 ho = s.h * 2, wo = s.w * 2;
  const Tensor<T>& xv = g.val(x);
  Tensor<T> out(Shape{s.n, s.c, ho, wo});
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 y = 0; y < ho; ++y) {
      const T sy = T(y) * T(0.5) - T(0.25);
      for (i64 xx = 0; xx < wo; ++xx) {
        const T sx = T(xx) * T(0.5) - T(0.25);
        for (i64 c = 0; c < s.c; ++c) {
          out.at(n, c, y, xx) = bilerp_at(xv, n, c, sy, sx);
        }
      }
    }
  }
  return node(
      g, std::move(out), g.requires_grad(x), 8 * out.numel(),
      [=](Var<T> self) {
        return [=](Graph<T>& gr) {
          const Tensor<T>& go = gr.grad(self);
          Tensor<T> gx(s);
          const i64 h = s.h, w = s.w;
          for (i64 n = 0; n < s.n; ++n) {
            for (i64 y = 0; y < ho; ++y) {
              const T sy = T(y) * T(0.5) - T(0.25);
              const T fyf = std::floor(sy);
              const T fy = sy - fyf;
              const i64 y0 = i64(fyf);
              const i64 yi0 = std::clamp<i64>(y0, 0, h - 1);
              const i64 yi1 = std::clamp<i64>(y0 + 1, 0, h - 1);
              for (i64 xx = 0; xx < wo; ++xx) {
                const T sx = T(xx) * T(0.5) - T(0.25);
                const T fxf = std::floor(sx);
                const T fx = sx - fxf;
                const i64 x0 = i64(fxf);
                const i64 xi0 = std::clamp<i64>(x0, 0, w - 1);
                const i64 xi1 = std::clamp<i64>(x0 + 1, 0, w - 1);
                for (i64 c = 0; c < s.c; ++c) {
                  const T gv = go.at(n, c, y, xx);
                  gx.at(n, c, yi0, xi0) += gv * ((T(1) - fy) * (T(1) - fx));
                  gx.at(n, c, yi0, xi1) += gv * ((T(1) - fy) * fx);
                  gx.at(n, c, yi1, xi0) += gv * (fy * (T(1) - fx));
                  gx.at(n, c, yi1, xi1) += gv * (fy * fx);
                }
              }
            }
          }
          gr.accum_grad(x, std::move(gx));
        };
      });
}

// ---------------------------------------------------------------------
// Replicate-pad on the right/bottom edges (alignment padding) and its
// inverse top-left crop.

template <typename T>
Var<T> pad_replicate(Var<T> x, i64 pl, i64 pt, i64 pr, i64 pb) {
  Graph<T>& g = *x.g;
  if (pl == 0 && pt == 0 && pr == 0 && pb == 0) return x;
  LVC_CHECK(pl >= 0 && pt >= 0 && pr >= 0 && pb >= 0, "negative padding");
  const Shape s = x.shape();
  const Tensor<T>& xv = g.val(x);
  Tensor<T> out(Shape{s.n, s.c, s.h + pt + pb, s.w + pl + pr});
  auto clampi = [](i64 v, i64 hi) {
    return v < 0 ? i64(0) : (v > hi ? hi : v);
  };
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 c = 0; c < s.c; ++c) {
      for (i64 y = 0; y < s.h + pt + pb; ++y) {
        const i64 sy = clampi(y - pt, s.h - 1);
        for (i64 xx = 0; xx < s.w + pl + pr; ++xx) {
          out.at(n, c, y, xx) = xv.at(n, c, sy, clampi(xx - pl, s.w - 1));
        }
      }
    }
  }
  return node(g, std::move(out), g.requires_grad(x), 0, [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      Tensor<T> gx(s);
      for (i64 n = 0; n < s.n; ++n) {
        for (i64 c = 0; c < s.c; ++c) {
          for (i64 y = 0; y < s.h + pt + pb; ++y) {
            const i64 sy = clampi(y - pt, s.h - 1);
            for (i64 xx = 0; xx < s.w + pl + pr; ++xx) {
              gx.at(n, c, sy, clampi(xx - pl, s.w - 1)) +=
                  go.at(n, c, y, xx);
            }
          }
        }
      }
      gr.accum_grad(x, std::move(gx));
    };
  });
}

template <typename T>
Var<T> pad_rb_replicate(Var<T> x, i64 pr, i64 pb) {
  return pad_replicate(x, 0, 0, pr, pb);
}

template <typename T>
Var<T> crop_tl(Var<T> x, i64 h, i64 w) {
  Graph<T>& g = *x.g;
  const Shape s = x.shape();
  if (h == s.h && w == s.w) return x;
  LVC_CHECK(h <= s.h && w <= s.w, "crop_tl to ", h, "x", w,
            " exceeds input ", s.str());
  const Tensor<T>& xv = g.val(x);
  Tensor<T> out(Shape{s.n, s.c, h, w});
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 c = 0; c < s.c; ++c) {
      for (i64 y = 0; y < h; ++y) {
        std::copy_n(&xv.at(n, c, y, 0), w, &out.at(n, c, y, 0));
      }
    }
  }
  return node(g, std::move(out), g.requires_grad(x), 0, [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      Tensor<T> gx(s);
      for (i64 n = 0; n < s.n; ++n) {
        for (i64 c = 0; c < s.c; ++c) {
          for (i64 y = 0; y < h; ++y) {
            std::copy_n(&go.at(n, c, y, 0), w, &gx.at(n, c, y, 0));
          }
        }
      }
      gr.accum_grad(x, std::move(gx));
    };
  });
}

// ---------------------------------------------------------------------
// Reductions and quantization.

template <typename T>
Var<T> sum_all(Var<T> x) {
  Graph<T>& g = *x.g;
  const Tensor<T>& xv = g.val(x);
  T acc = T(0);
  for (i64 i = 0; i < xv.numel(); ++i) acc += xv[i];
  Tensor<T> out(Shape{1, 1, 1, 1});
  out[0] = acc;
  return node(g, std::move(out), g.requires_grad(x), xv.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  const T gv = gr.grad(self)[0];
                  gr.accum_grad(x, Tensor<T>::full(gr.val(x).shape(), gv));
                };
              });
}

template <typename T>
Var<T> mean_all(Var<T> x) {
  const i64 n = x.shape().numel();
  return affine(sum_all(x), T(1) / T(n), T(0));
}

// Round-half-away-from-zero with a straight-through (identity) gradient.
template <typename T>
Var<T> round_ste(Var<T> x) {
  Graph<T>& g = *x.g;
  const Tensor<T>& xv = g.val(x);
  Tensor<T> out(x.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = math::round_away(xv[i]);
  return node(g, std::move(out), g.requires_grad(x), out.numel(),
              [=](Var<T> self) {
                return [=](Graph<T>& gr) {
                  gr.accum_grad(x, Tensor<T>(gr.grad(self)));
                };
              });
}

// Mean squared error between two same-shape tensors (composite).
template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
  Var<T> d = sub(a, b);
  return mean_all(mul(d, d));
}

}  // namespace lvc::ops

#endif  // LVC_OPS_HPP_
