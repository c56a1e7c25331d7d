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
// Network building blocks. All prediction/fusion networks share one
// backbone layout: a stride-2 head, a trunk of three residual blocks plus a
// gated attention block running at half resolution, and a stride-2
// transposed-convolution tail back to full resolution. Odd input sizes are
// replicate-padded to even and cropped back after the tail.

#ifndef LVC_LAYERS_HPP_
#define LVC_LAYERS_HPP_

#include <string>

#include "lvc/ops.hpp"
#include "lvc/weights.hpp"

namespace lvc::nets {

inline constexpr float kLeakySlope = 0.01f;

// Binds a graph to a weights map and hands out one leaf node per parameter
// (creating it on first use, so repeated references share gradients).
template <typename T>
class NetCtx {
 public:
  NetCtx(Graph<T>& g, const WeightsMap<T>& w, bool trainable)
      : g_(g), w_(w), trainable_(trainable) {}

  Graph<T>& graph() { return g_; }
  bool trainable() const { return trainable_; }

  Var<T> param(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    auto wit = w_.find(name);
    LVC_CHECK(wit != w_.end(), "missing weight entry: ", name);
    Var<T> v = g_.leaf(wit->second, trainable_);
    cache_.emplace(name, v);
    return v;
  }

  // All parameter leaves that were touched, for gradient collection.
  const std::map<std::string, Var<T>>& touched() const { return cache_; }

 private:
  Graph<T>& g_;
  const WeightsMap<T>& w_;
  bool trainable_;
  std::map<std::string, Var<T>> cache_;
};

// conv + optional leaky ReLU; kernel geometry comes from the weight shape,
// padding keeps spatial dims at stride 1 ((k-1)/2).
template <typename T>
Var<T> conv_block(NetCtx<T>& ctx, const std::string& name, Var<T> x,
                  i64 stride, bool act) {
  Var<T> w = ctx.param(name + ".w");
  Var<T> b = ctx.param(name + ".b");
  const i64 k = w.shape().h;
  Var<T> y = ops::conv2d(x, w, b, stride, (k - 1) / 2);
  return act ? ops::leaky_relu(y, T(kLeakySlope)) : y;
}

// Transposed conv with exact 2x upsampling (k3, pad 1, out_pad 1).
template <typename T>
Var<T> deconv_block(NetCtx<T>& ctx, const std::string& name, Var<T> x,
                    bool act) {
  Var<T> w = ctx.param(name + ".w");
  Var<T> b = ctx.param(name + ".b");
  Var<T> y = ops::deconv2d(x, w, b, /*stride=*/2, /*pad=*/1, /*out_pad=*/1);
  return act ? ops::leaky_relu(y, T(kLeakySlope)) : y;
}

// Shape-preserving variant of the same layer (k3, stride 1, pad 1), used
// by the full-resolution backbone mode; weight layout is unchanged.
template <typename T>
Var<T> deconv_block_s1(NetCtx<T>& ctx, const std::string& name, Var<T> x,
                       bool act) {
  Var<T> w = ctx.param(name + ".w");
  Var<T> b = ctx.param(name + ".b");
  Var<T> y = ops::deconv2d(x, w, b, /*stride=*/1, /*pad=*/1, /*out_pad=*/0);
  return act ? ops::leaky_relu(y, T(kLeakySlope)) : y;
}

// Two k3 convs with a skip; identity at zero weights.
template <typename T>
Var<T> resblock(NetCtx<T>& ctx, const std::string& prefix, Var<T> x) {
  Var<T> h = conv_block(ctx, prefix + ".c0", x, 1, true);
  h = conv_block(ctx, prefix + ".c1", h, 1, false);
  return ops::add(x, h);
}

// Gated attention: out = x + resblock(x) * sigmoid(conv1x1(x)). With zero
// gate weights the sigmoid sits at 0.5, passing half of the trunk branch.
template <typename T>
Var<T> attention(NetCtx<T>& ctx, const std::string& prefix, Var<T> x) {
  Var<T> t = resblock(ctx, prefix + ".t", x);
  Var<T> gate = ops::sigmoid(conv_block(ctx, prefix + ".g", x, 1, false));
  return ops::add(x, ops::mul(t, gate));
}

struct BackboneSpec {
  i64 in, mid, out;
  int resblocks = 3;
  // The production nets always run the trunk at half resolution; the
  // full-resolution variant exists so the FLOP counter can certify the
  // exact 4x trunk saving.
  bool downsample = true;
};

// Parameter inventory of one backbone instance (used by the schema).
void backbone_schema(const std::string& prefix, const BackboneSpec& spec,
                     std::vector<WeightSpec>& out);

// Forward. The trunk (residual blocks + attention) runs at half resolution
// and is wrapped in a "trunk" FLOP scope.
template <typename T>
Var<T> backbone(NetCtx<T>& ctx, const std::string& prefix,
                const BackboneSpec& spec, Var<T> x) {
  const Shape in_shape = x.shape();
  LVC_CHECK(in_shape.c == spec.in, "backbone ", prefix, " expects ",
            spec.in, " input channels, got ", in_shape.str());
  x = ops::pad_rb_replicate(x, in_shape.w % 2, in_shape.h % 2);
  Var<T> h = conv_block(ctx, prefix + ".head", x, spec.downsample ? 2 : 1,
                        true);
  {
    typename Graph<T>::Scope scope(ctx.graph(), "trunk");
    for (int r = 0; r < spec.resblocks; ++r) {
      h = resblock(ctx, prefix + ".res" + std::to_string(r), h);
    }
    h = attention(ctx, prefix + ".attn", h);
  }
  // The tail transposed conv restores full resolution; at stride 1 it is
  // shape-preserving, so both variants share one weight layout.
  Var<T> y = spec.downsample
                 ? deconv_block(ctx, prefix + ".tail", h, false)
                 : deconv_block_s1(ctx, prefix + ".tail", h, false);
  return ops::crop_tl(y, in_shape.h, in_shape.w);
}

}  // namespace lvc::nets

#endif  // LVC_LAYERS_HPP_
