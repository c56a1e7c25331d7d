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
// The codec's seven network families: motion estimation, motion-vector
// prediction, multi-reference motion compensation, residual prediction,
// loop filtering, and the two analysis/synthesis transform pairs with their
// hyperprior branches. All are expressed over the autodiff graph so the
// same code serves training (gradients on) and inference (gradients off).
//
// Buffered reference order is newest-first throughout: frames[0] is the
// previous reconstruction x_{T-1}, mvs[0] is the previous decoded motion
// field v_{T-1}, residuals[0] is the previous coded residual r_{T-1}.

#ifndef LVC_CODECNETS_HPP_
#define LVC_CODECNETS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "lvc/entropy.hpp"
#include "lvc/layers.hpp"

namespace lvc::nets {

// Architecture constants. The prediction networks' channel plan
// (in, mid, out) is part of the format contract.
inline constexpr i64 kMvpIn = 8, kMvpMid = 32, kMvpOut = 2;
inline constexpr i64 kMcIn = 70, kMcMid = 64, kMcOut = 64;
inline constexpr i64 kRpIn = 64, kRpMid = 64, kRpOut = 3;
inline constexpr i64 kLfIn = 195, kLfMid = 128, kLfOut = 3;
inline constexpr i64 kRefFeat = 8;       // H_x / H_r feature channels
inline constexpr i64 kFresChannels = 128;
inline constexpr i64 kLatentChannels = 96;
inline constexpr i64 kHyperChannels = 64;
inline constexpr i64 kPriorBins = 33;    // factorized prior support
inline constexpr i64 kMvBufLen = 3;
inline constexpr i64 kResBufLen = 4;
inline constexpr i64 kFrameBufLen = 4;
inline constexpr i64 kMeLevels = 3;
inline constexpr i64 kLatentStride = 16;  // frame pixels per latent sample

static_assert(kMcIn == 3 + 3 + kFrameBufLen * kRefFeat * 2,
              "MC input channels: previous frame + its warp + per-reference "
              "features and warped features");
static_assert(kRpIn == kResBufLen * kRefFeat * 2,
              "RP input channels: residual features and warped features");
static_assert(kLfIn == kMcOut + kFresChannels + 3,
              "LF input channels: motion features + residual features + "
              "pre-filter reconstruction");
static_assert(kMvpIn == 2 * kMvBufLen + 2,
              "MVP input channels: buffered motion fields + self-warped");

inline i64 latent_dim(i64 pixels) {
  return (pixels + kLatentStride - 1) / kLatentStride;
}

// References available when coding one frame, as graph nodes.
template <typename T>
struct StateVars {
  std::vector<Var<T>> frames;     // kFrameBufLen, newest first
  std::vector<Var<T>> mvs;        // kMvBufLen, newest first
  std::vector<Var<T>> residuals;  // kResBufLen, newest first
};

// ---------------------------------------------------------------------
// Motion estimation: a 3-level coarse-to-fine pyramid. Each level refines
// an upsampled (and value-doubled) flow with a small conv stack over
// (current, warped reference, flow).

template <typename T>
Var<T> me_flow(NetCtx<T>& ctx, Var<T> cur, Var<T> ref) {
  Graph<T>& g = ctx.graph();
  const Shape in_shape = cur.shape();
  const i64 mult = i64(1) << (kMeLevels - 1);
  const i64 pr = (mult - in_shape.w % mult) % mult;
  const i64 pb = (mult - in_shape.h % mult) % mult;
  cur = ops::pad_rb_replicate(cur, pr, pb);
  ref = ops::pad_rb_replicate(ref, pr, pb);

  std::vector<Var<T>> pc{cur}, pf{ref};
  for (i64 l = 1; l < kMeLevels; ++l) {
    pc.push_back(ops::avg_pool2(pc.back()));
    pf.push_back(ops::avg_pool2(pf.back()));
  }

  Var<T> flow = g.constant(Tensor<T>(
      Shape{in_shape.n, 2, pc.back().shape().h, pc.back().shape().w}));
  for (i64 l = kMeLevels - 1; l >= 0; --l) {
    if (l < kMeLevels - 1) {
      flow = ops::affine(ops::upsample2_bilinear(flow), T(2), T(0));
    }
    const std::string p = "me.lvl" + std::to_string(l);
    Var<T> h = ops::concat_c<T>({pc[size_t(l)],
                                 ops::warp(pf[size_t(l)], flow), flow});
    h = conv_block(ctx, p + ".c0", h, 1, true);
    h = conv_block(ctx, p + ".c1", h, 1, true);
    h = conv_block(ctx, p + ".c2", h, 1, true);
    h = conv_block(ctx, p + ".c3", h, 1, false);
    flow = ops::add(flow, h);
  }
  return ops::crop_tl(flow, in_shape.h, in_shape.w);
}

// ---------------------------------------------------------------------
// Motion-vector prediction from the buffered fields (oldest to newest)
// plus the newest field warped by itself.

template <typename T>
Var<T> mvp_predict(NetCtx<T>& ctx, const StateVars<T>& st) {
  Var<T> selfwarp = ops::warp(st.mvs[0], st.mvs[0]);
  Var<T> input =
      ops::concat_c<T>({st.mvs[2], st.mvs[1], st.mvs[0], selfwarp});
  return backbone(ctx, "mvp.bb", BackboneSpec{kMvpIn, kMvpMid, kMvpOut},
                  input);
}

// ---------------------------------------------------------------------
// Multi-reference motion compensation. Every buffered reconstruction
// contributes shared-weight features, warped by the motion chain: the
// newest reference moves by the current field, older ones by successively
// older buffered fields.

template <typename T>
struct McOut {
  Var<T> xbar;  // pixel-domain prediction
  Var<T> fmv;   // fused motion features (kMcOut channels, full res)
};

template <typename T>
McOut<T> mc_predict(NetCtx<T>& ctx, const StateVars<T>& st, Var<T> vhat) {
  std::vector<Var<T>> feats, warped_feats;
  for (i64 i = 0; i < kFrameBufLen; ++i) {
    feats.push_back(conv_block(ctx, "mc.fx", st.frames[size_t(i)], 1, true));
  }
  for (i64 i = 0; i < kFrameBufLen; ++i) {
    Var<T> mv = (i == 0) ? vhat : st.mvs[size_t(i - 1)];
    warped_feats.push_back(ops::warp(feats[size_t(i)], mv));
  }
  Var<T> warped_prev = ops::warp(st.frames[0], vhat);
  std::vector<Var<T>> parts{st.frames[0], warped_prev};
  for (auto& f : feats) parts.push_back(f);
  for (auto& f : warped_feats) parts.push_back(f);
  Var<T> fused = backbone(ctx, "mc.bb", BackboneSpec{kMcIn, kMcMid, kMcOut},
                          ops::concat_c<T>(parts));
  Var<T> xbar = ops::add(conv_block(ctx, "mc.hf", fused, 1, false),
                         warped_prev);
  return {xbar, fused};
}

// ---------------------------------------------------------------------
// Residual prediction from buffered coded residuals; the oldest feature
// reuses the oldest buffered field (the motion chain is one short).

template <typename T>
Var<T> rp_predict(NetCtx<T>& ctx, const StateVars<T>& st) {
  std::vector<Var<T>> feats, warped_feats;
  for (i64 i = 0; i < kResBufLen; ++i) {
    feats.push_back(
        conv_block(ctx, "rp.hr", st.residuals[size_t(i)], 1, true));
  }
  for (i64 i = 0; i < kResBufLen; ++i) {
    const i64 mv_idx = std::min<i64>(i, kMvBufLen - 1);
    warped_feats.push_back(
        ops::warp(feats[size_t(i)], st.mvs[size_t(mv_idx)]));
  }
  std::vector<Var<T>> parts = feats;
  for (auto& f : warped_feats) parts.push_back(f);
  return backbone(ctx, "rp.bb", BackboneSpec{kRpIn, kRpMid, kRpOut},
                  ops::concat_c<T>(parts));
}

// ---------------------------------------------------------------------
// Feature-aided loop filter; output clamped to the pixel range.

template <typename T>
Var<T> lf_filter(NetCtx<T>& ctx, Var<T> fmv, Var<T> fres, Var<T> xprime) {
  Var<T> input = ops::concat_c<T>({fmv, fres, xprime});
  Var<T> delta = backbone(ctx, "lf.bb",
                          BackboneSpec{kLfIn, kLfMid, kLfOut}, input);
  return ops::clamp(ops::add(delta, xprime), T(0), T(1));
}

// ---------------------------------------------------------------------
// Motion codec transforms: 4 stride-2 convs down to a width-96 latent (16x
// spatial reduction), mirrored by 4 transposed convs.

template <typename T>
Var<T> mv_latent(NetCtx<T>& ctx, Var<T> v) {
  const Shape s = v.shape();
  v = ops::pad_rb_replicate(v, (kLatentStride - s.w % kLatentStride) %
                                   kLatentStride,
                            (kLatentStride - s.h % kLatentStride) %
                                kLatentStride);
  Var<T> h = conv_block(ctx, "mv.enc.c0", v, 2, true);
  h = conv_block(ctx, "mv.enc.c1", h, 2, true);
  h = conv_block(ctx, "mv.enc.c2", h, 2, true);
  return conv_block(ctx, "mv.enc.c3", h, 2, false);
}

template <typename T>
Var<T> mv_synth(NetCtx<T>& ctx, Var<T> lhat, i64 h, i64 w) {
  Var<T> y = deconv_block(ctx, "mv.dec.d0", lhat, true);
  y = deconv_block(ctx, "mv.dec.d1", y, true);
  y = deconv_block(ctx, "mv.dec.d2", y, true);
  y = deconv_block(ctx, "mv.dec.d3", y, false);
  return ops::crop_tl(y, h, w);
}

template <typename T>
Var<T> hyper_enc(NetCtx<T>& ctx, const std::string& stem, Var<T> l) {
  Var<T> h = conv_block(ctx, stem + ".c0", l, 1, true);
  h = conv_block(ctx, stem + ".c1", h, 2, true);
  return conv_block(ctx, stem + ".c2", h, 2, false);
}

// Returns the Gaussian parameters (mu, sigma) for the latent-difference
// symbols; sigma = sigma_min + softplus(raw).
template <typename T>
std::pair<Var<T>, Var<T>> hyper_dec(NetCtx<T>& ctx, const std::string& stem,
                                    Var<T> zhat, i64 lh, i64 lw) {
  Var<T> h = deconv_block(ctx, stem + ".d0", zhat, true);
  h = deconv_block(ctx, stem + ".d1", h, true);
  h = ops::crop_tl(h, lh, lw);
  h = conv_block(ctx, stem + ".c2", h, 1, false);
  Var<T> mu = ops::slice_c(h, 0, kLatentChannels);
  Var<T> raw = ops::slice_c(h, kLatentChannels, 2 * kLatentChannels);
  Var<T> sigma = ops::affine(ops::softplus(raw), T(1),
                             T(entropy::kSigmaMin));
  return {mu, sigma};
}

// ---------------------------------------------------------------------
// Residual codec transforms. Synthesis stops at the 128-channel feature
// plane f_res; a 3x3 head projects it to the pixel-domain coded residual.

template <typename T>
Var<T> res_latent(NetCtx<T>& ctx, Var<T> r) {
  const Shape s = r.shape();
  r = ops::pad_rb_replicate(r, (kLatentStride - s.w % kLatentStride) %
                                   kLatentStride,
                            (kLatentStride - s.h % kLatentStride) %
                                kLatentStride);
  Var<T> h = conv_block(ctx, "res.enc.c0", r, 2, true);
  h = conv_block(ctx, "res.enc.c1", h, 2, true);
  h = conv_block(ctx, "res.enc.c2", h, 2, true);
  return conv_block(ctx, "res.enc.c3", h, 2, false);
}

template <typename T>
Var<T> res_synth_features(NetCtx<T>& ctx, Var<T> yhat, i64 h, i64 w) {
  Var<T> y = deconv_block(ctx, "res.dec.d0", yhat, true);
  y = deconv_block(ctx, "res.dec.d1", y, true);
  y = deconv_block(ctx, "res.dec.d2", y, true);
  y = deconv_block(ctx, "res.dec.d3", y, false);
  return ops::crop_tl(y, h, w);
}

template <typename T>
Var<T> res_pixels(NetCtx<T>& ctx, Var<T> fres) {
  return conv_block(ctx, "res.tail", fres, 1, false);
}

}  // namespace lvc::nets

#endif  // LVC_CODECNETS_HPP_
