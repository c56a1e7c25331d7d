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
// Training: the differentiable rate-distortion objective (a quantization-
// relaxed mirror of the coding pipeline), Adam, the clip-length curriculum,
// synthetic clip generation, and checkpointing.
//
// The rollout is templated on the scalar type so the whole objective can be
// finite-difference checked in double precision.

#ifndef LVC_TRAINING_HPP_
#define LVC_TRAINING_HPP_

#include <functional>
#include <string>
#include <vector>

#include "lvc/entropy.hpp"
#include "lvc/evalkit.hpp"
#include "lvc/mathfn.hpp"
#include "lvc/pipeline.hpp"

namespace lvc {

enum class Distortion { kMse, kMsssim };

// ---------------------------------------------------------------------------
// Differentiable single-frame forward. Mirrors encode_pframe, with hard
// rounding replaced by the selected quantization relaxation and coded bits
// replaced by the entropy-model estimate.

template <typename T>
struct PFrameTrainOut {
  Var<T> xhat;    // loop-filtered reconstruction
  Var<T> xprime;  // pre-filter reconstruction
  Var<T> vhat;    // decoded motion field
  Var<T> bufres;  // clamped residual pushed into the reference state
  Var<T> rate;    // estimated bits for all four bitstream sections (scalar)
};

template <typename T>
PFrameTrainOut<T> pframe_train_forward(nets::NetCtx<T>& ctx,
                                       const nets::StateVars<T>& sv,
                                       Var<T> xcur, entropy::QuantMode qm,
                                       Rng* rng, bool predictions) {
  using namespace nets;  // NOLINT(build/namespaces)
  Graph<T>& g = ctx.graph();
  const i64 h = xcur.shape().h, w = xcur.shape().w;

  Var<T> v = me_flow(ctx, xcur, sv.frames[0]);
  Var<T> vbar = predictions ? mvp_predict(ctx, sv)
                            : g.constant(Tensor<T>(Shape{1, 2, h, w}));
  Var<T> l = mv_latent(ctx, v);
  Var<T> lbar = mv_latent(ctx, vbar);

  Var<T> z = hyper_enc(ctx, "mv.henc", l);
  Var<T> zq = entropy::quantize(z, qm, rng);
  Var<T> rate = entropy::rate_bits(
      entropy::hist_likelihood(zq, ctx.param("mv.prior.logits")));
  auto [mu, sigma] = hyper_dec(ctx, "mv.hdec", zq, l.shape().h, l.shape().w);
  Var<T> dq = entropy::quantize(ops::sub(l, lbar), qm, rng);
  rate = ops::add(rate,
                  entropy::rate_bits(entropy::gaussian_likelihood(dq, mu,
                                                                  sigma)));
  Var<T> lhat = ops::add(lbar, dq);
  Var<T> vhat = mv_synth(ctx, lhat, h, w);

  McOut<T> mc = mc_predict(ctx, sv, vhat);
  Var<T> rbar = predictions ? rp_predict(ctx, sv)
                            : g.constant(Tensor<T>(Shape{1, 3, h, w}));
  Var<T> r = ops::sub(xcur, mc.xbar);
  Var<T> y = res_latent(ctx, r);
  Var<T> ybar = res_latent(ctx, rbar);

  Var<T> zr = hyper_enc(ctx, "res.henc", y);
  Var<T> zrq = entropy::quantize(zr, qm, rng);
  rate = ops::add(rate,
                  entropy::rate_bits(entropy::hist_likelihood(
                      zrq, ctx.param("res.prior.logits"))));
  auto [mur, sigmar] =
      hyper_dec(ctx, "res.hdec", zrq, y.shape().h, y.shape().w);
  Var<T> dyq = entropy::quantize(ops::sub(y, ybar), qm, rng);
  rate = ops::add(rate, entropy::rate_bits(entropy::gaussian_likelihood(
                            dyq, mur, sigmar)));
  Var<T> yhat = ops::add(ybar, dyq);

  Var<T> fres = res_synth_features(ctx, yhat, h, w);
  Var<T> rprime = res_pixels(ctx, fres);
  Var<T> xprime = ops::add(mc.xbar, rprime);
  Var<T> xhat = lf_filter(ctx, mc.fmv, fres, xprime);

  PFrameTrainOut<T> out;
  out.xhat = xhat;
  out.xprime = ops::clamp(xprime, T(0), T(1));
  out.vhat = vhat;
  out.bufres = ops::clamp(ops::sub(xhat, mc.xbar), T(-1), T(1));
  out.rate = rate;
  return out;
}

// ---------------------------------------------------------------------------
// Whole-clip objective: an intra-started rollout whose loss is
//   lambda * mean_t(D_t) + mean_t(R_t) / pixels,
// with both means taken over the predicted frames only.

// The stored-8-bit intra mapping, applied directly in type T so training
// sees the same first reference the codec produces.
template <typename T>
Tensor<T> intra_quantize8(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) {
    T v = math::round_away(x[i] * T(255));
    if (v < T(0)) v = T(0);
    if (v > T(255)) v = T(255);
    out[i] = v / T(255);
  }
  return out;
}

struct FrameDiag {
  double rate_bits = 0.0;
  double mse = 0.0;
  double psnr_pre = 0.0;   // quality of the pre-filter reconstruction
  double psnr_post = 0.0;  // quality after the loop filter
};

template <typename T>
struct ClipRdOut {
  Var<T> loss;        // scalar
  Var<T> rate;        // total bits over predicted frames (scalar)
  Var<T> distortion;  // mean distortion over predicted frames (scalar)
  std::vector<FrameDiag> frames;
};

template <typename T>
double tensor_psnr(const Tensor<T>& a, const Tensor<T>& b) {
  double sum = 0.0;
  for (i64 i = 0; i < a.numel(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    sum += d * d;
  }
  const double mse = sum / double(a.numel());
  if (mse <= 0.0) return kPsnrCap;
  const double db = -10.0 * math::log_f64(mse) * 0.4342944819032518;
  return db > kPsnrCap ? kPsnrCap : db;
}

template <typename T>
ClipRdOut<T> clip_rd_forward(nets::NetCtx<T>& ctx,
                             const std::vector<Tensor<T>>& clip,
                             double lambda, Distortion dist,
                             entropy::QuantMode qm, Rng* rng,
                             bool predictions) {
  LVC_CHECK(clip.size() >= 2, "clip_rd_forward: need an intra frame plus at "
            "least one predicted frame, got ", clip.size());
  Graph<T>& g = ctx.graph();
  const Shape s = clip[0].shape();
  LVC_CHECK(s.n == 1 && s.c == 3, "clip frames must be (1,3,h,w), got ",
            s.str());

  nets::StateVars<T> sv;
  Var<T> intra = g.constant(intra_quantize8(clip[0]));
  for (int i = 0; i < nets::kFrameBufLen; ++i) sv.frames.push_back(intra);
  for (int i = 0; i < nets::kMvBufLen; ++i) {
    sv.mvs.push_back(g.constant(Tensor<T>(Shape{1, 2, s.h, s.w})));
  }
  for (int i = 0; i < nets::kResBufLen; ++i) {
    sv.residuals.push_back(g.constant(Tensor<T>(Shape{1, 3, s.h, s.w})));
  }

  ClipRdOut<T> out;
  Var<T> rate_sum, dist_sum;
  const int pframes = int(clip.size()) - 1;
  for (int t = 1; t <= pframes; ++t) {
    LVC_CHECK(clip[size_t(t)].shape() == s, "clip frame ", t, " shape ",
              clip[size_t(t)].shape().str(), " != ", s.str());
    Var<T> xcur = g.constant(clip[size_t(t)]);
    PFrameTrainOut<T> f =
        pframe_train_forward(ctx, sv, xcur, qm, rng, predictions);

    Var<T> d = dist == Distortion::kMse
                   ? ops::mse(f.xhat, xcur)
                   : ops::affine(ms_ssim_graph(f.xhat, xcur), T(-1), T(1));
    rate_sum = t == 1 ? f.rate : ops::add(rate_sum, f.rate);
    dist_sum = t == 1 ? d : ops::add(dist_sum, d);

    FrameDiag diag;
    diag.rate_bits = double(f.rate.val()[0]);
    diag.mse = double(ops::mse(f.xhat, xcur).val()[0]);
    diag.psnr_pre = tensor_psnr(f.xprime.val(), clip[size_t(t)]);
    diag.psnr_post = tensor_psnr(f.xhat.val(), clip[size_t(t)]);
    out.frames.push_back(diag);

    sv.frames.insert(sv.frames.begin(), f.xhat);
    sv.frames.pop_back();
    sv.mvs.insert(sv.mvs.begin(), f.vhat);
    sv.mvs.pop_back();
    sv.residuals.insert(sv.residuals.begin(), f.bufres);
    sv.residuals.pop_back();
  }

  const T inv_p = T(1) / T(pframes);
  out.rate = rate_sum;
  out.distortion = ops::affine(dist_sum, inv_p, T(0));
  Var<T> rate_term =
      ops::affine(rate_sum, inv_p / T(s.h * s.w), T(0));
  out.loss = ops::add(ops::affine(out.distortion, T(lambda), T(0)), rate_term);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer, curriculum, synthetic data, checkpoints (float only).

struct TrainConfig {
  int lambda_index = 2;
  bool predictions = true;
  Distortion distortion = Distortion::kMse;
  entropy::QuantMode quant = entropy::QuantMode::kNoise;
  int batch = 1;
  int max_pframes = 4;
  int curriculum_step = 500;  // iterations between clip-length increments
  i64 clip_h = 32;
  i64 clip_w = 32;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainStats {
  i64 iter = 0;      // 0-based index of the completed iteration
  int pframes = 0;   // curriculum clip length used (predicted frames)
  double loss = 0.0;
  double rate_bits = 0.0;
  double distortion = 0.0;
};

// Predicted-frame count for an iteration: grows by one every
// `curriculum_step` iterations, never shrinks, capped at `max_pframes`.
int curriculum_pframes(const TrainConfig& cfg, i64 iter);

// A deterministic toy clip: translating sinusoid textures, translating
// periodic patterns, or a static smooth texture, chosen by the generator.
std::vector<Tensor<float>> make_synthetic_clip(Rng* rng, i64 h, i64 w,
                                               int frames);

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, ModelWeights mw, u64 seed);

  // Runs one optimization step over a synthetic batch; fails on a
  // non-finite loss.
  TrainStats step();

  const ModelWeights& weights() const { return mw_; }
  const TrainConfig& config() const { return cfg_; }
  i64 iter() const { return iter_; }
  void set_distortion(Distortion d) { cfg_.distortion = d; }

  // Writes the weights file plus an optimizer sidecar at path + ".opt"
  // (same container format: first/second moments, step count, generator
  // state), so training can resume bit-exactly.
  void save_checkpoint(const std::string& path) const;
  static Trainer load_checkpoint(const TrainConfig& cfg,
                                 const std::string& path);

 private:
  TrainConfig cfg_;
  ModelWeights mw_;
  WeightsMap<float> m_, v_;  // Adam moments
  i64 iter_ = 0;
  Rng rng_;
};

// Runs `iters` curriculum iterations (plus an MS-SSIM fine-tune of
// ceil(0.2 * iters) more when requested), reporting each step.
ModelWeights run_curriculum(
    const TrainConfig& cfg, ModelWeights init, u64 seed, i64 iters,
    bool msssim_finetune,
    const std::function<void(const TrainStats&)>& on_iter = {});

}  // namespace lvc

#endif  // LVC_TRAINING_HPP_
