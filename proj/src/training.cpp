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
// Optimizer, curriculum driver, synthetic data, and checkpointing. All
// updates are applied in canonical (name-ordered) weight order with fixed
// arithmetic, so two runs from the same seed produce identical bits.

#include <cmath>
#include <fstream>

#include "lvc/training.hpp"

namespace lvc {
namespace {

void write_blob_atomic(const std::string& path, const std::vector<u8>& blob) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    LVC_CHECK(f.good(), "cannot open for writing: ", tmp);
    f.write(reinterpret_cast<const char*>(blob.data()),
            std::streamsize(blob.size()));
    LVC_CHECK(f.good(), "short write: ", tmp);
  }
  LVC_CHECK(std::rename(tmp.c_str(), path.c_str()) == 0,
            "rename failed: ", path);
}

std::vector<u8> read_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  LVC_CHECK(f.good(), "cannot open: ", path);
  return std::vector<u8>((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
}

// u64 <-> a (1,1,1,4) tensor of 16-bit limbs (low limb first), which the
// f32 container stores exactly.
Tensor<float> u64_to_limbs(u64 v) {
  Tensor<float> t(Shape{1, 1, 1, 4});
  for (int i = 0; i < 4; ++i) t[i] = float((v >> (16 * i)) & 0xffffu);
  return t;
}

u64 limbs_to_u64(const Tensor<float>& t) {
  LVC_CHECK(t.numel() == 4, "generator state must have 4 limbs");
  u64 v = 0;
  for (int i = 0; i < 4; ++i) {
    const float f = t[i];
    LVC_CHECK(f >= 0.0f && f <= 65535.0f && f == float(u32(f)),
              "bad generator state limb: ", f);
    v |= u64(u32(f)) << (16 * i);
  }
  return v;
}

constexpr double kTwoPi = 6.2831853071795864769;

}  // namespace

int curriculum_pframes(const TrainConfig& cfg, i64 iter) {
  LVC_CHECK(cfg.curriculum_step > 0, "curriculum_step must be positive");
  const i64 p = 1 + iter / cfg.curriculum_step;
  return int(p < cfg.max_pframes ? p : cfg.max_pframes);
}

std::vector<Tensor<float>> make_synthetic_clip(Rng* rng, i64 h, i64 w,
                                               int frames) {
  LVC_CHECK(frames >= 1 && h >= 2 && w >= 2, "bad synthetic clip request ",
            frames, " frames at ", h, "x", w);
  const u32 kind = rng->next_below(3);
  // Per-frame translation in pixels (zero for the static texture).
  const double dx = kind == 2 ? 0.0 : double(rng->uniform(-2.0f, 2.0f));
  const double dy = kind == 2 ? 0.0 : double(rng->uniform(-2.0f, 2.0f));

  std::vector<Tensor<float>> clip;
  switch (kind) {
    case 0: {  // translating sinusoid texture, per-channel phase
      const double fx = double(rng->uniform(0.5f, 3.0f)) / double(w);
      const double fy = double(rng->uniform(0.5f, 3.0f)) / double(h);
      const double amp = double(rng->uniform(0.15f, 0.4f));
      double phase[3];
      for (double& p : phase) p = double(rng->uniform(0.0f, 6.2831853f));
      for (int t = 0; t < frames; ++t) {
        Tensor<float> f(Shape{1, 3, h, w});
        for (int c = 0; c < 3; ++c) {
          for (i64 y = 0; y < h; ++y) {
            for (i64 x = 0; x < w; ++x) {
              const double u = double(x) - dx * t, v = double(y) - dy * t;
              f.at(0, c, y, x) = float(
                  0.5 + amp * std::sin(kTwoPi * (fx * u + fy * v) +
                                       phase[c]));
            }
          }
        }
        clip.push_back(std::move(f));
      }
      break;
    }
    case 1: {  // translating periodic stripe/checker pattern
      const double period = double(rng->uniform(6.0f, 16.0f));
      const bool checker = rng->next_below(2) == 1;
      double lo[3], hi[3];
      for (int c = 0; c < 3; ++c) {
        lo[c] = double(rng->uniform(0.05f, 0.45f));
        hi[c] = double(rng->uniform(0.55f, 0.95f));
      }
      // Stripe edges are softened over roughly one pixel. Hard (binary)
      // edges are not band-limited: point-sampling them under subpixel
      // translation produces patterns no displacement model can track.
      const double edge = kTwoPi / period;  // sine slope per pixel at a zero
      for (int t = 0; t < frames; ++t) {
        Tensor<float> f(Shape{1, 3, h, w});
        for (i64 y = 0; y < h; ++y) {
          for (i64 x = 0; x < w; ++x) {
            const double u = double(x) - dx * t, v = double(y) - dy * t;
            const double su = std::tanh(std::sin(kTwoPi * u / period) / edge);
            const double blend =
                checker
                    ? 0.5 + 0.5 * su * std::tanh(
                                          std::sin(kTwoPi * v / period) / edge)
                    : 0.5 + 0.5 * su;
            for (int c = 0; c < 3; ++c) {
              f.at(0, c, y, x) = float(lo[c] + (hi[c] - lo[c]) * blend);
            }
          }
        }
        clip.push_back(std::move(f));
      }
      break;
    }
    default: {  // static smooth texture: bilinearly upsampled noise grid
      const i64 gh = 4, gw = 4;
      Tensor<float> grid(Shape{1, 3, gh, gw});
      for (i64 i = 0; i < grid.numel(); ++i) {
        grid[i] = rng->uniform(0.1f, 0.9f);
      }
      Tensor<float> f(Shape{1, 3, h, w});
      for (int c = 0; c < 3; ++c) {
        for (i64 y = 0; y < h; ++y) {
          for (i64 x = 0; x < w; ++x) {
            const double gy = double(y) * double(gh - 1) / double(h - 1);
            const double gx = double(x) * double(gw - 1) / double(w - 1);
            const i64 y0 = i64(gy), x0 = i64(gx);
            const i64 y1 = y0 + 1 < gh ? y0 + 1 : y0;
            const i64 x1 = x0 + 1 < gw ? x0 + 1 : x0;
            const double ay = gy - double(y0), ax = gx - double(x0);
            const double top = double(grid.at(0, c, y0, x0)) * (1 - ax) +
                               double(grid.at(0, c, y0, x1)) * ax;
            const double bot = double(grid.at(0, c, y1, x0)) * (1 - ax) +
                               double(grid.at(0, c, y1, x1)) * ax;
            f.at(0, c, y, x) = float(top * (1 - ay) + bot * ay);
          }
        }
      }
      for (int t = 0; t < frames; ++t) clip.push_back(f);
      break;
    }
  }
  return clip;
}

Trainer::Trainer(const TrainConfig& cfg, ModelWeights mw, u64 seed)
    : cfg_(cfg), mw_(std::move(mw)), rng_(seed) {
  validate_weights(mw_);
  LVC_CHECK(cfg_.batch >= 1, "batch must be positive");
  LVC_CHECK(cfg_.max_pframes >= 1, "max_pframes must be positive");
  LVC_CHECK(cfg_.curriculum_step >= 1, "curriculum_step must be positive");
  LVC_CHECK(cfg_.lambda_index == mw_.lambda_index,
            "config lambda index ", cfg_.lambda_index,
            " does not match weights (", mw_.lambda_index, ")");
  for (const auto& [name, t] : mw_.w) {
    m_.emplace(name, Tensor<float>(t.shape()));
    v_.emplace(name, Tensor<float>(t.shape()));
  }
}

TrainStats Trainer::step() {
  const int pframes = curriculum_pframes(cfg_, iter_);
  const double lambda = double(kLambdaTable[size_t(cfg_.lambda_index)]);

  WeightsMap<float> grads;
  for (const auto& [name, t] : mw_.w) {
    grads.emplace(name, Tensor<float>(t.shape()));
  }

  TrainStats stats;
  stats.iter = iter_;
  stats.pframes = pframes;
  const float inv_batch = 1.0f / float(cfg_.batch);
  for (int item = 0; item < cfg_.batch; ++item) {
    // Every item derives its own stream from (seed, iter, item), so the
    // data and noise draws do not depend on batch history.
    Rng item_rng = rng_.fork(u64(iter_) * u64(cfg_.batch) + u64(item));
    const std::vector<Tensor<float>> clip =
        make_synthetic_clip(&item_rng, cfg_.clip_h, cfg_.clip_w, pframes + 1);

    Graph<float> g;
    nets::NetCtx<float> ctx(g, mw_.w, /*trainable=*/true);
    ClipRdOut<float> out =
        clip_rd_forward(ctx, clip, lambda, cfg_.distortion, cfg_.quant,
                        &item_rng, cfg_.predictions);
    const double loss = double(out.loss.val()[0]);
    LVC_CHECK(std::isfinite(loss), "non-finite training loss ", loss,
              " at iteration ", iter_, ", batch item ", item);
    stats.loss += loss / cfg_.batch;
    stats.rate_bits += double(out.rate.val()[0]) / cfg_.batch;
    stats.distortion += double(out.distortion.val()[0]) / cfg_.batch;

    g.backward(out.loss);
    for (const auto& [name, leaf] : ctx.touched()) {
      const Tensor<float>& gt = g.grad(leaf);
      if (gt.empty()) continue;
      Tensor<float>& acc = grads.at(name);
      for (i64 i = 0; i < acc.numel(); ++i) acc[i] += gt[i] * inv_batch;
    }
  }

  // Adam, applied in canonical name order.
  const double t = double(iter_ + 1);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (auto& [name, w] : mw_.w) {
    const Tensor<float>& gt = grads.at(name);
    Tensor<float>& m = m_.at(name);
    Tensor<float>& v = v_.at(name);
    for (i64 i = 0; i < w.numel(); ++i) {
      const double gi = double(gt[i]);
      LVC_CHECK(std::isfinite(gi), "non-finite gradient for ", name,
                " at iteration ", iter_);
      const double mi = cfg_.beta1 * double(m[i]) + (1.0 - cfg_.beta1) * gi;
      const double vi =
          cfg_.beta2 * double(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
      m[i] = float(mi);
      v[i] = float(vi);
      const double update =
          cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.adam_eps);
      w[i] = float(double(w[i]) - update);
    }
  }
  ++iter_;
  return stats;
}

void Trainer::save_checkpoint(const std::string& path) const {
  save_weights(path, mw_);
  WeightsMap<float> side;
  for (const auto& [name, t] : m_) side.emplace(name + ".m", t);
  for (const auto& [name, t] : v_) side.emplace(name + ".v", t);
  LVC_CHECK(iter_ < (i64(1) << 24), "step count too large for checkpoint");
  Tensor<float> it(Shape{1, 1, 1, 1});
  it[0] = float(iter_);
  side.emplace("opt.iter", std::move(it));
  side.emplace("opt.rng.state", u64_to_limbs(rng_.state()));
  side.emplace("opt.rng.inc", u64_to_limbs(rng_.inc()));
  write_blob_atomic(path + ".opt", serialize_tensor_map(side, 0));
}

Trainer Trainer::load_checkpoint(const TrainConfig& cfg,
                                 const std::string& path) {
  ModelWeights mw = load_weights(path);
  Trainer tr(cfg, std::move(mw), /*seed=*/0);
  u32 aux = 0;
  WeightsMap<float> side = deserialize_tensor_map(read_blob(path + ".opt"),
                                                  &aux);
  for (auto& [name, t] : tr.m_) {
    auto it = side.find(name + ".m");
    LVC_CHECK(it != side.end(), "checkpoint sidecar missing ", name, ".m");
    LVC_CHECK(it->second.shape() == t.shape(), "sidecar shape mismatch for ",
              name, ".m");
    t = it->second;
  }
  for (auto& [name, t] : tr.v_) {
    auto it = side.find(name + ".v");
    LVC_CHECK(it != side.end(), "checkpoint sidecar missing ", name, ".v");
    LVC_CHECK(it->second.shape() == t.shape(), "sidecar shape mismatch for ",
              name, ".v");
    t = it->second;
  }
  LVC_CHECK(side.count("opt.iter") == 1 && side.count("opt.rng.state") == 1 &&
                side.count("opt.rng.inc") == 1,
            "checkpoint sidecar missing optimizer fields");
  tr.iter_ = i64(side.at("opt.iter")[0]);
  LVC_CHECK(tr.iter_ >= 0, "bad checkpoint step count");
  tr.rng_.restore(limbs_to_u64(side.at("opt.rng.state")),
                  limbs_to_u64(side.at("opt.rng.inc")));
  return tr;
}

ModelWeights run_curriculum(
    const TrainConfig& cfg, ModelWeights init, u64 seed, i64 iters,
    bool msssim_finetune,
    const std::function<void(const TrainStats&)>& on_iter) {
  LVC_CHECK(iters >= 1, "run_curriculum: need at least one iteration");
  Trainer tr(cfg, std::move(init), seed);
  for (i64 i = 0; i < iters; ++i) {
    const TrainStats st = tr.step();
    if (on_iter) on_iter(st);
  }
  if (msssim_finetune) {
    tr.set_distortion(Distortion::kMsssim);
    const i64 extra = (iters + 4) / 5;  // ceil(0.2 * iters)
    for (i64 i = 0; i < extra; ++i) {
      const TrainStats st = tr.step();
      if (on_iter) on_iter(st);
    }
  }
  return tr.weights();
}

}  // namespace lvc
