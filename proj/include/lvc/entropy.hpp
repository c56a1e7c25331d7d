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
// Entropy model and coding. Likelihoods are differentiable graph ops; the
// coder consumes fixed-point CDF tables derived deterministically (in
// double precision, self-contained math) from the same model parameters on
// the encode and decode sides, which is what makes the bitstreams portable
// across machines.

#ifndef LVC_ENTROPY_HPP_
#define LVC_ENTROPY_HPP_

#include <vector>

#include "lvc/graph.hpp"
#include "lvc/ops.hpp"
#include "lvc/rng.hpp"

namespace lvc::entropy {

// Likelihood floor: no coded symbol costs more than 16 bits (plus escape).
inline constexpr double kPMin = 1.0 / 65536.0;
// Scale floor for the Gaussian model, in latent units.
inline constexpr double kSigmaMin = 0.01;
// Fixed-point CDF grid.
inline constexpr int kProbBits = 16;
inline constexpr u32 kProbScale = 1u << kProbBits;
// Symbols are clamped to this magnitude before coding.
inline constexpr i32 kSymbolClamp = 1 << 24;

// Byte payload plus explicit bit length (always byte-aligned here; the
// final byte is zero-padded by construction).
struct Bitstring {
  std::vector<u8> bytes;
  u64 bit_length = 0;
};

enum class QuantMode {
  kRound,  // round half away from zero; straight-through gradient
  kNoise,  // additive U(-0.5, 0.5), the training relaxation
};

// ---------------------------------------------------------------------
// Differentiable pieces.

template <typename T>
Var<T> quantize(Var<T> x, QuantMode mode, Rng* rng) {
  if (mode == QuantMode::kRound) return ops::round_ste(x);
  LVC_CHECK(rng != nullptr, "noise quantization needs an RNG");
  Tensor<T> noise(x.shape());
  for (i64 i = 0; i < noise.numel(); ++i) {
    noise[i] = T(rng->uniform_f64() - 0.5);
  }
  return ops::add(x, x.g->constant(std::move(noise)));
}

// Probability that a Gaussian(mu, sigma) sample quantizes into the unit
// interval around v, i.e. CDF(v+0.5) - CDF(v-0.5), computed through the
// upper tail when both endpoints are positive to avoid cancellation.
// Unclamped; may be ~0 far from the mean.
double gaussian_interval_prob_raw(double v, double mu, double sigma);
// Clamped to [kPMin, 1]: the value the rate estimate and the graph op use.
double gaussian_interval_prob(double v, double mu, double sigma);

// Elementwise interval likelihood under per-element Gaussians. sigma must
// be positive (the networks produce kSigmaMin + softplus(raw)). Gradients
// are zero wherever the clamp is active.
template <typename T>
Var<T> gaussian_likelihood(Var<T> v, Var<T> mu, Var<T> sigma);

// Elementwise likelihood under a trainable per-channel factorized prior.
// logits has shape (1, C, 1, K) with K odd; bin k covers value k-(K-1)/2
// and probabilities interpolate piecewise-linearly between bin centers.
// Values beyond the support take the edge bin probability (zero gradient
// to v there).
template <typename T>
Var<T> hist_likelihood(Var<T> v, Var<T> logits);

// Total rate in bits: sum over elements of -log2(p).
template <typename T>
Var<T> rate_bits(Var<T> p) {
  return ops::affine(ops::sum_all(ops::lognat(p)), -T(math::kInvLn2), T(0));
}

// ---------------------------------------------------------------------
// Range coder: carry-less 32-bit implementation. The stream starts wide
// open (range = 2^32-1) and renormalizes a byte at a time once the top
// byte of low is settled, snapping the range at 2^16 boundaries to sidestep
// carry propagation. Flush emits exactly 4 bytes, so the framing overhead
// is 32 bits per stream; the decoder reads zeros past the end.

class RangeEncoder {
 public:
  // cum/freq on the kProbScale grid; freq >= 1, cum + freq <= kProbScale.
  void encode(u32 cum, u32 freq);
  // One byte with a flat 256-way split (exactly 8 bits).
  void encode_raw_byte(u8 b);
  Bitstring finish();

 private:
  void normalize();
  u32 low_ = 0;
  u32 range_ = 0xFFFFFFFFu;
  std::vector<u8> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(const Bitstring& bits);
  // Returns the scaled cumulative frequency of the next symbol; the caller
  // finds the symbol whose [cum, cum+freq) contains it, then commits with
  // decode_update(cum, freq).
  u32 decode_freq();
  void decode_update(u32 cum, u32 freq);
  u8 decode_raw_byte();

 private:
  u8 next_byte() { return pos_ < bytes_.size() ? bytes_[pos_++] : 0; }
  std::vector<u8> bytes_;
  size_t pos_ = 0;
  u32 low_ = 0;
  u32 range_ = 0xFFFFFFFFu;
  u32 code_ = 0;
};

// ---------------------------------------------------------------------
// Fixed-point CDF table over a contiguous window of integer symbol values
// plus a trailing escape slot. Escaped values cost the escape slot plus a
// 32-bit raw payload.

struct CdfTable {
  i32 lo = 0;               // value of the first window slot
  std::vector<u32> cum;     // monotone, size window+2, [0 .. kProbScale]

  i32 window_size() const { return i32(cum.size()) - 2; }
  bool in_window(i32 v) const { return v >= lo && v < lo + window_size(); }
  u32 freq(i32 slot) const { return cum[slot + 1] - cum[slot]; }
  i32 escape_slot() const { return window_size(); }

  // Bits the coder will spend on value v under this table (escape payload
  // included). Used by rate accounting tests.
  double coded_bits(i32 v) const;

  // Largest-remainder quantization of a pmf (plus explicit escape mass)
  // onto the kProbScale grid with every slot >= 1.
  static CdfTable from_pmf(i32 lo, const std::vector<double>& pmf,
                           double escape_mass);

  void serialize(std::vector<u8>& out) const;
  static CdfTable deserialize(const u8*& p, const u8* end);
  bool operator==(const CdfTable& o) const {
    return lo == o.lo && cum == o.cum;
  }
};

// Window derivation for the Gaussian model: centered at round(mu), radius
// ceil(4*sigma) clamped to [1, 64]. Deterministic in double precision.
CdfTable gaussian_cdf_table(double mu, double sigma);

// Frozen per-channel tables for the factorized prior, derived from the
// logits tensor (1, C, 1, K).
std::vector<CdfTable> factorized_tables(const Tensor<float>& logits);

// Symbol layer on top of the raw coder.
void encode_symbol(RangeEncoder& enc, const CdfTable& t, i32 value,
                   i64* escape_count);
i32 decode_symbol(RangeDecoder& dec, const CdfTable& t);

// Model cross-entropy of a symbol stream in bits: sum of -log2 of the
// clamped model probability, plus 32 bits per out-of-window escape.
double estimate_rate_gaussian(const std::vector<i32>& syms,
                              const std::vector<float>& mu,
                              const std::vector<float>& sigma);
double estimate_rate_factorized(const std::vector<i32>& syms, i64 channels,
                                const std::vector<CdfTable>& tables);

// ---------------------------------------------------------------------
// Graph op implementations (templated over the autodiff dtype).

template <typename T>
Var<T> gaussian_likelihood(Var<T> v, Var<T> mu, Var<T> sigma) {
  Graph<T>& g = *v.g;
  ops::check_same_shape(v, mu, "gaussian_likelihood(v,mu)");
  ops::check_same_shape(v, sigma, "gaussian_likelihood(v,sigma)");
  const Tensor<T>& vv = g.val(v);
  const Tensor<T>& mv = g.val(mu);
  const Tensor<T>& sv = g.val(sigma);
  Tensor<T> out(v.shape());
  for (i64 i = 0; i < out.numel(); ++i) {
    LVC_CHECK(sv[i] > T(0), "gaussian_likelihood: sigma must be positive");
    out[i] = T(gaussian_interval_prob(double(vv[i]), double(mv[i]),
                                      double(sv[i])));
  }
  const bool rg = ops::any_grad(g, {v, mu, sigma});
  return ops::node(g, std::move(out), rg, 32 * out.numel(), [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      const Tensor<T>& vv2 = gr.val(v);
      const Tensor<T>& mv2 = gr.val(mu);
      const Tensor<T>& sv2 = gr.val(sigma);
      const bool nv = gr.requires_grad(v);
      const bool nm = gr.requires_grad(mu);
      const bool ns = gr.requires_grad(sigma);
      Tensor<T> gv = nv ? Tensor<T>(go.shape()) : Tensor<T>();
      Tensor<T> gm = nm ? Tensor<T>(go.shape()) : Tensor<T>();
      Tensor<T> gs = ns ? Tensor<T>(go.shape()) : Tensor<T>();
      for (i64 i = 0; i < go.numel(); ++i) {
        const double x = double(vv2[i]);
        const double m = double(mv2[i]);
        const double s = double(sv2[i]);
        const double praw = gaussian_interval_prob_raw(x, m, s);
        double dv = 0.0, dm = 0.0, ds = 0.0;
        if (praw > kPMin && praw < 1.0) {
          const double a = (x - m + 0.5) / s;
          const double b = (x - m - 0.5) / s;
          const double pa = math::normal_pdf(a);
          const double pb = math::normal_pdf(b);
          dv = (pa - pb) / s;
          dm = -dv;
          ds = -(pa * a - pb * b) / s;
        }
        const double gg = double(go[i]);
        if (nv) gv[i] = T(gg * dv);
        if (nm) gm[i] = T(gg * dm);
        if (ns) gs[i] = T(gg * ds);
      }
      if (nv) gr.accum_grad(v, std::move(gv));
      if (nm) gr.accum_grad(mu, std::move(gm));
      if (ns) gr.accum_grad(sigma, std::move(gs));
    };
  });
}

namespace detail {

// Per-channel softmax of the logits row, in double.
template <typename T>
std::vector<double> softmax_row(const Tensor<T>& logits, i64 c) {
  const i64 k = logits.shape().w;
  std::vector<double> q(static_cast<size_t>(k));
  double mx = double(logits.at(0, c, 0, 0));
  for (i64 j = 1; j < k; ++j) mx = std::max(mx, double(logits.at(0, c, 0, j)));
  double sum = 0.0;
  for (i64 j = 0; j < k; ++j) {
    q[size_t(j)] = math::exp_f64(double(logits.at(0, c, 0, j)) - mx);
    sum += q[size_t(j)];
  }
  for (auto& e : q) e /= sum;
  return q;
}

}  // namespace detail

template <typename T>
Var<T> hist_likelihood(Var<T> v, Var<T> logits) {
  Graph<T>& g = *v.g;
  const Shape vs = v.shape();
  const Shape ls = logits.shape();
  LVC_CHECK(ls.n == 1 && ls.h == 1 && ls.c == vs.c && ls.w % 2 == 1,
            "hist_likelihood logits ", ls.str(), " vs values ", vs.str());
  const i64 kk = ls.w;
  const i64 radius = (kk - 1) / 2;
  const Tensor<T>& lv = g.val(logits);
  const Tensor<T>& vv = g.val(v);

  std::vector<std::vector<double>> q(size_t(vs.c));
  for (i64 c = 0; c < vs.c; ++c) q[size_t(c)] = detail::softmax_row(lv, c);

  Tensor<T> out(vs);
  for (i64 n = 0; n < vs.n; ++n) {
    for (i64 c = 0; c < vs.c; ++c) {
      const auto& qc = q[size_t(c)];
      for (i64 y = 0; y < vs.h; ++y) {
        for (i64 x = 0; x < vs.w; ++x) {
          const double t = double(vv.at(n, c, y, x)) + double(radius);
          double p;
          if (t <= 0.0) {
            p = qc.front();
          } else if (t >= double(kk - 1)) {
            p = qc.back();
          } else {
            const double fl = std::floor(t);
            const i64 j = i64(fl);
            const double f = t - fl;
            p = (1.0 - f) * qc[size_t(j)] + f * qc[size_t(j + 1)];
          }
          p = std::min(1.0, std::max(kPMin, p));
          out.at(n, c, y, x) = T(p);
        }
      }
    }
  }
  const bool rg = ops::any_grad(g, {v, logits});
  return ops::node(g, std::move(out), rg, 8 * vs.numel(), [=](Var<T> self) {
    return [=](Graph<T>& gr) {
      const Tensor<T>& go = gr.grad(self);
      const Tensor<T>& vv2 = gr.val(v);
      const Tensor<T>& lv2 = gr.val(logits);
      const bool nv = gr.requires_grad(v);
      const bool nl = gr.requires_grad(logits);
      Tensor<T> gv = nv ? Tensor<T>(vs) : Tensor<T>();
      std::vector<std::vector<double>> gq(
          size_t(vs.c), std::vector<double>(size_t(kk), 0.0));
      for (i64 n = 0; n < vs.n; ++n) {
        for (i64 c = 0; c < vs.c; ++c) {
          const auto qc = detail::softmax_row(lv2, c);
          auto& gqc = gq[size_t(c)];
          for (i64 y = 0; y < vs.h; ++y) {
            for (i64 x = 0; x < vs.w; ++x) {
              const double gg = double(go.at(n, c, y, x));
              const double t = double(vv2.at(n, c, y, x)) + double(radius);
              double praw, dpv = 0.0;
              i64 j0 = -1, j1 = -1;
              double w0 = 0.0, w1 = 0.0;
              if (t <= 0.0) {
                praw = qc.front();
                j0 = 0;
                w0 = 1.0;
              } else if (t >= double(kk - 1)) {
                praw = qc.back();
                j0 = kk - 1;
                w0 = 1.0;
              } else {
                const double fl = std::floor(t);
                const i64 j = i64(fl);
                const double f = t - fl;
                praw = (1.0 - f) * qc[size_t(j)] + f * qc[size_t(j + 1)];
                dpv = qc[size_t(j + 1)] - qc[size_t(j)];
                j0 = j;
                j1 = j + 1;
                w0 = 1.0 - f;
                w1 = f;
              }
              if (praw <= kPMin || praw >= 1.0) continue;  // clamp active
              if (nv) gv.at(n, c, y, x) = T(gg * dpv);
              if (nl) {
                gqc[size_t(j0)] += gg * w0;
                if (j1 >= 0) gqc[size_t(j1)] += gg * w1;
              }
            }
          }
        }
      }
      if (nv) gr.accum_grad(v, std::move(gv));
      if (nl) {
        // d/dlogit_k through the softmax: q_k * (gq_k - sum_j q_j gq_j).
        Tensor<T> gl(ls);
        for (i64 c = 0; c < vs.c; ++c) {
          const auto qc = detail::softmax_row(lv2, c);
          const auto& gqc = gq[size_t(c)];
          double dot = 0.0;
          for (i64 k2 = 0; k2 < kk; ++k2) {
            dot += qc[size_t(k2)] * gqc[size_t(k2)];
          }
          for (i64 k2 = 0; k2 < kk; ++k2) {
            gl.at(0, c, 0, k2) = T(qc[size_t(k2)] * (gqc[size_t(k2)] - dot));
          }
        }
        gr.accum_grad(logits, std::move(gl));
      }
    };
  });
}

}  // namespace lvc::entropy

#endif  // LVC_ENTROPY_HPP_
