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
// Compute kernels. The scalar templates below are the reference
// definitions: they fix the exact floating-point evaluation order. The
// runtime-dispatched float table provides SIMD variants that must be
// bitwise-identical to the references (enforced by tests). To keep that
// guarantee the build disables FP contraction and the SIMD code uses
// explicit mul+add rather than FMA.
//
// Evaluation-order contract:
//  * conv2d forward: each output element is an independent sum seeded with
//    the bias, accumulating taps in (ci, ky, kx) order over a zero-padded
//    input copy.
//  * conv2d weight gradient: each weight tap is reduced over outputs in
//    8-wide x-stripes; stripe j accumulates outputs with x % 8 == j in
//    (n, y, x-block) order, tail lanes contribute +0.0, and the 8 stripes
//    collapse through reduce8().

#ifndef LVC_KERNELS_HPP_
#define LVC_KERNELS_HPP_

#include <string>
#include <vector>

#include "lvc/common.hpp"

namespace lvc::kern {

struct ConvShape {
  i64 n, ci, hi, wi;  // input
  i64 co, k;          // kernel (square), weights (co, ci, k, k)
  i64 stride, pad;
  i64 ho, wo;  // output

  i64 flops() const { return 2 * ci * co * k * k * ho * wo * n; }
};

inline i64 conv_out_dim(i64 in, i64 k, i64 stride, i64 pad) {
  const i64 out = (in + 2 * pad - k) / stride + 1;
  return out;
}

inline ConvShape make_conv_shape(i64 n, i64 ci, i64 hi, i64 wi, i64 co, i64 k,
                                 i64 stride, i64 pad) {
  ConvShape s{n, ci, hi, wi, co, k, stride, pad,
              conv_out_dim(hi, k, stride, pad), conv_out_dim(wi, k, stride, pad)};
  LVC_CHECK(s.ho >= 1 && s.wo >= 1, "conv output collapsed: input ", hi, "x",
            wi, " k=", k, " stride=", stride, " pad=", pad);
  return s;
}

// Number of slack elements appended to every padded row so that 8-wide
// unaligned loads starting at any valid column stay inside the allocation.
inline constexpr i64 kRowSlack = 8;

// Copies (n, ci, hi, wi) into a zero-initialized (n, ci, hi + 2p, wp) buffer
// with wp = wi + 2p + kRowSlack. Returns wp.
template <typename T>
i64 pad_input(const T* in, const ConvShape& s, std::vector<T>& buf) {
  const i64 hp = s.hi + 2 * s.pad;
  const i64 wp = s.wi + 2 * s.pad + kRowSlack;
  buf.assign(size_t(s.n * s.ci * hp * wp), T(0));
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 c = 0; c < s.ci; ++c) {
      const T* src = in + (n * s.ci + c) * s.hi * s.wi;
      T* dst = buf.data() + (n * s.ci + c) * hp * wp + s.pad * wp + s.pad;
      for (i64 y = 0; y < s.hi; ++y) {
        for (i64 x = 0; x < s.wi; ++x) dst[y * wp + x] = src[y * s.wi + x];
      }
    }
  }
  return wp;
}

// Reference forward convolution; defines the canonical result bit for bit.
template <typename T>
void conv2d_fwd_ref(const T* in, const T* w, const T* bias, T* out,
                    const ConvShape& s) {
  std::vector<T> padded;
  const i64 wp = pad_input(in, s, padded);
  const i64 hp = s.hi + 2 * s.pad;
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 co = 0; co < s.co; ++co) {
      const T b = bias ? bias[co] : T(0);
      const T* wbase = w + co * s.ci * s.k * s.k;
      for (i64 y = 0; y < s.ho; ++y) {
        for (i64 x = 0; x < s.wo; ++x) {
          T acc = b;
          for (i64 ci = 0; ci < s.ci; ++ci) {
            const T* prow =
                padded.data() + ((n * s.ci + ci) * hp + y * s.stride) * wp;
            const T* wrow = wbase + ci * s.k * s.k;
            for (i64 ky = 0; ky < s.k; ++ky) {
              for (i64 kx = 0; kx < s.k; ++kx) {
                acc += wrow[ky * s.k + kx] * prow[ky * wp + x * s.stride + kx];
              }
            }
          }
          out[((n * s.co + co) * s.ho + y) * s.wo + x] = acc;
        }
      }
    }
  }
}

// Fixed tree reduction of one 8-wide stripe accumulator; mirrors the AVX2
// horizontal reduction exactly.
template <typename T>
T reduce8(const T* st) {
  const T a0 = st[0] + st[4];
  const T a1 = st[1] + st[5];
  const T a2 = st[2] + st[6];
  const T a3 = st[3] + st[7];
  const T b0 = a0 + a2;
  const T b1 = a1 + a3;
  return b0 + b1;
}

// Reference weight gradient: wgrad[co,ci,ky,kx] = sum over (n, y, x) of
// gout[n,co,y,x] * in_padded[n,ci,y*stride+ky,x*stride+kx].
template <typename T>
void conv2d_wgrad_ref(const T* in, const T* gout, T* wgrad,
                      const ConvShape& s) {
  std::vector<T> padded;
  const i64 wp = pad_input(in, s, padded);
  const i64 hp = s.hi + 2 * s.pad;
  for (i64 co = 0; co < s.co; ++co) {
    for (i64 ci = 0; ci < s.ci; ++ci) {
      for (i64 ky = 0; ky < s.k; ++ky) {
        for (i64 kx = 0; kx < s.k; ++kx) {
          T st[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
          for (i64 n = 0; n < s.n; ++n) {
            for (i64 y = 0; y < s.ho; ++y) {
              const T* grow = gout + ((n * s.co + co) * s.ho + y) * s.wo;
              const T* prow = padded.data() +
                              ((n * s.ci + ci) * hp + y * s.stride + ky) * wp +
                              kx;
              for (i64 xb = 0; xb < s.wo; xb += 8) {
                for (i64 j = 0; j < 8; ++j) {
                  const i64 x = xb + j;
                  if (x < s.wo) {
                    st[j] += grow[x] * prow[x * s.stride];
                  } else {
                    st[j] += T(0);
                  }
                }
              }
            }
          }
          wgrad[((co * s.ci + ci) * s.k + ky) * s.k + kx] = reduce8(st);
        }
      }
    }
  }
}

// Reference bias gradient: plain (n, y, x) row-major accumulation per co.
template <typename T>
void conv2d_bgrad_ref(const T* gout, T* bgrad, const ConvShape& s) {
  for (i64 co = 0; co < s.co; ++co) {
    T acc = T(0);
    for (i64 n = 0; n < s.n; ++n) {
      const T* g = gout + (n * s.co + co) * s.ho * s.wo;
      for (i64 i = 0; i < s.ho * s.wo; ++i) acc += g[i];
    }
    bgrad[co] = acc;
  }
}

// Transposed convolution (stride-s upsampling). Weights are (ci, co, k, k).
// out[n,co,y*s+ky-pad,x*s+kx-pad] += w[ci,co,ky,kx] * in[n,ci,y,x], plus
// bias. Scatter form, scalar only: deconvolutions are a small share of the
// total work.
template <typename T>
void deconv2d_fwd_ref(const T* in, const T* w, const T* bias, T* out, i64 n_,
                      i64 ci, i64 hi, i64 wi, i64 co, i64 k, i64 stride,
                      i64 pad, i64 ho, i64 wo) {
  for (i64 n = 0; n < n_; ++n) {
    T* obase = out + n * co * ho * wo;
    for (i64 c = 0; c < co; ++c) {
      const T b = bias ? bias[c] : T(0);
      for (i64 i = 0; i < ho * wo; ++i) obase[c * ho * wo + i] = b;
    }
    for (i64 c = 0; c < ci; ++c) {
      const T* ibase = in + (n * ci + c) * hi * wi;
      for (i64 y = 0; y < hi; ++y) {
        for (i64 x = 0; x < wi; ++x) {
          const T v = ibase[y * wi + x];
          for (i64 oc = 0; oc < co; ++oc) {
            const T* wrow = w + (c * co + oc) * k * k;
            T* orow = obase + oc * ho * wo;
            for (i64 ky = 0; ky < k; ++ky) {
              const i64 oy = y * stride + ky - pad;
              if (oy < 0 || oy >= ho) continue;
              for (i64 kx = 0; kx < k; ++kx) {
                const i64 ox = x * stride + kx - pad;
                if (ox < 0 || ox >= wo) continue;
                orow[oy * wo + ox] += wrow[ky * k + kx] * v;
              }
            }
          }
        }
      }
    }
  }
}

// Elementwise reference loops.
template <typename T>
void add_ref(const T* a, const T* b, T* out, i64 n) {
  for (i64 i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
template <typename T>
void sub_ref(const T* a, const T* b, T* out, i64 n) {
  for (i64 i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
template <typename T>
void mul_ref(const T* a, const T* b, T* out, i64 n) {
  for (i64 i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
template <typename T>
void leaky_fwd_ref(const T* x, T* out, i64 n, T slope) {
  for (i64 i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
}
template <typename T>
void leaky_bwd_ref(const T* x, const T* g, T* gx, i64 n, T slope) {
  for (i64 i = 0; i < n; ++i) gx[i] = x[i] > T(0) ? g[i] : slope * g[i];
}

// Runtime-dispatched float kernel set.
struct Kernels {
  const char* name;
  void (*conv2d_fwd)(const float* in, const float* w, const float* bias,
                     float* out, const ConvShape& s);
  void (*conv2d_wgrad)(const float* in, const float* gout, float* wgrad,
                       const ConvShape& s);
  void (*add)(const float* a, const float* b, float* out, i64 n);
  void (*sub)(const float* a, const float* b, float* out, i64 n);
  void (*mul)(const float* a, const float* b, float* out, i64 n);
  void (*leaky_fwd)(const float* x, float* out, i64 n, float slope);
  void (*leaky_bwd)(const float* x, const float* g, float* gx, i64 n,
                    float slope);
};

extern const Kernels kScalarKernels;
// Null when the binary or the CPU lacks AVX2 support.
const Kernels* avx2_kernels();

// The active set. Defaults to the widest supported lane; LVC_KERNELS=scalar
// or an explicit select_kernels() call overrides (used by the equivalence
// tests).
const Kernels& active_kernels();
void select_kernels(const std::string& name);
std::vector<std::string> available_kernel_names();

}  // namespace lvc::kern

#endif  // LVC_KERNELS_HPP_
