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
// AVX2 kernel lane. Compiled with -mavx2 (and only this translation unit),
// selected at runtime via CPUID. Bitwise equivalence with the scalar
// references is a hard contract:
//  * explicit mul+add, never FMA (and the build disables contraction);
//  * per-output sums accumulate taps in the same (ci, ky, kx) order;
//  * weight-gradient stripes reduce through the same tree as reduce8();
//  * tail lanes load +0.0 through masks, matching the references'
//    "tail contributes +0.0" rule.
// Instruction-level parallelism comes from processing independent output
// blocks (forward) or independent co stripes (weight gradient) in groups,
// which leaves each individual sum's evaluation order untouched.

#include "lvc/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

namespace lvc::kern {

namespace {

alignas(32) const i32 kMaskSource[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                         0,  0,  0,  0,  0,  0,  0,  0};

inline __m256i tail_mask(i64 rem) {  // rem in [1, 8)
  return _mm256_loadu_si256(
      reinterpret_cast<const __m256i*>(kMaskSource + 8 - rem));
}

inline float reduce8_avx(__m256 acc) {
  const __m128 lo = _mm256_castps256_ps128(acc);
  const __m128 hi = _mm256_extractf128_ps(acc, 1);
  const __m128 v = _mm_add_ps(lo, hi);        // (s0+s4, s1+s5, s2+s6, s3+s7)
  const __m128 sh = _mm_movehl_ps(v, v);      // (a2, a3, a2, a3)
  const __m128 u = _mm_add_ps(v, sh);         // (a0+a2, a1+a3, ., .)
  const __m128 r = _mm_add_ss(u, _mm_shuffle_ps(u, u, 0x55));
  return _mm_cvtss_f32(r);
}

void conv2d_fwd_avx2(const float* in, const float* w, const float* bias,
                     float* out, const ConvShape& s) {
  if (s.stride != 1) {
    // Strided convolutions are a minor share of the work; the reference
    // loop is the canonical (and only) implementation for them.
    conv2d_fwd_ref<float>(in, w, bias, out, s);
    return;
  }
  std::vector<float> padded;
  const i64 wp = pad_input(in, s, padded);
  const i64 hp = s.hi + 2 * s.pad;
  const float* pad_base = padded.data();

  for (i64 n = 0; n < s.n; ++n) {
    for (i64 co = 0; co < s.co; ++co) {
      const __m256 bv = _mm256_set1_ps(bias ? bias[co] : 0.0f);
      const float* wbase = w + co * s.ci * s.k * s.k;
      for (i64 y = 0; y < s.ho; ++y) {
        float* orow = out + ((n * s.co + co) * s.ho + y) * s.wo;
        i64 x = 0;
        // Four independent 8-wide output blocks share each broadcast tap.
        for (; x + 32 <= s.wo; x += 32) {
          __m256 a0 = bv, a1 = bv, a2 = bv, a3 = bv;
          for (i64 ci = 0; ci < s.ci; ++ci) {
            const float* pbase = pad_base + ((n * s.ci + ci) * hp + y) * wp;
            const float* wrow = wbase + ci * s.k * s.k;
            for (i64 ky = 0; ky < s.k; ++ky) {
              const float* prow = pbase + ky * wp + x;
              for (i64 kx = 0; kx < s.k; ++kx) {
                const __m256 wv = _mm256_set1_ps(wrow[ky * s.k + kx]);
                a0 = _mm256_add_ps(a0,
                                   _mm256_mul_ps(wv, _mm256_loadu_ps(prow + kx)));
                a1 = _mm256_add_ps(
                    a1, _mm256_mul_ps(wv, _mm256_loadu_ps(prow + kx + 8)));
                a2 = _mm256_add_ps(
                    a2, _mm256_mul_ps(wv, _mm256_loadu_ps(prow + kx + 16)));
                a3 = _mm256_add_ps(
                    a3, _mm256_mul_ps(wv, _mm256_loadu_ps(prow + kx + 24)));
              }
            }
          }
          _mm256_storeu_ps(orow + x, a0);
          _mm256_storeu_ps(orow + x + 8, a1);
          _mm256_storeu_ps(orow + x + 16, a2);
          _mm256_storeu_ps(orow + x + 24, a3);
        }
        for (; x + 8 <= s.wo; x += 8) {
          __m256 acc = bv;
          for (i64 ci = 0; ci < s.ci; ++ci) {
            const float* pbase = pad_base + ((n * s.ci + ci) * hp + y) * wp;
            const float* wrow = wbase + ci * s.k * s.k;
            for (i64 ky = 0; ky < s.k; ++ky) {
              const float* prow = pbase + ky * wp + x;
              for (i64 kx = 0; kx < s.k; ++kx) {
                const __m256 wv = _mm256_set1_ps(wrow[ky * s.k + kx]);
                acc = _mm256_add_ps(acc,
                                    _mm256_mul_ps(wv, _mm256_loadu_ps(prow + kx)));
              }
            }
          }
          _mm256_storeu_ps(orow + x, acc);
        }
        if (x < s.wo) {
          // Loads stay in-bounds thanks to the row slack; only the valid
          // lanes are stored.
          __m256 acc = bv;
          for (i64 ci = 0; ci < s.ci; ++ci) {
            const float* pbase = pad_base + ((n * s.ci + ci) * hp + y) * wp;
            const float* wrow = wbase + ci * s.k * s.k;
            for (i64 ky = 0; ky < s.k; ++ky) {
              const float* prow = pbase + ky * wp + x;
              for (i64 kx = 0; kx < s.k; ++kx) {
                const __m256 wv = _mm256_set1_ps(wrow[ky * s.k + kx]);
                acc = _mm256_add_ps(acc,
                                    _mm256_mul_ps(wv, _mm256_loadu_ps(prow + kx)));
              }
            }
          }
          _mm256_maskstore_ps(orow + x, tail_mask(s.wo - x), acc);
        }
      }
    }
  }
}

// One stripe accumulator per co in the group; the input row load is shared.
template <int kGroup>
void wgrad_group(const float* pad_base, const float* gout, float* wgrad,
                 const ConvShape& s, i64 hp, i64 wp, i64 co0, i64 ci, i64 ky,
                 i64 kx) {
  __m256 acc[kGroup];
  for (int g = 0; g < kGroup; ++g) acc[g] = _mm256_setzero_ps();
  const i64 full = s.wo & ~i64(7);
  const i64 rem = s.wo - full;
  const __m256i mask = rem ? tail_mask(rem) : _mm256_setzero_si256();
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 y = 0; y < s.ho; ++y) {
      const float* prow =
          pad_base + ((n * s.ci + ci) * hp + y * s.stride + ky) * wp + kx;
      const float* grow[kGroup];
      for (int g = 0; g < kGroup; ++g) {
        grow[g] = gout + ((n * s.co + co0 + g) * s.ho + y) * s.wo;
      }
      i64 xb = 0;
      for (; xb < full; xb += 8) {
        const __m256 iv = _mm256_loadu_ps(prow + xb);
        for (int g = 0; g < kGroup; ++g) {
          acc[g] = _mm256_add_ps(
              acc[g], _mm256_mul_ps(_mm256_loadu_ps(grow[g] + xb), iv));
        }
      }
      if (rem) {
        const __m256 iv = _mm256_maskload_ps(prow + xb, mask);
        for (int g = 0; g < kGroup; ++g) {
          acc[g] = _mm256_add_ps(
              acc[g], _mm256_mul_ps(_mm256_maskload_ps(grow[g] + xb, mask), iv));
        }
      }
    }
  }
  for (int g = 0; g < kGroup; ++g) {
    wgrad[(((co0 + g) * s.ci + ci) * s.k + ky) * s.k + kx] = reduce8_avx(acc[g]);
  }
}

void conv2d_wgrad_avx2(const float* in, const float* gout, float* wgrad,
                       const ConvShape& s) {
  if (s.stride != 1) {
    conv2d_wgrad_ref<float>(in, gout, wgrad, s);
    return;
  }
  std::vector<float> padded;
  const i64 wp = pad_input(in, s, padded);
  const i64 hp = s.hi + 2 * s.pad;
  const float* pad_base = padded.data();

  for (i64 ci = 0; ci < s.ci; ++ci) {
    for (i64 ky = 0; ky < s.k; ++ky) {
      for (i64 kx = 0; kx < s.k; ++kx) {
        i64 co = 0;
        for (; co + 4 <= s.co; co += 4) {
          wgrad_group<4>(pad_base, gout, wgrad, s, hp, wp, co, ci, ky, kx);
        }
        for (; co < s.co; ++co) {
          wgrad_group<1>(pad_base, gout, wgrad, s, hp, wp, co, ci, ky, kx);
        }
      }
    }
  }
}

void add_avx2(const float* a, const float* b, float* out, i64 n) {
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i,
                     _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const float* a, const float* b, float* out, i64 n) {
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i,
                     _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const float* a, const float* b, float* out, i64 n) {
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i,
                     _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void leaky_fwd_avx2(const float* x, float* out, i64 n, float slope) {
  const __m256 sv = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 pos = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(out + i,
                     _mm256_blendv_ps(_mm256_mul_ps(sv, xv), xv, pos));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_bwd_avx2(const float* x, const float* g, float* gx, i64 n,
                    float slope) {
  const __m256 sv = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  i64 i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 gv = _mm256_loadu_ps(g + i);
    const __m256 pos = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(gx + i,
                     _mm256_blendv_ps(_mm256_mul_ps(sv, gv), gv, pos));
  }
  for (; i < n; ++i) gx[i] = x[i] > 0.0f ? g[i] : slope * g[i];
}

const Kernels kAvx2Kernels = {
    "avx2",          conv2d_fwd_avx2, conv2d_wgrad_avx2,
    add_avx2,        sub_avx2,        mul_avx2,
    leaky_fwd_avx2,  leaky_bwd_avx2,
};

}  // namespace

const Kernels* avx2_kernels() {
  return __builtin_cpu_supports("avx2") ? &kAvx2Kernels : nullptr;
}

}  // namespace lvc::kern

#else  // !defined(__AVX2__)

namespace lvc::kern {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace lvc::kern

#endif
