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

#include "lvc/mathfn.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace lvc::math {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488016887242096981;
constexpr double kInvSqrtPi = 0.5641895835477562869480794515607726;

inline float ldexp_f32(float x, int n) {
  // n is guaranteed in [-126, 127] by the callers' range clamps.
  const uint32_t bits = uint32_t(n + 127) << 23;
  return x * std::bit_cast<float>(bits);
}

inline double ldexp_f64(double x, int n) {
  const uint64_t bits = uint64_t(n + 1023) << 52;
  return x * std::bit_cast<double>(bits);
}

}  // namespace

float exp_f32(float x) {
  // Argument clamp keeps the result finite and the scale factor normal.
  if (x > 88.0f) x = 88.0f;
  if (x < -87.0f) x = -87.0f;

  // x = n*ln2 + r, evaluate e^r by polynomial, scale by 2^n.
  float z = std::floor(1.44269504088896341f * x + 0.5f);
  const int n = int(z);
  x -= z * 0.693359375f;          // ln2 split in two for extra precision
  x -= z * -2.12194440e-4f;

  z = x * x;
  float p = 1.9875691500e-4f;
  p = p * x + 1.3981999507e-3f;
  p = p * x + 8.3334519073e-3f;
  p = p * x + 4.1665795894e-2f;
  p = p * x + 1.6666665459e-1f;
  p = p * x + 5.0000001201e-1f;
  p = p * z + x + 1.0f;
  return ldexp_f32(p, n);
}

float log_f32(float x) {
  if (x <= 0.0f) {
    return x == 0.0f ? -std::numeric_limits<float>::infinity()
                     : std::numeric_limits<float>::quiet_NaN();
  }
  int e = 0;
  if (x < 1.17549435e-38f) {  // bring denormals into the normal range
    x *= 0x1p32f;
    e = -32;
  }
  uint32_t bits = std::bit_cast<uint32_t>(x);
  e += int((bits >> 23) & 0xFF) - 126;
  bits = (bits & 0x007FFFFFu) | 0x3F000000u;  // mantissa in [0.5, 1)
  x = std::bit_cast<float>(bits);

  if (x < 0.70710678118654752440f) {
    e -= 1;
    x = x + x - 1.0f;
  } else {
    x = x - 1.0f;
  }

  const float z = x * x;
  float y = 7.0376836292e-2f;
  y = y * x - 1.1514610310e-1f;
  y = y * x + 1.1676998740e-1f;
  y = y * x - 1.2420140846e-1f;
  y = y * x + 1.4249322787e-1f;
  y = y * x - 1.6668057665e-1f;
  y = y * x + 2.0000714765e-1f;
  y = y * x - 2.4999993993e-1f;
  y = y * x + 3.3333331174e-1f;
  y = y * x * z;
  y += -2.12194440e-4f * float(e);
  y += -0.5f * z;
  float r = x + y;
  r += 0.693359375f * float(e);
  return r;
}

double exp_f64(double x) {
  if (x > 709.0) x = 709.0;
  if (x < -708.0) x = -708.0;

  double z = std::floor(1.4426950408889634073599 * x + 0.5);
  const int n = int(z);
  x -= z * 6.93145751953125e-1;
  x -= z * 1.42860682030941723212e-6;

  // e^r = 1 + 2r*P(r^2) / (Q(r^2) - r*P(r^2)), |r| <= ln2/2.
  const double xx = x * x;
  double p = 1.26177193074810590878e-4;
  p = p * xx + 3.02994407707441961300e-2;
  p = p * xx + 9.99999999999999999910e-1;
  p *= x;
  double q = 3.00198505138664455042e-6;
  q = q * xx + 2.52448340349684104192e-3;
  q = q * xx + 2.27265548208155028766e-1;
  q = q * xx + 2.00000000000000000005;
  const double w = p / (q - p);
  return ldexp_f64(1.0 + 2.0 * w, n);
}

double log_f64(double x) {
  if (x <= 0.0) {
    return x == 0.0 ? -std::numeric_limits<double>::infinity()
                    : std::numeric_limits<double>::quiet_NaN();
  }
  int e = 0;
  if (x < 2.2250738585072014e-308) {
    x *= 0x1p64;
    e = -64;
  }
  uint64_t bits = std::bit_cast<uint64_t>(x);
  e += int((bits >> 52) & 0x7FF) - 1022;
  bits = (bits & 0x000FFFFFFFFFFFFFull) | 0x3FE0000000000000ull;
  double m = std::bit_cast<double>(bits);  // [0.5, 1)
  if (m < 0.70710678118654752440) {
    e -= 1;
  } else {
    m *= 0.5;
  }
  m *= 2.0;  // mantissa now in [1/sqrt2, sqrt2)

  // log(m) = 2*atanh(s), s = (m-1)/(m+1), |s| <= 0.1716. The series in s^2
  // gains ~5 bits per term; 13 terms reach full double precision.
  const double s = (m - 1.0) / (m + 1.0);
  const double s2 = s * s;
  double acc = 1.0 / 25.0;
  acc = acc * s2 + 1.0 / 23.0;
  acc = acc * s2 + 1.0 / 21.0;
  acc = acc * s2 + 1.0 / 19.0;
  acc = acc * s2 + 1.0 / 17.0;
  acc = acc * s2 + 1.0 / 15.0;
  acc = acc * s2 + 1.0 / 13.0;
  acc = acc * s2 + 1.0 / 11.0;
  acc = acc * s2 + 1.0 / 9.0;
  acc = acc * s2 + 1.0 / 7.0;
  acc = acc * s2 + 1.0 / 5.0;
  acc = acc * s2 + 1.0 / 3.0;
  acc = acc * s2 + 1.0;
  return 2.0 * s * acc + double(e) * kLn2;
}

namespace {

// erf on [0, 3) via the fully positive confluent series
//   erf(x) = 2x e^{-x^2}/sqrt(pi) * sum_n (2x^2)^n / (1*3*...*(2n+1)),
// which avoids the cancellation of the alternating Taylor series.
double erf_small(double x) {
  const double x2 = x * x;
  const double t2 = 2.0 * x2;
  double term = 1.0;
  double sum = 1.0;
  double denom = 1.0;
  for (int n = 1; n < 200; ++n) {
    denom = double(2 * n + 1);
    term *= t2 / denom;
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return 2.0 * x * exp_f64(-x2) * kInvSqrtPi * sum;
}

// erfc on [3, inf) via the Laplace continued fraction
//   erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm.
double erfc_large(double x) {
  if (x >= 26.5) return 0.0;  // below the smallest normal double
  const double tiny = 1e-300;
  double f = x, c = x, d = 0.0;
  for (int n = 1; n < 300; ++n) {
    const double a = 0.5 * double(n);
    d = x + a * d;
    if (d == 0.0) d = tiny;
    c = x + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (delta > 1.0 - 1e-17 && delta < 1.0 + 1e-17) break;
  }
  return exp_f64(-x * x) * kInvSqrtPi / f;
}

}  // namespace

double erfc_f64(double x) {
  if (x < 0.0) return 2.0 - erfc_f64(-x);
  if (x < 3.0) return 1.0 - erf_small(x);
  return erfc_large(x);
}

double erf_f64(double x) {
  if (x < 0.0) return -erf_f64(-x);
  if (x < 3.0) return erf_small(x);
  return 1.0 - erfc_large(x);
}

double normal_cdf(double x) { return 0.5 * erfc_f64(-x / kSqrt2); }

double normal_sf(double x) { return 0.5 * erfc_f64(x / kSqrt2); }

double normal_pdf(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;
  return kInvSqrt2Pi * exp_f64(-0.5 * x * x);
}

}  // namespace lvc::math
