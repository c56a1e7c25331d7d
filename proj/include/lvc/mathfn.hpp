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
// Self-contained transcendental functions. libm implementations differ
// across platforms at the ulp level, which would break bitwise
// reproducibility of network outputs and of entropy-coding tables. Every
// transcendental used on a reconstruction- or coding-relevant path goes
// through these routines instead. They are classic polynomial/rational
// approximations evaluated in a fixed operation order.

#ifndef LVC_MATHFN_HPP_
#define LVC_MATHFN_HPP_

#include <cmath>

namespace lvc::math {

float exp_f32(float x);   // ~2 ulp over the non-overflowing range
float log_f32(float x);   // natural log, x > 0; returns -inf at 0
double exp_f64(double x);
double log_f64(double x);
double erf_f64(double x);
double erfc_f64(double x);  // accurate in the far positive tail

template <typename T>
T exp_(T x);
template <>
inline float exp_(float x) { return exp_f32(x); }
template <>
inline double exp_(double x) { return exp_f64(x); }

template <typename T>
T log_(T x);
template <>
inline float log_(float x) { return log_f32(x); }
template <>
inline double log_(double x) { return log_f64(x); }

// CDF of the standard normal. Routed through erfc so that both tails keep
// full relative accuracy; needed so per-element interval probabilities
// telescope to <= 1.
double normal_cdf(double x);
// Upper tail 1 - CDF(x), without cancellation for large x.
double normal_sf(double x);
// Standard normal density.
double normal_pdf(double x);

template <typename T>
T sigmoid_(T x) {
  // Stable form: never exponentiates a positive argument.
  if (x >= T(0)) {
    T e = exp_<T>(-x);
    return T(1) / (T(1) + e);
  }
  T e = exp_<T>(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus_(T x) {
  // log(1 + exp(x)) = max(x, 0) + log(1 + exp(-|x|))
  T ax = x < T(0) ? -x : x;
  T base = x > T(0) ? x : T(0);
  return base + log_<T>(T(1) + exp_<T>(-ax));
}

// Round half away from zero: 2.5 -> 3, -2.5 -> -3. The single rounding
// rule used for quantization everywhere (latents and the straight-through
// estimator alike).
template <typename T>
T round_away(T x) {
  T t = x < T(0) ? -x : x;
  t = std::floor(t + T(0.5));
  return x < T(0) ? -t : t;
}

inline constexpr double kLn2 = 0.6931471805599453094172321214581766;
inline constexpr double kInvLn2 = 1.4426950408889634073599246810018921;

template <typename T>
T log2_(T x) {
  return log_<T>(x) * T(kInvLn2);
}

}  // namespace lvc::math

#endif  // LVC_MATHFN_HPP_
