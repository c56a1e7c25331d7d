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
// Differentiable MS-SSIM, shared by the double-precision metric and the
// perceptual training loss. Included by evalkit.hpp; do not include directly.

#ifndef LVC_EVALKIT_INL_HPP_
#define LVC_EVALKIT_INL_HPP_

namespace lvc {
namespace detail {

// 11x11 Gaussian blur applied independently to every channel, with
// replicate padding so the output keeps the input size.
template <typename T>
Var<T> msssim_blur(Var<T> x) {
  Graph<T>& g = *x.g;
  const std::array<double, kMsssimWindow> w1 = ms_ssim_window();
  Tensor<T> k(Shape{1, 1, kMsssimWindow, kMsssimWindow});
  for (int i = 0; i < kMsssimWindow; ++i) {
    for (int j = 0; j < kMsssimWindow; ++j) {
      k.at(0, 0, i, j) = T(w1[size_t(i)] * w1[size_t(j)]);
    }
  }
  Var<T> kernel = g.constant(std::move(k));
  Tensor<T> zero(Shape{1, 1, 1, 1});
  zero[0] = T(0);
  Var<T> bias = g.constant(std::move(zero));
  const int r = kMsssimWindow / 2;
  Var<T> padded = ops::pad_replicate(x, r, r, r, r);
  const i64 channels = x.shape().c;
  std::vector<Var<T>> blurred;
  blurred.reserve(size_t(channels));
  for (i64 c = 0; c < channels; ++c) {
    blurred.push_back(
        ops::conv2d(ops::slice_c(padded, c, c + 1), kernel, bias, 1, 0));
  }
  return channels == 1 ? blurred[0] : ops::concat_c(blurred);
}

// Mean contrast-structure term and mean luminance term at one scale.
template <typename T>
std::pair<Var<T>, Var<T>> msssim_terms(Var<T> a, Var<T> b) {
  Var<T> mu_a = msssim_blur(a);
  Var<T> mu_b = msssim_blur(b);
  Var<T> mu_aa = ops::mul(mu_a, mu_a);
  Var<T> mu_bb = ops::mul(mu_b, mu_b);
  Var<T> mu_ab = ops::mul(mu_a, mu_b);
  Var<T> var_a = ops::sub(msssim_blur(ops::mul(a, a)), mu_aa);
  Var<T> var_b = ops::sub(msssim_blur(ops::mul(b, b)), mu_bb);
  Var<T> cov = ops::sub(msssim_blur(ops::mul(a, b)), mu_ab);
  const T c1 = T(kMsssimC1);
  const T c2 = T(kMsssimC2);
  Var<T> cs = ops::div(ops::affine(cov, T(2), c2),
                       ops::affine(ops::add(var_a, var_b), T(1), c2));
  Var<T> lum = ops::div(ops::affine(mu_ab, T(2), c1),
                        ops::affine(ops::add(mu_aa, mu_bb), T(1), c1));
  return {ops::mean_all(cs), ops::mean_all(lum)};
}

// Halves the spatial size, replicate-padding odd dimensions first so no
// pixels are dropped.
template <typename T>
Var<T> msssim_downsample(Var<T> x) {
  const Shape s = x.shape();
  x = ops::pad_replicate(x, 0, 0, s.w % 2, s.h % 2);
  return ops::avg_pool2(x);
}

}  // namespace detail

template <typename T>
Var<T> ms_ssim_graph(Var<T> a, Var<T> b) {
  LVC_CHECK(a.shape() == b.shape(), "ms_ssim: shape mismatch ",
            a.shape().str(), " vs ", b.shape().str());
  const Shape s = a.shape();
  const int scales = ms_ssim_scales(s.h, s.w);
  double wsum = 0.0;
  for (int i = 0; i < scales; ++i) wsum += kMsssimWeights[size_t(i)];
  Var<T> score;
  for (int scale = 0; scale < scales; ++scale) {
    auto [cs, lum] = detail::msssim_terms(a, b);
    const T expo = T(kMsssimWeights[size_t(scale)] / wsum);
    // The coarsest scale contributes luminance * cs; finer scales only cs.
    Var<T> term = (scale == scales - 1) ? ops::mul(cs, lum) : cs;
    term = ops::pow_const(ops::clamp(term, T(kMsssimFloor), T(1)), expo);
    score = (scale == 0) ? term : ops::mul(score, term);
    if (scale + 1 < scales) {
      a = detail::msssim_downsample(a);
      b = detail::msssim_downsample(b);
    }
  }
  return score;
}

}  // namespace lvc

#endif  // LVC_EVALKIT_INL_HPP_
