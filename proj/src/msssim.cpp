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
// Scalar quality metrics: PSNR and multi-scale SSIM. Both are evaluated in
// double precision regardless of the codec's working type.

#include <cmath>

#include "lvc/evalkit.hpp"
#include "lvc/mathfn.hpp"

namespace lvc {
namespace {

constexpr double kInvLn10 = 0.43429448190325182765112891891661;

double log10_(double x) { return math::log_f64(x) * kInvLn10; }

}  // namespace

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  LVC_CHECK(a.shape() == b.shape(), "psnr: shape mismatch ", a.shape().str(),
            " vs ", b.shape().str());
  LVC_CHECK(a.numel() > 0, "psnr: empty input");
  double sum = 0.0;
  for (i64 i = 0; i < a.numel(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    sum += d * d;
  }
  const double mse = sum / double(a.numel());
  if (mse <= 0.0) return kPsnrCap;
  const double db = -10.0 * log10_(mse);
  return db > kPsnrCap ? kPsnrCap : db;
}

int ms_ssim_scales(i64 height, i64 width) {
  const i64 side = height < width ? height : width;
  LVC_CHECK(side >= 1, "ms_ssim: empty image");
  int scales = 1;
  i64 div = 2;  // 2^(s-1) for s = scales + 1
  while (scales < 5 && side / div >= 10) {
    ++scales;
    div *= 2;
  }
  return scales;
}

std::array<double, kMsssimWindow> ms_ssim_window() {
  std::array<double, kMsssimWindow> w{};
  const int r = kMsssimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kMsssimWindow; ++i) {
    const double d = double(i - r);
    w[size_t(i)] =
        math::exp_f64(-(d * d) / (2.0 * kMsssimSigma * kMsssimSigma));
    sum += w[size_t(i)];
  }
  for (double& x : w) x /= sum;
  return w;
}

double ms_ssim(const Tensor<float>& a, const Tensor<float>& b) {
  LVC_CHECK(a.shape() == b.shape(), "ms_ssim: shape mismatch ",
            a.shape().str(), " vs ", b.shape().str());
  Graph<double> g;
  g.set_grad_enabled(false);
  Tensor<double> ad(a.shape());
  Tensor<double> bd(b.shape());
  for (i64 i = 0; i < a.numel(); ++i) {
    ad[i] = double(a[i]);
    bd[i] = double(b[i]);
  }
  Var<double> score =
      ms_ssim_graph(g.constant(std::move(ad)), g.constant(std::move(bd)));
  return score.val()[0];
}

}  // namespace lvc
