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
// Hand-computed op examples and exactness invariants (identity kernels,
// zero-flow warps, rounding conventions, interval likelihoods against an
// independent erf oracle).

#include <cmath>
#include <vector>

#include "doctest.h"
#include "lvc/entropy.hpp"
#include "lvc/ops.hpp"
#include "lvc/rng.hpp"

namespace {

using namespace lvc;  // NOLINT(build/namespaces)

Tensor<float> tf(Shape s, std::vector<float> v) {
  return Tensor<float>(s, std::move(v));
}

TEST_SUITE("ops_examples") {

TEST_CASE("conv2d 1x1: [[5]] * [[2]] = [[10]]") {
  Graph<float> g;
  auto x = g.constant(tf(Shape{1, 1, 1, 1}, {5.0f}));
  auto w = g.constant(tf(Shape{1, 1, 1, 1}, {2.0f}));
  auto b = g.constant(tf(Shape{1, 1, 1, 1}, {0.0f}));
  CHECK_EQ(ops::conv2d(x, w, b, 1, 0).val()[0], 10.0f);
}

TEST_CASE("conv2d with a centered identity kernel is the exact identity") {
  Rng rng(3);
  Tensor<float> xin = Tensor<float>::uniform(Shape{1, 1, 3, 3}, rng,
                                             -1.0f, 1.0f);
  Tensor<float> wid(Shape{1, 1, 3, 3});
  wid.at(0, 0, 1, 1) = 1.0f;
  Graph<float> g;
  auto y = ops::conv2d(g.constant(xin), g.constant(wid),
                       g.constant(Tensor<float>(Shape{1, 1, 1, 1})), 1, 1);
  for (i64 i = 0; i < xin.numel(); ++i) CHECK_EQ(y.val()[i], xin[i]);
}

TEST_CASE("conv2d output geometry and shape errors") {
  Graph<float> g;
  auto x = g.constant(Tensor<float>(Shape{1, 3, 11, 7}, 0.5f));
  auto w = g.constant(Tensor<float>(Shape{4, 3, 3, 3}, 0.1f));
  auto b = g.constant(Tensor<float>(Shape{1, 4, 1, 1}));
  CHECK_EQ(ops::conv2d(x, w, b, 1, 1).shape(), (Shape{1, 4, 11, 7}));
  CHECK_EQ(ops::conv2d(x, w, b, 2, 1).shape(), (Shape{1, 4, 6, 4}));
  auto wbad = g.constant(Tensor<float>(Shape{4, 2, 3, 3}, 0.1f));
  CHECK_THROWS_AS(ops::conv2d(x, wbad, b, 1, 1), Error);
}

TEST_CASE("deconv2d k2 s2 with an all-ones kernel replicates 2x2 blocks") {
  Graph<float> g;
  auto x = g.constant(tf(Shape{1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}));
  auto w = g.constant(Tensor<float>(Shape{1, 1, 2, 2}, 1.0f));
  auto b = g.constant(Tensor<float>(Shape{1, 1, 1, 1}));
  auto y = ops::deconv2d(x, w, b, 2, 0, 0);
  REQUIRE_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const float want[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (i64 i = 0; i < 16; ++i) CHECK_EQ(y.val()[i], want[i]);
}

TEST_CASE("stride-2 conv then stride-2 deconv restores spatial dims") {
  Graph<float> g;
  auto x = g.constant(Tensor<float>(Shape{1, 2, 16, 16}, 0.25f));
  auto wd = g.constant(Tensor<float>(Shape{3, 2, 3, 3}, 0.1f));
  auto bd = g.constant(Tensor<float>(Shape{1, 3, 1, 1}));
  auto down = ops::conv2d(x, wd, bd, 2, 1);
  REQUIRE_EQ(down.shape(), (Shape{1, 3, 8, 8}));
  auto wu = g.constant(Tensor<float>(Shape{3, 2, 3, 3}, 0.1f));
  auto bu = g.constant(Tensor<float>(Shape{1, 2, 1, 1}));
  auto up = ops::deconv2d(down, wu, bu, 2, 1, 1);
  CHECK_EQ(up.shape(), (Shape{1, 2, 16, 16}));
}

TEST_CASE("zero-flow warp is a bitwise identity") {
  Rng rng(4);
  Tensor<float> xin = Tensor<float>::uniform(Shape{2, 3, 5, 7}, rng,
                                             -2.0f, 2.0f);
  Graph<float> g;
  auto y = ops::warp(g.constant(xin),
                     g.constant(Tensor<float>(Shape{2, 2, 5, 7})));
  for (i64 i = 0; i < xin.numel(); ++i) CHECK_EQ(y.val()[i], xin[i]);
}

TEST_CASE("warp dx=-1 with border clamp: [1,2,3,4] -> [1,1,2,3]") {
  Graph<float> g;
  auto x = g.constant(tf(Shape{1, 1, 1, 4}, {1, 2, 3, 4}));
  Tensor<float> flow(Shape{1, 2, 1, 4});
  for (i64 i = 0; i < 4; ++i) flow.at(0, 0, 0, i) = -1.0f;  // dx
  auto y = ops::warp(x, g.constant(flow));
  const float want[4] = {1, 1, 2, 3};
  for (i64 i = 0; i < 4; ++i) CHECK_EQ(y.val()[i], want[i]);
}

TEST_CASE("warp dx=-0.5 averages horizontal neighbors in the interior") {
  Graph<float> g;
  auto x = g.constant(tf(Shape{1, 1, 1, 4}, {1, 2, 3, 4}));
  Tensor<float> flow(Shape{1, 2, 1, 4});
  for (i64 i = 0; i < 4; ++i) flow.at(0, 0, 0, i) = -0.5f;
  auto y = ops::warp(x, g.constant(flow));
  CHECK_EQ(y.val()[1], doctest::Approx(1.5f).epsilon(1e-6));
  CHECK_EQ(y.val()[2], doctest::Approx(2.5f).epsilon(1e-6));
  CHECK_EQ(y.val()[3], doctest::Approx(3.5f).epsilon(1e-6));
}

TEST_CASE("warp rejects flows without exactly two channels") {
  Graph<float> g;
  auto x = g.constant(Tensor<float>(Shape{1, 3, 4, 4}, 0.5f));
  auto bad = g.constant(Tensor<float>(Shape{1, 3, 4, 4}));
  CHECK_THROWS_AS(ops::warp(x, bad), Error);
}

TEST_CASE("elementwise basics: x+0, sigmoid(0), shape mismatch") {
  Rng rng(5);
  Tensor<float> xin = Tensor<float>::uniform(Shape{1, 2, 3, 3}, rng,
                                             -1.0f, 1.0f);
  Graph<float> g;
  auto x = g.constant(xin);
  auto y = ops::add(x, g.constant(Tensor<float>(Shape{1, 2, 3, 3})));
  for (i64 i = 0; i < xin.numel(); ++i) CHECK_EQ(y.val()[i], xin[i]);

  auto s = ops::sigmoid(g.constant(Tensor<float>(Shape{1, 1, 1, 1})));
  CHECK_EQ(s.val()[0], 0.5f);

  auto other = g.constant(Tensor<float>(Shape{1, 2, 3, 4}));
  CHECK_THROWS_AS(ops::add(x, other), Error);
}

TEST_CASE("concat_c of 64+128+3 channel maps yields 195 channels") {
  Graph<float> g;
  auto a = g.constant(Tensor<float>(Shape{1, 64, 4, 4}, 1.0f));
  auto b = g.constant(Tensor<float>(Shape{1, 128, 4, 4}, 2.0f));
  auto c = g.constant(Tensor<float>(Shape{1, 3, 4, 4}, 3.0f));
  auto cat = ops::concat_c<float>({a, b, c});
  REQUIRE_EQ(cat.shape(), (Shape{1, 195, 4, 4}));
  CHECK_EQ(cat.val().at(0, 0, 0, 0), 1.0f);
  CHECK_EQ(cat.val().at(0, 64, 0, 0), 2.0f);
  CHECK_EQ(cat.val().at(0, 192, 0, 0), 3.0f);
}

TEST_CASE("rounding: half away from zero, integers fixed") {
  Graph<float> g;
  auto x = g.constant(tf(Shape{1, 1, 1, 6},
                         {2.4f, -2.5f, 2.5f, -2.4f, 7.0f, 0.0f}));
  auto q = entropy::quantize(x, entropy::QuantMode::kRound, nullptr);
  const float want[6] = {2.0f, -3.0f, 3.0f, -2.0f, 7.0f, 0.0f};
  for (i64 i = 0; i < 6; ++i) CHECK_EQ(q.val()[i], want[i]);
}

TEST_CASE("noise-mode quantization stays within +-0.5 over 10^4 draws") {
  Rng data_rng(6), noise_rng(7);
  Tensor<float> xin = Tensor<float>::uniform(Shape{1, 1, 100, 100}, data_rng,
                                             -8.0f, 8.0f);
  Graph<float> g;
  auto q = entropy::quantize(g.constant(xin), entropy::QuantMode::kNoise,
                             &noise_rng);
  double worst = 0.0;
  for (i64 i = 0; i < xin.numel(); ++i) {
    worst = std::max(worst, std::fabs(double(q.val()[i]) - double(xin[i])));
  }
  CHECK_LT(worst, 0.5);
}

TEST_CASE("gaussian interval likelihood matches the erf oracle") {
  // p(0 | mu=0, sigma=1) = Phi(0.5) - Phi(-0.5) = erf(0.5/sqrt(2)).
  const double oracle = std::erf(0.5 / std::sqrt(2.0));
  CHECK_EQ(oracle, doctest::Approx(0.382925).epsilon(1e-5));
  CHECK_EQ(entropy::gaussian_interval_prob(0.0, 0.0, 1.0),
           doctest::Approx(oracle).epsilon(1e-12));

  Graph<float> g;
  auto v = g.constant(Tensor<float>(Shape{1, 1, 1, 1}));
  auto mu = g.constant(Tensor<float>(Shape{1, 1, 1, 1}));
  auto sg = g.constant(Tensor<float>(Shape{1, 1, 1, 1}, 1.0f));
  auto p = entropy::gaussian_likelihood(v, mu, sg);
  CHECK_EQ(double(p.val()[0]), doctest::Approx(oracle).epsilon(1e-6));
  auto rate = entropy::rate_bits(p);
  CHECK_EQ(double(rate.val()[0]), doctest::Approx(1.3849).epsilon(1e-4));

  // Off-center oracle: p(2 | mu=0.3, sigma=1.7).
  const double a = (2.5 - 0.3) / 1.7, b = (1.5 - 0.3) / 1.7;
  const double want = 0.5 * (std::erf(a / std::sqrt(2.0)) -
                             std::erf(b / std::sqrt(2.0)));
  CHECK_EQ(entropy::gaussian_interval_prob(2.0, 0.3, 1.7),
           doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("peaked gaussian: mu = s, sigma at the floor gives ~free symbols") {
  const double p = entropy::gaussian_interval_prob(3.0, 3.0, entropy::kSigmaMin);
  CHECK_GT(p, 1.0 - 1e-12);
  Graph<float> g;
  auto v = g.constant(Tensor<float>(Shape{1, 1, 2, 2}, 3.0f));
  auto mu = g.constant(Tensor<float>(Shape{1, 1, 2, 2}, 3.0f));
  auto sg = g.constant(Tensor<float>(Shape{1, 1, 2, 2},
                                     float(entropy::kSigmaMin)));
  auto rate = entropy::rate_bits(entropy::gaussian_likelihood(v, mu, sg));
  CHECK_LT(double(rate.val()[0]), 1e-6);
}

TEST_CASE("interval probabilities telescope to one over a wide window") {
  for (const auto& [mu, sigma] : std::vector<std::pair<double, double>>{
           {0.0, 1.0}, {0.3, 2.5}, {-7.25, 0.3}, {40.0, 13.0}}) {
    double sum = 0.0;
    for (int s = -1000; s <= 1000; ++s) {
      sum += entropy::gaussian_interval_prob_raw(double(s), mu, sigma);
    }
    CHECK_GE(sum, 1.0 - 1e-6);
    CHECK_LE(sum, 1.0 + 1e-9);
  }
}

TEST_CASE("widening sigma never increases the central probability") {
  double prev = 1.0;
  for (double sigma = 0.05; sigma < 30.0; sigma *= 1.3) {
    const double p = entropy::gaussian_interval_prob_raw(1.0, 1.2, sigma);
    // Central symbol (s = round(mu)): probability decays as sigma widens
    // once sigma covers the interval.
    if (sigma > 0.5) CHECK_LE(p, prev + 1e-15);
    prev = p;
  }
}

TEST_CASE("pad_replicate edges and avg_pool2 floor semantics") {
  Graph<float> g;
  auto x = g.constant(tf(Shape{1, 1, 2, 2}, {1, 2, 3, 4}));
  auto p = ops::pad_replicate(x, 1, 1, 0, 0);  // left, top
  REQUIRE_EQ(p.shape(), (Shape{1, 1, 3, 3}));
  CHECK_EQ(p.val().at(0, 0, 0, 0), 1.0f);  // corner replicated
  CHECK_EQ(p.val().at(0, 0, 2, 1), 3.0f);

  auto odd = g.constant(tf(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  auto pooled = ops::avg_pool2(odd);
  REQUIRE_EQ(pooled.shape(), (Shape{1, 1, 1, 1}));
  CHECK_EQ(pooled.val()[0], 3.0f);  // mean of the top-left 2x2 block
}

}  // TEST_SUITE

}  // namespace
