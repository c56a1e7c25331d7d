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
// The SIMD kernel variants must be bitwise-identical to the scalar
// references: encoder and decoder may run on different machines, so any
// divergence is a codec drift bug, not a numerics nit. Shapes below are
// chosen to hit every vector-width tail (widths straddling multiples of 8).

#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "lvc/kernels.hpp"
#include "lvc/rng.hpp"

namespace {

using namespace lvc;  // NOLINT(build/namespaces)

std::vector<float> rand_vec(i64 n, Rng& rng, float lo, float hi) {
  std::vector<float> v(size_t(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

TEST_SUITE("kernels") {

TEST_CASE("kernel registry exposes the scalar reference") {
  auto names = kern::available_kernel_names();
  REQUIRE_FALSE(names.empty());
  CHECK_EQ(names[0], "scalar");
  CHECK_EQ(std::string(kern::kScalarKernels.name), "scalar");
  CHECK_THROWS_AS(kern::select_kernels("no-such-backend"), Error);
}

TEST_CASE("SIMD conv2d forward is bitwise equal to the scalar reference") {
  const kern::Kernels* simd = kern::avx2_kernels();
  if (simd == nullptr) {
    MESSAGE("no SIMD backend on this machine; scalar-only build");
    return;
  }
  Rng rng(0xC0DE);
  // (n, ci, hi, wi, co, k, stride, pad) — output widths sweep 1..19 to
  // cover full 8-lane blocks plus every tail length.
  const i64 specs[][8] = {
      {1, 1, 1, 1, 1, 1, 1, 0},   {1, 3, 9, 9, 4, 3, 1, 1},
      {2, 4, 8, 8, 8, 3, 1, 1},   {1, 2, 7, 17, 5, 3, 2, 1},
      {1, 8, 6, 19, 4, 5, 1, 2},  {1, 5, 5, 16, 6, 1, 1, 0},
      {1, 2, 12, 15, 3, 3, 2, 1}, {2, 3, 4, 11, 2, 3, 1, 1},
      {1, 6, 10, 24, 7, 3, 1, 1}, {1, 1, 3, 33, 2, 5, 2, 2},
  };
  for (const auto& p : specs) {
    const kern::ConvShape s = kern::make_conv_shape(p[0], p[1], p[2], p[3],
                                                    p[4], p[5], p[6], p[7]);
    auto in = rand_vec(s.n * s.ci * s.hi * s.wi, rng, -1.5f, 1.5f);
    auto w = rand_vec(s.co * s.ci * s.k * s.k, rng, -0.7f, 0.7f);
    auto b = rand_vec(s.co, rng, -0.3f, 0.3f);
    std::vector<float> ref(size_t(s.n * s.co * s.ho * s.wo));
    std::vector<float> got(ref.size(), -42.0f);
    kern::kScalarKernels.conv2d_fwd(in.data(), w.data(), b.data(), ref.data(),
                                    s);
    simd->conv2d_fwd(in.data(), w.data(), b.data(), got.data(), s);
    INFO("conv ", s.hi, "x", s.wi, " k", s.k, " s", s.stride, " wo=", s.wo);
    CHECK(bitwise_equal(ref, got));
  }
}

TEST_CASE("SIMD conv2d weight gradient is bitwise equal to the reference") {
  const kern::Kernels* simd = kern::avx2_kernels();
  if (simd == nullptr) return;
  Rng rng(0xBEEF);
  const i64 specs[][8] = {
      {1, 2, 5, 5, 3, 3, 1, 1},  {2, 3, 8, 9, 4, 3, 2, 1},
      {1, 4, 6, 17, 2, 3, 1, 1}, {1, 1, 7, 23, 5, 5, 1, 2},
      {1, 6, 4, 16, 3, 1, 1, 0}, {2, 2, 9, 13, 2, 3, 2, 1},
  };
  for (const auto& p : specs) {
    const kern::ConvShape s = kern::make_conv_shape(p[0], p[1], p[2], p[3],
                                                    p[4], p[5], p[6], p[7]);
    auto in = rand_vec(s.n * s.ci * s.hi * s.wi, rng, -1.0f, 1.0f);
    auto gout = rand_vec(s.n * s.co * s.ho * s.wo, rng, -1.0f, 1.0f);
    std::vector<float> ref(size_t(s.co * s.ci * s.k * s.k));
    std::vector<float> got(ref.size(), -42.0f);
    kern::kScalarKernels.conv2d_wgrad(in.data(), gout.data(), ref.data(), s);
    simd->conv2d_wgrad(in.data(), gout.data(), got.data(), s);
    INFO("wgrad ", s.hi, "x", s.wi, " k", s.k, " s", s.stride, " wo=", s.wo);
    CHECK(bitwise_equal(ref, got));
  }
}

TEST_CASE("SIMD elementwise kernels are bitwise equal to the references") {
  const kern::Kernels* simd = kern::avx2_kernels();
  if (simd == nullptr) return;
  Rng rng(0xF00D);
  for (i64 n : {i64(1), i64(7), i64(8), i64(9), i64(63), i64(64), i64(65),
                i64(1000)}) {
    auto a = rand_vec(n, rng, -2.0f, 2.0f);
    auto b = rand_vec(n, rng, -2.0f, 2.0f);
    std::vector<float> ref(size_t(n)), got(size_t(n));

    kern::kScalarKernels.add(a.data(), b.data(), ref.data(), n);
    simd->add(a.data(), b.data(), got.data(), n);
    CHECK(bitwise_equal(ref, got));

    kern::kScalarKernels.sub(a.data(), b.data(), ref.data(), n);
    simd->sub(a.data(), b.data(), got.data(), n);
    CHECK(bitwise_equal(ref, got));

    kern::kScalarKernels.mul(a.data(), b.data(), ref.data(), n);
    simd->mul(a.data(), b.data(), got.data(), n);
    CHECK(bitwise_equal(ref, got));

    kern::kScalarKernels.leaky_fwd(a.data(), ref.data(), n, 0.01f);
    simd->leaky_fwd(a.data(), got.data(), n, 0.01f);
    CHECK(bitwise_equal(ref, got));

    kern::kScalarKernels.leaky_bwd(a.data(), b.data(), ref.data(), n, 0.01f);
    simd->leaky_bwd(a.data(), b.data(), got.data(), n, 0.01f);
    CHECK(bitwise_equal(ref, got));
  }
}

TEST_CASE("backend selection swaps the active kernel set and back") {
  const std::string before = kern::active_kernels().name;
  kern::select_kernels("scalar");
  CHECK_EQ(std::string(kern::active_kernels().name), "scalar");
  kern::select_kernels(before);
  CHECK_EQ(std::string(kern::active_kernels().name), before);
}

TEST_CASE("reduce8 matches plain summation for the shapes the codec uses") {
  // The tree reduction reorders additions; the reference kernels use it on
  // both scalar and SIMD paths, so here it only needs to be internally
  // consistent and exact on exactly-representable data.
  double st[8] = {1, 2, 3, 4, 5, 6, 7, 8};
  CHECK_EQ(kern::reduce8(st), 36.0);
  float sf[8] = {0.5f, -0.25f, 1.0f, 2.0f, -0.5f, 0.25f, 4.0f, -2.0f};
  CHECK_EQ(kern::reduce8(sf), 5.0f);
}

}  // TEST_SUITE

}  // namespace
