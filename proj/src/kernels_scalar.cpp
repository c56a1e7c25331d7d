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

#include "lvc/kernels.hpp"

namespace lvc::kern {

namespace {

void conv2d_fwd_scalar(const float* in, const float* w, const float* bias,
                       float* out, const ConvShape& s) {
  conv2d_fwd_ref<float>(in, w, bias, out, s);
}

void conv2d_wgrad_scalar(const float* in, const float* gout, float* wgrad,
                         const ConvShape& s) {
  conv2d_wgrad_ref<float>(in, gout, wgrad, s);
}

void add_scalar(const float* a, const float* b, float* out, i64 n) {
  add_ref<float>(a, b, out, n);
}
void sub_scalar(const float* a, const float* b, float* out, i64 n) {
  sub_ref<float>(a, b, out, n);
}
void mul_scalar(const float* a, const float* b, float* out, i64 n) {
  mul_ref<float>(a, b, out, n);
}
void leaky_fwd_scalar(const float* x, float* out, i64 n, float slope) {
  leaky_fwd_ref<float>(x, out, n, slope);
}
void leaky_bwd_scalar(const float* x, const float* g, float* gx, i64 n,
                      float slope) {
  leaky_bwd_ref<float>(x, g, gx, n, slope);
}

}  // namespace

const Kernels kScalarKernels = {
    "scalar",          conv2d_fwd_scalar, conv2d_wgrad_scalar,
    add_scalar,        sub_scalar,        mul_scalar,
    leaky_fwd_scalar,  leaky_bwd_scalar,
};

}  // namespace lvc::kern
