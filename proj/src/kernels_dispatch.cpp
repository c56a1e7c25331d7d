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

#include <cstdlib>

#include "lvc/kernels.hpp"

namespace lvc::kern {

namespace {

const Kernels* g_selected = nullptr;

const Kernels* default_kernels() {
  if (const char* env = std::getenv("LVC_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &kScalarKernels;
    if (want == "avx2") {
      const Kernels* k = avx2_kernels();
      LVC_CHECK(k != nullptr, "LVC_KERNELS=avx2 but AVX2 is unavailable");
      return k;
    }
    fail("unknown LVC_KERNELS value: ", want);
  }
  if (const Kernels* k = avx2_kernels()) return k;
  return &kScalarKernels;
}

}  // namespace

const Kernels& active_kernels() {
  if (g_selected == nullptr) g_selected = default_kernels();
  return *g_selected;
}

void select_kernels(const std::string& name) {
  if (name == "scalar") {
    g_selected = &kScalarKernels;
    return;
  }
  if (name == "avx2") {
    const Kernels* k = avx2_kernels();
    LVC_CHECK(k != nullptr, "AVX2 kernels unavailable on this CPU/build");
    g_selected = k;
    return;
  }
  fail("unknown kernel lane: ", name);
}

std::vector<std::string> available_kernel_names() {
  std::vector<std::string> names = {"scalar"};
  if (avx2_kernels() != nullptr) names.push_back("avx2");
  return names;
}

}  // namespace lvc::kern
