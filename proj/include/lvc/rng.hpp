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

#ifndef LVC_RNG_HPP_
#define LVC_RNG_HPP_

#include <cstdint>

#include "lvc/common.hpp"

namespace lvc {

// PCG32 (pcg_setseq_64_xsh_rr_32). Self-contained so that seeds mean the
// same thing on every platform and the full generator state can be stored
// in training checkpoints.
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bull, 0xda3e39cb94b95bdbull) {}
  Rng(u64 seed, u64 seq = 0) { reseed(seed, seq); }

  void reseed(u64 seed, u64 seq = 0) {
    state_ = 0;
    inc_ = (seq << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  u32 next_u32() {
    const u64 old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    const u32 xorshifted = u32(((old >> 18u) ^ old) >> 27u);
    const u32 rot = u32(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // Uniform in [0, bound).
  u32 next_below(u32 bound) {
    // Debiased via rejection on the threshold remainder.
    const u32 threshold = u32(-bound) % bound;
    for (;;) {
      const u32 r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1) with 24 bits of mantissa.
  float uniform() { return float(next_u32() >> 8) * 0x1p-24f; }

  // Uniform in [lo, hi).
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform_f64() {
    const u64 a = next_u32();
    const u64 b = next_u32();
    return double((a << 21) | (b >> 11)) * 0x1p-53;
  }

  // A child generator with an independent stream, for per-item derivation.
  Rng fork(u64 key) const {
    return Rng(state_ ^ (key * 0x9e3779b97f4a7c15ull), inc_ ^ key);
  }

  // Checkpoint support.
  u64 state() const { return state_; }
  u64 inc() const { return inc_; }
  void restore(u64 state, u64 inc) {
    state_ = state;
    inc_ = inc;
  }

 private:
  u64 state_;
  u64 inc_;
};

}  // namespace lvc

#endif  // LVC_RNG_HPP_
