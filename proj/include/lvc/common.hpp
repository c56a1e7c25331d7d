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

#ifndef LVC_COMMON_HPP_
#define LVC_COMMON_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lvc {

using u8 = uint8_t;
using u16 = uint16_t;
using u32 = uint32_t;
using u64 = uint64_t;
using i32 = int32_t;
using i64 = int64_t;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
std::string strcat_args(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw Error(strcat_args(std::forward<Args>(args)...));
}

#define LVC_CHECK(cond, ...)                                            \
  do {                                                                  \
    if (!(cond)) ::lvc::fail("check failed: ", #cond, ": ", __VA_ARGS__); \
  } while (0)

// All activations and parameters are 4-D. Activations are (batch, channel,
// height, width); conv kernels are (out_ch, in_ch, kh, kw); deconv kernels
// are (in_ch, out_ch, kh, kw); scalars are (1,1,1,1).
struct Shape {
  i64 n = 1, c = 1, h = 1, w = 1;

  i64 numel() const { return n * c * h * w; }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    return strcat_args("(", n, ",", c, ",", h, ",", w, ")");
  }
};

// FNV-1a, used for weight-set fingerprints embedded in bitstream headers.
inline u64 fnv1a64(const u8* data, size_t len, u64 h = 1469598103934665603ull) {
  for (size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

// Little-endian byte helpers for the file formats.
inline void put_u32le(std::vector<u8>& out, u32 v) {
  out.push_back(u8(v));
  out.push_back(u8(v >> 8));
  out.push_back(u8(v >> 16));
  out.push_back(u8(v >> 24));
}
inline void put_u64le(std::vector<u8>& out, u64 v) {
  put_u32le(out, u32(v));
  put_u32le(out, u32(v >> 32));
}
inline u32 get_u32le(const u8* p) {
  return u32(p[0]) | (u32(p[1]) << 8) | (u32(p[2]) << 16) | (u32(p[3]) << 24);
}
inline u64 get_u64le(const u8* p) {
  return u64(get_u32le(p)) | (u64(get_u32le(p + 4)) << 32);
}

}  // namespace lvc

#endif  // LVC_COMMON_HPP_
