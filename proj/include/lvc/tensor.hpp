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

#ifndef LVC_TENSOR_HPP_
#define LVC_TENSOR_HPP_

#include <cstring>
#include <vector>

#include "lvc/common.hpp"
#include "lvc/rng.hpp"

namespace lvc {

// Dense NCHW tensor. float is the production dtype; double instantiations
// back the finite-difference gradient checks.
template <typename T>
class Tensor {
 public:
  Tensor() : shape_{0, 0, 0, 0} {}
  explicit Tensor(Shape s) : shape_(s), v_(size_t(s.numel()), T(0)) {}
  Tensor(Shape s, T fill) : shape_(s), v_(size_t(s.numel()), fill) {}
  Tensor(Shape s, std::vector<T> data) : shape_(s), v_(std::move(data)) {
    LVC_CHECK(i64(v_.size()) == shape_.numel(), "shape ", shape_.str(),
              " expects ", shape_.numel(), " values, got ", v_.size());
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, T value) { return Tensor(s, value); }
  static Tensor uniform(Shape s, Rng& rng, T lo, T hi) {
    Tensor t(s);
    for (auto& x : t.v_) x = T(lo + (hi - lo) * T(rng.uniform_f64()));
    return t;
  }

  const Shape& shape() const { return shape_; }
  i64 numel() const { return shape_.numel(); }
  bool empty() const { return v_.empty(); }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }

  T& operator[](i64 i) { return v_[size_t(i)]; }
  const T& operator[](i64 i) const { return v_[size_t(i)]; }

  i64 index(i64 n, i64 c, i64 y, i64 x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(i64 n, i64 c, i64 y, i64 x) { return v_[size_t(index(n, c, y, x))]; }
  const T& at(i64 n, i64 c, i64 y, i64 x) const {
    return v_[size_t(index(n, c, y, x))];
  }

  void fill(T value) {
    for (auto& x : v_) x = value;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (i64 i = 0; i < numel(); ++i) out[i] = U(v_[size_t(i)]);
    return out;
  }

  bool bitwise_equal(const Tensor& o) const {
    if (shape_ != o.shape_) return false;
    for (i64 i = 0; i < numel(); ++i) {
      // Compare representations, not values: distinguishes -0 from +0 and
      // treats identical NaN payloads as equal.
      if (std::memcmp(&v_[size_t(i)], &o.v_[size_t(i)], sizeof(T)) != 0) {
        return false;
      }
    }
    return true;
  }

 private:
  Shape shape_;
  std::vector<T> v_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace lvc

#endif  // LVC_TENSOR_HPP_
