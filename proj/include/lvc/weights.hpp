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
// Model parameter schema and the RPLW weights file format. The schema is a
// closed set: loading validates that a file carries exactly the expected
// entry names and shapes, nothing more, nothing less.

#ifndef LVC_WEIGHTS_HPP_
#define LVC_WEIGHTS_HPP_

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lvc/rng.hpp"
#include "lvc/tensor.hpp"

namespace lvc {

// The rate-distortion operating points. Index into this table is what the
// CLI exposes and what bitstreams carry.
inline constexpr std::array<float, 5> kLambdaTable = {512.0f, 1024.0f,
                                                      2048.0f, 4096.0f,
                                                      6144.0f};
inline constexpr int kNumLambdas = int(kLambdaTable.size());

template <typename T>
using WeightsMap = std::map<std::string, Tensor<T>>;

struct WeightSpec {
  enum Kind { kConv, kDeconv, kBias, kLogits };
  std::string name;
  Shape shape;
  Kind kind;
};

// Full parameter inventory of the model, in a fixed order.
const std::vector<WeightSpec>& model_schema();

struct ModelWeights {
  int lambda_index = 0;
  WeightsMap<float> w;
};

// Deterministic initialization: uniform +-sqrt(6/fan_in) for conv/deconv
// kernels, zeros for biases and prior logits.
ModelWeights init_weights(u64 seed, int lambda_index);

// Schema check: exact name set, shapes, finite values, valid lambda index.
// Throws with the offending entry.
void validate_weights(const ModelWeights& mw);

// RPLW container.
// Raw tensor-map container (magic RPLW): a name-ordered map of f32 tensors
// plus one u32 of caller-defined auxiliary data. No schema is imposed; the
// weight wrappers below store lambda_index in the aux slot and validate.
std::vector<u8> serialize_tensor_map(const WeightsMap<float>& w, u32 aux);
WeightsMap<float> deserialize_tensor_map(const std::vector<u8>& bytes,
                                         u32* aux);

std::vector<u8> serialize_weights(const ModelWeights& mw);
ModelWeights deserialize_weights(const std::vector<u8>& bytes);
void save_weights(const std::string& path, const ModelWeights& mw);
ModelWeights load_weights(const std::string& path);

// FNV-1a over the canonical serialization; embedded in bitstream headers so
// decode can detect mismatched weights.
u64 weights_fingerprint(const ModelWeights& mw);

template <typename T>
WeightsMap<T> cast_weights(const WeightsMap<float>& w) {
  WeightsMap<T> out;
  for (const auto& [k, v] : w) out.emplace(k, v.template cast<T>());
  return out;
}

}  // namespace lvc

#endif  // LVC_WEIGHTS_HPP_
