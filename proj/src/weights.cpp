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

#include "lvc/weights.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "lvc/codecnets.hpp"
#include "lvc/layers.hpp"

namespace lvc {
namespace {

void conv_spec(const std::string& name, i64 co, i64 ci, i64 k,
               std::vector<WeightSpec>& out) {
  out.push_back({name + ".w", Shape{co, ci, k, k}, WeightSpec::kConv});
  out.push_back({name + ".b", Shape{1, co, 1, 1}, WeightSpec::kBias});
}

void deconv_spec(const std::string& name, i64 ci, i64 co, i64 k,
                 std::vector<WeightSpec>& out) {
  out.push_back({name + ".w", Shape{ci, co, k, k}, WeightSpec::kDeconv});
  out.push_back({name + ".b", Shape{1, co, 1, 1}, WeightSpec::kBias});
}

void hyper_schema(const std::string& stem, std::vector<WeightSpec>& out) {
  using namespace nets;
  conv_spec(stem + ".henc.c0", kHyperChannels, kLatentChannels, 3, out);
  conv_spec(stem + ".henc.c1", kHyperChannels, kHyperChannels, 3, out);
  conv_spec(stem + ".henc.c2", kHyperChannels, kHyperChannels, 3, out);
  deconv_spec(stem + ".hdec.d0", kHyperChannels, kHyperChannels, 3, out);
  deconv_spec(stem + ".hdec.d1", kHyperChannels, kLatentChannels, 3, out);
  conv_spec(stem + ".hdec.c2", 2 * kLatentChannels, kLatentChannels, 3, out);
  out.push_back({stem + ".prior.logits",
                 Shape{1, kHyperChannels, 1, nets::kPriorBins},
                 WeightSpec::kLogits});
}

}  // namespace

namespace nets {

void backbone_schema(const std::string& prefix, const BackboneSpec& spec,
                     std::vector<WeightSpec>& out) {
  conv_spec(prefix + ".head", spec.mid, spec.in, 3, out);
  for (int r = 0; r < 3; ++r) {
    const std::string rp = prefix + ".res" + std::to_string(r);
    conv_spec(rp + ".c0", spec.mid, spec.mid, 3, out);
    conv_spec(rp + ".c1", spec.mid, spec.mid, 3, out);
  }
  conv_spec(prefix + ".attn.t.c0", spec.mid, spec.mid, 3, out);
  conv_spec(prefix + ".attn.t.c1", spec.mid, spec.mid, 3, out);
  conv_spec(prefix + ".attn.g", spec.mid, spec.mid, 1, out);
  deconv_spec(prefix + ".tail", spec.mid, spec.out, 3, out);
}

}  // namespace nets

namespace {

std::vector<WeightSpec> build_schema() {
  using namespace nets;
  std::vector<WeightSpec> out;

  // Motion estimation pyramid: one conv stack per level over
  // (current 3 + warped reference 3 + flow 2) channels.
  for (i64 l = 0; l < kMeLevels; ++l) {
    const std::string p = "me.lvl" + std::to_string(l);
    conv_spec(p + ".c0", 16, 8, 3, out);
    conv_spec(p + ".c1", 32, 16, 3, out);
    conv_spec(p + ".c2", 16, 32, 3, out);
    conv_spec(p + ".c3", 2, 16, 3, out);
  }

  backbone_schema("mvp.bb", BackboneSpec{kMvpIn, kMvpMid, kMvpOut}, out);

  conv_spec("mc.fx", kRefFeat, 3, 3, out);
  backbone_schema("mc.bb", BackboneSpec{kMcIn, kMcMid, kMcOut}, out);
  conv_spec("mc.hf", 3, kMcOut, 3, out);

  conv_spec("rp.hr", kRefFeat, 3, 3, out);
  backbone_schema("rp.bb", BackboneSpec{kRpIn, kRpMid, kRpOut}, out);

  backbone_schema("lf.bb", BackboneSpec{kLfIn, kLfMid, kLfOut}, out);

  // Motion codec: analysis 2 -> 96 with four stride-2 stages, synthesis
  // mirrors back to 2 channels.
  conv_spec("mv.enc.c0", kLatentChannels, 2, 3, out);
  conv_spec("mv.enc.c1", kLatentChannels, kLatentChannels, 3, out);
  conv_spec("mv.enc.c2", kLatentChannels, kLatentChannels, 3, out);
  conv_spec("mv.enc.c3", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("mv.dec.d0", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("mv.dec.d1", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("mv.dec.d2", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("mv.dec.d3", kLatentChannels, 2, 3, out);
  hyper_schema("mv", out);

  // Residual codec: analysis 3 -> 96, synthesis up to the 128-channel
  // feature plane plus a pixel head.
  conv_spec("res.enc.c0", kLatentChannels, 3, 3, out);
  conv_spec("res.enc.c1", kLatentChannels, kLatentChannels, 3, out);
  conv_spec("res.enc.c2", kLatentChannels, kLatentChannels, 3, out);
  conv_spec("res.enc.c3", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("res.dec.d0", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("res.dec.d1", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("res.dec.d2", kLatentChannels, kLatentChannels, 3, out);
  deconv_spec("res.dec.d3", kLatentChannels, kFresChannels, 3, out);
  conv_spec("res.tail", 3, kFresChannels, 3, out);
  hyper_schema("res", out);

  return out;
}

}  // namespace

const std::vector<WeightSpec>& model_schema() {
  static const std::vector<WeightSpec> schema = build_schema();
  return schema;
}

ModelWeights init_weights(u64 seed, int lambda_index) {
  LVC_CHECK(lambda_index >= 0 && lambda_index < int(kLambdaTable.size()),
            "lambda_index out of range: ", lambda_index);
  ModelWeights mw;
  mw.lambda_index = lambda_index;
  Rng rng(seed);
  for (const WeightSpec& spec : model_schema()) {
    Tensor<float> t(spec.shape);
    switch (spec.kind) {
      case WeightSpec::kConv:
      case WeightSpec::kDeconv: {
        // Fan-in counts input channels x kernel area. For transposed
        // convolution the input-channel axis is dim 0; either way the
        // product c*h*w of a conv shape and n*h*w of a deconv shape is the
        // same expression on these schemas, so read it off the shape kind.
        const i64 fan_in = (spec.kind == WeightSpec::kConv)
                               ? spec.shape.c * spec.shape.h * spec.shape.w
                               : spec.shape.n * spec.shape.h * spec.shape.w;
        const float bound = std::sqrt(6.0f / float(fan_in));
        t = Tensor<float>::uniform(spec.shape, rng, -bound, bound);
        break;
      }
      case WeightSpec::kBias:
      case WeightSpec::kLogits:
        // Zero biases and flat prior logits; the zero-weight network is
        // then an exact identity in every residual path.
        break;
    }
    mw.w.emplace(spec.name, std::move(t));
  }
  return mw;
}

void validate_weights(const ModelWeights& mw) {
  LVC_CHECK(mw.lambda_index >= 0 &&
                mw.lambda_index < int(kLambdaTable.size()),
            "lambda_index out of range: ", mw.lambda_index);
  const std::vector<WeightSpec> schema = model_schema();
  LVC_CHECK(mw.w.size() == schema.size(), "weight count mismatch: have ",
            mw.w.size(), " want ", schema.size());
  for (const WeightSpec& spec : schema) {
    auto it = mw.w.find(spec.name);
    LVC_CHECK(it != mw.w.end(), "missing weight: ", spec.name);
    LVC_CHECK(it->second.shape() == spec.shape, "shape mismatch for ",
              spec.name, ": have ", it->second.shape().str(), " want ",
              spec.shape.str());
    for (i64 i = 0; i < spec.shape.numel(); ++i) {
      LVC_CHECK(std::isfinite(it->second.data()[i]),
                "non-finite value in weight: ", spec.name);
    }
  }
}

namespace {
constexpr char kMagic[4] = {'R', 'P', 'L', 'W'};
constexpr u32 kVersion = 1;
}  // namespace

std::vector<u8> serialize_tensor_map(const WeightsMap<float>& w, u32 aux) {
  std::vector<u8> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32le(out, kVersion);
  put_u32le(out, aux);
  put_u32le(out, u32(w.size()));
  // std::map iteration is name-ordered, so serialization is canonical.
  for (const auto& [name, tensor] : w) {
    LVC_CHECK(name.size() < 256, "weight name too long: ", name);
    put_u32le(out, u32(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32le(out, 4);
    const Shape s = tensor.shape();
    const i64 dims[4] = {s.n, s.c, s.h, s.w};
    for (i64 d : dims) put_u32le(out, u32(d));
    const size_t bytes = size_t(s.numel()) * sizeof(float);
    const size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, tensor.data(), bytes);
  }
  return out;
}

WeightsMap<float> deserialize_tensor_map(const std::vector<u8>& buf,
                                         u32* aux) {
  size_t pos = 0;
  auto need = [&](size_t n) {
    LVC_CHECK(pos + n <= buf.size(), "weights blob truncated at byte ", pos);
  };
  need(4);
  LVC_CHECK(std::memcmp(buf.data(), kMagic, 4) == 0,
            "bad weights magic (not an RPLW file)");
  pos = 4;
  auto rd_u32 = [&]() {
    need(4);
    u32 v = get_u32le(buf.data() + pos);
    pos += 4;
    return v;
  };
  const u32 version = rd_u32();
  LVC_CHECK(version == kVersion, "unsupported weights version: ", version);
  const u32 aux_val = rd_u32();
  if (aux != nullptr) *aux = aux_val;
  WeightsMap<float> w;
  const u32 count = rd_u32();
  for (u32 i = 0; i < count; ++i) {
    const u32 name_len = rd_u32();
    LVC_CHECK(name_len > 0 && name_len < 256, "bad weight name length");
    need(name_len);
    std::string name(reinterpret_cast<const char*>(buf.data() + pos),
                     name_len);
    pos += name_len;
    const u32 rank = rd_u32();
    LVC_CHECK(rank == 4, "unsupported weight rank: ", rank);
    i64 dims[4];
    for (i64& d : dims) {
      d = i64(rd_u32());
      LVC_CHECK(d >= 1 && d <= (i64(1) << 20), "bad weight dim: ", d);
    }
    Shape s{dims[0], dims[1], dims[2], dims[3]};
    Tensor<float> t(s);
    const size_t bytes = size_t(s.numel()) * sizeof(float);
    need(bytes);
    std::memcpy(t.data(), buf.data() + pos, bytes);
    pos += bytes;
    LVC_CHECK(w.emplace(name, std::move(t)).second,
              "duplicate weight: ", name);
  }
  LVC_CHECK(pos == buf.size(), "trailing bytes in weights blob");
  return w;
}

std::vector<u8> serialize_weights(const ModelWeights& mw) {
  return serialize_tensor_map(mw.w, u32(mw.lambda_index));
}

ModelWeights deserialize_weights(const std::vector<u8>& buf) {
  ModelWeights mw;
  u32 aux = 0;
  mw.w = deserialize_tensor_map(buf, &aux);
  mw.lambda_index = int(aux);
  validate_weights(mw);
  return mw;
}

void save_weights(const std::string& path, const ModelWeights& mw) {
  const std::vector<u8> blob = serialize_weights(mw);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    LVC_CHECK(f.good(), "cannot open for writing: ", tmp);
    f.write(reinterpret_cast<const char*>(blob.data()),
            std::streamsize(blob.size()));
    LVC_CHECK(f.good(), "short write: ", tmp);
  }
  LVC_CHECK(std::rename(tmp.c_str(), path.c_str()) == 0,
            "rename failed: ", path);
}

ModelWeights load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  LVC_CHECK(f.good(), "cannot open weights file: ", path);
  std::vector<u8> blob((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  return deserialize_weights(blob);
}

u64 weights_fingerprint(const ModelWeights& mw) {
  const std::vector<u8> blob = serialize_weights(mw);
  return fnv1a64(blob.data(), blob.size());
}

}  // namespace lvc
