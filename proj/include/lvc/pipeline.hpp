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
// Frame and sequence orchestration: the reference-buffer state machine,
// I-frame handling, the RPLV bitstream container, and the encode/decode
// entry points. Everything here is inference-side (32-bit, gradients off);
// the differentiable training forward lives in training.hpp.

#ifndef LVC_PIPELINE_HPP_
#define LVC_PIPELINE_HPP_

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lvc/codecnets.hpp"
#include "lvc/weights.hpp"

namespace lvc {

struct CodecConfig {
  int lambda_index = 2;
  i64 gop = 0;  // 0: single leading I-frame, everything else P
  // When false, the MVP/RP predicted signals are replaced by zero tensors
  // (still routed through the same encoders), which degrades latent
  // differences to unconditional coding. Signaled in the header so decode
  // mirrors it.
  bool predictions = true;
  std::string intra_codec = "stored8";
};

// ---------------------------------------------------------------------
// Pluggable intra codec. The default "stored8" mode stores raw 8-bit
// planes, so the P-frame machinery is testable without an external
// still-image codec; its reconstruction is the 8-bit quantized frame on
// both sides.

struct IntraCodec {
  u32 id = 0;
  std::string name;
  std::function<std::vector<u8>(const Tensor<float>&)> encode;
  std::function<Tensor<float>(const u8*, size_t, i64 h, i64 w)> decode;
};

const IntraCodec& intra_codec_by_name(const std::string& name);
const IntraCodec& intra_codec_by_id(u32 id);
void register_intra_codec(IntraCodec codec);

// ---------------------------------------------------------------------
// Decoded-reference state. Newest-first buffers with fixed capacities
// 4 frames / 3 motion fields / 4 residuals; encoder and decoder must hold
// bitwise-identical states after every frame.

struct ReferenceState {
  std::vector<Tensor<float>> frames;     // (1,3,H,W) in [0,1]
  std::vector<Tensor<float>> mvs;        // (1,2,H,W)
  std::vector<Tensor<float>> residuals;  // (1,3,H,W) in [-1,1]

  static ReferenceState init(const Tensor<float>& intra_recon);
  void push(Tensor<float> xhat, Tensor<float> vhat, Tensor<float> res);

  i64 height() const { return frames[0].shape().h; }
  i64 width() const { return frames[0].shape().w; }

  std::vector<u8> serialize() const;
  u64 fingerprint() const;
};

// ---------------------------------------------------------------------
// One coded frame. P-frames carry four length-prefixed sections in fixed
// order (mv_hyper, mv_delta, res_hyper, res_delta); I-frames carry one.

struct FrameBitstream {
  char type = 'P';  // 'I' or 'P'
  std::vector<std::vector<u8>> sections;

  i64 header_bits() const { return 8 * (2 + 4 * i64(sections.size())); }
  i64 payload_bits() const;
  i64 total_bits() const { return header_bits() + payload_bits(); }
};

inline constexpr const char* kSectionNames[4] = {"mv_hyper", "mv_delta",
                                                 "res_hyper", "res_delta"};

struct SequenceHeader {
  u32 width = 0, height = 0;
  u32 frame_count = 0;
  u32 gop = 0;
  u32 lambda_index = 0;
  u32 intra_codec_id = 0;
  u32 flags = 0;  // bit 0: predictions enabled
  u64 weights_fp = 0;

  bool predictions() const { return (flags & 1u) != 0; }
  static constexpr i64 kBytes = 4 + 4 + 7 * 4 + 8;  // magic + version + rest
};

// ---------------------------------------------------------------------
// Frame-level coding.

struct PFrameResult {
  FrameBitstream bits;
  Tensor<float> xhat;    // final (loop-filtered) reconstruction
  Tensor<float> xprime;  // pre-filter reconstruction, for filter-gain checks
  i64 escapes = 0;
  i64 symbols = 0;
};

// Forward-pass cost of one frame, as multiply-accumulate-derived FLOPs
// (2 per MAC) charged to the total and to each named graph scope.
struct FlopProfile {
  i64 total = 0;
  std::map<std::string, i64> scopes;
};

// Encodes one P-frame against (and then updates) the reference state.
// When `flops` is non-null it receives the cost of the encode-side forward.
PFrameResult encode_pframe(const Tensor<float>& x, ReferenceState& state,
                           const WeightsMap<float>& w, bool predictions,
                           FlopProfile* flops = nullptr);

// Decoder mirror; must reproduce the encoder's reconstruction and state
// bit for bit.
Tensor<float> decode_pframe(const FrameBitstream& fb, ReferenceState& state,
                            const WeightsMap<float>& w, bool predictions,
                            i64* escapes = nullptr);

FrameBitstream encode_intra(const Tensor<float>& x, const IntraCodec& ic,
                            Tensor<float>* recon);
Tensor<float> decode_intra(const FrameBitstream& fb, const IntraCodec& ic,
                           i64 h, i64 w);

// ---------------------------------------------------------------------
// Sequence-level coding and the RPLV container.

struct FrameStats {
  char type = 'P';
  i64 bits = 0;
  double bpp = 0.0;
  double section_bits[4] = {0, 0, 0, 0};
  i64 escapes = 0;
  i64 symbols = 0;
};

struct EncodedSequence {
  std::vector<u8> bytes;
  SequenceHeader header;
  std::vector<FrameStats> stats;
  std::vector<Tensor<float>> recons;  // encoder-side reconstructions
};

EncodedSequence encode_sequence(const std::vector<Tensor<float>>& frames,
                                const ModelWeights& mw,
                                const CodecConfig& cfg);

struct DecodedSequence {
  SequenceHeader header;
  i64 first_frame = 0;  // index of the first decoded frame
  std::vector<Tensor<float>> frames;
};

// start_frame must point at an I-frame (0, or a GOP boundary); decoding
// proceeds from there to the end of the container.
DecodedSequence decode_sequence(const std::vector<u8>& bytes,
                                const ModelWeights& mw, i64 start_frame = 0);

std::vector<u8> pack_container(const SequenceHeader& h,
                               const std::vector<FrameBitstream>& frames);
std::pair<SequenceHeader, std::vector<FrameBitstream>> parse_container(
    const std::vector<u8>& bytes);

}  // namespace lvc

#endif  // LVC_PIPELINE_HPP_
