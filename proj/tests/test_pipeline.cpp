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
// Codec symmetry: decode must reproduce the encoder's reconstruction and
// reference state bit for bit, the container must account for every bit,
// and malformed or corrupted inputs must fail loudly instead of crashing.

#include <cstring>
#include <vector>

#include "doctest.h"
#include "lvc/pipeline.hpp"
#include "lvc/training.hpp"

namespace {

using namespace lvc;  // NOLINT(build/namespaces)

bool same_tensor(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), size_t(a.numel()) * sizeof(float)) ==
             0;
}

std::vector<Tensor<float>> clip(u64 seed, i64 h, i64 w, int frames) {
  Rng rng(seed);
  return make_synthetic_clip(&rng, h, w, frames);
}

TEST_SUITE("pipeline") {

TEST_CASE("reference state init follows the buffer rules") {
  Rng rng(1);
  Tensor<float> intra = Tensor<float>::uniform(Shape{1, 3, 8, 10}, rng,
                                               0.0f, 1.0f);
  ReferenceState st = ReferenceState::init(intra);
  REQUIRE_EQ(st.frames.size(), size_t(nets::kFrameBufLen));
  REQUIRE_EQ(st.mvs.size(), size_t(nets::kMvBufLen));
  REQUIRE_EQ(st.residuals.size(), size_t(nets::kResBufLen));
  for (const auto& f : st.frames) CHECK(same_tensor(f, intra));
  for (const auto& v : st.mvs) {
    CHECK_EQ(v.shape(), (Shape{1, 2, 8, 10}));
    for (i64 i = 0; i < v.numel(); ++i) CHECK_EQ(v[i], 0.0f);
  }
  for (const auto& r : st.residuals) {
    CHECK_EQ(r.shape(), (Shape{1, 3, 8, 10}));
    for (i64 i = 0; i < r.numel(); ++i) CHECK_EQ(r[i], 0.0f);
  }
  CHECK_EQ(st.height(), 8);
  CHECK_EQ(st.width(), 10);
}

TEST_CASE("stored-8-bit intra codec reproduces the quantized frame") {
  Rng rng(2);
  Tensor<float> x = Tensor<float>::uniform(Shape{1, 3, 6, 7}, rng, 0.f, 1.f);
  const IntraCodec& ic = intra_codec_by_name("stored8");
  Tensor<float> recon;
  FrameBitstream fb = encode_intra(x, ic, &recon);
  CHECK_EQ(fb.type, 'I');
  CHECK(same_tensor(recon, intra_quantize8(x)));
  Tensor<float> dec = decode_intra(fb, ic, 6, 7);
  CHECK(same_tensor(dec, recon));
}

TEST_CASE("P-frame symmetry: reconstruction and state match bit for bit") {
  ModelWeights mw = init_weights(0xAB, 2);
  auto frames = clip(0xCD, 24, 16, 4);

  Tensor<float> intra = intra_quantize8(frames[0]);
  ReferenceState enc_state = ReferenceState::init(intra);
  ReferenceState dec_state = ReferenceState::init(intra);
  for (size_t t = 1; t < frames.size(); ++t) {
    PFrameResult r = encode_pframe(frames[t], enc_state, mw.w, true);
    CHECK_EQ(r.bits.type, 'P');
    REQUIRE_EQ(r.bits.sections.size(), 4u);
    Tensor<float> xhat = decode_pframe(r.bits, dec_state, mw.w, true);
    CHECK(same_tensor(xhat, r.xhat));
    // Master invariant: serialized states agree after every frame.
    CHECK(enc_state.serialize() == dec_state.serialize());
    CHECK_EQ(enc_state.fingerprint(), dec_state.fingerprint());
    // Push semantics: newest motion field is the one just decoded.
    CHECK_EQ(enc_state.mvs[0].shape(), (Shape{1, 2, 24, 16}));
  }
}

TEST_CASE("sequence round-trip, stats accounting, and odd dimensions") {
  ModelWeights mw = init_weights(7, 1);
  auto frames = clip(11, 17, 13, 3);
  CodecConfig cfg;
  cfg.lambda_index = 1;
  EncodedSequence es = encode_sequence(frames, mw, cfg);

  REQUIRE_EQ(es.stats.size(), frames.size());
  REQUIRE_EQ(es.recons.size(), frames.size());
  CHECK_EQ(es.header.width, 13u);
  CHECK_EQ(es.header.height, 17u);
  CHECK(es.header.predictions());

  // Bit accounting: header + per-frame totals equal the physical size.
  i64 total_bits = 8 * SequenceHeader::kBytes;
  for (const FrameStats& fs : es.stats) {
    total_bits += fs.bits;
    CHECK_EQ(fs.bpp, doctest::Approx(double(fs.bits) / (17.0 * 13.0))
                         .epsilon(1e-12));
    if (fs.type == 'P') {
      double sect = 0.0;
      for (double sb : fs.section_bits) sect += sb;
      // Frame header: type byte, section count byte, 4 length words.
      CHECK_EQ(fs.bits, i64(sect) + 8 * (2 + 4 * 4));
    }
  }
  CHECK_EQ(total_bits, i64(es.bytes.size()) * 8);

  DecodedSequence ds = decode_sequence(es.bytes, mw);
  REQUIRE_EQ(ds.frames.size(), frames.size());
  CHECK_EQ(ds.first_frame, 0);
  for (size_t i = 0; i < frames.size(); ++i) {
    CHECK(same_tensor(ds.frames[i], es.recons[i]));
  }
}

TEST_CASE("single frame gives a pure intra stream") {
  ModelWeights mw = init_weights(7, 0);
  auto frames = clip(12, 16, 16, 1);
  CodecConfig cfg;
  cfg.lambda_index = 0;
  EncodedSequence es = encode_sequence(frames, mw, cfg);
  REQUIRE_EQ(es.stats.size(), 1u);
  CHECK_EQ(es.stats[0].type, 'I');
  DecodedSequence ds = decode_sequence(es.bytes, mw);
  REQUIRE_EQ(ds.frames.size(), 1u);
  CHECK(same_tensor(ds.frames[0], intra_quantize8(frames[0])));
}

TEST_CASE("GOP restarts allow decoding from any I-frame") {
  ModelWeights mw = init_weights(13, 2);
  auto frames = clip(14, 16, 16, 5);
  CodecConfig cfg;
  cfg.gop = 2;  // I at 0, 2, 4
  EncodedSequence es = encode_sequence(frames, mw, cfg);
  CHECK_EQ(es.stats[0].type, 'I');
  CHECK_EQ(es.stats[1].type, 'P');
  CHECK_EQ(es.stats[2].type, 'I');
  CHECK_EQ(es.stats[4].type, 'I');

  for (i64 start : {i64(0), i64(2), i64(4)}) {
    DecodedSequence ds = decode_sequence(es.bytes, mw, start);
    CHECK_EQ(ds.first_frame, start);
    REQUIRE_EQ(ds.frames.size(), frames.size() - size_t(start));
    for (size_t i = 0; i < ds.frames.size(); ++i) {
      CHECK(same_tensor(ds.frames[i], es.recons[size_t(start) + i]));
    }
  }
  // P-frame positions are not valid entry points.
  CHECK_THROWS_AS(decode_sequence(es.bytes, mw, 1), Error);
}

TEST_CASE("prediction-off streams code and decode with the flag mirrored") {
  ModelWeights mw = init_weights(21, 2);
  auto frames = clip(22, 16, 16, 3);
  CodecConfig cfg;
  cfg.predictions = false;
  EncodedSequence es = encode_sequence(frames, mw, cfg);
  CHECK_FALSE(es.header.predictions());
  DecodedSequence ds = decode_sequence(es.bytes, mw);
  for (size_t i = 0; i < frames.size(); ++i) {
    CHECK(same_tensor(ds.frames[i], es.recons[i]));
  }
}

TEST_CASE("wrong weights, wrong lambda, malformed containers are rejected") {
  ModelWeights mw = init_weights(31, 2);
  auto frames = clip(32, 16, 16, 2);
  CodecConfig cfg;
  EncodedSequence es = encode_sequence(frames, mw, cfg);

  ModelWeights other = init_weights(32, 2);
  CHECK_THROWS_AS(decode_sequence(es.bytes, other), Error);

  ModelWeights relabeled = mw;
  relabeled.lambda_index = 3;
  CHECK_THROWS_AS(decode_sequence(es.bytes, relabeled), Error);

  std::vector<u8> bad = es.bytes;
  bad[0] ^= 0x5A;  // magic
  CHECK_THROWS_AS(decode_sequence(bad, mw), Error);

  bad = es.bytes;
  bad[4] ^= 0xFF;  // version
  CHECK_THROWS_AS(decode_sequence(bad, mw), Error);

  CHECK_THROWS_AS(decode_sequence(std::vector<u8>{}, mw), Error);
  CHECK_THROWS_AS(
      decode_sequence(std::vector<u8>(es.bytes.begin(), es.bytes.begin() + 10),
                      mw),
      Error);

  CHECK_THROWS_AS(decode_sequence(
                      std::vector<u8>(es.bytes.begin(), es.bytes.end() - 3),
                      mw),
                  Error);
}

TEST_CASE("mid-sequence dimension changes are rejected") {
  ModelWeights mw = init_weights(41, 2);
  std::vector<Tensor<float>> frames = clip(42, 16, 16, 1);
  frames.push_back(Tensor<float>(Shape{1, 3, 16, 24}, 0.5f));
  CHECK_THROWS_AS(encode_sequence(frames, mw, CodecConfig{}), Error);
}

TEST_CASE("corrupting payload bytes never crashes the decoder") {
  ModelWeights mw = init_weights(51, 2);
  auto frames = clip(52, 16, 16, 2);
  EncodedSequence es = encode_sequence(frames, mw, CodecConfig{});

  Rng rng(53);
  int detected = 0, divergent = 0, silent = 0;
  const int trials = 12;
  for (int t = 0; t < trials; ++t) {
    std::vector<u8> bad = es.bytes;
    // Skip the header so the corruption lands in frame payloads.
    const size_t pos = size_t(SequenceHeader::kBytes) +
                       size_t(rng.next_below(
                           u32(bad.size() - size_t(SequenceHeader::kBytes))));
    bad[pos] ^= u8(1 + rng.next_below(255));
    try {
      DecodedSequence ds = decode_sequence(bad, mw);
      bool same = ds.frames.size() == es.recons.size();
      if (same) {
        for (size_t i = 0; i < ds.frames.size(); ++i) {
          if (!same_tensor(ds.frames[i], es.recons[i])) same = false;
        }
      }
      same ? ++silent : ++divergent;
    } catch (const Error&) {
      // A clean diagnostic is the preferred outcome.
      ++detected;
    }
    // Any other exception type or a crash fails the test by escaping here.
  }
  INFO("detected=", detected, " divergent=", divergent, " silent=", silent);
  CHECK_EQ(detected + divergent + silent, trials);
  CHECK_GE(detected + divergent, 1);
}

TEST_CASE("container pack/parse is the identity on section payloads") {
  SequenceHeader h;
  h.width = 16;
  h.height = 8;
  h.frame_count = 2;
  h.gop = 0;
  h.lambda_index = 4;
  h.intra_codec_id = intra_codec_by_name("stored8").id;
  h.flags = 1;
  h.weights_fp = 0x1234567890ABCDEFull;

  FrameBitstream fi;
  fi.type = 'I';
  fi.sections = {{1, 2, 3, 4, 5}};
  FrameBitstream fp;
  fp.type = 'P';
  fp.sections = {{9}, {8, 7}, {6, 5, 4}, {3, 2, 1, 0}};
  std::vector<u8> bytes = pack_container(h, {fi, fp});

  auto [h2, frames2] = parse_container(bytes);
  CHECK_EQ(h2.width, h.width);
  CHECK_EQ(h2.height, h.height);
  CHECK_EQ(h2.frame_count, h.frame_count);
  CHECK_EQ(h2.lambda_index, h.lambda_index);
  CHECK_EQ(h2.weights_fp, h.weights_fp);
  REQUIRE_EQ(frames2.size(), 2u);
  CHECK_EQ(frames2[0].type, 'I');
  CHECK(frames2[0].sections == fi.sections);
  CHECK(frames2[1].sections == fp.sections);
}

}  // TEST_SUITE

}  // namespace
