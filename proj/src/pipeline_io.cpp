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

#include "lvc/pipeline.hpp"

#include <cstring>
#include <map>

#include "lvc/entropy.hpp"
#include "lvc/mathfn.hpp"

namespace lvc {

using nets::NetCtx;
using nets::StateVars;
using entropy::Bitstring;
using entropy::CdfTable;

// ---------------------------------------------------------------------
// Intra codecs.

namespace {

IntraCodec make_stored8() {
  IntraCodec ic;
  ic.id = 0;
  ic.name = "stored8";
  ic.encode = [](const Tensor<float>& x) {
    std::vector<u8> out;
    out.reserve(size_t(x.numel()));
    for (i64 i = 0; i < x.numel(); ++i) {
      float v = math::round_away(x[i] * 255.0f);
      if (v < 0.0f) v = 0.0f;
      if (v > 255.0f) v = 255.0f;
      out.push_back(u8(v));
    }
    return out;
  };
  ic.decode = [](const u8* p, size_t n, i64 h, i64 w) {
    const Shape s{1, 3, h, w};
    LVC_CHECK(i64(n) == s.numel(), "stored8 payload size ", n,
              " does not match frame ", s.str());
    Tensor<float> out(s);
    for (i64 i = 0; i < s.numel(); ++i) out[i] = float(p[i]) / 255.0f;
    return out;
  };
  return ic;
}

std::map<std::string, IntraCodec>& intra_registry() {
  static std::map<std::string, IntraCodec> reg = [] {
    std::map<std::string, IntraCodec> m;
    IntraCodec s8 = make_stored8();
    m.emplace(s8.name, s8);
    return m;
  }();
  return reg;
}

}  // namespace

const IntraCodec& intra_codec_by_name(const std::string& name) {
  auto it = intra_registry().find(name);
  LVC_CHECK(it != intra_registry().end(), "unknown intra codec: ", name);
  return it->second;
}

const IntraCodec& intra_codec_by_id(u32 id) {
  for (const auto& [name, ic] : intra_registry()) {
    if (ic.id == id) return ic;
  }
  fail("unknown intra codec id: ", id);
}

void register_intra_codec(IntraCodec codec) {
  LVC_CHECK(!codec.name.empty() && codec.encode && codec.decode,
            "incomplete intra codec registration");
  for (const auto& [name, ic] : intra_registry()) {
    LVC_CHECK(ic.id != codec.id, "intra codec id ", codec.id,
              " already registered as ", name);
  }
  const std::string name = codec.name;
  LVC_CHECK(intra_registry().emplace(name, std::move(codec)).second,
            "intra codec name already registered: ", name);
}

// ---------------------------------------------------------------------
// Reference state.

ReferenceState ReferenceState::init(const Tensor<float>& intra_recon) {
  const Shape s = intra_recon.shape();
  LVC_CHECK(s.n == 1 && s.c == 3, "intra reconstruction must be (1,3,H,W), "
            "got ", s.str());
  ReferenceState st;
  for (i64 i = 0; i < nets::kFrameBufLen; ++i)
    st.frames.push_back(intra_recon);
  for (i64 i = 0; i < nets::kMvBufLen; ++i)
    st.mvs.push_back(Tensor<float>(Shape{1, 2, s.h, s.w}));
  for (i64 i = 0; i < nets::kResBufLen; ++i)
    st.residuals.push_back(Tensor<float>(Shape{1, 3, s.h, s.w}));
  return st;
}

void ReferenceState::push(Tensor<float> xhat, Tensor<float> vhat,
                          Tensor<float> res) {
  LVC_CHECK(xhat.shape() == frames[0].shape(), "push: frame shape changed");
  LVC_CHECK(vhat.shape() == mvs[0].shape(), "push: MV shape changed");
  LVC_CHECK(res.shape() == residuals[0].shape(),
            "push: residual shape changed");
  frames.insert(frames.begin(), std::move(xhat));
  frames.pop_back();
  mvs.insert(mvs.begin(), std::move(vhat));
  mvs.pop_back();
  residuals.insert(residuals.begin(), std::move(res));
  residuals.pop_back();
}

std::vector<u8> ReferenceState::serialize() const {
  std::vector<u8> out;
  auto put_tensor = [&](const Tensor<float>& t) {
    const Shape s = t.shape();
    const i64 dims[4] = {s.n, s.c, s.h, s.w};
    for (i64 d : dims) put_u32le(out, u32(d));
    const size_t at = out.size();
    const size_t bytes = size_t(t.numel()) * sizeof(float);
    out.resize(at + bytes);
    std::memcpy(out.data() + at, t.data(), bytes);
  };
  for (const auto& t : frames) put_tensor(t);
  for (const auto& t : mvs) put_tensor(t);
  for (const auto& t : residuals) put_tensor(t);
  return out;
}

u64 ReferenceState::fingerprint() const {
  const std::vector<u8> blob = serialize();
  return fnv1a64(blob.data(), blob.size());
}

// ---------------------------------------------------------------------
// Symbol-grid coding helpers.

i64 FrameBitstream::payload_bits() const {
  i64 bits = 0;
  for (const auto& s : sections) bits += 8 * i64(s.size());
  return bits;
}

namespace {

Tensor<i32> round_grid(const Tensor<float>& x) {
  Tensor<i32> out(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) {
    float v = math::round_away(x[i]);
    if (!(v >= -float(entropy::kSymbolClamp)))
      v = -float(entropy::kSymbolClamp);  // also catches NaN
    if (v > float(entropy::kSymbolClamp)) v = float(entropy::kSymbolClamp);
    out[i] = i32(v);
  }
  return out;
}

Tensor<float> grid_to_float(const Tensor<i32>& s) {
  Tensor<float> out(s.shape());
  for (i64 i = 0; i < s.numel(); ++i) out[i] = float(s[i]);
  return out;
}

std::vector<u8> code_factorized_grid(const Tensor<i32>& sym,
                                     const std::vector<CdfTable>& tables,
                                     i64* escapes) {
  const Shape s = sym.shape();
  LVC_CHECK(s.c == i64(tables.size()), "factorized table count ",
            tables.size(), " != channels ", s.c);
  entropy::RangeEncoder enc;
  for (i64 c = 0; c < s.c; ++c) {
    const CdfTable& t = tables[size_t(c)];
    for (i64 y = 0; y < s.h; ++y) {
      for (i64 x = 0; x < s.w; ++x) {
        entropy::encode_symbol(enc, t, sym.at(0, c, y, x), escapes);
      }
    }
  }
  return enc.finish().bytes;
}

Tensor<i32> decode_factorized_grid(const std::vector<u8>& bytes,
                                   const Shape& shape,
                                   const std::vector<CdfTable>& tables,
                                   i64* escapes) {
  Bitstring bs{bytes, 8 * u64(bytes.size())};
  entropy::RangeDecoder dec(bs);
  Tensor<i32> sym(shape);
  for (i64 c = 0; c < shape.c; ++c) {
    const CdfTable& t = tables[size_t(c)];
    for (i64 y = 0; y < shape.h; ++y) {
      for (i64 x = 0; x < shape.w; ++x) {
        const i32 v = entropy::decode_symbol(dec, t);
        if (!t.in_window(v)) ++*escapes;
        sym.at(0, c, y, x) = v;
      }
    }
  }
  return sym;
}

std::vector<u8> code_gaussian_grid(const Tensor<i32>& sym,
                                   const Tensor<float>& mu,
                                   const Tensor<float>& sigma,
                                   i64* escapes) {
  LVC_CHECK(sym.shape() == mu.shape() && sym.shape() == sigma.shape(),
            "gaussian grid shape mismatch");
  entropy::RangeEncoder enc;
  for (i64 i = 0; i < sym.numel(); ++i) {
    const CdfTable t =
        entropy::gaussian_cdf_table(double(mu[i]), double(sigma[i]));
    entropy::encode_symbol(enc, t, sym[i], escapes);
  }
  return enc.finish().bytes;
}

Tensor<i32> decode_gaussian_grid(const std::vector<u8>& bytes,
                                 const Tensor<float>& mu,
                                 const Tensor<float>& sigma,
                                 i64* escapes) {
  Bitstring bs{bytes, 8 * u64(bytes.size())};
  entropy::RangeDecoder dec(bs);
  Tensor<i32> sym(mu.shape());
  for (i64 i = 0; i < sym.numel(); ++i) {
    const CdfTable t =
        entropy::gaussian_cdf_table(double(mu[i]), double(sigma[i]));
    const i32 v = entropy::decode_symbol(dec, t);
    if (!t.in_window(v)) ++*escapes;
    sym[i] = v;
  }
  return sym;
}

StateVars<float> state_vars(Graph<float>& g, const ReferenceState& st) {
  StateVars<float> sv;
  for (const auto& t : st.frames) sv.frames.push_back(g.constant(t));
  for (const auto& t : st.mvs) sv.mvs.push_back(g.constant(t));
  for (const auto& t : st.residuals) sv.residuals.push_back(g.constant(t));
  return sv;
}

Tensor<float> buffered_residual(const Tensor<float>& xhat,
                                const Tensor<float>& xbar) {
  Tensor<float> out(xhat.shape());
  for (i64 i = 0; i < out.numel(); ++i) {
    float v = xhat[i] - xbar[i];
    if (!(v >= -1.0f)) v = -1.0f;  // also catches NaN
    if (v > 1.0f) v = 1.0f;
    out[i] = v;
  }
  return out;
}

i64 hyper_dim(i64 d) { return (((d + 1) / 2) + 1) / 2; }

}  // namespace

// ---------------------------------------------------------------------
// P-frame coding. The decoder-side computations (everything except ME and
// the two analysis transforms of the true signals) are the same function
// calls with the same inputs on both sides, which is what makes the
// reconstructions bitwise-identical.

PFrameResult encode_pframe(const Tensor<float>& x, ReferenceState& state,
                           const WeightsMap<float>& w, bool predictions,
                           FlopProfile* flops) {
  const i64 h = state.height(), wd = state.width();
  const Shape want{1, 3, h, wd};
  LVC_CHECK(x.shape() == want, "frame ", x.shape().str(),
            " does not match state ", want.str());
  Graph<float> g;
  g.set_grad_enabled(false);
  NetCtx<float> ctx(g, w, false);
  StateVars<float> sv = state_vars(g, state);
  Var<float> xcur = g.constant(x);

  PFrameResult out;
  out.bits.type = 'P';
  out.bits.sections.resize(4);

  // Motion: estimate, predict, code the latent difference.
  Var<float> v = nets::me_flow(ctx, xcur, sv.frames[0]);
  Var<float> vbar = predictions
                        ? nets::mvp_predict(ctx, sv)
                        : g.constant(Tensor<float>(Shape{1, 2, h, wd}));
  Var<float> l = nets::mv_latent(ctx, v);
  Var<float> lbar = nets::mv_latent(ctx, vbar);

  Var<float> z = nets::hyper_enc(ctx, "mv.henc", l);
  Tensor<i32> zsym = round_grid(z.val());
  const std::vector<CdfTable> ztab =
      entropy::factorized_tables(w.at("mv.prior.logits"));
  out.bits.sections[0] = code_factorized_grid(zsym, ztab, &out.escapes);
  out.symbols += zsym.numel();

  Var<float> zhat = g.constant(grid_to_float(zsym));
  auto [mu, sigma] =
      nets::hyper_dec(ctx, "mv.hdec", zhat, l.shape().h, l.shape().w);
  Tensor<i32> dsym = round_grid(ops::sub(l, lbar).val());
  out.bits.sections[1] =
      code_gaussian_grid(dsym, mu.val(), sigma.val(), &out.escapes);
  out.symbols += dsym.numel();

  Var<float> lhat = ops::add(lbar, g.constant(grid_to_float(dsym)));
  Var<float> vhat = nets::mv_synth(ctx, lhat, h, wd);

  // Motion compensation and the residual path.
  nets::McOut<float> mc = nets::mc_predict(ctx, sv, vhat);
  Var<float> rbar = predictions
                        ? nets::rp_predict(ctx, sv)
                        : g.constant(Tensor<float>(Shape{1, 3, h, wd}));
  Var<float> r = ops::sub(xcur, mc.xbar);
  Var<float> y = nets::res_latent(ctx, r);
  Var<float> ybar = nets::res_latent(ctx, rbar);

  Var<float> zr = nets::hyper_enc(ctx, "res.henc", y);
  Tensor<i32> zrsym = round_grid(zr.val());
  const std::vector<CdfTable> zrtab =
      entropy::factorized_tables(w.at("res.prior.logits"));
  out.bits.sections[2] = code_factorized_grid(zrsym, zrtab, &out.escapes);
  out.symbols += zrsym.numel();

  Var<float> zrhat = g.constant(grid_to_float(zrsym));
  auto [mur, sigmar] =
      nets::hyper_dec(ctx, "res.hdec", zrhat, y.shape().h, y.shape().w);
  Tensor<i32> dysym = round_grid(ops::sub(y, ybar).val());
  out.bits.sections[3] =
      code_gaussian_grid(dysym, mur.val(), sigmar.val(), &out.escapes);
  out.symbols += dysym.numel();

  Var<float> yhat = ops::add(ybar, g.constant(grid_to_float(dysym)));
  Var<float> fres = nets::res_synth_features(ctx, yhat, h, wd);
  Var<float> rprime = nets::res_pixels(ctx, fres);
  Var<float> xprime = ops::add(mc.xbar, rprime);
  Var<float> xhat = nets::lf_filter(ctx, mc.fmv, fres, xprime);

  out.xhat = xhat.val();
  out.xprime = ops::clamp(xprime, 0.0f, 1.0f).val();
  state.push(out.xhat, vhat.val(),
             buffered_residual(out.xhat, mc.xbar.val()));
  if (flops != nullptr) {
    flops->total = g.total_flops();
    flops->scopes = g.scope_flops_map();
  }
  return out;
}

Tensor<float> decode_pframe(const FrameBitstream& fb, ReferenceState& state,
                            const WeightsMap<float>& w, bool predictions,
                            i64* escapes) {
  LVC_CHECK(fb.type == 'P', "decode_pframe on a non-P frame");
  LVC_CHECK(fb.sections.size() == 4, "P-frame needs 4 sections, got ",
            fb.sections.size());
  for (size_t i = 0; i < 4; ++i) {
    LVC_CHECK(fb.sections[i].size() >= 4, "section ", kSectionNames[i],
              " too short (", fb.sections[i].size(), " bytes)");
  }
  const i64 h = state.height(), wd = state.width();
  Graph<float> g;
  g.set_grad_enabled(false);
  NetCtx<float> ctx(g, w, false);
  StateVars<float> sv = state_vars(g, state);
  i64 esc = 0;

  Var<float> vbar = predictions
                        ? nets::mvp_predict(ctx, sv)
                        : g.constant(Tensor<float>(Shape{1, 2, h, wd}));
  Var<float> lbar = nets::mv_latent(ctx, vbar);
  const i64 lh = lbar.shape().h, lw = lbar.shape().w;

  const std::vector<CdfTable> ztab =
      entropy::factorized_tables(w.at("mv.prior.logits"));
  Tensor<i32> zsym = decode_factorized_grid(
      fb.sections[0], Shape{1, nets::kHyperChannels, hyper_dim(lh),
                            hyper_dim(lw)},
      ztab, &esc);
  Var<float> zhat = g.constant(grid_to_float(zsym));
  auto [mu, sigma] = nets::hyper_dec(ctx, "mv.hdec", zhat, lh, lw);
  Tensor<i32> dsym =
      decode_gaussian_grid(fb.sections[1], mu.val(), sigma.val(), &esc);

  Var<float> lhat = ops::add(lbar, g.constant(grid_to_float(dsym)));
  Var<float> vhat = nets::mv_synth(ctx, lhat, h, wd);

  nets::McOut<float> mc = nets::mc_predict(ctx, sv, vhat);
  Var<float> rbar = predictions
                        ? nets::rp_predict(ctx, sv)
                        : g.constant(Tensor<float>(Shape{1, 3, h, wd}));
  Var<float> ybar = nets::res_latent(ctx, rbar);
  const i64 yh = ybar.shape().h, yw = ybar.shape().w;

  const std::vector<CdfTable> zrtab =
      entropy::factorized_tables(w.at("res.prior.logits"));
  Tensor<i32> zrsym = decode_factorized_grid(
      fb.sections[2], Shape{1, nets::kHyperChannels, hyper_dim(yh),
                            hyper_dim(yw)},
      zrtab, &esc);
  Var<float> zrhat = g.constant(grid_to_float(zrsym));
  auto [mur, sigmar] = nets::hyper_dec(ctx, "res.hdec", zrhat, yh, yw);
  Tensor<i32> dysym =
      decode_gaussian_grid(fb.sections[3], mur.val(), sigmar.val(), &esc);

  Var<float> yhat = ops::add(ybar, g.constant(grid_to_float(dysym)));
  Var<float> fres = nets::res_synth_features(ctx, yhat, h, wd);
  Var<float> rprime = nets::res_pixels(ctx, fres);
  Var<float> xprime = ops::add(mc.xbar, rprime);
  Var<float> xhat = nets::lf_filter(ctx, mc.fmv, fres, xprime);

  Tensor<float> recon = xhat.val();
  state.push(recon, vhat.val(), buffered_residual(recon, mc.xbar.val()));
  if (escapes != nullptr) *escapes += esc;
  return recon;
}

FrameBitstream encode_intra(const Tensor<float>& x, const IntraCodec& ic,
                            Tensor<float>* recon) {
  FrameBitstream fb;
  fb.type = 'I';
  fb.sections.push_back(ic.encode(x));
  if (recon != nullptr) {
    *recon = ic.decode(fb.sections[0].data(), fb.sections[0].size(),
                       x.shape().h, x.shape().w);
  }
  return fb;
}

Tensor<float> decode_intra(const FrameBitstream& fb, const IntraCodec& ic,
                           i64 h, i64 w) {
  LVC_CHECK(fb.type == 'I' && fb.sections.size() == 1,
            "malformed intra frame");
  return ic.decode(fb.sections[0].data(), fb.sections[0].size(), h, w);
}

// ---------------------------------------------------------------------
// RPLV container.

namespace {
constexpr char kMagic[4] = {'R', 'P', 'L', 'V'};
constexpr u32 kVersion = 1;
}  // namespace

std::vector<u8> pack_container(const SequenceHeader& h,
                               const std::vector<FrameBitstream>& frames) {
  std::vector<u8> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32le(out, kVersion);
  put_u32le(out, h.width);
  put_u32le(out, h.height);
  put_u32le(out, h.frame_count);
  put_u32le(out, h.gop);
  put_u32le(out, h.lambda_index);
  put_u32le(out, h.intra_codec_id);
  put_u32le(out, h.flags);
  put_u64le(out, h.weights_fp);
  LVC_CHECK(i64(out.size()) == SequenceHeader::kBytes,
            "container header layout drifted");
  for (const FrameBitstream& fb : frames) {
    out.push_back(u8(fb.type));
    out.push_back(u8(fb.sections.size()));
    for (const auto& s : fb.sections) {
      put_u32le(out, u32(s.size()));
      out.insert(out.end(), s.begin(), s.end());
    }
  }
  return out;
}

std::pair<SequenceHeader, std::vector<FrameBitstream>> parse_container(
    const std::vector<u8>& bytes) {
  size_t pos = 0;
  auto need = [&](size_t n) {
    LVC_CHECK(pos + n <= bytes.size(), "bitstream truncated at byte ", pos);
  };
  need(4);
  LVC_CHECK(std::memcmp(bytes.data(), kMagic, 4) == 0,
            "bad magic (not an RPLV bitstream)");
  pos = 4;
  auto rd_u32 = [&]() {
    need(4);
    u32 v = get_u32le(bytes.data() + pos);
    pos += 4;
    return v;
  };
  const u32 version = rd_u32();
  LVC_CHECK(version == kVersion, "unsupported bitstream version: ", version);
  SequenceHeader h;
  h.width = rd_u32();
  h.height = rd_u32();
  h.frame_count = rd_u32();
  h.gop = rd_u32();
  h.lambda_index = rd_u32();
  h.intra_codec_id = rd_u32();
  h.flags = rd_u32();
  need(8);
  h.weights_fp = get_u64le(bytes.data() + pos);
  pos += 8;
  LVC_CHECK(h.width > 0 && h.height > 0, "bad frame dims ", h.width, "x",
            h.height);

  std::vector<FrameBitstream> frames;
  for (u32 i = 0; i < h.frame_count; ++i) {
    need(2);
    FrameBitstream fb;
    fb.type = char(bytes[pos]);
    const u8 nsec = bytes[pos + 1];
    pos += 2;
    LVC_CHECK(fb.type == 'I' || fb.type == 'P', "frame ", i,
              ": unknown frame type");
    LVC_CHECK((fb.type == 'I' && nsec == 1) || (fb.type == 'P' && nsec == 4),
              "frame ", i, ": bad section count ", int(nsec));
    for (u8 s = 0; s < nsec; ++s) {
      const u32 len = rd_u32();
      need(len);
      fb.sections.emplace_back(bytes.begin() + i64(pos),
                               bytes.begin() + i64(pos) + len);
      pos += len;
    }
    frames.push_back(std::move(fb));
  }
  LVC_CHECK(pos == bytes.size(), "trailing bytes after last frame");
  return {h, std::move(frames)};
}

// ---------------------------------------------------------------------
// Sequences.

EncodedSequence encode_sequence(const std::vector<Tensor<float>>& frames,
                                const ModelWeights& mw,
                                const CodecConfig& cfg) {
  LVC_CHECK(!frames.empty(), "cannot encode an empty sequence");
  const Shape s0 = frames[0].shape();
  LVC_CHECK(s0.n == 1 && s0.c == 3, "frames must be (1,3,H,W), got ",
            s0.str());
  for (size_t i = 1; i < frames.size(); ++i) {
    LVC_CHECK(frames[i].shape() == s0, "frame ", i,
              " changes dimensions mid-sequence");
  }
  validate_weights(mw);
  const IntraCodec& ic = intra_codec_by_name(cfg.intra_codec);
  const WeightsMap<float>& w = mw.w;

  EncodedSequence out;
  out.header.width = u32(s0.w);
  out.header.height = u32(s0.h);
  out.header.frame_count = u32(frames.size());
  out.header.gop = u32(cfg.gop);
  out.header.lambda_index = u32(mw.lambda_index);
  out.header.intra_codec_id = ic.id;
  out.header.flags = cfg.predictions ? 1u : 0u;
  out.header.weights_fp = weights_fingerprint(mw);

  std::vector<FrameBitstream> coded;
  ReferenceState state;
  const double pixels = double(s0.h) * double(s0.w);
  for (size_t i = 0; i < frames.size(); ++i) {
    const bool is_intra =
        (i == 0) || (cfg.gop > 0 && i64(i) % cfg.gop == 0);
    FrameStats fs;
    if (is_intra) {
      Tensor<float> recon;
      coded.push_back(encode_intra(frames[i], ic, &recon));
      state = ReferenceState::init(recon);
      out.recons.push_back(std::move(recon));
      fs.type = 'I';
    } else {
      PFrameResult pr = encode_pframe(frames[i], state, w, cfg.predictions);
      fs.type = 'P';
      fs.escapes = pr.escapes;
      fs.symbols = pr.symbols;
      for (int k = 0; k < 4; ++k) {
        fs.section_bits[k] = 8.0 * double(pr.bits.sections[k].size());
      }
      out.recons.push_back(pr.xhat);
      coded.push_back(std::move(pr.bits));
    }
    fs.bits = coded.back().total_bits();
    fs.bpp = double(fs.bits) / pixels;
    out.stats.push_back(fs);
  }
  out.bytes = pack_container(out.header, coded);
  return out;
}

DecodedSequence decode_sequence(const std::vector<u8>& bytes,
                                const ModelWeights& mw, i64 start_frame) {
  validate_weights(mw);
  auto [header, coded] = parse_container(bytes);
  LVC_CHECK(header.weights_fp == weights_fingerprint(mw),
            "weights fingerprint mismatch: bitstream was encoded with a "
            "different model (have ", weights_fingerprint(mw), ", stream ",
            header.weights_fp, ")");
  LVC_CHECK(header.lambda_index == u32(mw.lambda_index),
            "lambda index mismatch: stream ", header.lambda_index,
            ", weights ", mw.lambda_index);
  LVC_CHECK(start_frame >= 0 && start_frame < i64(coded.size()),
            "start frame ", start_frame, " out of range");
  LVC_CHECK(coded[size_t(start_frame)].type == 'I',
            "frame ", start_frame, " is not an I-frame; decoding must "
            "start at an I-frame");
  const IntraCodec& ic = intra_codec_by_id(header.intra_codec_id);
  const i64 h = i64(header.height), wd = i64(header.width);

  DecodedSequence out;
  out.header = header;
  out.first_frame = start_frame;
  ReferenceState state;
  for (size_t i = size_t(start_frame); i < coded.size(); ++i) {
    if (coded[i].type == 'I') {
      Tensor<float> recon = decode_intra(coded[i], ic, h, wd);
      state = ReferenceState::init(recon);
      out.frames.push_back(std::move(recon));
    } else {
      out.frames.push_back(decode_pframe(coded[i], state, mw.w,
                                         header.predictions()));
    }
  }
  return out;
}

}  // namespace lvc
