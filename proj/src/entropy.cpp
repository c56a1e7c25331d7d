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

#include "lvc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lvc/mathfn.hpp"

namespace lvc::entropy {

namespace {

constexpr u32 kTop = 1u << 24;
constexpr u32 kBot = 1u << 16;

inline u32 zigzag(i32 v) { return (u32(v) << 1) ^ u32(v >> 31); }
inline i32 unzigzag(u32 z) { return i32(z >> 1) ^ -i32(z & 1); }

}  // namespace

// --------------------------------------------------------------------
// Range coder.

void RangeEncoder::normalize() {
  // Emit the top byte while it can no longer change; when the range drops
  // below 2^16 without the top byte settling, snap it to the distance to
  // the next 2^16 boundary (a bounded precision loss that removes the need
  // for carry propagation).
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = -low_ & (kBot - 1)), true))) {
    out_.push_back(u8(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeEncoder::encode(u32 cum, u32 freq) {
  range_ >>= kProbBits;
  low_ += cum * range_;
  range_ *= freq;
  normalize();
}

void RangeEncoder::encode_raw_byte(u8 b) { encode(u32(b) << 8, 256); }

Bitstring RangeEncoder::finish() {
  for (int i = 0; i < 4; ++i) {
    out_.push_back(u8(low_ >> 24));
    low_ <<= 8;
  }
  Bitstring bits;
  bits.bytes = std::move(out_);
  bits.bit_length = u64(bits.bytes.size()) * 8;
  return bits;
}

RangeDecoder::RangeDecoder(const Bitstring& bits) : bytes_(bits.bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

u32 RangeDecoder::decode_freq() {
  range_ >>= kProbBits;
  const u32 f = (code_ - low_) / range_;
  // A corrupt stream can push the scaled value off the grid; clamping keeps
  // the decoder total and lets the container layer reject the frame.
  return f < kProbScale ? f : kProbScale - 1;
}

void RangeDecoder::decode_update(u32 cum, u32 freq) {
  low_ += cum * range_;
  range_ *= freq;
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = -low_ & (kBot - 1)), true))) {
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

u8 RangeDecoder::decode_raw_byte() {
  const u32 f = decode_freq();
  const u8 b = u8(f >> 8);
  decode_update(u32(b) << 8, 256);
  return b;
}

// --------------------------------------------------------------------
// Probability model.

double gaussian_interval_prob_raw(double v, double mu, double sigma) {
  const double a = (v - mu + 0.5) / sigma;
  const double b = (v - mu - 0.5) / sigma;
  double p;
  if (a + b > 0.0) {
    p = math::normal_sf(b) - math::normal_sf(a);
  } else {
    p = math::normal_cdf(a) - math::normal_cdf(b);
  }
  return std::min(1.0, std::max(0.0, p));
}

double gaussian_interval_prob(double v, double mu, double sigma) {
  return std::max(kPMin, gaussian_interval_prob_raw(v, mu, sigma));
}

CdfTable CdfTable::from_pmf(i32 lo, const std::vector<double>& pmf,
                            double escape_mass) {
  const size_t m = pmf.size() + 1;  // + escape slot
  std::vector<double> p(m);
  double total = 0.0;
  for (size_t i = 0; i + 1 < m; ++i) {
    p[i] = std::max(0.0, pmf[i]);
    total += p[i];
  }
  p[m - 1] = std::max(kPMin, escape_mass);
  total += p[m - 1];
  LVC_CHECK(total > 0.0, "CDF from all-zero pmf");

  // Largest-remainder allocation of kProbScale slots, minimum 1 per slot.
  std::vector<u32> freq(m);
  std::vector<std::pair<double, size_t>> rem(m);
  u64 assigned = 0;
  for (size_t i = 0; i < m; ++i) {
    const double ideal = p[i] / total * double(kProbScale);
    freq[i] = u32(std::floor(ideal));
    rem[i] = {ideal - std::floor(ideal), i};
    assigned += freq[i];
  }
  LVC_CHECK(assigned <= kProbScale, "CDF overallocation");
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // deterministic tie-break
  });
  u64 leftover = kProbScale - assigned;
  for (size_t i = 0; leftover > 0; i = (i + 1) % m, --leftover) {
    freq[rem[i].second] += 1;
  }
  // Enforce freq >= 1 by stealing from the currently largest slot.
  for (size_t i = 0; i < m; ++i) {
    while (freq[i] == 0) {
      size_t big = 0;
      for (size_t j = 1; j < m; ++j) {
        if (freq[j] > freq[big]) big = j;
      }
      LVC_CHECK(freq[big] > 1, "CDF cannot satisfy min frequency");
      freq[big] -= 1;
      freq[i] += 1;
    }
  }

  CdfTable t;
  t.lo = lo;
  t.cum.resize(m + 1);
  t.cum[0] = 0;
  for (size_t i = 0; i < m; ++i) t.cum[i + 1] = t.cum[i] + freq[i];
  LVC_CHECK(t.cum.back() == kProbScale, "CDF total mismatch");
  return t;
}

double CdfTable::coded_bits(i32 v) const {
  if (in_window(v)) {
    return 16.0 - std::log2(double(freq(v - lo)));
  }
  return 16.0 - std::log2(double(freq(escape_slot()))) + 32.0;
}

void CdfTable::serialize(std::vector<u8>& out) const {
  put_u32le(out, u32(lo));
  put_u32le(out, u32(cum.size()));
  // Interior points only; the endpoints are structural.
  for (size_t i = 1; i + 1 < cum.size(); ++i) put_u32le(out, cum[i]);
}

CdfTable CdfTable::deserialize(const u8*& p, const u8* end) {
  LVC_CHECK(end - p >= 8, "CDF blob truncated");
  CdfTable t;
  t.lo = i32(get_u32le(p));
  const u32 m = get_u32le(p + 4);
  p += 8;
  LVC_CHECK(m >= 3 && m <= 4096, "CDF size out of range: ", m);
  LVC_CHECK(end - p >= i64(m - 2) * 4, "CDF blob truncated");
  t.cum.resize(m);
  t.cum[0] = 0;
  t.cum[m - 1] = kProbScale;
  for (size_t i = 1; i + 1 < m; ++i) {
    t.cum[i] = get_u32le(p);
    p += 4;
    LVC_CHECK(t.cum[i] > t.cum[i - 1] && t.cum[i] < kProbScale,
              "CDF not monotone");
  }
  LVC_CHECK(t.cum[m - 1] > t.cum[m - 2], "CDF not monotone");
  return t;
}

CdfTable gaussian_cdf_table(double mu, double sigma) {
  const i32 center =
      i32(std::clamp<long>(std::lround(mu), -kSymbolClamp, kSymbolClamp));
  const i32 radius = i32(std::clamp(std::ceil(4.0 * sigma), 1.0, 64.0));
  const i32 lo = center - radius;
  std::vector<double> pmf(size_t(2 * radius + 1));
  double mass = 0.0;
  for (i32 s = 0; s < i32(pmf.size()); ++s) {
    pmf[size_t(s)] = gaussian_interval_prob_raw(double(lo + s), mu, sigma);
    mass += pmf[size_t(s)];
  }
  return CdfTable::from_pmf(lo, pmf, std::max(kPMin, 1.0 - mass));
}

std::vector<CdfTable> factorized_tables(const Tensor<float>& logits) {
  const Shape s = logits.shape();
  LVC_CHECK(s.n == 1 && s.h == 1 && s.w % 2 == 1,
            "factorized logits shape ", s.str());
  std::vector<CdfTable> tables;
  tables.reserve(size_t(s.c));
  for (i64 c = 0; c < s.c; ++c) {
    const auto q = detail::softmax_row(logits, c);
    tables.push_back(CdfTable::from_pmf(i32(-(s.w - 1) / 2), q, kPMin));
  }
  return tables;
}

void encode_symbol(RangeEncoder& enc, const CdfTable& t, i32 value,
                   i64* escape_count) {
  if (t.in_window(value)) {
    const i32 slot = value - t.lo;
    enc.encode(t.cum[slot], t.freq(slot));
    return;
  }
  if (escape_count != nullptr) *escape_count += 1;
  const i32 esc = t.escape_slot();
  enc.encode(t.cum[esc], t.freq(esc));
  const u32 z = zigzag(value);
  enc.encode_raw_byte(u8(z >> 24));
  enc.encode_raw_byte(u8(z >> 16));
  enc.encode_raw_byte(u8(z >> 8));
  enc.encode_raw_byte(u8(z));
}

i32 decode_symbol(RangeDecoder& dec, const CdfTable& t) {
  const u32 f = dec.decode_freq();
  // Binary search: largest slot with cum[slot] <= f.
  const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), f);
  const i32 slot = i32(it - t.cum.begin()) - 1;
  dec.decode_update(t.cum[slot], t.freq(slot));
  if (slot < t.escape_slot()) return t.lo + slot;
  u32 z = 0;
  for (int i = 0; i < 4; ++i) z = (z << 8) | dec.decode_raw_byte();
  return unzigzag(z);
}

double estimate_rate_gaussian(const std::vector<i32>& syms,
                              const std::vector<float>& mu,
                              const std::vector<float>& sigma) {
  LVC_CHECK(syms.size() == mu.size() && syms.size() == sigma.size(),
            "estimate_rate_gaussian size mismatch");
  double bits = 0.0;
  for (size_t i = 0; i < syms.size(); ++i) {
    const double p = gaussian_interval_prob(double(syms[i]), double(mu[i]),
                                            double(sigma[i]));
    bits -= std::log2(p);
    // Out-of-window symbols take the escape path in the coder.
    const double radius = std::clamp(std::ceil(4.0 * double(sigma[i])), 1.0,
                                     64.0);
    const double center = double(std::lround(double(mu[i])));
    if (std::abs(double(syms[i]) - center) > radius) bits += 32.0;
  }
  return bits;
}

double estimate_rate_factorized(const std::vector<i32>& syms, i64 channels,
                                const std::vector<CdfTable>& tables) {
  LVC_CHECK(channels == i64(tables.size()), "factorized table count");
  LVC_CHECK(syms.size() % size_t(channels) == 0,
            "symbol count not divisible by channels");
  const size_t per = syms.size() / size_t(channels);
  double bits = 0.0;
  for (i64 c = 0; c < channels; ++c) {
    for (size_t i = 0; i < per; ++i) {
      bits += tables[size_t(c)].coded_bits(syms[size_t(c) * per + i]);
    }
  }
  return bits;
}

}  // namespace lvc::entropy
