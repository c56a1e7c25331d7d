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
// Quality metrics, BD-rate, complexity counters, and the video/report I/O.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "lvc/codecnets.hpp"
#include "lvc/evalkit.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lvc;  // NOLINT(build/namespaces)

Tensor<float> gray(i64 h, i64 w, float v) {
  return Tensor<float>(Shape{1, 3, h, w}, v);
}

Tensor<float> noisy(const Tensor<float>& x, double stddev, u64 seed) {
  Rng rng(seed);
  Tensor<float> out = x;
  for (i64 i = 0; i < out.numel(); ++i) {
    // Sum of 12 uniforms: cheap, bounded, zero-mean, unit-variance noise.
    double n = -6.0;
    for (int k = 0; k < 12; ++k) n += rng.uniform_f64();
    out[i] = float(std::min(1.0, std::max(0.0, double(out[i]) + stddev * n)));
  }
  return out;
}

Tensor<float> natural(i64 h, i64 w, u64 seed) {
  Rng rng(seed);
  Tensor<float> img(Shape{1, 3, h, w});
  const double fx = 2.0 + rng.uniform_f64() * 3.0;
  const double fy = 2.0 + rng.uniform_f64() * 3.0;
  for (i64 c = 0; c < 3; ++c) {
    for (i64 y = 0; y < h; ++y) {
      for (i64 x = 0; x < w; ++x) {
        const double v = 0.5 + 0.25 * std::sin(fx * x / double(w) * 6.28 +
                                               double(c)) +
                         0.2 * std::cos(fy * y / double(h) * 6.28);
        img.at(0, c, y, x) = float(std::min(1.0, std::max(0.0, v)));
      }
    }
  }
  return img;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag)
      : path(fs::temp_directory_path() /
             (std::string("lvc_evalkit_") + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST_SUITE("evalkit") {

TEST_CASE("psnr: cap, closed-form error case, symmetry") {
  Tensor<float> a = natural(24, 32, 1);
  CHECK_EQ(psnr(a, a), kPsnrCap);

  // Uniform absolute error of one 8-bit step: 20*log10(255) dB.
  Tensor<float> base = gray(16, 16, 100.0f / 255.0f);
  Tensor<float> off = gray(16, 16, 101.0f / 255.0f);
  const double want = 20.0 * std::log10(255.0);
  CHECK_EQ(psnr(base, off), doctest::Approx(want).epsilon(1e-9));
  CHECK_EQ(psnr(base, off), doctest::Approx(48.1308).epsilon(1e-6));

  Tensor<float> b = noisy(a, 0.05, 2);
  CHECK_EQ(psnr(a, b), psnr(b, a));
  CHECK_THROWS_AS(psnr(a, gray(8, 8, 0.0f)), Error);
}

TEST_CASE("ms_ssim: identity is exactly one") {
  for (auto [h, w] : std::vector<std::pair<i64, i64>>{
           {160, 160}, {64, 48}, {17, 23}}) {
    Tensor<float> a = natural(h, w, u64(3 + h));
    CHECK_EQ(ms_ssim(a, a), 1.0);
  }
}

TEST_CASE("ms_ssim: scale count follows the window-size gate") {
  CHECK_EQ(ms_ssim_scales(160, 160), 5);
  CHECK_EQ(ms_ssim_scales(159, 160), 4);
  CHECK_EQ(ms_ssim_scales(80, 80), 4);
  CHECK_EQ(ms_ssim_scales(32, 32), 2);
  CHECK_EQ(ms_ssim_scales(16, 16), 1);
  CHECK_EQ(ms_ssim_scales(11, 640), 1);
}

TEST_CASE("ms_ssim: inverted binary image scores near zero") {
  Tensor<float> a(Shape{1, 3, 64, 64});
  for (i64 c = 0; c < 3; ++c) {
    for (i64 y = 0; y < 64; ++y) {
      for (i64 x = 0; x < 64; ++x) {
        a.at(0, c, y, x) = ((x / 8 + y / 8) % 2 == 0) ? 1.0f : 0.0f;
      }
    }
  }
  Tensor<float> inv = a;
  for (i64 i = 0; i < inv.numel(); ++i) inv[i] = 1.0f - inv[i];
  CHECK_LT(ms_ssim(a, inv), 0.2);
}

TEST_CASE("ms_ssim: strictly decreasing under growing noise") {
  Tensor<float> a = natural(96, 96, 4);
  double prev = 1.0;
  for (double stddev : {0.01, 0.03, 0.06, 0.12, 0.25}) {
    const double score = ms_ssim(a, noisy(a, stddev, 5));
    CHECK_LT(score, prev);
    prev = score;
  }
  CHECK_GT(prev, 0.0);
}

TEST_CASE("bd_rate: identical curves give exactly zero") {
  std::vector<std::pair<double, double>> curve{
      {0.1, 30.0}, {0.2, 33.0}, {0.4, 36.0}, {0.8, 39.0}, {1.6, 42.0}};
  CHECK_EQ(bd_rate(curve, curve), 0.0);
}

TEST_CASE("bd_rate: constant half rate gives exactly -50%") {
  std::vector<std::pair<double, double>> anchor{
      {0.12, 30.0}, {0.25, 32.5}, {0.55, 36.0}, {1.1, 40.0}};
  std::vector<std::pair<double, double>> test = anchor;
  for (auto& p : test) p.first *= 0.5;
  CHECK_EQ(bd_rate(anchor, test), doctest::Approx(-50.0).epsilon(1e-12));
  // And the reverse direction doubles the rate: +100%.
  CHECK_EQ(bd_rate(test, anchor), doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("bd_rate: randomized curves match a numerical-integration oracle") {
  Rng rng(2025);
  for (int trial = 0; trial < 50; ++trial) {
    // Monotone random curves with overlapping quality ranges.
    auto mk = [&](double r0) {
      std::vector<std::pair<double, double>> c;
      double rate = r0 * (0.8 + 0.4 * rng.uniform_f64());
      double q = 30.0 + 2.0 * rng.uniform_f64();
      for (int i = 0; i < 5; ++i) {
        c.emplace_back(rate, q);
        rate *= 1.6 + 0.8 * rng.uniform_f64();
        q += 1.5 + 2.0 * rng.uniform_f64();
      }
      return c;
    };
    auto anchor = mk(0.1), test = mk(0.08);
    const double got = bd_rate(anchor, test);

    // Oracle: trapezoid integration (10^4 panels) of the same fitted
    // cubics over the quality overlap, using an independent normal-
    // equation solve on the raw (unshifted) quality axis in long double.
    auto fit = [&](const std::vector<std::pair<double, double>>& c) {
      long double m[4][5] = {};
      for (const auto& [r, q] : c) {
        long double xp[7] = {1, 0, 0, 0, 0, 0, 0};
        for (int k = 1; k < 7; ++k) xp[k] = xp[k - 1] * (long double)(q);
        const long double y = std::log10((long double)(r));
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) m[i][j] += xp[i + j];
          m[i][4] += y * xp[i];
        }
      }
      // Gaussian elimination with partial pivoting.
      for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r2 = col + 1; r2 < 4; ++r2) {
          if (std::fabs((double)m[r2][col]) > std::fabs((double)m[piv][col]))
            piv = r2;
        }
        for (int j = 0; j < 5; ++j) std::swap(m[piv][j], m[col][j]);
        for (int r2 = 0; r2 < 4; ++r2) {
          if (r2 == col) continue;
          const long double f = m[r2][col] / m[col][col];
          for (int j = 0; j < 5; ++j) m[r2][j] -= f * m[col][j];
        }
      }
      std::array<long double, 4> coef;
      for (int i = 0; i < 4; ++i) coef[size_t(i)] = m[i][4] / m[i][i];
      return coef;
    };
    auto ca = fit(anchor), ct = fit(test);
    const double lo = std::max(anchor.front().second, test.front().second);
    const double hi = std::min(anchor.back().second, test.back().second);
    auto evalc = [](const std::array<long double, 4>& c, long double q) {
      return ((c[3] * q + c[2]) * q + c[1]) * q + c[0];
    };
    const int panels = 10000;
    long double acc = 0.0;
    for (int i = 0; i <= panels; ++i) {
      const long double q = lo + (hi - lo) * i / panels;
      const long double d = evalc(ct, q) - evalc(ca, q);
      acc += (i == 0 || i == panels) ? d / 2 : d;
    }
    const double avg = double(acc * (hi - lo) / panels / (hi - lo));
    const double oracle = (std::pow(10.0, avg) - 1.0) * 100.0;
    INFO("trial ", trial, " got=", got, " oracle=", oracle);
    CHECK_LE(std::fabs(got - oracle), 0.1);
  }
}

TEST_CASE("bd_rate: input validation") {
  std::vector<std::pair<double, double>> three{
      {0.1, 30.0}, {0.2, 33.0}, {0.4, 36.0}};
  std::vector<std::pair<double, double>> four{
      {0.1, 30.0}, {0.2, 33.0}, {0.4, 36.0}, {0.8, 39.0}};
  CHECK_THROWS_AS(bd_rate(three, four), Error);

  // Disjoint quality ranges.
  std::vector<std::pair<double, double>> high{
      {0.1, 50.0}, {0.2, 53.0}, {0.4, 56.0}, {0.8, 59.0}};
  CHECK_THROWS_AS(bd_rate(four, high), Error);

  // Repeated qualities cannot support a cubic fit.
  std::vector<std::pair<double, double>> flat{
      {0.1, 30.0}, {0.2, 30.0}, {0.4, 30.0}, {0.8, 30.0}};
  CHECK_THROWS_AS(bd_rate(flat, flat), Error);

  // Nonpositive rates are rejected.
  std::vector<std::pair<double, double>> zero{
      {0.0, 30.0}, {0.2, 33.0}, {0.4, 36.0}, {0.8, 39.0}};
  CHECK_THROWS_AS(bd_rate(zero, four), Error);
}

TEST_CASE("count_params: closed-form conv example and the real model") {
  WeightsMap<float> w;
  w.emplace("c.w", Tensor<float>(Shape{64, 3, 3, 3}));
  w.emplace("c.b", Tensor<float>(Shape{1, 64, 1, 1}));
  CHECK_EQ(count_params(w), 3 * 64 * 9 + 64);  // 1792

  ModelWeights mw = init_weights(1, 0);
  i64 manual = 0;
  for (const auto& [name, t] : mw.w) manual += t.numel();
  CHECK_EQ(count_params(mw.w), manual);
}

TEST_CASE("count_pframe_flops: totals and the trunk scope") {
  ModelWeights mw = init_weights(1, 0);
  FlopProfile p = count_pframe_flops(mw, 64, 64, true);
  REQUIRE(p.scopes.count("trunk") == 1);
  CHECK_GT(p.scopes.at("trunk"), 0);
  CHECK_LT(p.scopes.at("trunk"), p.total);
  // Frozen regression value for the fixed architecture at 64x64.
  CHECK_EQ(p.total, 5315145216LL);
  // Disabling the prediction nets removes work.
  FlopProfile bare = count_pframe_flops(mw, 64, 64, false);
  CHECK_LT(bare.total, p.total);
  CHECK_THROWS_AS(count_pframe_flops(mw, 1, 64, true), Error);
}

TEST_CASE("backbone trunk at stride 2 costs exactly a quarter of full res") {
  ModelWeights mw = init_weights(1, 0);
  Rng rng(77);
  Tensor<float> xin =
      Tensor<float>::uniform(Shape{1, nets::kLfIn, 32, 32}, rng, 0.0f, 1.0f);
  auto trunk_cost = [&](bool downsample) {
    Graph<float> g;
    nets::NetCtx<float> ctx(g, mw.w, false);
    nets::BackboneSpec spec{nets::kLfIn, nets::kLfMid, nets::kLfOut};
    spec.downsample = downsample;
    nets::backbone(ctx, "lf.bb", spec, g.constant(xin));
    return g.scope_flops("trunk");
  };
  const i64 half = trunk_cost(true);
  const i64 full = trunk_cost(false);
  CHECK_GT(half, 0);
  CHECK_EQ(full, 4 * half);
}

TEST_CASE("y4m: 4:2:0 fixture decodes with BT.601 full-range conversion") {
  TempDir dir("y4m");
  const fs::path p = dir.path / "clip.y4m";
  {
    std::ofstream f(p, std::ios::binary);
    f << "YUV4MPEG2 W4 H2 F25:1 Ip A1:1 C420jpeg\n";
    // Frame 0: Y ramp, neutral chroma (gray ramp).
    f << "FRAME\n";
    const u8 y0[8] = {0, 32, 64, 96, 128, 160, 192, 255};
    const u8 c0[2] = {128, 128};
    f.write(reinterpret_cast<const char*>(y0), 8);
    f.write(reinterpret_cast<const char*>(c0), 2);  // Cb
    f.write(reinterpret_cast<const char*>(c0), 2);  // Cr
    // Frame 1: flat mid gray with strong red chroma.
    f << "FRAME\n";
    std::vector<u8> y1(8, 128);
    const u8 cb[2] = {128, 128}, cr[2] = {255, 255};
    f.write(reinterpret_cast<const char*>(y1.data()), 8);
    f.write(reinterpret_cast<const char*>(cb), 2);
    f.write(reinterpret_cast<const char*>(cr), 2);
  }
  VideoClip clip = load_y4m(p.string());
  CHECK_EQ(clip.width, 4);
  CHECK_EQ(clip.height, 2);
  CHECK_EQ(clip.fps_num, 25);
  REQUIRE_EQ(clip.frames.size(), 2u);

  // Neutral chroma: R = G = B = Y/255 exactly.
  const Tensor<float>& f0 = clip.frames[0];
  CHECK_EQ(f0.at(0, 0, 0, 0), 0.0f);
  CHECK_EQ(f0.at(0, 1, 0, 1), float(32.0 / 255.0));
  CHECK_EQ(f0.at(0, 2, 1, 3), 1.0f);
  CHECK_EQ(f0.at(0, 0, 1, 0), f0.at(0, 1, 1, 0));

  // Red-pushed chroma: R = Y + 1.402*(Cr-128), clamped to [0,1].
  const Tensor<float>& f1 = clip.frames[1];
  const double want_r = std::min(1.0, (128.0 + 1.402 * 127.0) / 255.0);
  CHECK_EQ(double(f1.at(0, 0, 0, 0)), doctest::Approx(want_r).epsilon(1e-6));
  CHECK_LT(f1.at(0, 1, 0, 0), 0.3f);  // green pulled down
}

TEST_CASE("y4m: C444 writer round-trips within one quantization step") {
  TempDir dir("y4m444");
  const fs::path p = dir.path / "out.y4m";
  VideoClip clip;
  clip.width = 6;
  clip.height = 4;
  clip.fps_num = 30;
  clip.fps_den = 1;
  clip.frames.push_back(natural(4, 6, 9));
  clip.frames.push_back(noisy(clip.frames[0], 0.1, 10));
  write_y4m(p.string(), clip);

  VideoClip back = load_y4m(p.string());
  CHECK_EQ(back.width, 6);
  CHECK_EQ(back.fps_num, 30);
  REQUIRE_EQ(back.frames.size(), 2u);
  double worst = 0.0;
  for (size_t t = 0; t < 2; ++t) {
    for (i64 i = 0; i < clip.frames[t].numel(); ++i) {
      worst = std::max(worst, std::fabs(double(back.frames[t][i]) -
                                        double(clip.frames[t][i])));
    }
  }
  CHECK_LT(worst, 1.5 / 255.0);
}

TEST_CASE("y4m: malformed inputs carry frame/byte diagnostics") {
  TempDir dir("y4mbad");

  // Truncated mid-frame.
  const fs::path trunc = dir.path / "trunc.y4m";
  {
    std::ofstream f(trunc, std::ios::binary);
    f << "YUV4MPEG2 W4 H2 C420\nFRAME\n";
    const u8 y[5] = {1, 2, 3, 4, 5};  // needs 8 luma + 4 chroma
    f.write(reinterpret_cast<const char*>(y), 5);
  }
  bool caught = false;
  try {
    load_y4m(trunc.string());
  } catch (const Error& e) {
    caught = true;
    const std::string msg = e.what();
    CHECK_NE(msg.find("frame 0"), std::string::npos);
    CHECK_NE(msg.find("byte"), std::string::npos);
  }
  CHECK(caught);

  // 4:2:0 with odd dimensions.
  const fs::path odd = dir.path / "odd.y4m";
  {
    std::ofstream f(odd, std::ios::binary);
    f << "YUV4MPEG2 W3 H2 C420\n";
  }
  CHECK_THROWS_AS(load_y4m(odd.string()), Error);

  // Unsupported colorspace.
  const fs::path bad = dir.path / "bad.y4m";
  {
    std::ofstream f(bad, std::ios::binary);
    f << "YUV4MPEG2 W2 H2 C422\n";
  }
  CHECK_THROWS_AS(load_y4m(bad.string()), Error);

  CHECK_THROWS_AS(load_y4m((dir.path / "missing.y4m").string()), Error);
}

TEST_CASE("png: round-trip, directory ordering, dimension policing") {
  TempDir dir("png");
  // 8-bit-exact values survive a write/load cycle bitwise.
  Tensor<float> img(Shape{1, 3, 5, 4});
  Rng rng(11);
  for (i64 i = 0; i < img.numel(); ++i) {
    img[i] = float(rng.next_below(256)) / 255.0f;
  }
  const fs::path p0 = dir.path / "img.png";
  write_png(p0.string(), img);
  Tensor<float> back = load_png(p0.string());
  REQUIRE_EQ(back.shape(), img.shape());
  for (i64 i = 0; i < img.numel(); ++i) REQUIRE_EQ(back[i], img[i]);

  // Directory loads sort lexicographically.
  VideoClip clip;
  clip.width = 4;
  clip.height = 5;
  clip.frames = {gray(5, 4, 0.25f), gray(5, 4, 0.5f), gray(5, 4, 0.75f)};
  const fs::path d = dir.path / "frames";
  write_png_dir(d.string(), clip);
  VideoClip got = load_png_dir(d.string());
  REQUIRE_EQ(got.frames.size(), 3u);
  CHECK_EQ(got.frames[0][0], doctest::Approx(0.25).epsilon(1e-6));
  CHECK_EQ(got.frames[2][0], doctest::Approx(0.75).epsilon(1e-6));

  // A mismatched frame size names the offending file.
  write_png((d / "z_extra.png").string(), gray(2, 2, 0.1f));
  bool caught = false;
  try {
    load_png_dir(d.string());
  } catch (const Error& e) {
    caught = true;
    CHECK_NE(std::string(e.what()).find("z_extra.png"), std::string::npos);
  }
  CHECK(caught);
}

TEST_CASE("rd csv: round-trip and header validation") {
  TempDir dir("csv");
  const fs::path p = dir.path / "rd.csv";
  std::vector<RDPoint> pts{
      {"seq_a", 0, 0.125, 31.25, 0.9125},
      {"seq_a", 1, 0.25, 33.5, 0.94},
      {"seq_b", 0, 0.0625, 29.75, 0.9},
  };
  write_rd_csv(p.string(), pts);
  std::vector<RDPoint> back = read_rd_csv(p.string());
  REQUIRE_EQ(back.size(), pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    CHECK_EQ(back[i].sequence, pts[i].sequence);
    CHECK_EQ(back[i].lambda_index, pts[i].lambda_index);
    CHECK_EQ(back[i].bpp, pts[i].bpp);
    CHECK_EQ(back[i].psnr, pts[i].psnr);
    CHECK_EQ(back[i].msssim, pts[i].msssim);
  }

  const fs::path bad = dir.path / "bad.csv";
  {
    std::ofstream f(bad);
    f << "sequence,lambda,bpp\nseq,0,0.1\n";
  }
  CHECK_THROWS_AS(read_rd_csv(bad.string()), Error);
}

TEST_CASE("rd svg: plots contain one polyline per sequence") {
  TempDir dir("svg");
  const fs::path p = dir.path / "rd.svg";
  std::vector<RDPoint> pts;
  for (int i = 0; i < 5; ++i) {
    pts.push_back({"alpha", i, 0.1 * (1 << i), 30.0 + 2.0 * i,
                   0.9 + 0.01 * i});
    pts.push_back({"beta", i, 0.08 * (1 << i), 29.0 + 2.0 * i,
                   0.89 + 0.01 * i});
  }
  write_rd_svg(p.string(), pts, "psnr");
  std::ifstream f(p);
  std::string svg((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  CHECK_NE(svg.find("<svg"), std::string::npos);
  CHECK_NE(svg.find("polyline"), std::string::npos);
  CHECK_NE(svg.find("alpha"), std::string::npos);
  CHECK_NE(svg.find("beta"), std::string::npos);
  CHECK_NE(svg.find("PSNR"), std::string::npos);
  CHECK_THROWS_AS(write_rd_svg((dir.path / "x.svg").string(), pts, "vmaf"),
                  Error);
}

}  // TEST_SUITE

}  // namespace
