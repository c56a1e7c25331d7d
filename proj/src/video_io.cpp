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
// YUV4MPEG2 reader and writer. Pixels are converted between 8-bit YCbCr and
// real-valued RGB with the full-range BT.601 matrix. The reader accepts
// C420 (any siting suffix) and C444; 4:2:0 chroma is upsampled by sample
// replication over each 2x2 block. The writer always emits C444.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lvc/evalkit.hpp"

namespace lvc {
namespace {

// Full-range BT.601. The forward matrix is the exact inverse of the
// reverse one, so the pair loses nothing beyond 8-bit quantization.
constexpr double kKr = 0.299, kKg = 0.587, kKb = 0.114;
constexpr double kCrScale = 1.402;   // 2 * (1 - kKr)
constexpr double kCbScale = 1.772;   // 2 * (1 - kKb)

void ycbcr_to_rgb(double y, double cb, double cr, float* rgb) {
  const double r = y + kCrScale * (cr - 128.0);
  const double b = y + kCbScale * (cb - 128.0);
  const double gg =
      y - (kKb * kCbScale / kKg) * (cb - 128.0) -
      (kKr * kCrScale / kKg) * (cr - 128.0);
  const double v[3] = {r, gg, b};
  for (int i = 0; i < 3; ++i) {
    double x = v[i] / 255.0;
    rgb[i] = float(x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x));
  }
}

u8 quant255(double x) {
  const double v = x < 0.0 ? 0.0 : (x > 255.0 ? 255.0 : x);
  return u8(i64(v + 0.5));
}

void rgb_to_ycbcr(const float* rgb, u8* out) {
  const double r = double(rgb[0]) * 255.0;
  const double g = double(rgb[1]) * 255.0;
  const double b = double(rgb[2]) * 255.0;
  const double y = kKr * r + kKg * g + kKb * b;
  out[0] = quant255(y);
  out[1] = quant255(128.0 + (b - y) / kCbScale);
  out[2] = quant255(128.0 + (r - y) / kCrScale);
}

std::vector<u8> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  LVC_CHECK(in.good(), "cannot open ", path);
  std::vector<u8> data((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  LVC_CHECK(!in.bad(), "read error on ", path);
  return data;
}

// Reads one '\n'-terminated line starting at `pos`; advances past the
// newline. Fails (with the byte offset) if no newline is found.
std::string take_line(const std::vector<u8>& data, size_t* pos,
                      const std::string& path) {
  size_t end = *pos;
  while (end < data.size() && data[end] != '\n') ++end;
  LVC_CHECK(end < data.size(), path, ": missing newline at byte offset ",
            *pos);
  std::string line(data.begin() + i64(*pos), data.begin() + i64(end));
  *pos = end + 1;
  return line;
}

}  // namespace

VideoClip load_y4m(const std::string& path) {
  const std::vector<u8> data = read_file(path);
  size_t pos = 0;
  const std::string header = take_line(data, &pos, path);

  std::istringstream toks(header);
  std::string tok;
  toks >> tok;
  LVC_CHECK(tok == "YUV4MPEG2", path, ": not a YUV4MPEG2 stream (header '",
            header.substr(0, 24), "')");

  VideoClip clip;
  bool c420 = true;  // Y4M default colorspace
  while (toks >> tok) {
    LVC_CHECK(!tok.empty(), path, ": empty header token");
    const std::string v = tok.substr(1);
    switch (tok[0]) {
      case 'W': clip.width = std::stoll(v); break;
      case 'H': clip.height = std::stoll(v); break;
      case 'F': {
        const size_t colon = v.find(':');
        LVC_CHECK(colon != std::string::npos, path, ": bad frame rate '", tok,
                  "'");
        clip.fps_num = std::stoi(v.substr(0, colon));
        clip.fps_den = std::stoi(v.substr(colon + 1));
        break;
      }
      case 'C':
        if (v.rfind("420", 0) == 0) {
          c420 = true;
        } else if (v == "444") {
          c420 = false;
        } else {
          fail(path, ": unsupported colorspace C", v,
               " (only C420* and C444 are supported)");
        }
        break;
      case 'I': case 'A': case 'X':
        break;  // interlacing, aspect, extensions: ignored
      default:
        fail(path, ": unknown header token '", tok, "'");
    }
  }
  LVC_CHECK(clip.width > 0 && clip.height > 0, path,
            ": header must set positive W and H (got ", clip.width, "x",
            clip.height, ")");
  LVC_CHECK(clip.fps_num > 0 && clip.fps_den > 0, path, ": bad frame rate ",
            clip.fps_num, ":", clip.fps_den);
  LVC_CHECK(!c420 || (clip.width % 2 == 0 && clip.height % 2 == 0), path,
            ": C420 requires even dimensions, got ", clip.width, "x",
            clip.height);

  const i64 w = clip.width, h = clip.height;
  const size_t ysize = size_t(w * h);
  const size_t csize = c420 ? size_t((w / 2) * (h / 2)) : ysize;
  const i64 cw = c420 ? w / 2 : w;

  for (i64 frame = 0; pos < data.size(); ++frame) {
    const size_t frame_start = pos;
    const std::string marker = take_line(data, &pos, path);
    LVC_CHECK(marker.rfind("FRAME", 0) == 0, path, ": frame ", frame,
              ": expected FRAME marker at byte offset ", frame_start);
    LVC_CHECK(pos + ysize + 2 * csize <= data.size(), path, ": frame ", frame,
              " truncated at byte offset ", pos, " (need ",
              ysize + 2 * csize, " plane bytes, have ", data.size() - pos,
              ")");
    const u8* yp = data.data() + pos;
    const u8* up = yp + ysize;
    const u8* vp = up + csize;
    pos += ysize + 2 * csize;

    Tensor<float> rgb(Shape{1, 3, h, w});
    for (i64 row = 0; row < h; ++row) {
      for (i64 col = 0; col < w; ++col) {
        const double y = double(yp[row * w + col]);
        const i64 ci = c420 ? (row / 2) * cw + col / 2 : row * w + col;
        float px[3];
        ycbcr_to_rgb(y, double(up[ci]), double(vp[ci]), px);
        for (int ch = 0; ch < 3; ++ch) rgb.at(0, ch, row, col) = px[ch];
      }
    }
    clip.frames.push_back(std::move(rgb));
  }
  LVC_CHECK(!clip.frames.empty(), path, ": stream contains no frames");
  return clip;
}

void write_y4m(const std::string& path, const VideoClip& clip) {
  LVC_CHECK(!clip.frames.empty(), "write_y4m: empty clip");
  const i64 w = clip.width, h = clip.height;
  LVC_CHECK(w > 0 && h > 0, "write_y4m: bad dimensions ", w, "x", h);
  const Shape want{1, 3, h, w};
  for (const Tensor<float>& f : clip.frames) {
    LVC_CHECK(f.shape() == want, "write_y4m: frame shape ", f.shape().str(),
              " does not match clip ", want.str());
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    LVC_CHECK(out.good(), "cannot open ", tmp, " for writing");
    out << "YUV4MPEG2 W" << w << " H" << h << " F" << clip.fps_num << ":"
        << clip.fps_den << " Ip A1:1 C444\n";
    std::vector<u8> planes(size_t(3 * h * w));
    for (const Tensor<float>& f : clip.frames) {
      out << "FRAME\n";
      for (i64 row = 0; row < h; ++row) {
        for (i64 col = 0; col < w; ++col) {
          const float px[3] = {f.at(0, 0, row, col), f.at(0, 1, row, col),
                               f.at(0, 2, row, col)};
          u8 ycc[3];
          rgb_to_ycbcr(px, ycc);
          for (int ch = 0; ch < 3; ++ch) {
            planes[size_t(ch * h * w + row * w + col)] = ycc[ch];
          }
        }
      }
      out.write(reinterpret_cast<const char*>(planes.data()),
                std::streamsize(planes.size()));
    }
    out.flush();
    LVC_CHECK(out.good(), "write error on ", tmp);
  }
  LVC_CHECK(std::rename(tmp.c_str(), path.c_str()) == 0, "cannot rename ",
            tmp, " to ", path);
}

}  // namespace lvc
