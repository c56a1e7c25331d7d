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
// PNG image and image-directory I/O built on libpng. All inputs are
// normalized to 8-bit RGB; outputs are 8-bit RGB.

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include "lvc/evalkit.hpp"

namespace lvc {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

u8 quant255(float x) {
  const float v = x < 0.0f ? 0.0f : (x > 1.0f ? 1.0f : x);
  return u8(i64(v * 255.0f + 0.5f));
}

}  // namespace

Tensor<float> load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  LVC_CHECK(fp != nullptr, "cannot open ", path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  LVC_CHECK(png != nullptr, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("png_create_info_struct failed for ", path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, ": libpng failed to decode");
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  // Normalize every variant to 8-bit RGB.
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS) != 0) {
    png_set_tRNS_to_alpha(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if ((color & PNG_COLOR_MASK_ALPHA) != 0 ||
      png_get_valid(png, info, PNG_INFO_tRNS) != 0) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != size_t(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, ": unexpected row size ", rowbytes, " for width ", w);
  }

  std::vector<u8> pixels(size_t(h) * rowbytes);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = pixels.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor<float> out(Shape{1, 3, i64(h), i64(w)});
  for (i64 row = 0; row < i64(h); ++row) {
    for (i64 col = 0; col < i64(w); ++col) {
      for (int ch = 0; ch < 3; ++ch) {
        out.at(0, ch, row, col) =
            float(pixels[size_t(row) * rowbytes + size_t(col) * 3 +
                         size_t(ch)]) /
            255.0f;
      }
    }
  }
  return out;
}

void write_png(const std::string& path, const Tensor<float>& image) {
  const Shape s = image.shape();
  LVC_CHECK(s.n == 1 && s.c == 3 && s.h > 0 && s.w > 0,
            "write_png: need a (1,3,h,w) image, got ", s.str());

  const std::string tmp = path + ".tmp";
  FilePtr fp(std::fopen(tmp.c_str(), "wb"));
  LVC_CHECK(fp != nullptr, "cannot open ", tmp, " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  LVC_CHECK(png != nullptr, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    fail("png_create_info_struct failed for ", path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, ": libpng failed to encode");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(s.w), png_uint_32(s.h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<u8> row(size_t(s.w) * 3);
  for (i64 r = 0; r < s.h; ++r) {
    for (i64 col = 0; col < s.w; ++col) {
      for (int ch = 0; ch < 3; ++ch) {
        row[size_t(col) * 3 + size_t(ch)] = quant255(image.at(0, ch, r, col));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  fp.reset();

  LVC_CHECK(std::rename(tmp.c_str(), path.c_str()) == 0, "cannot rename ",
            tmp, " to ", path);
}

VideoClip load_png_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  LVC_CHECK(fs::is_directory(dir), dir, " is not a directory");
  std::vector<std::string> names;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      names.push_back(e.path().string());
    }
  }
  LVC_CHECK(!names.empty(), dir, " contains no .png files");
  std::sort(names.begin(), names.end());

  VideoClip clip;
  for (const std::string& name : names) {
    Tensor<float> frame = load_png(name);
    if (clip.frames.empty()) {
      clip.height = frame.shape().h;
      clip.width = frame.shape().w;
    }
    LVC_CHECK(frame.shape().h == clip.height && frame.shape().w == clip.width,
              name, ": frame size ", frame.shape().str(),
              " differs from first frame (", clip.height, "x", clip.width,
              ")");
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

void write_png_dir(const std::string& dir, const VideoClip& clip) {
  namespace fs = std::filesystem;
  LVC_CHECK(!clip.frames.empty(), "write_png_dir: empty clip");
  fs::create_directories(dir);
  for (size_t i = 0; i < clip.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.png", i);
    write_png((fs::path(dir) / name).string(), clip.frames[i]);
  }
}

}  // namespace lvc
