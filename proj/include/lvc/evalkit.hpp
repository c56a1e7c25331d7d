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
// Evaluation kit: quality metrics (PSNR, MS-SSIM), Bjontegaard rate deltas,
// model complexity accounting, video I/O (Y4M and PNG directories), and
// rate-distortion report emission (CSV tables and SVG plots).

#ifndef LVC_EVALKIT_HPP_
#define LVC_EVALKIT_HPP_

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lvc/ops.hpp"
#include "lvc/pipeline.hpp"
#include "lvc/weights.hpp"

namespace lvc {

// ---------------------------------------------------------------------------
// Quality metrics.

// PSNR in dB between two images or clips of identical shape, with values on
// the [0, 1] scale. Computed in double precision and capped at 100 dB so
// identical inputs stay finite.
inline constexpr double kPsnrCap = 100.0;
double psnr(const Tensor<float>& a, const Tensor<float>& b);

// Per-scale MS-SSIM weights (five dyadic scales, coarsest last). When fewer
// scales are usable the leading entries are renormalized to sum to one.
inline constexpr std::array<double, 5> kMsssimWeights = {
    0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr int kMsssimWindow = 11;
inline constexpr double kMsssimSigma = 1.5;
inline constexpr double kMsssimC1 = 0.01 * 0.01;  // (K1*L)^2 with L = 1
inline constexpr double kMsssimC2 = 0.03 * 0.03;  // (K2*L)^2 with L = 1
inline constexpr double kMsssimFloor = 1e-6;      // stability clamp per term

// Number of dyadic scales used for an image of the given size: the largest
// s <= 5 such that floor(min(h, w) / 2^(s-1)) >= 10, and at least 1.
int ms_ssim_scales(i64 height, i64 width);

// The 11-tap Gaussian window (sigma 1.5), normalized to sum to one.
std::array<double, kMsssimWindow> ms_ssim_window();

// Differentiable MS-SSIM on NCHW tensors in [0, 1]. Returns a (1,1,1,1)
// scalar node. Defined in evalkit-inl.hpp; instantiated for float and double.
template <typename T>
Var<T> ms_ssim_graph(Var<T> a, Var<T> b);

// Scalar MS-SSIM, evaluated in double precision.
double ms_ssim(const Tensor<float>& a, const Tensor<float>& b);

// ---------------------------------------------------------------------------
// Rate-distortion curves and Bjontegaard deltas.

struct RDPoint {
  std::string sequence;
  int lambda_index = 0;
  double bpp = 0.0;
  double psnr = 0.0;
  double msssim = 0.0;
};

// Average rate difference (percent) of `test` relative to `anchor` over the
// overlapping quality range. Each curve is a list of (bpp, quality) pairs;
// the fit is a least-squares cubic of log10(bpp) as a function of quality,
// integrated in closed form. Negative values mean `test` needs fewer bits.
// Fails if either curve has fewer than four points, repeats a quality value,
// or the quality ranges do not overlap.
double bd_rate(const std::vector<std::pair<double, double>>& anchor,
               const std::vector<std::pair<double, double>>& test);

// ---------------------------------------------------------------------------
// Model complexity.

// Total number of scalar parameters in a weight map.
i64 count_params(const WeightsMap<float>& weights);

// Cost of one predicted-frame encode at the given frame size, including
// motion estimation and both entropy transforms, measured by running the
// actual encoder on a synthetic gray frame. The scope map includes the
// half-resolution backbone trunks under "trunk".
FlopProfile count_pframe_flops(const ModelWeights& mw, i64 height, i64 width,
                               bool predictions);

// ---------------------------------------------------------------------------
// Video I/O.

struct VideoClip {
  i64 width = 0;
  i64 height = 0;
  int fps_num = 25;
  int fps_den = 1;
  std::vector<Tensor<float>> frames;  // each (1, 3, height, width), RGB in [0,1]
};

// Reads a YUV4MPEG2 stream with C420 (any siting suffix) or C444 sampling.
// Values are treated as full-range BT.601 and converted to RGB. Malformed
// or truncated input fails with the frame index and byte offset.
VideoClip load_y4m(const std::string& path);

// Writes a C444 full-range BT.601 stream. Loading it back reproduces each
// pixel to within one 8-bit quantization step.
void write_y4m(const std::string& path, const VideoClip& clip);

// Single-image PNG I/O (8-bit; gray and palette inputs are expanded to RGB,
// alpha is dropped).
Tensor<float> load_png(const std::string& path);
void write_png(const std::string& path, const Tensor<float>& image);

// Loads every *.png in a directory in lexicographic order as one clip;
// writes frames as zero-padded frame_000000.png, frame_000001.png, ...
VideoClip load_png_dir(const std::string& dir);
void write_png_dir(const std::string& dir, const VideoClip& clip);

// ---------------------------------------------------------------------------
// Reports.

// CSV with header "sequence,lambda,bpp,psnr,ms_ssim", one row per point.
void write_rd_csv(const std::string& path, const std::vector<RDPoint>& points);
std::vector<RDPoint> read_rd_csv(const std::string& path);

// Standalone SVG with one polyline per sequence, log-x rate axis.
// `quality` selects the y column: "psnr" or "ms_ssim".
void write_rd_svg(const std::string& path, const std::vector<RDPoint>& points,
                  const std::string& quality);

}  // namespace lvc

#include "lvc/evalkit-inl.hpp"

#endif  // LVC_EVALKIT_HPP_
