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
// Rate-distortion report emission: CSV tables and SVG line plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "lvc/evalkit.hpp"
#include "lvc/mathfn.hpp"

namespace lvc {
namespace {

constexpr const char* kCsvHeader = "sequence,lambda,bpp,psnr,ms_ssim";

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    LVC_CHECK(out.good(), "cannot open ", tmp, " for writing");
    out << text;
    out.flush();
    LVC_CHECK(out.good(), "write error on ", tmp);
  }
  LVC_CHECK(std::rename(tmp.c_str(), path.c_str()) == 0, "cannot rename ",
            tmp, " to ", path);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_rd_csv(const std::string& path,
                  const std::vector<RDPoint>& points) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  os << std::setprecision(12);
  for (const RDPoint& p : points) {
    LVC_CHECK(p.sequence.find(',') == std::string::npos,
              "sequence name may not contain a comma: '", p.sequence, "'");
    os << p.sequence << "," << p.lambda_index << "," << p.bpp << ","
       << p.psnr << "," << p.msssim << "\n";
  }
  write_text_atomic(path, os.str());
}

std::vector<RDPoint> read_rd_csv(const std::string& path) {
  std::ifstream in(path);
  LVC_CHECK(in.good(), "cannot open ", path);
  std::string line;
  LVC_CHECK(std::getline(in, line), path, ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  LVC_CHECK(line == kCsvHeader, path, ": bad header '", line, "' (expected '",
            kCsvHeader, "')");
  std::vector<RDPoint> points;
  for (i64 row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_row(line);
    LVC_CHECK(f.size() == 5, path, ": line ", row, ": expected 5 fields, got ",
              f.size());
    RDPoint p;
    p.sequence = f[0];
    try {
      p.lambda_index = std::stoi(f[1]);
      p.bpp = std::stod(f[2]);
      p.psnr = std::stod(f[3]);
      p.msssim = std::stod(f[4]);
    } catch (const std::exception&) {
      fail(path, ": line ", row, ": non-numeric field");
    }
    points.push_back(std::move(p));
  }
  LVC_CHECK(!points.empty(), path, ": no data rows");
  return points;
}

void write_rd_svg(const std::string& path, const std::vector<RDPoint>& points,
                  const std::string& quality) {
  LVC_CHECK(quality == "psnr" || quality == "ms_ssim",
            "write_rd_svg: quality must be 'psnr' or 'ms_ssim', got '",
            quality, "'");
  LVC_CHECK(!points.empty(), "write_rd_svg: no points");

  auto qval = [&](const RDPoint& p) {
    return quality == "psnr" ? p.psnr : p.msssim;
  };
  auto log10_ = [](double x) { return math::log_f64(x) * 0.4342944819032518; };

  std::map<std::string, std::vector<RDPoint>> series;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const RDPoint& p : points) {
    LVC_CHECK(p.bpp > 0.0, "write_rd_svg: non-positive rate ", p.bpp);
    series[p.sequence].push_back(p);
    xmin = std::min(xmin, log10_(p.bpp));
    xmax = std::max(xmax, log10_(p.bpp));
    ymin = std::min(ymin, qval(p));
    ymax = std::max(ymax, qval(p));
  }
  if (xmax - xmin < 1e-9) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-9) { ymin -= 0.5; ymax += 0.5; }

  constexpr double kW = 640, kH = 480;
  constexpr double kL = 64, kR = 16, kT = 24, kB = 44;
  auto sx = [&](double lx) {
    return kL + (lx - xmin) / (xmax - xmin) * (kW - kL - kR);
  };
  auto sy = [&](double q) {
    return kH - kB - (q - ymin) / (ymax - ymin) * (kH - kT - kB);
  };
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
     << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH
     << "\">\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH
     << "\" fill=\"white\"/>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"12\">\n";

  // Axes and ticks.
  os << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR
     << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL
     << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 4.0;
    const double fy = ymin + (ymax - ymin) * t / 4.0;
    char buf[32];
    os << "<line x1=\"" << sx(fx) << "\" y1=\"" << kH - kB << "\" x2=\""
       << sx(fx) << "\" y2=\"" << kH - kB + 5 << "\" stroke=\"black\"/>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", math::exp_f64(fx * 2.302585092994046));
    os << "<text x=\"" << sx(fx) << "\" y=\"" << kH - kB + 18
       << "\" text-anchor=\"middle\">" << buf << "</text>\n";
    os << "<line x1=\"" << kL - 5 << "\" y1=\"" << sy(fy) << "\" x2=\"" << kL
       << "\" y2=\"" << sy(fy) << "\" stroke=\"black\"/>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", fy);
    os << "<text x=\"" << kL - 8 << "\" y=\"" << sy(fy) + 4
       << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  os << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 6
     << "\" text-anchor=\"middle\">rate (bits per pixel, log scale)</text>\n";
  os << "<text x=\"" << kL << "\" y=\"" << kT - 8 << "\">"
     << (quality == "psnr" ? "PSNR (dB)" : "MS-SSIM") << "</text>\n";

  // One polyline with markers per sequence, rate-sorted.
  int color_idx = 0;
  double legend_y = kT + 8;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
    const char* color = kColors[size_t(color_idx++) % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (const RDPoint& p : pts) {
      os << sx(log10_(p.bpp)) << "," << sy(qval(p)) << " ";
    }
    os << "\"/>\n";
    for (const RDPoint& p : pts) {
      os << "<circle cx=\"" << sx(log10_(p.bpp)) << "\" cy=\"" << sy(qval(p))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    os << "<text x=\"" << kW - kR - 8 << "\" y=\"" << legend_y
       << "\" text-anchor=\"end\" fill=\"" << color << "\">" << name
       << "</text>\n";
    legend_y += 16;
  }
  os << "</g>\n</svg>\n";
  write_text_atomic(path, os.str());
}

}  // namespace lvc
