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
// Command-line entry point. Subcommands: encode, decode, train, eval,
// bdrate. Exit codes: 0 success, 1 internal error, 2 usage/input error.
// Progress and results are single-line key=value records.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lvc/evalkit.hpp"
#include "lvc/pipeline.hpp"
#include "lvc/training.hpp"

namespace fs = std::filesystem;
using lvc::i64;

namespace {

// Input/usage problems exit with code 2; everything else is an internal
// error (code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<lvc::u8> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) throw UsageError("cannot open " + path);
  return std::vector<lvc::u8>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::string& path,
                       const std::vector<lvc::u8>& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    LVC_CHECK(f.good(), "cannot open for writing: ", tmp);
    f.write(reinterpret_cast<const char*>(data.data()),
            std::streamsize(data.size()));
    LVC_CHECK(f.good(), "short write: ", tmp);
  }
  LVC_CHECK(std::rename(tmp.c_str(), path.c_str()) == 0,
            "rename failed: ", path);
}

// A clip source is a .y4m file or a directory of .png frames.
lvc::VideoClip load_clip(const std::string& path) {
  if (fs::is_directory(path)) return lvc::load_png_dir(path);
  if (!fs::is_regular_file(path)) {
    throw UsageError("input not found: " + path);
  }
  if (fs::path(path).extension() == ".y4m") return lvc::load_y4m(path);
  throw UsageError("unsupported input " + path +
                   " (expected a .y4m file or a PNG directory)");
}

// A clip sink: *.y4m writes a stream, anything else a PNG directory.
void store_clip(const std::string& path, const lvc::VideoClip& clip) {
  if (fs::path(path).extension() == ".y4m") {
    lvc::write_y4m(path, clip);
  } else {
    lvc::write_png_dir(path, clip);
  }
}

lvc::ModelWeights load_weights_checked(const std::string& path) {
  if (!fs::is_regular_file(path)) {
    throw UsageError("weights file not found: " + path);
  }
  try {
    return lvc::load_weights(path);
  } catch (const lvc::Error& e) {
    throw UsageError("bad weights file " + path + ": " + e.what());
  }
}

std::string sequence_name(const std::string& path) {
  fs::path p(path);
  return p.extension() == ".y4m" ? p.stem().string()
                                 : p.filename().string();
}

// ---------------------------------------------------------------------------
// Shared option bag; each subcommand binds the flags it uses.

struct Args {
  std::vector<std::string> inputs;
  std::string output;
  std::vector<std::string> weights;
  int lambda_index = -1;  // -1: take it from the weights file
  i64 gop = 0;
  lvc::u64 seed = 1;
  i64 iters = 2000;
  int pframes = 4;
  int batch = 1;
  int curriculum_step = 500;
  i64 clip_size = 32;
  bool no_predictions = false;
  bool msssim_finetune = false;
  std::string resume;
};

void print_frame_stats(size_t i, const lvc::FrameStats& fs, double frame_psnr,
                       double frame_msssim) {
  std::printf("frame=%zu type=%c bits=%lld bpp=%.6f psnr=%.4f ms_ssim=%.6f",
              i, fs.type, static_cast<long long>(fs.bits), fs.bpp, frame_psnr,
              frame_msssim);
  if (fs.type == 'P') {
    for (int k = 0; k < 4; ++k) {
      std::printf(" %s=%.0f", lvc::kSectionNames[size_t(k)],
                  fs.section_bits[k]);
    }
    std::printf(" escapes=%lld symbols=%lld",
                static_cast<long long>(fs.escapes),
                static_cast<long long>(fs.symbols));
  }
  std::printf("\n");
}

int cmd_encode(const Args& a) {
  if (a.inputs.size() != 1) throw UsageError("encode needs exactly one --input");
  if (a.weights.size() != 1) {
    throw UsageError("encode needs exactly one --weights");
  }
  if (a.output.empty()) throw UsageError("encode needs --output");
  const lvc::VideoClip clip = load_clip(a.inputs[0]);
  const lvc::ModelWeights mw = load_weights_checked(a.weights[0]);
  if (a.lambda_index >= 0 && a.lambda_index != mw.lambda_index) {
    throw UsageError("--lambda-index " + std::to_string(a.lambda_index) +
                     " does not match the weights file (lambda index " +
                     std::to_string(mw.lambda_index) + ")");
  }
  lvc::CodecConfig cfg;
  cfg.lambda_index = mw.lambda_index;
  cfg.gop = a.gop;
  cfg.predictions = !a.no_predictions;

  const lvc::EncodedSequence es =
      lvc::encode_sequence(clip.frames, mw, cfg);
  write_file_atomic(a.output, es.bytes);

  const double pixels = double(clip.width) * double(clip.height);
  double psnr_sum = 0.0, msssim_sum = 0.0;
  for (size_t i = 0; i < es.stats.size(); ++i) {
    const double p = lvc::psnr(es.recons[i], clip.frames[i]);
    const double m = lvc::ms_ssim(es.recons[i], clip.frames[i]);
    psnr_sum += p;
    msssim_sum += m;
    print_frame_stats(i, es.stats[i], p, m);
  }
  const double n = double(es.stats.size());
  std::printf("total frames=%zu bytes=%zu bpp=%.6f psnr=%.4f ms_ssim=%.6f\n",
              es.stats.size(), es.bytes.size(),
              double(es.bytes.size()) * 8.0 / (pixels * n), psnr_sum / n,
              msssim_sum / n);
  return 0;
}

int cmd_decode(const Args& a) {
  if (a.inputs.size() != 1) throw UsageError("decode needs exactly one --input");
  if (a.weights.size() != 1) {
    throw UsageError("decode needs exactly one --weights");
  }
  if (a.output.empty()) throw UsageError("decode needs --output");
  const std::vector<lvc::u8> bytes = read_file(a.inputs[0]);
  if (bytes.size() < 4 || bytes[0] != 'R' || bytes[1] != 'P' ||
      bytes[2] != 'L' || bytes[3] != 'V') {
    throw UsageError(a.inputs[0] + " is not a coded video stream (bad magic)");
  }
  const lvc::ModelWeights mw = load_weights_checked(a.weights[0]);
  lvc::DecodedSequence ds;
  try {
    ds = lvc::decode_sequence(bytes, mw);
  } catch (const lvc::Error& e) {
    // Anything the decoder rejects is a property of the inputs.
    throw UsageError(std::string("cannot decode ") + a.inputs[0] + ": " +
                     e.what());
  }
  lvc::VideoClip clip;
  clip.width = i64(ds.header.width);
  clip.height = i64(ds.header.height);
  clip.frames = std::move(ds.frames);
  store_clip(a.output, clip);
  std::printf("decoded frames=%zu width=%u height=%u lambda=%u "
              "predictions=%d output=%s\n",
              clip.frames.size(), ds.header.width, ds.header.height,
              ds.header.lambda_index, ds.header.predictions() ? 1 : 0,
              a.output.c_str());
  return 0;
}

int cmd_train(const Args& a) {
  if (a.output.empty()) throw UsageError("train needs --output");
  lvc::TrainConfig cfg;
  cfg.lambda_index = a.lambda_index >= 0 ? a.lambda_index : 2;
  cfg.predictions = !a.no_predictions;
  cfg.batch = a.batch;
  cfg.max_pframes = a.pframes;
  cfg.curriculum_step = a.curriculum_step;
  cfg.clip_h = a.clip_size;
  cfg.clip_w = a.clip_size;

  auto report = [](const lvc::TrainStats& st) {
    if (st.iter % 50 == 0) {
      std::printf("iter=%lld pframes=%d loss=%.6f rate_bits=%.1f "
                  "distortion=%.8f\n",
                  static_cast<long long>(st.iter), st.pframes, st.loss,
                  st.rate_bits, st.distortion);
      std::fflush(stdout);
    }
  };

  lvc::ModelWeights out;
  if (!a.resume.empty()) {
    if (!fs::is_regular_file(a.resume) ||
        !fs::is_regular_file(a.resume + ".opt")) {
      throw UsageError("checkpoint not found: " + a.resume + " (+.opt)");
    }
    lvc::Trainer tr = lvc::Trainer::load_checkpoint(cfg, a.resume);
    while (tr.iter() < a.iters) report(tr.step());
    out = tr.weights();
  } else {
    out = lvc::run_curriculum(cfg,
                              lvc::init_weights(a.seed, cfg.lambda_index),
                              a.seed, a.iters, a.msssim_finetune, report);
  }
  lvc::save_weights(a.output, out);
  std::printf("trained iters=%lld lambda=%d weights=%s fingerprint=%016llx\n",
              static_cast<long long>(a.iters), cfg.lambda_index,
              a.output.c_str(),
              static_cast<unsigned long long>(lvc::weights_fingerprint(out)));
  return 0;
}

int cmd_eval(const Args& a) {
  if (a.inputs.empty()) throw UsageError("eval needs at least one --input");
  if (a.weights.empty()) throw UsageError("eval needs at least one --weights");
  if (a.output.empty()) throw UsageError("eval needs --output (a .csv path)");

  std::vector<lvc::ModelWeights> models;
  for (const std::string& wpath : a.weights) {
    models.push_back(load_weights_checked(wpath));
  }

  // Sequences are independent; evaluate them concurrently and emit results
  // in input order.
  auto eval_sequence = [&](const std::string& input) {
    const lvc::VideoClip clip = load_clip(input);
    const double pixels = double(clip.width) * double(clip.height);
    std::vector<lvc::RDPoint> pts;
    for (const lvc::ModelWeights& mw : models) {
      lvc::CodecConfig cfg;
      cfg.lambda_index = mw.lambda_index;
      cfg.gop = a.gop;
      cfg.predictions = !a.no_predictions;
      const lvc::EncodedSequence es =
          lvc::encode_sequence(clip.frames, mw, cfg);
      lvc::RDPoint p;
      p.sequence = sequence_name(input);
      p.lambda_index = mw.lambda_index;
      p.bpp = double(es.bytes.size()) * 8.0 /
              (pixels * double(clip.frames.size()));
      for (size_t i = 0; i < clip.frames.size(); ++i) {
        p.psnr += lvc::psnr(es.recons[i], clip.frames[i]);
        p.msssim += lvc::ms_ssim(es.recons[i], clip.frames[i]);
      }
      p.psnr /= double(clip.frames.size());
      p.msssim /= double(clip.frames.size());
      pts.push_back(std::move(p));
    }
    return pts;
  };

  std::vector<std::future<std::vector<lvc::RDPoint>>> futures;
  for (const std::string& input : a.inputs) {
    futures.push_back(std::async(std::launch::async, eval_sequence, input));
  }
  std::vector<lvc::RDPoint> points;
  for (auto& f : futures) {
    for (lvc::RDPoint& p : f.get()) points.push_back(std::move(p));
  }

  for (const lvc::RDPoint& p : points) {
    std::printf("sequence=%s lambda=%d bpp=%.6f psnr=%.4f ms_ssim=%.6f\n",
                p.sequence.c_str(), p.lambda_index, p.bpp, p.psnr, p.msssim);
  }
  lvc::write_rd_csv(a.output, points);
  const std::string stem =
      (fs::path(a.output).parent_path() / fs::path(a.output).stem()).string();
  lvc::write_rd_svg(stem + ".psnr.svg", points, "psnr");
  lvc::write_rd_svg(stem + ".ms_ssim.svg", points, "ms_ssim");
  std::printf("wrote csv=%s svg=%s svg=%s\n", a.output.c_str(),
              (stem + ".psnr.svg").c_str(), (stem + ".ms_ssim.svg").c_str());
  return 0;
}

int cmd_bdrate(const std::string& anchor_path, const std::string& test_path) {
  std::vector<lvc::RDPoint> anchor, test;
  try {
    anchor = lvc::read_rd_csv(anchor_path);
    test = lvc::read_rd_csv(test_path);
  } catch (const lvc::Error& e) {
    throw UsageError(e.what());
  }
  auto group = [](const std::vector<lvc::RDPoint>& pts, bool use_psnr) {
    std::map<std::string, std::vector<std::pair<double, double>>> by_seq;
    for (const lvc::RDPoint& p : pts) {
      by_seq[p.sequence].push_back({p.bpp, use_psnr ? p.psnr : p.msssim});
    }
    return by_seq;
  };
  bool any = false;
  for (const bool use_psnr : {true, false}) {
    const auto ga = group(anchor, use_psnr);
    const auto gt = group(test, use_psnr);
    double sum = 0.0;
    int n = 0;
    for (const auto& [seq, apts] : ga) {
      auto it = gt.find(seq);
      if (it == gt.end()) continue;
      double bd = 0.0;
      try {
        bd = lvc::bd_rate(apts, it->second);
      } catch (const lvc::Error& e) {
        throw UsageError("sequence " + seq + ": " + e.what());
      }
      std::printf("sequence=%s metric=%s bdrate_pct=%.3f\n", seq.c_str(),
                  use_psnr ? "psnr" : "ms_ssim", bd);
      sum += bd;
      ++n;
      any = true;
    }
    if (n > 0) {
      std::printf("average metric=%s bdrate_pct=%.3f\n",
                  use_psnr ? "psnr" : "ms_ssim", sum / n);
    }
  }
  if (!any) {
    throw UsageError("the two CSV files share no sequence names");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned video codec: conditional latent-difference coding "
               "with multi-reference prediction"};
  app.require_subcommand(1);
  Args a;
  std::string anchor_csv, test_csv;

  auto add_common = [&](CLI::App* sub, bool with_weights) {
    sub->add_option("--input", a.inputs,
                    "input clip (.y4m file or PNG directory)");
    sub->add_option("--output", a.output, "output path");
    if (with_weights) {
      sub->add_option("--weights", a.weights, "model weights file (.rplw)");
    }
  };

  CLI::App* enc = app.add_subcommand("encode", "encode a clip to a bitstream");
  add_common(enc, true);
  enc->add_option("--lambda-index", a.lambda_index,
                  "rate point; must match the weights file")
      ->check(CLI::Range(0, lvc::kNumLambdas - 1));
  enc->add_option("--gop", a.gop,
                  "intra period (0 = single leading intra frame)")
      ->check(CLI::NonNegativeNumber);
  enc->add_flag("--no-predictions", a.no_predictions,
                "zero the motion/residual prediction paths");

  CLI::App* dec = app.add_subcommand("decode", "decode a bitstream");
  add_common(dec, true);

  CLI::App* trn = app.add_subcommand("train", "train weights on synthetic clips");
  add_common(trn, false);
  trn->add_option("--lambda-index", a.lambda_index, "rate point to train")
      ->check(CLI::Range(0, lvc::kNumLambdas - 1));
  trn->add_option("--seed", a.seed, "training seed (fully determines the run)");
  trn->add_option("--iters", a.iters, "base iterations")
      ->check(CLI::PositiveNumber);
  trn->add_option("--pframes", a.pframes, "curriculum cap on predicted frames")
      ->check(CLI::PositiveNumber);
  trn->add_option("--batch", a.batch, "clips per step")
      ->check(CLI::PositiveNumber);
  trn->add_option("--curriculum-step", a.curriculum_step,
                  "iterations between clip-length increments")
      ->check(CLI::PositiveNumber);
  trn->add_option("--clip-size", a.clip_size, "synthetic clip side length")
      ->check(CLI::PositiveNumber);
  trn->add_flag("--msssim-finetune", a.msssim_finetune,
                "append an MS-SSIM fine-tune of 20% extra iterations");
  trn->add_flag("--no-predictions", a.no_predictions,
                "train with the prediction paths zeroed");
  trn->add_option("--resume", a.resume,
                  "checkpoint to resume (weights path; sidecar at +.opt)");

  CLI::App* evl = app.add_subcommand(
      "eval", "encode sequences at every given weights file; write CSV + SVG");
  add_common(evl, true);
  evl->add_option("--gop", a.gop, "intra period")->check(CLI::NonNegativeNumber);
  evl->add_flag("--no-predictions", a.no_predictions,
                "zero the prediction paths");

  CLI::App* bdr = app.add_subcommand("bdrate",
                                     "compare two RD CSV files per sequence");
  bdr->add_option("--anchor", anchor_csv, "anchor curve CSV")->required();
  bdr->add_option("--test", test_csv, "test curve CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (enc->parsed()) return cmd_encode(a);
    if (dec->parsed()) return cmd_decode(a);
    if (trn->parsed()) return cmd_train(a);
    if (evl->parsed()) return cmd_eval(a);
    if (bdr->parsed()) return cmd_bdrate(anchor_csv, test_csv);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
