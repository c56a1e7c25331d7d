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
// End-to-end tests of the command-line binary, driven as a subprocess.
// The binary path comes from the LVC_BIN environment variable (set by the
// test harness); every case skips with a message when it is missing.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lvc/evalkit.hpp"
#include "lvc/training.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lvc;  // NOLINT(build/namespaces)

const char* cli_bin() { return std::getenv("LVC_BIN"); }

// The per-process scratch directory, wiped once at first use.
const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "lvc_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  static int serial = 0;
  const fs::path out = work_dir() / ("stdout_" + std::to_string(serial));
  const fs::path err = work_dir() / ("stderr_" + std::to_string(serial));
  ++serial;
  const std::string cmd = std::string(cli_bin()) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// A small synthetic test clip written once as Y4M.
const fs::path& clip_path() {
  static const fs::path p = [] {
    VideoClip clip;
    clip.width = 16;
    clip.height = 16;
    clip.fps_num = 25;
    clip.fps_den = 1;
    for (int t = 0; t < 3; ++t) {
      Tensor<float> f(Shape{1, 3, 16, 16});
      for (i64 c = 0; c < 3; ++c) {
        for (i64 y = 0; y < 16; ++y) {
          for (i64 x = 0; x < 16; ++x) {
            f.at(0, c, y, x) = float(
                0.5 + 0.3 * std::sin(0.7 * double(x + 2 * t) + double(c)) *
                          std::cos(0.5 * double(y)));
          }
        }
      }
      clip.frames.push_back(std::move(f));
    }
    fs::path path = work_dir() / "clip.y4m";
    write_y4m(path.string(), clip);
    return path;
  }();
  return p;
}

// Weights trained by the CLI itself (2 iterations, tiny clips); shared by
// the encode/decode/eval cases. Also checks train determinism across runs.
const fs::path& tiny_weights() {
  static const fs::path p = [] {
    const fs::path w1 = work_dir() / "w1.rplw";
    const fs::path w2 = work_dir() / "w2.rplw";
    const std::string flags =
        " --iters 2 --clip-size 8 --seed 7 --curriculum-step 500";
    RunResult r1 = run_cli("train --output " + w1.string() + flags);
    RunResult r2 = run_cli("train --output " + w2.string() + flags);
    REQUIRE_EQ(r1.code, 0);
    REQUIRE_EQ(r2.code, 0);
    REQUIRE_EQ(slurp(w1), slurp(w2));  // bitwise repeatable
    REQUIRE_NE(r1.out.find("trained iters=2"), std::string::npos);
    return w1;
  }();
  return p;
}

#define REQUIRE_CLI_BIN()                                        \
  if (cli_bin() == nullptr) {                                    \
    MESSAGE("LVC_BIN is not set; skipping the CLI subprocess " \
            "tests");                                            \
    return;                                                      \
  }

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 2 and leave no output") {
  REQUIRE_CLI_BIN();
  CHECK_EQ(run_cli("--help").code, 0);
  CHECK_EQ(run_cli("").code, 2);                       // missing subcommand
  CHECK_EQ(run_cli("encode --frobnicate").code, 2);    // unknown flag
  CHECK_EQ(run_cli("train --iters 0 --output " +
                   (work_dir() / "x.rplw").string()).code, 2);

  const fs::path out = work_dir() / "never_written.rplv";
  RunResult r = run_cli("encode --input " + clip_path().string() +
                        " --weights " + (work_dir() / "nope.rplw").string() +
                        " --output " + out.string());
  CHECK_EQ(r.code, 2);
  CHECK_NE(r.err.find("error:"), std::string::npos);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("train is deterministic and encode/decode round-trip") {
  REQUIRE_CLI_BIN();
  const fs::path bits = work_dir() / "clip.rplv";
  {
    RunResult r = run_cli("encode --input " + clip_path().string() +
                          " --weights " + tiny_weights().string() +
                          " --output " + bits.string() + " --gop 2");
    REQUIRE_EQ(r.code, 0);
    CHECK_NE(r.out.find("total frames=3"), std::string::npos);
    const std::string payload = slurp(bits);
    REQUIRE_GE(payload.size(), 4u);
    CHECK_EQ(payload.substr(0, 4), "RPLV");

    // Encoding again produces the identical stream.
    const fs::path bits2 = work_dir() / "clip2.rplv";
    RunResult r2 = run_cli("encode --input " + clip_path().string() +
                           " --weights " + tiny_weights().string() +
                           " --output " + bits2.string() + " --gop 2");
    REQUIRE_EQ(r2.code, 0);
    CHECK_EQ(payload, slurp(bits2));
  }

  // Decode to a PNG directory and to a Y4M stream.
  const fs::path outdir = work_dir() / "decoded_frames";
  RunResult rd = run_cli("decode --input " + bits.string() + " --weights " +
                         tiny_weights().string() + " --output " +
                         outdir.string());
  REQUIRE_EQ(rd.code, 0);
  CHECK_NE(rd.out.find("decoded frames=3"), std::string::npos);
  VideoClip png = load_png_dir(outdir.string());
  CHECK_EQ(png.frames.size(), 3u);
  CHECK_EQ(png.width, 16);
  CHECK_EQ(png.height, 16);

  const fs::path outy4m = work_dir() / "decoded.y4m";
  RunResult ry = run_cli("decode --input " + bits.string() + " --weights " +
                         tiny_weights().string() + " --output " +
                         outy4m.string());
  REQUIRE_EQ(ry.code, 0);
  VideoClip y4m = load_y4m(outy4m.string());
  REQUIRE_EQ(y4m.frames.size(), 3u);
  // Both sinks hold the same 8-bit-quantized reconstruction.
  for (size_t t = 0; t < 3; ++t) {
    for (i64 i = 0; i < y4m.frames[t].numel(); ++i) {
      CHECK_LE(std::fabs(double(y4m.frames[t][i]) - double(png.frames[t][i])),
               1.5 / 255.0);
    }
  }
}

TEST_CASE("decode rejects corrupt streams; encode rejects a wrong lambda") {
  REQUIRE_CLI_BIN();
  const fs::path bad = work_dir() / "bad.rplv";
  {
    std::ofstream f(bad, std::ios::binary);
    f << "XXXXjunkjunkjunk";
  }
  CHECK_EQ(run_cli("decode --input " + bad.string() + " --weights " +
                   tiny_weights().string() + " --output " +
                   (work_dir() / "bad_out.y4m").string()).code, 2);

  // Valid magic, corrupted header: the decoder's own validation fires.
  const fs::path bits = work_dir() / "clip.rplv";
  if (!fs::exists(bits)) {
    REQUIRE_EQ(run_cli("encode --input " + clip_path().string() +
                       " --weights " + tiny_weights().string() +
                       " --output " + bits.string() + " --gop 2").code, 0);
  }
  std::string payload = slurp(bits);
  payload[4] = char(payload[4] ^ 0x7F);
  const fs::path tampered = work_dir() / "tampered.rplv";
  {
    std::ofstream f(tampered, std::ios::binary);
    f << payload;
  }
  CHECK_EQ(run_cli("decode --input " + tampered.string() + " --weights " +
                   tiny_weights().string() + " --output " +
                   (work_dir() / "tampered_out.y4m").string()).code, 2);

  // The tiny weights are trained at the default rate point (index 2).
  CHECK_EQ(run_cli("encode --input " + clip_path().string() + " --weights " +
                   tiny_weights().string() + " --lambda-index 0 --output " +
                   (work_dir() / "mismatch.rplv").string()).code, 2);
}

TEST_CASE("internal failures exit with code 1") {
  REQUIRE_CLI_BIN();
  RunResult r = run_cli("encode --input " + clip_path().string() +
                        " --weights " + tiny_weights().string() +
                        " --output /nonexistent_dir_zzz/out.rplv");
  CHECK_EQ(r.code, 1);
  CHECK_NE(r.err.find("error:"), std::string::npos);
}

TEST_CASE("train resumes a checkpoint bit-exactly across the process line") {
  REQUIRE_CLI_BIN();
  TrainConfig cfg;
  cfg.lambda_index = 2;
  cfg.max_pframes = 2;
  cfg.curriculum_step = 3;
  cfg.clip_h = cfg.clip_w = 8;
  const u64 seed = 9;

  // Two steps in-process, checkpoint, two more via the CLI.
  Trainer tr(cfg, init_weights(seed, cfg.lambda_index), seed);
  tr.step();
  tr.step();
  const fs::path ck = work_dir() / "ck.rplw";
  tr.save_checkpoint(ck.string());

  const fs::path final_w = work_dir() / "resumed.rplw";
  RunResult r = run_cli("train --resume " + ck.string() +
                        " --iters 4 --clip-size 8 --pframes 2"
                        " --curriculum-step 3 --output " + final_w.string());
  REQUIRE_EQ(r.code, 0);

  // The uninterrupted run must land on the same weights.
  tr.step();
  tr.step();
  ModelWeights cli_w = load_weights(final_w.string());
  CHECK_EQ(weights_fingerprint(cli_w), weights_fingerprint(tr.weights()));

  // A missing sidecar is a usage error.
  CHECK_EQ(run_cli("train --resume " + (work_dir() / "void.rplw").string() +
                   " --iters 4 --output " +
                   (work_dir() / "void_out.rplw").string()).code, 2);
}

TEST_CASE("eval writes CSV and SVG reports") {
  REQUIRE_CLI_BIN();
  const fs::path csv = work_dir() / "rd.csv";
  RunResult r = run_cli("eval --input " + clip_path().string() +
                        " --weights " + tiny_weights().string() +
                        " --output " + csv.string());
  REQUIRE_EQ(r.code, 0);
  std::vector<RDPoint> pts = read_rd_csv(csv.string());
  REQUIRE_EQ(pts.size(), 1u);
  CHECK_EQ(pts[0].sequence, "clip");
  CHECK_EQ(pts[0].lambda_index, 2);
  CHECK_GT(pts[0].bpp, 0.0);
  CHECK_GT(pts[0].psnr, 0.0);
  CHECK(fs::exists(work_dir() / "rd.psnr.svg"));
  CHECK(fs::exists(work_dir() / "rd.ms_ssim.svg"));
}

TEST_CASE("bdrate of a file against itself is zero for every sequence") {
  REQUIRE_CLI_BIN();
  const fs::path csv = work_dir() / "curve.csv";
  std::vector<RDPoint> pts;
  for (int i = 0; i < 4; ++i) {
    pts.push_back({"alpha", i, 0.1 * std::pow(2.0, i), 30.0 + 2.5 * i,
                   0.90 + 0.02 * i});
    pts.push_back({"beta", i, 0.07 * std::pow(2.0, i), 29.0 + 2.5 * i,
                   0.89 + 0.02 * i});
  }
  write_rd_csv(csv.string(), pts);
  RunResult r = run_cli("bdrate --anchor " + csv.string() + " --test " +
                        csv.string());
  REQUIRE_EQ(r.code, 0);
  // Two sequences x two metrics, plus two averages: all exactly zero.
  int lines = 0;
  std::istringstream is(r.out);
  std::string line;
  while (std::getline(is, line)) {
    if (line.find("bdrate_pct=") == std::string::npos) continue;
    ++lines;
    CHECK_NE(line.find("bdrate_pct=0.000"), std::string::npos);
  }
  CHECK_EQ(lines, 6);

  // Curves that share no sequences cannot be compared.
  const fs::path other = work_dir() / "other.csv";
  for (auto& p : pts) p.sequence += "_x";
  write_rd_csv(other.string(), pts);
  CHECK_EQ(run_cli("bdrate --anchor " + csv.string() + " --test " +
                   other.string()).code, 2);
  CHECK_EQ(run_cli("bdrate --anchor " + csv.string() + " --test " +
                   (work_dir() / "no_such.csv").string()).code, 2);
}

}  // TEST_SUITE

}  // namespace
