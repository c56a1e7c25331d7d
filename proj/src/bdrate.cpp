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
// Bjontegaard rate deltas and model complexity accounting.

#include <algorithm>
#include <cmath>

#include "lvc/evalkit.hpp"
#include "lvc/mathfn.hpp"

namespace lvc {
namespace {

constexpr double kLn10 = 2.3025850929940456840179914546844;
constexpr double kInvLn10 = 1.0 / kLn10;

double log10_(double x) { return math::log_f64(x) * kInvLn10; }
double pow10_(double x) { return math::exp_f64(x * kLn10); }

// Cubic polynomial c[0] + c[1] q + c[2] q^2 + c[3] q^3.
struct Cubic {
  double c[4] = {0, 0, 0, 0};
};

// Solves the 4x4 system a * x = y with partial pivoting.
void solve4(double a[4][4], double y[4], double x[4]) {
  double scale = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) scale = std::max(scale, std::abs(a[i][j]));
  }
  int perm[4] = {0, 1, 2, 3};
  for (int col = 0; col < 4; ++col) {
    int best = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(a[perm[r]][col]) > std::abs(a[perm[best]][col])) best = r;
    }
    std::swap(perm[col], perm[best]);
    const double piv = a[perm[col]][col];
    LVC_CHECK(std::abs(piv) > 1e-10 * scale, "bd_rate: singular fit; "
              "quality values are too close together");
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[perm[r]][col] / piv;
      a[perm[r]][col] = 0.0;
      for (int cc = col + 1; cc < 4; ++cc) a[perm[r]][cc] -= f * a[perm[col]][cc];
      y[perm[r]] -= f * y[perm[col]];
    }
  }
  for (int col = 3; col >= 0; --col) {
    double s = y[perm[col]];
    for (int cc = col + 1; cc < 4; ++cc) s -= a[perm[col]][cc] * x[cc];
    x[col] = s / a[perm[col]][col];
  }
}

// Least-squares cubic of log10(bpp) as a function of affinely rescaled
// quality (the overlap interval is mapped to [-1, 1] for conditioning).
Cubic fit_log_rate(const std::vector<std::pair<double, double>>& curve,
                   double q_shift, double q_scale) {
  double m[4][4] = {};
  double rhs[4] = {};
  for (const auto& [bpp, quality] : curve) {
    LVC_CHECK(bpp > 0.0, "bd_rate: non-positive rate ", bpp);
    const double q = (quality - q_shift) * q_scale;
    const double lr = log10_(bpp);
    double qp[7];
    qp[0] = 1.0;
    for (int i = 1; i < 7; ++i) qp[i] = qp[i - 1] * q;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) m[i][j] += qp[i + j];
      rhs[i] += lr * qp[i];
    }
  }
  Cubic f;
  solve4(m, rhs, f.c);
  return f;
}

// Closed-form integral of the cubic over [lo, hi].
double integrate(const Cubic& f, double lo, double hi) {
  auto anti = [&](double q) {
    return q * (f.c[0] +
                q * (f.c[1] / 2 + q * (f.c[2] / 3 + q * f.c[3] / 4)));
  };
  return anti(hi) - anti(lo);
}

void check_curve(const std::vector<std::pair<double, double>>& curve,
                 const char* name) {
  LVC_CHECK(curve.size() >= 4, "bd_rate: ", name, " curve has ", curve.size(),
            " points; need at least 4");
  std::vector<double> q;
  for (const auto& p : curve) q.push_back(p.second);
  std::sort(q.begin(), q.end());
  for (size_t i = 1; i < q.size(); ++i) {
    LVC_CHECK(q[i] != q[i - 1], "bd_rate: ", name,
              " curve repeats quality value ", q[i]);
  }
}

double min_q(const std::vector<std::pair<double, double>>& c) {
  double v = c[0].second;
  for (const auto& p : c) v = std::min(v, p.second);
  return v;
}

double max_q(const std::vector<std::pair<double, double>>& c) {
  double v = c[0].second;
  for (const auto& p : c) v = std::max(v, p.second);
  return v;
}

}  // namespace

double bd_rate(const std::vector<std::pair<double, double>>& anchor,
               const std::vector<std::pair<double, double>>& test) {
  check_curve(anchor, "anchor");
  check_curve(test, "test");
  const double lo = std::max(min_q(anchor), min_q(test));
  const double hi = std::min(max_q(anchor), max_q(test));
  LVC_CHECK(hi > lo, "bd_rate: quality ranges do not overlap ([", min_q(anchor),
            ", ", max_q(anchor), "] vs [", min_q(test), ", ", max_q(test),
            "])");
  // Mapping the overlap to [-1, 1] keeps the normal equations well
  // conditioned; the average over the interval is invariant to the affine
  // reparameterization.
  const double shift = 0.5 * (lo + hi);
  const double scale = 2.0 / (hi - lo);
  const Cubic fa = fit_log_rate(anchor, shift, scale);
  const Cubic ft = fit_log_rate(test, shift, scale);
  const double avg = (integrate(ft, -1.0, 1.0) - integrate(fa, -1.0, 1.0)) / 2.0;
  return (pow10_(avg) - 1.0) * 100.0;
}

i64 count_params(const WeightsMap<float>& weights) {
  i64 n = 0;
  for (const auto& [name, t] : weights) n += t.numel();
  return n;
}

FlopProfile count_pframe_flops(const ModelWeights& mw, i64 height, i64 width,
                               bool predictions) {
  LVC_CHECK(height >= 2 && width >= 2, "count_pframe_flops: frame too small (",
            height, "x", width, ")");
  Tensor<float> gray(Shape{1, 3, height, width});
  for (i64 i = 0; i < gray.numel(); ++i) gray[i] = 0.5f;
  ReferenceState state = ReferenceState::init(gray);
  FlopProfile profile;
  encode_pframe(gray, state, mw.w, predictions, &profile);
  return profile;
}

}  // namespace lvc
