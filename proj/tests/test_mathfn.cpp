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
// The portable math kernels are compared against the C library, which
// serves as the independent oracle. The codec only needs them to be
// deterministic and accurate; the tolerances here are far tighter than
// anything the entropy models require.

#include <cmath>
#include <limits>

#include "doctest.h"
#include "lvc/mathfn.hpp"
#include "lvc/rng.hpp"

namespace {

using namespace lvc;  // NOLINT(build/namespaces)

double rel_err(double got, double want) {
  const double denom = std::max(std::fabs(want),
                                std::numeric_limits<double>::min());
  return std::fabs(got - want) / denom;
}

TEST_SUITE("mathfn") {

TEST_CASE("exp_f64 matches the C library over the useful range") {
  double worst = 0.0;
  for (int i = -7000; i <= 7000; ++i) {
    const double x = i * 0.1;
    worst = std::max(worst, rel_err(math::exp_f64(x), std::exp(x)));
  }
  CHECK_LT(worst, 1e-14);
  CHECK_EQ(math::exp_f64(0.0), 1.0);
}

TEST_CASE("log_f64 matches the C library") {
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double x = std::exp(rng.uniform_f64() * 600.0 - 300.0);
    worst = std::max(worst, rel_err(math::log_f64(x), std::log(x)));
  }
  CHECK_LT(worst, 1e-14);
  CHECK_EQ(math::log_f64(1.0), 0.0);
  CHECK_EQ(math::log_f64(0.0), -std::numeric_limits<double>::infinity());
}

TEST_CASE("exp/log f32 stay within a few ulp of the C library") {
  double worst_e = 0.0, worst_l = 0.0;
  for (int i = -800; i <= 800; ++i) {
    const float x = float(i) * 0.1f;
    worst_e = std::max(worst_e, rel_err(double(math::exp_f32(x)),
                                        double(std::exp(x))));
    if (x > 0.0f) {
      worst_l = std::max(worst_l, rel_err(double(math::log_f32(x)),
                                          double(std::log(x))));
    }
  }
  CHECK_LT(worst_e, 1e-6);
  CHECK_LT(worst_l, 1e-6);
}

TEST_CASE("erf_f64 matches the C library") {
  double worst = 0.0;
  for (int i = -600; i <= 600; ++i) {
    const double x = i * 0.01;
    worst = std::max(worst, rel_err(math::erf_f64(x), std::erf(x)));
  }
  CHECK_LT(worst, 1e-13);
  CHECK_EQ(math::erf_f64(0.0), 0.0);
}

TEST_CASE("erfc_f64 keeps relative accuracy deep into the positive tail") {
  // The Gaussian entropy model telescopes CDF differences; tail accuracy is
  // what keeps tiny probabilities positive and monotone.
  double worst = 0.0;
  for (int i = 0; i <= 2600; ++i) {
    const double x = i * 0.01;  // up to erfc(26) ~ 1e-295
    worst = std::max(worst, rel_err(math::erfc_f64(x), std::erfc(x)));
  }
  CHECK_LT(worst, 1e-12);
  // Negative side is dominated by the ~2 plateau; absolute agreement there.
  for (int i = -2600; i < 0; ++i) {
    const double x = i * 0.01;
    CHECK_LT(std::fabs(math::erfc_f64(x) - std::erfc(x)), 1e-14);
  }
}

TEST_CASE("normal CDF/SF identities") {
  CHECK_EQ(math::normal_cdf(0.0), 0.5);
  for (int i = -40; i <= 40; ++i) {
    const double x = i * 0.25;
    const double c = math::normal_cdf(x);
    const double s = math::normal_sf(x);
    CHECK_GT(c, 0.0);
    CHECK_GT(s, 0.0);
    CHECK_LT(rel_err(c + s, 1.0), 1e-12);
    // Symmetry between the two tails.
    CHECK_LT(rel_err(math::normal_cdf(-x), s), 1e-12);
  }
  // Oracle value: Phi(0.5) - Phi(-0.5) = erf(0.5/sqrt(2)).
  const double p = math::normal_cdf(0.5) - math::normal_cdf(-0.5);
  CHECK_LT(rel_err(p, std::erf(0.5 / std::sqrt(2.0))), 1e-13);
}

TEST_CASE("round_away implements half-away-from-zero") {
  CHECK_EQ(math::round_away(2.4), 2.0);
  CHECK_EQ(math::round_away(2.5), 3.0);
  CHECK_EQ(math::round_away(-2.5), -3.0);
  CHECK_EQ(math::round_away(-2.4), -2.0);
  CHECK_EQ(math::round_away(0.0), 0.0);
  CHECK_EQ(math::round_away(7.0), 7.0);
  CHECK_EQ(math::round_away(2.5f), 3.0f);
  CHECK_EQ(math::round_away(-0.5f), -1.0f);
}

}  // TEST_SUITE

}  // namespace
