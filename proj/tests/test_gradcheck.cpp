// Copyright 2025 The actrt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "actrt/common.hpp"
#include "actrt/head.hpp"
#include "support/oracles.hpp"

namespace actrt {
namespace {

struct Instance {
  HeadParamsD params;
  std::vector<double> input;
  std::vector<double> projection;  // grad_output
};

// Central differences are meaningless across a ReLU kink, so instances keep
// every pre-activation away from zero by a safe margin.
Instance draw_smooth_instance(Rng& rng, int h, int n, int a,
                              OutputActivation activation, double margin) {
  while (true) {
    Instance inst;
    inst.params = init_params<double>(h, n, a, rng.next_u64(), activation);
    for (auto& v : inst.params.bias[0]) v = rng.normal(0.0, 0.3);
    for (auto& v : inst.params.beta[1]) v = rng.normal(0.0, 0.2);
    inst.input.resize(h);
    for (auto& v : inst.input) v = rng.normal(0.0, 1.0);
    inst.projection.resize(static_cast<size_t>(n) * a);
    for (auto& v : inst.projection) v = rng.normal(0.0, 1.0);

    HeadForwardCacheT<double> cache;
    head_forward_cached<double>(inst.input, inst.params, cache);
    double min_abs = margin + 1.0;
    for (int s = 0; s < 4; ++s) {
      for (double z : cache.pre_act[s]) min_abs = std::min(min_abs, std::abs(z));
    }
    if (min_abs > margin) return inst;
  }
}

double max_rel_error(const HeadGradsD& analytic, const oracle::FdGrads& numeric) {
  double worst = 0.0;
  for (int s = 0; s < 4; ++s) {
    for (size_t i = 0; i < analytic.weight[s].size(); ++i) {
      worst = std::max(worst, oracle::rel_error(analytic.weight[s][i],
                                                numeric.weight[s][i]));
    }
    for (size_t i = 0; i < analytic.bias[s].size(); ++i) {
      worst = std::max(worst, oracle::rel_error(analytic.bias[s][i], numeric.bias[s][i]));
    }
    for (size_t i = 0; i < analytic.gamma[s].size(); ++i) {
      worst = std::max(worst,
                       oracle::rel_error(analytic.gamma[s][i], numeric.gamma[s][i]));
    }
    for (size_t i = 0; i < analytic.beta[s].size(); ++i) {
      worst = std::max(worst, oracle::rel_error(analytic.beta[s][i], numeric.beta[s][i]));
    }
  }
  for (size_t i = 0; i < analytic.input.size(); ++i) {
    worst = std::max(worst, oracle::rel_error(analytic.input[i], numeric.input[i]));
  }
  return worst;
}

TEST(GradCheck, AllParametersMatchCentralDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance inst =
        draw_smooth_instance(rng, 8, 2, 3, OutputActivation::kRelu, 1e-3);
    const HeadGradsD analytic =
        head_backward<double>(inst.input, inst.params, inst.projection);
    const oracle::FdGrads numeric =
        oracle::finite_difference_grads(inst.input, inst.params, inst.projection, 1e-5);
    EXPECT_LT(max_rel_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(GradCheck, LinearOutputActivation) {
  Rng rng(2025);
  const Instance inst =
      draw_smooth_instance(rng, 8, 2, 3, OutputActivation::kLinear, 1e-3);
  const HeadGradsD analytic =
      head_backward<double>(inst.input, inst.params, inst.projection);
  const oracle::FdGrads numeric =
      oracle::finite_difference_grads(inst.input, inst.params, inst.projection, 1e-5);
  EXPECT_LT(max_rel_error(analytic, numeric), 1e-4);
}

TEST(GradCheck, ZeroGradOutputGivesZeroGrads) {
  Rng rng(2026);
  const Instance inst = draw_smooth_instance(rng, 8, 2, 3, OutputActivation::kRelu, 0.0);
  const std::vector<double> zero(inst.projection.size(), 0.0);
  const HeadGradsD grads = head_backward<double>(inst.input, inst.params, zero);
  for (int s = 0; s < 4; ++s) {
    for (double g : grads.weight[s]) EXPECT_EQ(g, 0.0);
    for (double g : grads.bias[s]) EXPECT_EQ(g, 0.0);
    for (double g : grads.gamma[s]) EXPECT_EQ(g, 0.0);
    for (double g : grads.beta[s]) EXPECT_EQ(g, 0.0);
  }
  for (double g : grads.input) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, InactiveReluUnitsReceiveNoWeightGradient) {
  Rng rng(2027);
  const int h = 8;
  const Instance inst = draw_smooth_instance(rng, h, 2, 3, OutputActivation::kRelu, 0.0);
  HeadForwardCacheT<double> cache;
  head_forward_cached<double>(inst.input, inst.params, cache);
  HeadGradsD grads = HeadGradsD::zeros_like(inst.params);
  head_backward_accumulate<double>(inst.params, cache, inst.projection, grads);

  bool found_inactive = false;
  for (int j = 0; j < h; ++j) {
    if (cache.pre_act[0][j] < 0.0) {
      found_inactive = true;
      EXPECT_EQ(grads.bias[0][j], 0.0);
      for (int r = 0; r < h; ++r) {
        EXPECT_EQ(grads.weight[0][r * h + j], 0.0);  // incoming column of unit j
      }
    }
  }
  EXPECT_TRUE(found_inactive);
}

TEST(GradCheck, BackwardValidatesShapes) {
  const auto p = init_params<double>(8, 2, 3, 1);
  std::vector<double> input(8, 0.1);
  std::vector<double> bad(5, 0.0);
  EXPECT_THROW(head_backward<double>(input, p, bad), ShapeMismatch);
}

}  // namespace
}  // namespace actrt
