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

#include "actrt/action.hpp"

#include <gtest/gtest.h>

#include "actrt/common.hpp"
#include "support/oracles.hpp"

namespace actrt {
namespace {

Action action_with(int dim, double value) {
  Action a;
  a[dim] = value;
  return a;
}

TEST(ComputeStats, UniformGridPercentiles) {
  // 100 values evenly spaced over [-1, 1]: the 1st/99th percentiles fall at
  // -0.98 / 0.98 under linear interpolation
  std::vector<Action> dataset;
  for (int i = 0; i < 100; ++i) {
    Action a;
    for (int d = 0; d < Action::kContinuousDims; ++d) {
      a[d] = -1.0 + 2.0 * i / 99.0;
    }
    dataset.push_back(a);
  }
  const NormalizationStats stats = compute_stats(dataset);
  EXPECT_NEAR(stats.q_low[0], -0.98, 1e-12);
  EXPECT_NEAR(stats.q_high[0], 0.98, 1e-12);
}

TEST(ComputeStats, TwoValueSplit) {
  std::vector<Action> dataset;
  for (int i = 0; i < 100; ++i) {
    Action a;
    for (int d = 0; d < Action::kContinuousDims; ++d) a[d] = i < 50 ? -1.0 : 1.0;
    dataset.push_back(a);
  }
  const NormalizationStats stats = compute_stats(dataset);
  EXPECT_EQ(stats.q_low[0], -1.0);
  EXPECT_EQ(stats.q_high[0], 1.0);
}

TEST(ComputeStats, RepeatedActionIsDegenerate) {
  std::vector<Action> dataset(10, action_with(0, 0.25));
  EXPECT_THROW(compute_stats(dataset), DegenerateDimension);
}

TEST(ComputeStats, EmptyDatasetRejected) {
  EXPECT_THROW(compute_stats({}), EmptyDataset);
}

TEST(ComputeStats, MatchesSortOracleOnRandomData) {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + rng.uniform_int(0, 9998);
    std::vector<Action> dataset(n);
    std::vector<std::vector<double>> columns(Action::kContinuousDims);
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < Action::kContinuousDims; ++d) {
        const double v = rng.normal(0.0, 2.0);
        dataset[i][d] = v;
        columns[d].push_back(v);
      }
    }
    const NormalizationStats stats = compute_stats(dataset);
    for (int d = 0; d < Action::kContinuousDims; ++d) {
      EXPECT_NEAR(stats.q_low[d], oracle::percentile(columns[d], 1.0), 1e-12);
      EXPECT_NEAR(stats.q_high[d], oracle::percentile(columns[d], 99.0), 1e-12);
    }
  }
}

NormalizationStats symmetric_unit_stats() {
  NormalizationStats stats;
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    stats.q_low[d] = -1.0;
    stats.q_high[d] = 1.0;
  }
  return stats;
}

TEST(Normalize, EndpointsMidpointAndClipping) {
  const NormalizationStats stats = symmetric_unit_stats();
  EXPECT_EQ(normalize_action(action_with(0, -1.0), stats).dx, 0.0);
  EXPECT_EQ(normalize_action(action_with(0, 1.0), stats).dx, 1.0);
  EXPECT_EQ(normalize_action(action_with(0, 0.0), stats).dx, 0.5);
  EXPECT_EQ(normalize_action(action_with(0, 6.0), stats).dx, 1.0);  // clipped
  EXPECT_EQ(normalize_action(action_with(0, -9.0), stats).dx, 0.0);
}

TEST(Normalize, GripperPassesThrough) {
  const NormalizationStats stats = symmetric_unit_stats();
  Action a;
  a.g = 0.37;
  EXPECT_EQ(normalize_action(a, stats).g, 0.37);
}

TEST(Denormalize, RoundTripIdentityOnInteriorValues) {
  Rng rng(7);
  for (const NormRange range : {NormRange::kUnit, NormRange::kSymmetric}) {
    NormalizationStats stats;
    stats.range = range;
    for (int d = 0; d < Action::kContinuousDims; ++d) {
      stats.q_low[d] = rng.uniform(-2.0, -0.1);
      stats.q_high[d] = rng.uniform(0.1, 2.0);
    }
    for (int trial = 0; trial < 200; ++trial) {
      Action a;
      for (int d = 0; d < Action::kContinuousDims; ++d) {
        a[d] = rng.uniform(stats.q_low[d], stats.q_high[d]);
      }
      a.g = rng.uniform() > 0.5 ? 1.0 : 0.0;
      const Action back = denormalize_action(normalize_action(a, stats), stats);
      for (int d = 0; d < Action::kContinuousDims; ++d) {
        EXPECT_NEAR(back[d], a[d], 1e-9 * std::max(1.0, std::abs(a[d])));
      }
      EXPECT_EQ(back.g, a.g);
    }
  }
}

TEST(Denormalize, GripperRoundsAtHalf) {
  const NormalizationStats stats = symmetric_unit_stats();
  Action a = normalize_action(Action{}, stats);
  a.g = 0.7;
  EXPECT_EQ(denormalize_action(a, stats).g, 1.0);
  a.g = 0.49;
  EXPECT_EQ(denormalize_action(a, stats).g, 0.0);
  EXPECT_TRUE(denormalize_action(a, stats).executable());
}

TEST(Denormalize, OutOfRangeRejected) {
  const NormalizationStats stats = symmetric_unit_stats();
  EXPECT_THROW(denormalize_action(action_with(0, 1.5), stats), OutOfRange);
  NormalizationStats sym = stats;
  sym.range = NormRange::kSymmetric;
  EXPECT_THROW(denormalize_action(action_with(1, -1.01), sym), OutOfRange);
  EXPECT_NO_THROW(denormalize_action(action_with(1, -1.0), sym));
}

TEST(Cosine, KnownValues) {
  const std::vector<double> e0{1, 0, 0, 0, 0, 0, 0};
  const std::vector<double> e1{0, 1, 0, 0, 0, 0, 0};
  std::vector<double> neg = e0;
  neg[0] = -1.0;
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, e0), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, e1), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, neg), -1.0);
}

TEST(Cosine, LengthMismatchRejected) {
  const std::vector<double> u{1, 0, 0};
  const std::vector<double> v{1, 0};
  EXPECT_THROW(cosine_similarity(u, v), LengthMismatch);
}

TEST(Cosine, NearZeroConvention) {
  const std::vector<double> zero(7, 0.0);
  std::vector<double> tiny(7, 0.0);
  tiny[2] = 1e-14;
  const std::vector<double> unit{0, 0, 1, 0, 0, 0, 0};
  EXPECT_EQ(cosine_similarity(zero, zero), 1.0);
  EXPECT_EQ(cosine_similarity(zero, tiny), 1.0);
  EXPECT_EQ(cosine_similarity(zero, unit), 0.0);
  EXPECT_EQ(cosine_similarity(unit, tiny), 0.0);
}

TEST(Cosine, SelfSimilarityProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> u(7);
    for (auto& x : u) x = rng.normal(0.0, 1.0);
    EXPECT_NEAR(cosine_similarity(u, u), 1.0, 1e-12);
  }
}

TEST(Cosine, PositiveScaleInvarianceProperty) {
  Rng rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> u(7), v(7), cu(7);
    const double c = std::exp(rng.uniform(-3.0, 3.0));
    for (int d = 0; d < 7; ++d) {
      u[d] = rng.normal(0.0, 1.0);
      v[d] = rng.normal(0.0, 1.0);
      cu[d] = c * u[d];
    }
    EXPECT_NEAR(cosine_similarity(cu, v), cosine_similarity(u, v), 1e-12);
  }
}

TEST(StatsJson, RoundTripAndSchema) {
  NormalizationStats stats = symmetric_unit_stats();
  stats.range = NormRange::kSymmetric;
  stats.q_low[3] = -0.25;
  const std::string text = stats.to_json_string();
  EXPECT_NE(text.find("\"q_low\""), std::string::npos);
  EXPECT_NE(text.find("\"q_high\""), std::string::npos);
  EXPECT_NE(text.find("\"range\""), std::string::npos);
  EXPECT_NE(text.find("symmetric"), std::string::npos);
  const NormalizationStats back = NormalizationStats::from_json_string(text);
  EXPECT_EQ(back.range, stats.range);
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    EXPECT_EQ(back.q_low[d], stats.q_low[d]);
    EXPECT_EQ(back.q_high[d], stats.q_high[d]);
  }
  EXPECT_THROW(NormalizationStats::from_json_string("{\"q_low\": [1]}"), IoError);
}

TEST(ChunkInvariants, IndexingAndExecutable) {
  ActionChunk chunk;
  chunk.origin_step = 42;
  chunk.actions.resize(8);
  EXPECT_EQ(chunk.size(), 8);
  Action a;
  a.g = 0.5;
  EXPECT_FALSE(a.executable());
  a.g = 1.0;
  EXPECT_TRUE(a.executable());
  EXPECT_THROW(Action::from_span(std::vector<double>{1, 2, 3}), LengthMismatch);
}

}  // namespace
}  // namespace actrt
