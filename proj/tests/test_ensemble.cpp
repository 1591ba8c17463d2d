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

#include "actrt/ensemble.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "actrt/common.hpp"
#include "support/oracles.hpp"

namespace actrt {
namespace {

Action make_action(std::initializer_list<double> values) {
  Action a;
  int d = 0;
  for (double v : values) a[d++] = v;
  return a;
}

Action random_action(Rng& rng, double scale = 1.0) {
  Action a;
  for (int d = 0; d < Action::kDims; ++d) a[d] = scale * rng.normal(0.0, 1.0);
  return a;
}

ActionChunk chunk_at(int64_t step, int n, double fill = 0.0) {
  ActionChunk chunk;
  chunk.origin_step = step;
  chunk.actions.assign(n, make_action({fill, fill, fill}));
  return chunk;
}

// Committees the suite generates: mostly candidates aligned with the
// current prediction, some antipodal outliers, occasionally a zero vector.
std::vector<Action> random_committee(Rng& rng, int size) {
  std::vector<Action> cands;
  const Action base = random_action(rng);
  for (int i = 0; i < size - 1; ++i) {
    const double kind = rng.uniform();
    Action a;
    if (kind < 0.2) {
      for (int d = 0; d < Action::kDims; ++d) {
        a[d] = -base[d] * rng.uniform(0.5, 3.0);
      }
    } else if (kind < 0.3) {
      a = Action{};  // idle
    } else if (kind < 0.6) {
      a = random_action(rng);
    } else {
      for (int d = 0; d < Action::kDims; ++d) {
        a[d] = base[d] + 0.1 * rng.normal(0.0, 1.0);
      }
    }
    cands.push_back(a);
  }
  cands.push_back(base);  // current prediction is always last
  return cands;
}

TEST(HistoryBuffer, CapacityEviction) {
  HistoryBuffer buf(1);  // capacity 2
  buf.push_prediction(chunk_at(1, 3));
  buf.push_prediction(chunk_at(2, 3));
  buf.push_prediction(chunk_at(3, 3));
  EXPECT_EQ(buf.size(), 2);
  EXPECT_EQ(buf.find(1), nullptr);
  EXPECT_NE(buf.find(2), nullptr);
  EXPECT_NE(buf.find(3), nullptr);
}

TEST(HistoryBuffer, MonotonicStepsEnforced) {
  HistoryBuffer buf(4);
  buf.push_prediction(chunk_at(2, 3));
  EXPECT_THROW(buf.push_prediction(chunk_at(2, 3)), NonMonotonicStep);
  EXPECT_THROW(buf.push_prediction(chunk_at(1, 3)), NonMonotonicStep);
  HistoryBuffer fresh(4);
  fresh.push_prediction(chunk_at(0, 3));
  EXPECT_EQ(fresh.size(), 1);
}

TEST(CandidatesFor, EpisodeStartHasOnlyCurrent) {
  HistoryBuffer buf(4);
  buf.push_prediction(chunk_at(0, 5, 0.3));
  const auto cands = candidates_for(buf, 0, 4);
  ASSERT_EQ(cands.size(), 1u);
  EXPECT_EQ(cands[0].dx, 0.3);
}

TEST(CandidatesFor, FullCommitteeAtHorizon) {
  HistoryBuffer buf(4);
  for (int t = 0; t <= 4; ++t) buf.push_prediction(chunk_at(t, 5, 0.1 * t));
  const auto cands = candidates_for(buf, 4, 4);
  EXPECT_EQ(cands.size(), 5u);  // chunk size and horizon both 5-wide
  // oldest first: candidate k comes from the chunk pushed at t - k
  EXPECT_EQ(cands.front().dx, 0.0);
  EXPECT_EQ(cands.back().dx, 0.4);
}

TEST(CandidatesFor, ShortChunksBoundCommittee) {
  HistoryBuffer buf(4);
  for (int t = 0; t <= 4; ++t) buf.push_prediction(chunk_at(t, 3));
  // k < N: chunks older than 2 steps cannot cover step 4
  EXPECT_EQ(candidates_for(buf, 4, 4).size(), 3u);
}

TEST(CandidatesFor, MissingCurrentRejected) {
  HistoryBuffer buf(4);
  buf.push_prediction(chunk_at(0, 5));
  EXPECT_THROW(candidates_for(buf, 1, 4), MissingCurrent);
}

TEST(VoteEnsemble, UnanimousCommittee) {
  const Action v = make_action({0.1, -0.2, 0.3, 0.0, 0.0, 0.0, 1.0});
  const std::vector<Action> cands(5, v);
  const VoteResult result = vote_ensemble(cands, 0.5);
  EXPECT_EQ(result.high_set.size(), 5u);
  EXPECT_TRUE(result.low_set.empty());
  for (int d = 0; d < Action::kDims; ++d) EXPECT_EQ(result.chosen[d], v[d]);
}

TEST(VoteEnsemble, RejectsAntipodalOutlier) {
  // three 0.9-scaled copies plus one antipodal candidate: the high set wins
  // and averages to 0.925 in the first dimension
  const Action c = make_action({1.0});
  Action scaled = c;
  scaled.dx = 0.9;
  Action reversed = c;
  reversed.dx = -1.0;
  const std::vector<Action> cands{reversed, scaled, scaled, scaled, c};
  const VoteResult result = vote_ensemble(cands, 0.5);
  EXPECT_EQ(result.high_set.size(), 4u);
  EXPECT_EQ(result.low_set.size(), 1u);
  EXPECT_EQ(result.low_set[0], 0);
  EXPECT_NEAR(result.chosen.dx, 0.925, 1e-12);
}

TEST(VoteEnsemble, TieGoesToLowSet) {
  // similarities (1, 0.9..., 0.2..., 0.1...)-shaped: two high, two low
  const Action current = make_action({1.0, 0.0});
  const Action near = make_action({1.0, 0.2});
  const Action far1 = make_action({0.2, 1.0});
  const Action far2 = make_action({0.1, 1.0});
  const std::vector<Action> cands{far1, far2, near, current};
  const VoteResult result = vote_ensemble(cands, 0.5);
  EXPECT_EQ(result.high_set.size(), 2u);
  EXPECT_EQ(result.low_set.size(), 2u);
  // the otherwise-branch picks the low set
  const Action expect_low = oracle::brute_force_mean({far1, far2});
  for (int d = 0; d < Action::kDims; ++d) {
    EXPECT_NEAR(result.chosen[d], expect_low[d], 1e-12);
  }
  // escape hatch flips the tie
  const VoteResult high = vote_ensemble(cands, 0.5, TieBreak::kHighSet);
  const Action expect_high = oracle::brute_force_mean({near, current});
  for (int d = 0; d < Action::kDims; ++d) {
    EXPECT_NEAR(high.chosen[d], expect_high[d], 1e-12);
  }
}

TEST(VoteEnsemble, SingleCandidateIdentity) {
  const Action c = make_action({0.3, 0.1, -0.2, 0.0, 0.0, 0.0, 1.0});
  const VoteResult result = vote_ensemble({c}, 0.5);
  EXPECT_EQ(result.high_set.size(), 1u);
  EXPECT_TRUE(result.low_set.empty());
  for (int d = 0; d < Action::kDims; ++d) EXPECT_EQ(result.chosen[d], c[d]);
}

TEST(VoteEnsemble, EmptyCommitteeRejected) {
  EXPECT_THROW(vote_ensemble({}, 0.5), EmptyCandidates);
  EXPECT_THROW(naive_average({}), EmptyCandidates);
  EXPECT_THROW(static_weighted({}, 1.0), EmptyCandidates);
}

TEST(VoteEnsemble, MatchesBruteForceOracle) {
  Rng rng(777);
  for (int trial = 0; trial < 1000; ++trial) {
    const int size = 1 + rng.uniform_int(0, 7);
    const std::vector<Action> cands = random_committee(rng, size);
    const double tau = 0.5;
    const VoteResult got = vote_ensemble(cands, tau);
    const oracle::VoteOracle want = oracle::brute_force_vote(cands, tau);
    ASSERT_EQ(got.high_set, want.high) << "trial " << trial;
    ASSERT_EQ(got.low_set, want.low) << "trial " << trial;
    for (size_t i = 0; i < cands.size(); ++i) {
      EXPECT_NEAR(got.similarities[i], want.similarities[i], 1e-12);
    }
    for (int d = 0; d < Action::kDims; ++d) {
      EXPECT_NEAR(got.chosen[d], want.chosen[d], 1e-12) << "trial " << trial;
    }
  }
}

TEST(VoteEnsemble, SelfInclusionProperty) {
  Rng rng(778);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<Action> cands = random_committee(rng, 1 + rng.uniform_int(0, 7));
    const double tau = rng.uniform(-0.99, 0.99);
    const VoteResult result = vote_ensemble(cands, tau);
    const int current = static_cast<int>(cands.size()) - 1;
    EXPECT_NE(std::find(result.high_set.begin(), result.high_set.end(), current),
              result.high_set.end());
    // partition completeness
    EXPECT_EQ(result.high_set.size() + result.low_set.size(), cands.size());
  }
}

TEST(VoteEnsemble, UnanimityEqualsNaiveAverageExactly) {
  Rng rng(779);
  for (int trial = 0; trial < 200; ++trial) {
    // all candidates close to the current one: every similarity above tau
    const Action base = random_action(rng);
    std::vector<Action> cands;
    for (int i = 0; i < 5; ++i) {
      Action a = base;
      for (int d = 0; d < Action::kDims; ++d) a[d] += 0.01 * rng.normal(0.0, 1.0);
      cands.push_back(a);
    }
    cands.push_back(base);
    const VoteResult vote = vote_ensemble(cands, 0.5);
    if (vote.low_set.empty()) {
      const Action avg = naive_average(cands);
      for (int d = 0; d < Action::kDims; ++d) EXPECT_EQ(vote.chosen[d], avg[d]);
    }
  }
}

TEST(VoteEnsemble, OutlierNeverInAveragedSet) {
  Rng rng(780);
  for (int trial = 0; trial < 200; ++trial) {
    const int aligned = 3 + rng.uniform_int(0, 3);
    const Action base = random_action(rng);
    std::vector<Action> cands;
    Action outlier;
    for (int d = 0; d < Action::kDims; ++d) outlier[d] = -base[d];
    const int outlier_pos = rng.uniform_int(0, aligned - 1);
    for (int i = 0; i < aligned - 1; ++i) {
      Action a = base;
      for (int d = 0; d < Action::kDims; ++d) a[d] *= rng.uniform(0.8, 1.2);
      cands.push_back(a);
    }
    cands.insert(cands.begin() + outlier_pos, outlier);
    cands.push_back(base);
    const VoteResult result = vote_ensemble(cands, 0.5);
    ASSERT_GT(result.high_set.size(), result.low_set.size());
    EXPECT_EQ(std::find(result.high_set.begin(), result.high_set.end(), outlier_pos),
              result.high_set.end());
  }
}

TEST(VoteEnsemble, PositiveScalingPreservesMembership) {
  Rng rng(781);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Action> cands = random_committee(rng, 2 + rng.uniform_int(0, 6));
    const VoteResult before = vote_ensemble(cands, 0.5);
    const int pick = rng.uniform_int(0, static_cast<int>(cands.size()) - 1);
    const double c = std::exp(rng.uniform(-2.0, 2.0));
    for (int d = 0; d < Action::kDims; ++d) cands[pick][d] *= c;
    const VoteResult after = vote_ensemble(cands, 0.5);
    EXPECT_EQ(before.high_set, after.high_set);
    EXPECT_EQ(before.low_set, after.low_set);
  }
}

TEST(NaiveAverage, TrivialAndOracle) {
  const Action v = make_action({0.5, 0.25});
  EXPECT_EQ(naive_average({v, v, v}).dx, 0.5);

  const Action plus = make_action({1.0});
  const Action minus = make_action({-1.0});
  const Action mean = naive_average({plus, minus});
  for (int d = 0; d < Action::kDims - 1; ++d) EXPECT_EQ(mean[d], 0.0);

  Rng rng(782);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Action> cands;
    for (int i = 0; i < 5; ++i) cands.push_back(random_action(rng));
    const Action got = naive_average(cands);
    const Action want = oracle::brute_force_mean(cands);
    for (int d = 0; d < Action::kDims; ++d) EXPECT_NEAR(got[d], want[d], 1e-12);
  }
}

TEST(StaticWeighted, LimitsAndHandComputation) {
  Rng rng(783);
  std::vector<Action> cands;
  for (int i = 0; i < 4; ++i) cands.push_back(random_action(rng));

  // zero decay is exactly the uniform mean
  const Action uniform = naive_average(cands);
  const Action gentle = static_weighted(cands, 0.0);
  for (int d = 0; d < Action::kDims; ++d) EXPECT_EQ(gentle[d], uniform[d]);

  // huge decay returns the current prediction
  const Action sharp = static_weighted(cands, 200.0);
  Action current = cands.back();
  current.g = current.g >= 0.5 ? 1.0 : 0.0;
  for (int d = 0; d < Action::kDims; ++d) EXPECT_NEAR(sharp[d], current[d], 1e-12);

  // two candidates, decay 1: weights (e^-1, 1) / (1 + e^-1), oldest first
  const Action old_one = make_action({1.0});
  const Action new_one = make_action({0.0, 1.0});
  const Action mixed = static_weighted({old_one, new_one}, 1.0);
  const double w_old = std::exp(-1.0) / (1.0 + std::exp(-1.0));
  const double w_new = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(mixed.dx, w_old * 1.0, 1e-12);
  EXPECT_NEAR(mixed.dy, w_new * 1.0, 1e-12);

  EXPECT_THROW(static_weighted(cands, -0.5), InvalidInput);
}

TEST(Aggregate, DispatchesAllStrategies) {
  Rng rng(784);
  const std::vector<Action> cands = random_committee(rng, 5);
  EnsembleConfig cfg;
  cfg.strategy = Strategy::kNone;
  const AggregateResult none = aggregate(cands, cfg);
  for (int d = 0; d < Action::kDims; ++d) EXPECT_EQ(none.action[d], cands.back()[d]);
  EXPECT_FALSE(none.vote.has_value());

  cfg.strategy = Strategy::kVote;
  const AggregateResult vote = aggregate(cands, cfg);
  EXPECT_TRUE(vote.vote.has_value());

  cfg.tau = 1.5;
  EXPECT_THROW(aggregate(cands, cfg), InvalidInput);
}

TEST(TraceRecordJson, SchemaKeys) {
  TraceRecord rec;
  rec.t = 12;
  rec.similarities = {1.0, 0.5};
  rec.high_set = {1};
  rec.low_set = {0};
  rec.strategy = Strategy::kVote;
  rec.action = make_action({0.1});
  const std::string text = trace_record_to_json(rec);
  for (const char* key : {"\"t\"", "\"similarities\"", "\"high\"", "\"low\"",
                          "\"strategy\"", "\"action\""}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
  EXPECT_NE(text.find("vote"), std::string::npos);
}

TEST(StrategyNames, RoundTrip) {
  for (const Strategy s : {Strategy::kVote, Strategy::kNaiveAverage,
                           Strategy::kStaticWeighted, Strategy::kNone}) {
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  }
  EXPECT_THROW(strategy_from_string("median"), InvalidInput);
}

}  // namespace
}  // namespace actrt
