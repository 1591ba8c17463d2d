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

#ifndef ACTRT_ENSEMBLE_HPP_
#define ACTRT_ENSEMBLE_HPP_

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "actrt/action.hpp"
#include "actrt/common.hpp"

namespace actrt {

enum class Strategy : uint8_t {
  kVote,
  kNaiveAverage,
  kStaticWeighted,
  kNone,
};

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

enum class TieBreak : uint8_t {
  kLowSet,   // the formula's "otherwise" branch takes ties
  kHighSet,  // escape hatch: ties trust the high-similarity set
};

struct EnsembleConfig {
  int horizon = 4;        // K: number of past steps consulted
  double tau = 0.5;       // similarity threshold
  Strategy strategy = Strategy::kVote;
  double static_weight_decay = 0.5;
  TieBreak tie_break = TieBreak::kLowSet;

  void validate() const;  // K >= 0, tau in (-1, 1), decay >= 0
};

// Ring of the most recent K+1 chunks keyed by origin step. Single writer,
// single reader; one buffer per episode.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(int horizon);

  // NonMonotonicStep unless chunk.origin_step exceeds all stored steps.
  void push_prediction(ActionChunk chunk);

  const ActionChunk* find(int64_t origin_step) const;
  int size() const { return static_cast<int>(chunks_.size()); }
  int capacity() const { return horizon_ + 1; }

 private:
  int horizon_;
  std::deque<ActionChunk> chunks_;
};

// Committee for timestep t: for k = K down to 0, the action that the chunk
// predicted at t-k assigned to timestep t, when that chunk is retained and
// long enough. The current prediction (k = 0) is always last; MissingCurrent
// if the buffer lacks the chunk with origin_step == t.
std::vector<Action> candidates_for(const HistoryBuffer& buf, int64_t t, int horizon);

struct VoteResult {
  Action chosen;
  std::vector<int> high_set;  // candidate indices with similarity > tau
  std::vector<int> low_set;   // the rest
  std::vector<double> similarities;
};

// Partition the committee by cosine similarity to the current (last)
// candidate and average the larger set; ties go to the low set unless the
// tie_break says otherwise. The gripper of the result is binarized.
VoteResult vote_ensemble(const std::vector<Action>& cands, double tau,
                         TieBreak tie_break = TieBreak::kLowSet);

// Uniform mean of the committee; gripper binarized.
Action naive_average(const std::vector<Action>& cands);

// Exponentially age-decayed mean: weight of the candidate aged k steps is
// proportional to exp(-decay * k), current prediction has age 0. Zero decay
// degenerates to the uniform mean.
Action static_weighted(const std::vector<Action>& cands, double decay);

struct AggregateResult {
  Action action;
  std::optional<VoteResult> vote;  // populated for the vote strategy
};

AggregateResult aggregate(const std::vector<Action>& cands, const EnsembleConfig& cfg);

// One JSONL trace record per ensembled step.
struct TraceRecord {
  int64_t t = 0;
  std::vector<double> similarities;
  std::vector<int> high_set;
  std::vector<int> low_set;
  Strategy strategy = Strategy::kVote;
  Action action;
};

std::string trace_record_to_json(const TraceRecord& rec);

}  // namespace actrt

#endif  // ACTRT_ENSEMBLE_HPP_
