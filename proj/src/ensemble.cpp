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

#include <json.hpp>

namespace actrt {

namespace {

// Mean anchored at the first member: exact when all members coincide, which
// keeps aggregation of a unanimous committee an identity.
Action anchored_mean(const std::vector<Action>& actions,
                     const std::vector<int>& members) {
  const Action& anchor = actions[members.front()];
  Action out;
  for (int d = 0; d < Action::kDims; ++d) {
    double acc = 0.0;
    for (int idx : members) acc += actions[idx][d] - anchor[d];
    out[d] = anchor[d] + acc / static_cast<double>(members.size());
  }
  return out;
}

void binarize_gripper(Action& a) { a.g = a.g >= 0.5 ? 1.0 : 0.0; }

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kVote: return "vote";
    case Strategy::kNaiveAverage: return "naive_average";
    case Strategy::kStaticWeighted: return "static_weighted";
    case Strategy::kNone: return "none";
  }
  return "vote";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "vote") return Strategy::kVote;
  if (s == "naive_average") return Strategy::kNaiveAverage;
  if (s == "static_weighted") return Strategy::kStaticWeighted;
  if (s == "none") return Strategy::kNone;
  throw InvalidInput("unknown strategy: " + s);
}

void EnsembleConfig::validate() const {
  if (horizon < 0) throw InvalidInput("ensemble horizon K must be >= 0");
  if (!(tau > -1.0 && tau < 1.0)) throw InvalidInput("tau must lie in (-1, 1)");
  if (!(static_weight_decay >= 0.0)) {
    throw InvalidInput("static weight decay must be nonnegative");
  }
}

HistoryBuffer::HistoryBuffer(int horizon) : horizon_(horizon) {
  if (horizon < 0) throw InvalidInput("history horizon must be >= 0");
}

void HistoryBuffer::push_prediction(ActionChunk chunk) {
  if (!chunks_.empty() && chunk.origin_step <= chunks_.back().origin_step) {
    throw NonMonotonicStep("pushed chunk origin_step " +
                           std::to_string(chunk.origin_step) +
                           " does not advance the buffer");
  }
  chunks_.push_back(std::move(chunk));
  while (static_cast<int>(chunks_.size()) > capacity()) chunks_.pop_front();
}

const ActionChunk* HistoryBuffer::find(int64_t origin_step) const {
  for (const ActionChunk& c : chunks_) {
    if (c.origin_step == origin_step) return &c;
  }
  return nullptr;
}

std::vector<Action> candidates_for(const HistoryBuffer& buf, int64_t t, int horizon) {
  if (horizon < 0) throw InvalidInput("horizon must be >= 0");
  const ActionChunk* current = buf.find(t);
  if (current == nullptr) {
    throw MissingCurrent("buffer lacks the prediction for step " + std::to_string(t));
  }
  std::vector<Action> cands;
  for (int k = horizon; k >= 0; --k) {
    const ActionChunk* chunk = buf.find(t - k);
    if (chunk == nullptr) continue;
    if (k >= chunk->size()) continue;  // chunk too short to cover step t
    cands.push_back(chunk->actions[k]);
  }
  return cands;
}

VoteResult vote_ensemble(const std::vector<Action>& cands, double tau,
                         TieBreak tie_break) {
  if (cands.empty()) throw EmptyCandidates("vote over an empty committee");
  const Action& current = cands.back();
  VoteResult result;
  result.similarities.reserve(cands.size());
  for (size_t i = 0; i < cands.size(); ++i) {
    const double s = cosine_similarity(current, cands[i]);
    result.similarities.push_back(s);
    if (s > tau) {
      result.high_set.push_back(static_cast<int>(i));
    } else {
      result.low_set.push_back(static_cast<int>(i));
    }
  }
  const bool high_wins =
      tie_break == TieBreak::kHighSet
          ? result.high_set.size() >= result.low_set.size()
          : result.high_set.size() > result.low_set.size();
  result.chosen = anchored_mean(cands, high_wins ? result.high_set : result.low_set);
  binarize_gripper(result.chosen);
  return result;
}

Action naive_average(const std::vector<Action>& cands) {
  if (cands.empty()) throw EmptyCandidates("average over an empty committee");
  std::vector<int> all(cands.size());
  for (size_t i = 0; i < cands.size(); ++i) all[i] = static_cast<int>(i);
  Action out = anchored_mean(cands, all);
  binarize_gripper(out);
  return out;
}

Action static_weighted(const std::vector<Action>& cands, double decay) {
  if (cands.empty()) throw EmptyCandidates("weighted average over an empty committee");
  if (!(decay >= 0.0)) throw InvalidInput("decay must be nonnegative");
  const size_t m = cands.size();
  // candidates are ordered oldest -> current, so age = m - 1 - index
  std::vector<double> w(m);
  double total = 0.0;
  for (size_t i = 0; i < m; ++i) {
    w[i] = std::exp(-decay * static_cast<double>(m - 1 - i));
    total += w[i];
  }
  const Action& anchor = cands.front();
  Action out;
  for (int d = 0; d < Action::kDims; ++d) {
    double acc = 0.0;
    for (size_t i = 0; i < m; ++i) acc += w[i] * (cands[i][d] - anchor[d]);
    out[d] = anchor[d] + acc / total;
  }
  binarize_gripper(out);
  return out;
}

AggregateResult aggregate(const std::vector<Action>& cands, const EnsembleConfig& cfg) {
  cfg.validate();
  if (cands.empty()) throw EmptyCandidates("aggregate over an empty committee");
  AggregateResult res;
  switch (cfg.strategy) {
    case Strategy::kVote: {
      res.vote = vote_ensemble(cands, cfg.tau, cfg.tie_break);
      res.action = res.vote->chosen;
      break;
    }
    case Strategy::kNaiveAverage:
      res.action = naive_average(cands);
      break;
    case Strategy::kStaticWeighted:
      res.action = static_weighted(cands, cfg.static_weight_decay);
      break;
    case Strategy::kNone:
      res.action = cands.back();
      break;
  }
  return res;
}

std::string trace_record_to_json(const TraceRecord& rec) {
  nlohmann::json j;
  j["t"] = rec.t;
  j["similarities"] = rec.similarities;
  j["high"] = rec.high_set;
  j["low"] = rec.low_set;
  j["strategy"] = to_string(rec.strategy);
  j["action"] = rec.action.to_array();
  return j.dump();
}

}  // namespace actrt
