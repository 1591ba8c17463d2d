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

#ifndef ACTRT_POLICY_HPP_
#define ACTRT_POLICY_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "actrt/action.hpp"
#include "actrt/common.hpp"
#include "actrt/head.hpp"

namespace actrt {

// Final-layer hidden states of one decoded sequence plus the action-token
// mask. Batch processing is sequence-at-a-time.
struct HiddenSequence {
  Mat<float> hidden;              // L x H
  std::vector<uint8_t> act_mask;  // length L, nonzero at action-token rows
};

// Counts sequential decoder forward passes. Owned by one episode context;
// concurrent episodes each keep their own.
struct PassCounter {
  uint64_t decoder_forward_passes = 0;
};

// Hidden vectors at masked positions, in sequence order. NoActToken when the
// mask is empty.
std::vector<std::vector<float>> extract_act_hidden(const HiddenSequence& seq);

// Deterministic stand-in for the VLM backbone: a hash-seeded affine map from
// (observation, instruction) to hidden states, with the requested number of
// action-token positions appended at the sequence tail. Per-pass busy-work
// makes decoding cost measurable for the benchmark harness.
struct PseudoBackboneConfig {
  int hidden_width = 64;
  uint64_t seed = 0;
  uint64_t prefill_work = 0;  // busy-work iterations once per query
  uint64_t decode_work = 0;   // busy-work iterations per generated token
};

class PseudoBackbone {
 public:
  explicit PseudoBackbone(const PseudoBackboneConfig& config);

  // Emits instr.size() prompt positions plus act_tokens generated positions;
  // the counter advances once per generated position.
  HiddenSequence generate(std::span<const double> obs, std::span<const int> instr,
                          int act_tokens, PassCounter& counter) const;

  // Emulates token-per-dimension autoregressive decoding for a chunk of
  // chunk_size actions: chunk_size * action_dim sequential passes. Returns
  // the pass delta.
  uint64_t serial_decode_baseline(std::span<const double> obs,
                                  std::span<const int> instr, int chunk_size,
                                  int action_dim, PassCounter& counter) const;

  const PseudoBackboneConfig& config() const { return config_; }

 private:
  void run_busy_work(uint64_t iters) const;
  float feature(std::span<const double> obs, uint64_t row_kind, int64_t row_id,
                int dim) const;

  PseudoBackboneConfig config_;
  mutable volatile uint64_t busy_sink_ = 0;
};

// Full pipeline: backbone -> action-token hidden states -> head -> chunk of
// tokens * N denormalized actions.
ActionChunk predict_chunk(const PseudoBackbone& backbone,
                          std::span<const double> obs, std::span<const int> instr,
                          const HeadParamsF& head, const NormalizationStats& stats,
                          int tokens, PassCounter& counter,
                          int64_t origin_step = 0);

// Head-only pipeline over captured hidden states (tokens x H).
ActionChunk predict_chunk_from_hidden(const Mat<float>& h_act,
                                      const HeadParamsF& head,
                                      const NormalizationStats& stats,
                                      int64_t origin_step);

}  // namespace actrt

#endif  // ACTRT_POLICY_HPP_
