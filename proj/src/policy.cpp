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

#include "actrt/policy.hpp"

#include <algorithm>
#include <cmath>

namespace actrt {

namespace {

// hash -> value in [-1, 1)
double hash_to_unit(uint64_t h) {
  return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-52 - 1.0;
}

// Model outputs are clamped into the normalized action space before
// denormalization; the head carries no hard output bound.
Action chunk_row_to_action(const std::vector<float>& flat, int row, int action_dim,
                           const NormalizationStats& stats) {
  const double lo = stats.range == NormRange::kUnit ? 0.0 : -1.0;
  Action a;
  for (int d = 0; d < action_dim && d < Action::kDims; ++d) {
    const double v =
        static_cast<double>(flat[static_cast<size_t>(row) * action_dim + d]);
    a[d] = d < Action::kContinuousDims ? std::clamp(v, lo, 1.0) : v;
  }
  return a;
}

}  // namespace

std::vector<std::vector<float>> extract_act_hidden(const HiddenSequence& seq) {
  if (seq.act_mask.size() != static_cast<size_t>(seq.hidden.rows)) {
    throw ShapeMismatch("act mask length differs from sequence length");
  }
  std::vector<std::vector<float>> out;
  for (int r = 0; r < seq.hidden.rows; ++r) {
    if (seq.act_mask[r]) {
      out.emplace_back(seq.hidden.row(r), seq.hidden.row(r) + seq.hidden.cols);
    }
  }
  if (out.empty()) throw NoActToken("no action-token position in sequence");
  return out;
}

PseudoBackbone::PseudoBackbone(const PseudoBackboneConfig& config) : config_(config) {
  if (config_.hidden_width <= 0) {
    throw InvalidDims("backbone hidden width must be positive");
  }
}

void PseudoBackbone::run_busy_work(uint64_t iters) const {
  uint64_t x = 0x9e3779b97f4a7c15ull ^ iters;
  for (uint64_t i = 0; i < iters; ++i) x = splitmix64(x + i);
  busy_sink_ = x;
}

// One hidden entry: an affine function of the observation plus a token/row
// term, all parameters hashed from the seed.
float PseudoBackbone::feature(std::span<const double> obs, uint64_t row_kind,
                              int64_t row_id, int dim) const {
  double acc = 0.0;
  const double scale =
      obs.empty() ? 0.0 : 1.0 / std::sqrt(static_cast<double>(obs.size()));
  for (size_t i = 0; i < obs.size(); ++i) {
    acc += obs[i] * hash_to_unit(derive_seed(config_.seed, 0x0b5u, i, dim));
  }
  acc *= scale;
  acc += hash_to_unit(derive_seed(config_.seed, row_kind, static_cast<uint64_t>(row_id), dim));
  return static_cast<float>(acc);
}

HiddenSequence PseudoBackbone::generate(std::span<const double> obs,
                                        std::span<const int> instr, int act_tokens,
                                        PassCounter& counter) const {
  if (act_tokens < 1) throw InvalidInput("at least one action token is required");
  for (double v : obs) {
    if (!std::isfinite(v)) throw NonFiniteInput("observation is not finite");
  }
  const int prompt_len = static_cast<int>(instr.size());
  const int length = prompt_len + act_tokens;
  HiddenSequence seq;
  seq.hidden = Mat<float>(length, config_.hidden_width);
  seq.act_mask.assign(length, 0);

  run_busy_work(config_.prefill_work);
  for (int p = 0; p < length; ++p) {
    const bool generated = p >= prompt_len;
    // prompt rows key off the token id, generated rows off their index
    const uint64_t kind = generated ? 0x4c7u : 0x1d5u;
    const int64_t row_id = generated ? (p - prompt_len) : instr[p];
    float* row = seq.hidden.row(p);
    for (int j = 0; j < config_.hidden_width; ++j) {
      row[j] = feature(obs, kind, row_id, j);
    }
    if (generated) {
      seq.act_mask[p] = 1;
      counter.decoder_forward_passes += 1;
      run_busy_work(config_.decode_work);
    }
  }
  return seq;
}

uint64_t PseudoBackbone::serial_decode_baseline(std::span<const double> obs,
                                                std::span<const int> instr,
                                                int chunk_size, int action_dim,
                                                PassCounter& counter) const {
  if (chunk_size < 1 || action_dim < 1) {
    throw InvalidDims("serial baseline needs positive chunk size and action dim");
  }
  (void)obs;
  (void)instr;
  const uint64_t passes = static_cast<uint64_t>(chunk_size) * action_dim;
  run_busy_work(config_.prefill_work);
  for (uint64_t i = 0; i < passes; ++i) {
    counter.decoder_forward_passes += 1;
    run_busy_work(config_.decode_work);
  }
  return passes;
}

ActionChunk predict_chunk(const PseudoBackbone& backbone,
                          std::span<const double> obs, std::span<const int> instr,
                          const HeadParamsF& head, const NormalizationStats& stats,
                          int tokens, PassCounter& counter, int64_t origin_step) {
  if (tokens < 1) throw InvalidInput("tokens must be >= 1");
  if (backbone.config().hidden_width != head.hidden_width) {
    throw ShapeMismatch("backbone and head disagree on hidden width");
  }
  const HiddenSequence seq = backbone.generate(obs, instr, tokens, counter);
  const auto hiddens = extract_act_hidden(seq);
  ActionChunk chunk;
  chunk.origin_step = origin_step;
  chunk.actions.reserve(static_cast<size_t>(tokens) * head.chunk_size);
  for (const auto& h : hiddens) {
    const std::vector<float> flat = head_forward<float>(h, head);
    for (int n = 0; n < head.chunk_size; ++n) {
      chunk.actions.push_back(
          denormalize_action(chunk_row_to_action(flat, n, head.action_dim, stats), stats));
    }
  }
  return chunk;
}

ActionChunk predict_chunk_from_hidden(const Mat<float>& h_act,
                                      const HeadParamsF& head,
                                      const NormalizationStats& stats,
                                      int64_t origin_step) {
  if (h_act.cols != head.hidden_width || h_act.rows < 1) {
    throw ShapeMismatch("replayed hidden states do not match the head width");
  }
  ActionChunk chunk;
  chunk.origin_step = origin_step;
  chunk.actions.reserve(static_cast<size_t>(h_act.rows) * head.chunk_size);
  for (int r = 0; r < h_act.rows; ++r) {
    const std::span<const float> h(h_act.row(r), static_cast<size_t>(h_act.cols));
    const std::vector<float> flat = head_forward<float>(h, head);
    for (int n = 0; n < head.chunk_size; ++n) {
      chunk.actions.push_back(
          denormalize_action(chunk_row_to_action(flat, n, head.action_dim, stats), stats));
    }
  }
  return chunk;
}

}  // namespace actrt
