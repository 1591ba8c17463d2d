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

#ifndef ACTRT_TRAIN_HPP_
#define ACTRT_TRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "actrt/common.hpp"
#include "actrt/head.hpp"

namespace actrt {

// Toy training setup: hidden states are a fixed random linear map of
// low-dimensional latent task vectors, action targets a smooth bounded
// function of the latent, and token targets a small synthetic vocabulary
// with a reserved action-token id supervised through a linear classifier.
struct ToyTrainConfig {
  int hidden_width = 64;
  int chunk_size = 8;
  int action_dim = 7;
  int latent_dim = 4;
  int num_samples = 5000;
  int eval_samples = 512;
  int batch_size = 64;
  int max_steps = 20000;
  int eval_every = 100;
  double target_l1 = 0.04;  // stop once the held-out action L1 drops below
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  int vocab_size = 16;  // last id is the reserved action token
  int instr_len = 3;
  LossWeights loss_weights{};
  OutputActivation output_activation = OutputActivation::kRelu;

  void validate() const;
};

struct TraceRow {
  int step = 0;
  double l1 = 0.0;
  double ce = 0.0;
  double total = 0.0;
};

struct ToyTrainResult {
  HeadParamsD params;
  std::vector<double> classifier_w;  // H x vocab, row-major
  std::vector<double> classifier_b;  // vocab
  std::vector<TraceRow> trace;       // one row per optimization step
  bool converged = false;
  int steps_run = 0;
  double final_eval_l1 = 0.0;
};

// Trains head and token classifier jointly under the weighted objective.
// Bitwise deterministic for a given config. Diverged on NaN/Inf loss.
ToyTrainResult train_toy(const ToyTrainConfig& config);

void write_loss_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace actrt

#endif  // ACTRT_TRAIN_HPP_
