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

#ifndef ACTRT_HEAD_HPP_
#define ACTRT_HEAD_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "actrt/action.hpp"
#include "actrt/common.hpp"

namespace actrt {

enum class OutputActivation : uint8_t {
  kRelu,    // default: final stage clamps at zero
  kLinear,  // compatibility flag for symmetric normalization ranges
};

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

// Residual MLP action head. Four stages, each layer-norm -> linear -> ReLU;
// stages 2 and 3 add their input back, stage 4 widens to N*A:
//
//   x1 = ReLU(LN1(x0) W1 + b1)
//   x2 = x1 + ReLU(LN2(x1) W2 + b2)
//   x3 = x2 + ReLU(LN3(x2) W3 + b3)
//   out = act(LN4(x3) W4 + b4)          act = ReLU or identity
//
// Weights are row-major [in x out]; stage i consumes width H and produces
// width H, except stage 4 which produces N*A.
template <typename T>
struct HeadParamsT {
  static constexpr int kStages = 4;

  int hidden_width = 0;  // H
  int chunk_size = 0;    // N
  int action_dim = 0;    // A
  T eps = T(1e-5);
  OutputActivation output_activation = OutputActivation::kRelu;

  std::array<std::vector<T>, kStages> weight;  // [H x out(i)]
  std::array<std::vector<T>, kStages> bias;    // [out(i)]
  std::array<std::vector<T>, kStages> gamma;   // [H]
  std::array<std::vector<T>, kStages> beta;    // [H]

  int out_width(int stage) const {
    return stage == kStages - 1 ? chunk_size * action_dim : hidden_width;
  }
  int output_width() const { return chunk_size * action_dim; }

  void validate() const;  // InvalidDims / NonFiniteInput
};

using HeadParamsF = HeadParamsT<float>;
using HeadParamsD = HeadParamsT<double>;

// He-style init: W ~ Normal(0, 2/fan_in), biases zero, layer-norm gains one.
// Bitwise deterministic for a given seed.
template <typename T>
HeadParamsT<T> init_params(int hidden_width, int chunk_size, int action_dim,
                           uint64_t seed,
                           OutputActivation activation = OutputActivation::kRelu,
                           T eps = T(1e-5));

template <typename To, typename From>
HeadParamsT<To> cast_params(const HeadParamsT<From>& p);

// Everything the backward pass needs from a forward evaluation.
// stage_input[s] is the stage-s input (so stage_input[1] == x1 etc.),
// normalized[s] the layer-norm output before gain/offset, pre_act[s] the
// value fed to the activation.
template <typename T>
struct HeadForwardCacheT {
  std::array<std::vector<T>, HeadParamsT<T>::kStages> stage_input;
  std::array<std::vector<T>, HeadParamsT<T>::kStages> normalized;
  std::array<std::vector<T>, HeadParamsT<T>::kStages> ln_out;
  std::array<std::vector<T>, HeadParamsT<T>::kStages> pre_act;
  std::array<T, HeadParamsT<T>::kStages> inv_sigma{};
  std::vector<T> output;  // N*A, normalized action space
};

// Forward pass; h_act must be finite and of width H (NonFiniteInput /
// ShapeMismatch otherwise). Returns the flattened N*A prediction.
template <typename T>
std::vector<T> head_forward(std::span<const T> h_act, const HeadParamsT<T>& p);

template <typename T>
void head_forward_cached(std::span<const T> h_act, const HeadParamsT<T>& p,
                         HeadForwardCacheT<T>& cache);

// Gradients of a scalar loss with respect to every parameter tensor and the
// head input, given dL/d(output).
template <typename T>
struct HeadGradsT {
  std::array<std::vector<T>, HeadParamsT<T>::kStages> weight;
  std::array<std::vector<T>, HeadParamsT<T>::kStages> bias;
  std::array<std::vector<T>, HeadParamsT<T>::kStages> gamma;
  std::array<std::vector<T>, HeadParamsT<T>::kStages> beta;
  std::vector<T> input;

  static HeadGradsT zeros_like(const HeadParamsT<T>& p);
  void scale(T factor);
};

using HeadGradsD = HeadGradsT<double>;

// Analytic backward through the cached forward pass. Accumulates into
// grads, which must be zeros_like-shaped for p.
template <typename T>
void head_backward_accumulate(const HeadParamsT<T>& p,
                              const HeadForwardCacheT<T>& cache,
                              std::span<const T> grad_output,
                              HeadGradsT<T>& grads);

// One-shot convenience: runs the forward pass internally.
template <typename T>
HeadGradsT<T> head_backward(std::span<const T> h_act, const HeadParamsT<T>& p,
                            std::span<const T> grad_output);

// Loss weights of the combined objective (defaults 0.01 token / 0.99 action).
struct LossWeights {
  double lambda_token = 0.01;
  double lambda_action = 0.99;

  void validate() const;  // both >= 0, sum > 0
};

// Token-level supervision target: per-position class ids and the predicted
// logits, one row per supervised position (instruction tokens plus the
// action token).
struct TokenTarget {
  std::vector<int> target_ids;
  Mat<double> logits;  // rows == target_ids.size(), cols == vocabulary
};

// Mean absolute error over all B*N*A entries.
double l1_action_loss(const std::vector<ActionChunk>& pred,
                      const std::vector<ActionChunk>& target);
double l1_action_loss_flat(std::span<const double> pred,
                           std::span<const double> target);

// Mean cross-entropy of softmaxed logits against the targets.
double token_ce_loss(const TokenTarget& t);

double total_loss(const TokenTarget& t, const std::vector<ActionChunk>& pred,
                  const std::vector<ActionChunk>& target, const LossWeights& w);

// Exact parameter totals.
int64_t head_param_count(int hidden_width, int chunk_size, int action_dim);
// First-layer weight count of a head that consumes all D per-step hidden
// states concatenated (input width H*D, output width H).
int64_t oft_first_layer_count(int hidden_width, int action_dim);
// Extra final-layer weight entries from widening the output from A to N*A.
int64_t output_width_param_delta(int hidden_width, int chunk_size, int action_dim);

}  // namespace actrt

#endif  // ACTRT_HEAD_HPP_
