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

#include "actrt/head.hpp"

#include <algorithm>
#include <cmath>

namespace actrt {

namespace {

template <typename T>
bool all_finite(const std::vector<T>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](T x) { return std::isfinite(static_cast<double>(x)); });
}

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(),
                     [](T x) { return std::isfinite(static_cast<double>(x)); });
}

// Layer norm over the full width; reductions accumulate in double so the
// float path stays reproducible against reordered summation.
template <typename T>
T layer_norm(std::span<const T> u, const std::vector<T>& gamma,
             const std::vector<T>& beta, T eps, std::vector<T>& normalized,
             std::vector<T>& out) {
  const size_t n = u.size();
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += static_cast<double>(u[i]);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(u[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
  normalized.resize(n);
  out.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const T nh = static_cast<T>((static_cast<double>(u[i]) - mean) * inv);
    normalized[i] = nh;
    out[i] = gamma[i] * nh + beta[i];
  }
  return static_cast<T>(inv);
}

// z = y W + b for a row vector y; W row-major [in x out].
template <typename T>
void linear(std::span<const T> y, const std::vector<T>& w,
            const std::vector<T>& b, int in, int out, std::vector<T>& z) {
  std::vector<double> acc(out);
  for (int c = 0; c < out; ++c) acc[c] = static_cast<double>(b[c]);
  for (int r = 0; r < in; ++r) {
    const double yr = static_cast<double>(y[r]);
    const T* wrow = w.data() + static_cast<size_t>(r) * out;
    for (int c = 0; c < out; ++c) acc[c] += yr * static_cast<double>(wrow[c]);
  }
  z.resize(out);
  for (int c = 0; c < out; ++c) z[c] = static_cast<T>(acc[c]);
}

// Backward of layer norm: given d(ln_out), produce d(gamma), d(beta) and
// d(input). dx = inv * (dxh - mean(dxh) - xh * mean(dxh .* xh)).
template <typename T>
void layer_norm_backward(std::span<const T> d_out, const std::vector<T>& normalized,
                         const std::vector<T>& gamma, T inv_sigma,
                         std::vector<T>& d_gamma, std::vector<T>& d_beta,
                         std::vector<T>& d_input) {
  const size_t n = d_out.size();
  double mean_dxh = 0.0;
  double mean_dxh_xh = 0.0;
  std::vector<double> dxh(n);
  for (size_t i = 0; i < n; ++i) {
    d_gamma[i] += d_out[i] * normalized[i];
    d_beta[i] += d_out[i];
    dxh[i] = static_cast<double>(d_out[i]) * static_cast<double>(gamma[i]);
    mean_dxh += dxh[i];
    mean_dxh_xh += dxh[i] * static_cast<double>(normalized[i]);
  }
  mean_dxh /= static_cast<double>(n);
  mean_dxh_xh /= static_cast<double>(n);
  const double inv = static_cast<double>(inv_sigma);
  d_input.resize(n);
  for (size_t i = 0; i < n; ++i) {
    d_input[i] = static_cast<T>(
        inv * (dxh[i] - mean_dxh - static_cast<double>(normalized[i]) * mean_dxh_xh));
  }
}

}  // namespace

std::string to_string(OutputActivation a) {
  return a == OutputActivation::kRelu ? "relu" : "linear";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "relu") return OutputActivation::kRelu;
  if (s == "linear") return OutputActivation::kLinear;
  throw InvalidInput("unknown output activation: " + s);
}

template <typename T>
void HeadParamsT<T>::validate() const {
  if (hidden_width <= 0 || chunk_size <= 0 || action_dim <= 0) {
    throw InvalidDims("head dimensions must be positive");
  }
  for (int s = 0; s < kStages; ++s) {
    const size_t w_size = static_cast<size_t>(hidden_width) * out_width(s);
    if (weight[s].size() != w_size ||
        bias[s].size() != static_cast<size_t>(out_width(s)) ||
        gamma[s].size() != static_cast<size_t>(hidden_width) ||
        beta[s].size() != static_cast<size_t>(hidden_width)) {
      throw InvalidDims("head tensor sizes inconsistent with dimensions");
    }
    if (!all_finite(weight[s]) || !all_finite(bias[s]) || !all_finite(gamma[s]) ||
        !all_finite(beta[s])) {
      throw NonFiniteInput("head parameters contain non-finite values");
    }
  }
}

template <typename T>
HeadParamsT<T> init_params(int hidden_width, int chunk_size, int action_dim,
                           uint64_t seed, OutputActivation activation, T eps) {
  if (hidden_width <= 0 || chunk_size <= 0 || action_dim <= 0) {
    throw InvalidDims("init_params dimensions must be positive");
  }
  HeadParamsT<T> p;
  p.hidden_width = hidden_width;
  p.chunk_size = chunk_size;
  p.action_dim = action_dim;
  p.eps = eps;
  p.output_activation = activation;
  Rng rng(seed);
  const double stddev = std::sqrt(2.0 / static_cast<double>(hidden_width));
  for (int s = 0; s < HeadParamsT<T>::kStages; ++s) {
    const int out = p.out_width(s);
    p.weight[s].resize(static_cast<size_t>(hidden_width) * out);
    for (auto& w : p.weight[s]) w = static_cast<T>(rng.normal(0.0, stddev));
    p.bias[s].assign(out, T(0));
    p.gamma[s].assign(hidden_width, T(1));
    p.beta[s].assign(hidden_width, T(0));
  }
  return p;
}

template <typename To, typename From>
HeadParamsT<To> cast_params(const HeadParamsT<From>& p) {
  HeadParamsT<To> q;
  q.hidden_width = p.hidden_width;
  q.chunk_size = p.chunk_size;
  q.action_dim = p.action_dim;
  q.eps = static_cast<To>(p.eps);
  q.output_activation = p.output_activation;
  for (int s = 0; s < HeadParamsT<From>::kStages; ++s) {
    q.weight[s].assign(p.weight[s].begin(), p.weight[s].end());
    q.bias[s].assign(p.bias[s].begin(), p.bias[s].end());
    q.gamma[s].assign(p.gamma[s].begin(), p.gamma[s].end());
    q.beta[s].assign(p.beta[s].begin(), p.beta[s].end());
  }
  return q;
}

template <typename T>
void head_forward_cached(std::span<const T> h_act, const HeadParamsT<T>& p,
                         HeadForwardCacheT<T>& cache) {
  p.validate();
  if (h_act.size() != static_cast<size_t>(p.hidden_width)) {
    throw ShapeMismatch("head input width mismatch");
  }
  if (!all_finite(h_act)) throw NonFiniteInput("head input is not finite");

  constexpr int kStages = HeadParamsT<T>::kStages;
  cache.stage_input[0].assign(h_act.begin(), h_act.end());
  for (int s = 0; s < kStages; ++s) {
    const std::vector<T>& u = cache.stage_input[s];
    cache.inv_sigma[s] = layer_norm<T>(u, p.gamma[s], p.beta[s], p.eps,
                                       cache.normalized[s], cache.ln_out[s]);
    linear<T>(cache.ln_out[s], p.weight[s], p.bias[s], p.hidden_width,
              p.out_width(s), cache.pre_act[s]);
    const std::vector<T>& z = cache.pre_act[s];
    const bool relu = s < kStages - 1 || p.output_activation == OutputActivation::kRelu;
    std::vector<T>& dst = s == kStages - 1 ? cache.output : cache.stage_input[s + 1];
    dst.resize(z.size());
    const bool residual = s == 1 || s == 2;
    for (size_t i = 0; i < z.size(); ++i) {
      const T a = relu ? std::max(z[i], T(0)) : z[i];
      dst[i] = residual ? u[i] + a : a;
    }
  }
}

template <typename T>
std::vector<T> head_forward(std::span<const T> h_act, const HeadParamsT<T>& p) {
  HeadForwardCacheT<T> cache;
  head_forward_cached(h_act, p, cache);
  return std::move(cache.output);
}

template <typename T>
HeadGradsT<T> HeadGradsT<T>::zeros_like(const HeadParamsT<T>& p) {
  HeadGradsT<T> g;
  for (int s = 0; s < HeadParamsT<T>::kStages; ++s) {
    g.weight[s].assign(static_cast<size_t>(p.hidden_width) * p.out_width(s), T(0));
    g.bias[s].assign(p.out_width(s), T(0));
    g.gamma[s].assign(p.hidden_width, T(0));
    g.beta[s].assign(p.hidden_width, T(0));
  }
  g.input.assign(p.hidden_width, T(0));
  return g;
}

template <typename T>
void HeadGradsT<T>::scale(T factor) {
  auto scale_vec = [factor](std::vector<T>& v) {
    for (auto& x : v) x *= factor;
  };
  for (int s = 0; s < HeadParamsT<T>::kStages; ++s) {
    scale_vec(weight[s]);
    scale_vec(bias[s]);
    scale_vec(gamma[s]);
    scale_vec(beta[s]);
  }
  scale_vec(input);
}

template <typename T>
void head_backward_accumulate(const HeadParamsT<T>& p,
                              const HeadForwardCacheT<T>& cache,
                              std::span<const T> grad_output,
                              HeadGradsT<T>& grads) {
  constexpr int kStages = HeadParamsT<T>::kStages;
  if (grad_output.size() != static_cast<size_t>(p.output_width())) {
    throw ShapeMismatch("grad_output width mismatch");
  }
  if (!all_finite(grad_output)) throw NonFiniteInput("grad_output is not finite");

  const int h = p.hidden_width;
  std::vector<T> d_stage(grad_output.begin(), grad_output.end());
  std::vector<T> dz, d_ln, d_ln_in;
  for (int s = kStages - 1; s >= 0; --s) {
    const int out = p.out_width(s);
    // through the activation
    const bool relu = s < kStages - 1 || p.output_activation == OutputActivation::kRelu;
    dz.resize(out);
    for (int c = 0; c < out; ++c) {
      dz[c] = (!relu || cache.pre_act[s][c] > T(0)) ? d_stage[c] : T(0);
    }
    // through the linear layer
    for (int c = 0; c < out; ++c) grads.bias[s][c] += dz[c];
    d_ln.assign(h, T(0));
    for (int r = 0; r < h; ++r) {
      const T yr = cache.ln_out[s][r];
      const T* wrow = p.weight[s].data() + static_cast<size_t>(r) * out;
      T* gwrow = grads.weight[s].data() + static_cast<size_t>(r) * out;
      double acc = 0.0;
      for (int c = 0; c < out; ++c) {
        gwrow[c] += yr * dz[c];
        acc += static_cast<double>(wrow[c]) * static_cast<double>(dz[c]);
      }
      d_ln[r] = static_cast<T>(acc);
    }
    // through the layer norm
    layer_norm_backward<T>(d_ln, cache.normalized[s], p.gamma[s], cache.inv_sigma[s],
                           grads.gamma[s], grads.beta[s], d_ln_in);
    // residual stages pass the incoming gradient straight through as well
    if (s == 1 || s == 2) {
      for (int r = 0; r < h; ++r) d_ln_in[r] += d_stage[r];
    }
    d_stage = d_ln_in;
  }
  for (int r = 0; r < h; ++r) grads.input[r] += d_stage[r];
}

template <typename T>
HeadGradsT<T> head_backward(std::span<const T> h_act, const HeadParamsT<T>& p,
                            std::span<const T> grad_output) {
  HeadForwardCacheT<T> cache;
  head_forward_cached(h_act, p, cache);
  HeadGradsT<T> grads = HeadGradsT<T>::zeros_like(p);
  head_backward_accumulate(p, cache, grad_output, grads);
  return grads;
}

void LossWeights::validate() const {
  if (lambda_token < 0.0 || lambda_action < 0.0 ||
      lambda_token + lambda_action <= 0.0) {
    throw InvalidInput("loss weights must be nonnegative with positive sum");
  }
}

double l1_action_loss_flat(std::span<const double> pred,
                           std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ShapeMismatch("l1 loss on mismatched or empty tensors");
  }
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - target[i]);
  return acc / static_cast<double>(pred.size());
}

double l1_action_loss(const std::vector<ActionChunk>& pred,
                      const std::vector<ActionChunk>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ShapeMismatch("l1 loss batch size mismatch");
  }
  const size_t chunk_len = pred[0].actions.size();
  double acc = 0.0;
  size_t count = 0;
  for (size_t b = 0; b < pred.size(); ++b) {
    if (pred[b].actions.size() != chunk_len || target[b].actions.size() != chunk_len) {
      throw ShapeMismatch("l1 loss chunk length mismatch");
    }
    for (size_t n = 0; n < chunk_len; ++n) {
      for (int a = 0; a < Action::kDims; ++a) {
        acc += std::abs(pred[b].actions[n][a] - target[b].actions[n][a]);
        ++count;
      }
    }
  }
  if (count == 0) throw ShapeMismatch("l1 loss over empty chunks");
  return acc / static_cast<double>(count);
}

double token_ce_loss(const TokenTarget& t) {
  const int rows = t.logits.rows;
  const int vocab = t.logits.cols;
  if (rows <= 0 || vocab <= 0 ||
      t.target_ids.size() != static_cast<size_t>(rows)) {
    throw ShapeMismatch("token target rows must match logits rows");
  }
  double acc = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int id = t.target_ids[r];
    if (id < 0 || id >= vocab) throw ShapeMismatch("target id outside vocabulary");
    const double* row = t.logits.row(r);
    double max_logit = row[0];
    for (int c = 1; c < vocab; ++c) max_logit = std::max(max_logit, row[c]);
    double sum_exp = 0.0;
    for (int c = 0; c < vocab; ++c) sum_exp += std::exp(row[c] - max_logit);
    acc += max_logit + std::log(sum_exp) - row[id];
  }
  return acc / static_cast<double>(rows);
}

double total_loss(const TokenTarget& t, const std::vector<ActionChunk>& pred,
                  const std::vector<ActionChunk>& target, const LossWeights& w) {
  w.validate();
  return w.lambda_token * token_ce_loss(t) +
         w.lambda_action * l1_action_loss(pred, target);
}

int64_t head_param_count(int hidden_width, int chunk_size, int action_dim) {
  if (hidden_width <= 0 || chunk_size <= 0 || action_dim <= 0) {
    throw InvalidDims("head_param_count dimensions must be positive");
  }
  const int64_t h = hidden_width;
  const int64_t out = static_cast<int64_t>(chunk_size) * action_dim;
  int64_t total = 0;
  for (int s = 0; s < 4; ++s) {
    const int64_t stage_out = s == 3 ? out : h;
    total += h * stage_out + stage_out + 2 * h;  // W, b, gamma, beta
  }
  return total;
}

int64_t oft_first_layer_count(int hidden_width, int action_dim) {
  if (hidden_width <= 0 || action_dim <= 0) {
    throw InvalidDims("oft_first_layer_count dimensions must be positive");
  }
  return static_cast<int64_t>(hidden_width) * action_dim * hidden_width;
}

int64_t output_width_param_delta(int hidden_width, int chunk_size, int action_dim) {
  if (hidden_width <= 0 || chunk_size <= 0 || action_dim <= 0) {
    throw InvalidDims("output_width_param_delta dimensions must be positive");
  }
  return static_cast<int64_t>(hidden_width) *
         (static_cast<int64_t>(chunk_size) * action_dim - action_dim);
}

// instantiations for the runtime (float) and training/check (double) paths
template struct HeadParamsT<float>;
template struct HeadParamsT<double>;
template struct HeadGradsT<float>;
template struct HeadGradsT<double>;

template HeadParamsT<float> init_params<float>(int, int, int, uint64_t,
                                               OutputActivation, float);
template HeadParamsT<double> init_params<double>(int, int, int, uint64_t,
                                                 OutputActivation, double);
template HeadParamsT<float> cast_params<float, double>(const HeadParamsT<double>&);
template HeadParamsT<double> cast_params<double, float>(const HeadParamsT<float>&);
template HeadParamsT<float> cast_params<float, float>(const HeadParamsT<float>&);
template HeadParamsT<double> cast_params<double, double>(const HeadParamsT<double>&);

template void head_forward_cached<float>(std::span<const float>,
                                         const HeadParamsT<float>&,
                                         HeadForwardCacheT<float>&);
template void head_forward_cached<double>(std::span<const double>,
                                          const HeadParamsT<double>&,
                                          HeadForwardCacheT<double>&);
template std::vector<float> head_forward<float>(std::span<const float>,
                                                const HeadParamsT<float>&);
template std::vector<double> head_forward<double>(std::span<const double>,
                                                  const HeadParamsT<double>&);
template void head_backward_accumulate<float>(const HeadParamsT<float>&,
                                              const HeadForwardCacheT<float>&,
                                              std::span<const float>,
                                              HeadGradsT<float>&);
template void head_backward_accumulate<double>(const HeadParamsT<double>&,
                                               const HeadForwardCacheT<double>&,
                                               std::span<const double>,
                                               HeadGradsT<double>&);
template HeadGradsT<float> head_backward<float>(std::span<const float>,
                                                const HeadParamsT<float>&,
                                                std::span<const float>);
template HeadGradsT<double> head_backward<double>(std::span<const double>,
                                                  const HeadParamsT<double>&,
                                                  std::span<const double>);

}  // namespace actrt
