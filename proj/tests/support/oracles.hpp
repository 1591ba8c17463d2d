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

// Independent reference implementations used to check the library. These are
// deliberately naive: plain loops, textbook formulas, no sharing with the
// production code paths.

#ifndef ACTRT_TESTS_SUPPORT_ORACLES_HPP_
#define ACTRT_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "actrt/action.hpp"
#include "actrt/head.hpp"

namespace actrt::oracle {

// ---------------------------------------------------------------------------
// percentile: sort and interpolate between closest ranks

inline double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double rank = p / 100.0 * (static_cast<double>(values.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// action head: textbook evaluation, one value at a time

template <typename T>
std::vector<T> layer_norm(const std::vector<T>& x, const std::vector<T>& gamma,
                          const std::vector<T>& beta, T eps) {
  const int n = static_cast<int>(x.size());
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= n;
  std::vector<T> out(n);
  for (int i = 0; i < n; ++i) {
    out[i] = static_cast<T>(gamma[i] * ((x[i] - mean) / std::sqrt(var + double(eps))) +
                            beta[i]);
  }
  return out;
}

template <typename T>
std::vector<T> affine(const std::vector<T>& x, const std::vector<T>& w,
                      const std::vector<T>& b, int in, int out) {
  std::vector<T> z(out);
  for (int c = 0; c < out; ++c) {
    double acc = b[c];
    for (int r = 0; r < in; ++r) acc += double(x[r]) * double(w[r * out + c]);
    z[c] = static_cast<T>(acc);
  }
  return z;
}

template <typename T>
std::vector<T> head_forward(const std::vector<T>& h_act, const HeadParamsT<T>& p) {
  const int h = p.hidden_width;
  std::vector<T> x = h_act;
  for (int stage = 0; stage < 4; ++stage) {
    const int out = stage == 3 ? p.chunk_size * p.action_dim : h;
    std::vector<T> normed = layer_norm<T>(x, p.gamma[stage], p.beta[stage], p.eps);
    std::vector<T> z = affine<T>(normed, p.weight[stage], p.bias[stage], h, out);
    const bool relu = stage < 3 || p.output_activation == OutputActivation::kRelu;
    std::vector<T> act(out);
    for (int c = 0; c < out; ++c) act[c] = relu && z[c] < T(0) ? T(0) : z[c];
    if (stage == 1 || stage == 2) {
      for (int c = 0; c < out; ++c) act[c] = x[c] + act[c];
    }
    x = std::move(act);
  }
  return x;
}

// ---------------------------------------------------------------------------
// finite differences of sum(head(h) .* projection) for every parameter entry

struct FdGrads {
  std::array<std::vector<double>, 4> weight, bias, gamma, beta;
  std::vector<double> input;
};

inline double projected_output(const std::vector<double>& h, const HeadParamsD& p,
                               const std::vector<double>& projection) {
  const std::vector<double> out = head_forward<double>(h, p);
  double acc = 0.0;
  for (size_t i = 0; i < out.size(); ++i) acc += out[i] * projection[i];
  return acc;
}

inline FdGrads finite_difference_grads(const std::vector<double>& h,
                                       const HeadParamsD& params,
                                       const std::vector<double>& projection,
                                       double step = 1e-5) {
  FdGrads grads;
  HeadParamsD p = params;
  auto central = [&](double* value) {
    const double saved = *value;
    *value = saved + step;
    const double plus = projected_output(h, p, projection);
    *value = saved - step;
    const double minus = projected_output(h, p, projection);
    *value = saved;
    return (plus - minus) / (2.0 * step);
  };
  for (int s = 0; s < 4; ++s) {
    grads.weight[s].resize(p.weight[s].size());
    for (size_t i = 0; i < p.weight[s].size(); ++i) {
      grads.weight[s][i] = central(&p.weight[s][i]);
    }
    grads.bias[s].resize(p.bias[s].size());
    for (size_t i = 0; i < p.bias[s].size(); ++i) {
      grads.bias[s][i] = central(&p.bias[s][i]);
    }
    grads.gamma[s].resize(p.gamma[s].size());
    for (size_t i = 0; i < p.gamma[s].size(); ++i) {
      grads.gamma[s][i] = central(&p.gamma[s][i]);
    }
    grads.beta[s].resize(p.beta[s].size());
    for (size_t i = 0; i < p.beta[s].size(); ++i) {
      grads.beta[s][i] = central(&p.beta[s][i]);
    }
  }
  std::vector<double> hh = h;
  grads.input.resize(h.size());
  for (size_t i = 0; i < h.size(); ++i) {
    const double saved = hh[i];
    hh[i] = saved + step;
    const double plus = projected_output(hh, params, projection);
    hh[i] = saved - step;
    const double minus = projected_output(hh, params, projection);
    hh[i] = saved;
    grads.input[i] = (plus - minus) / (2.0 * step);
  }
  return grads;
}

// relative error with an absolute floor for near-zero pairs
inline double rel_error(double a, double b, double floor = 1e-8) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

// ---------------------------------------------------------------------------
// vote ensemble: plain partition and plain mean

struct VoteOracle {
  Action chosen;
  std::vector<int> high, low;
  std::vector<double> similarities;
};

inline double plain_cosine(const Action& u, const Action& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int d = 0; d < Action::kDims; ++d) {
    dot += u[d] * v[d];
    nu += u[d] * u[d];
    nv += v[d] * v[d];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (nu < 1e-12 || nv < 1e-12) return (nu < 1e-12 && nv < 1e-12) ? 1.0 : 0.0;
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

inline VoteOracle brute_force_vote(const std::vector<Action>& cands, double tau) {
  VoteOracle result;
  const Action& current = cands.back();
  for (size_t i = 0; i < cands.size(); ++i) {
    const double s = plain_cosine(current, cands[i]);
    result.similarities.push_back(s);
    (s > tau ? result.high : result.low).push_back(static_cast<int>(i));
  }
  const std::vector<int>& winner =
      result.high.size() > result.low.size() ? result.high : result.low;
  for (int d = 0; d < Action::kDims; ++d) {
    double acc = 0.0;
    for (int idx : winner) acc += cands[idx][d];
    result.chosen[d] = acc / static_cast<double>(winner.size());
  }
  result.chosen.g = result.chosen.g >= 0.5 ? 1.0 : 0.0;
  return result;
}

inline Action brute_force_mean(const std::vector<Action>& cands) {
  Action out;
  for (int d = 0; d < Action::kDims; ++d) {
    double acc = 0.0;
    for (const Action& a : cands) acc += a[d];
    out[d] = acc / static_cast<double>(cands.size());
  }
  out.g = out.g >= 0.5 ? 1.0 : 0.0;
  return out;
}

}  // namespace actrt::oracle

#endif  // ACTRT_TESTS_SUPPORT_ORACLES_HPP_
