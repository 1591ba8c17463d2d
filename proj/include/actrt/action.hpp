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

#ifndef ACTRT_ACTION_HPP_
#define ACTRT_ACTION_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actrt/common.hpp"

namespace actrt {

// One 7-DoF end-effector command: relative translation, relative rotation,
// gripper state. Canonical ordering is (dx, dy, dz, dphi, dtheta, dpsi, g).
struct Action {
  static constexpr int kDims = 7;
  static constexpr int kContinuousDims = 6;
  static constexpr int kGripperIndex = 6;

  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dphi = 0.0;
  double dtheta = 0.0;
  double dpsi = 0.0;
  double g = 0.0;

  double& operator[](int i);
  double operator[](int i) const;

  std::array<double, kDims> to_array() const;
  static Action from_array(const std::array<double, kDims>& v);
  static Action from_span(std::span<const double> v);  // LengthMismatch

  // An executable action has a binary gripper command.
  bool executable() const { return g == 0.0 || g == 1.0; }
};

// N consecutive actions predicted from the observation at origin_step.
// actions[k] is the prediction for absolute timestep origin_step + k.
struct ActionChunk {
  std::vector<Action> actions;
  int64_t origin_step = 0;

  int size() const { return static_cast<int>(actions.size()); }
};

enum class NormRange : uint8_t {
  kUnit,       // continuous dims mapped to [0, 1]
  kSymmetric,  // continuous dims mapped to [-1, 1]
};

std::string to_string(NormRange r);
NormRange norm_range_from_string(const std::string& s);

// Per-dimension affine normalization bounds for the 6 continuous dims.
// The gripper is never scaled.
struct NormalizationStats {
  std::array<double, Action::kContinuousDims> q_low{};
  std::array<double, Action::kContinuousDims> q_high{};
  NormRange range = NormRange::kUnit;

  void validate() const;  // DegenerateDimension unless q_low[d] < q_high[d]

  std::string to_json_string() const;
  static NormalizationStats from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static NormalizationStats load(const std::string& path);
};

// Robust bounds: 1st/99th percentile of each continuous dimension.
NormalizationStats compute_stats(const std::vector<Action>& dataset,
                                 NormRange range = NormRange::kUnit);

// Affine map of continuous dims into the stats range, clipped at the range
// edges; gripper passed through unchanged.
Action normalize_action(const Action& a, const NormalizationStats& s);

// Inverse of normalize_action on the continuous dims. OutOfRange when a
// continuous dim lies outside the range by more than 1e-9. The gripper is
// binarized by rounding at 0.5, so the result is executable.
Action denormalize_action(const Action& a_norm, const NormalizationStats& s);

// u.v / (|u||v|), clamped to [-1, 1]. Vectors with norm below 1e-12 are
// treated as the idle action: two near-zero vectors compare as 1, a
// near-zero vector against anything else as 0.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const Action& u, const Action& v);

}  // namespace actrt

#endif  // ACTRT_ACTION_HPP_
