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

#ifndef ACTRT_SIM_HPP_
#define ACTRT_SIM_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "actrt/action.hpp"
#include "actrt/common.hpp"
#include "actrt/ensemble.hpp"

namespace actrt {

enum class ExecutionMode : uint8_t {
  kPerStep,        // re-predict and ensemble every step
  kOpenLoopChunk,  // execute a whole chunk before re-predicting
};

std::string to_string(ExecutionMode m);
ExecutionMode execution_mode_from_string(const std::string& s);

enum class EpisodeStatus : uint8_t { kRunning, kSuccess, kFailure };

std::string to_string(EpisodeStatus s);

// Point-mass environment: executed deltas add onto the end-effector pose.
// Success requires the position within eps_pos of the goal with the gripper
// closed, before the step budget runs out.
struct EnvConfig {
  double start_box = 0.5;  // start position uniform in [-box, box]^3
  std::array<double, 3> goal_center{1.0, 1.0, 0.6};
  double goal_box = 0.4;  // goal position uniform in center +- box
  double rot_box = 0.8;   // goal orientation uniform in +- box radians
  double step_cap = 0.1;  // per-step translation magnitude cap
  double rot_cap = 0.2;   // per-step rotation magnitude cap per axis
  double kp = 0.8;        // proportional gain, must stay in (0, 1]
  double eps_pos = 0.05;
  double grip_radius = 0.05;  // expert closes the gripper inside this radius
  int step_budget = 120;
  int chunk_size = 8;
  NormalizationStats stats;  // prediction space used by the committee

  EnvConfig();
  void validate() const;
};

// Symmetric bounds wide enough that corrupted predictions stay unclipped.
NormalizationStats default_sim_stats();

struct EnvState {
  std::array<double, 6> pose{};  // x, y, z, phi, theta, psi
  double gripper = 0.0;
  std::array<double, 6> goal{};
  std::array<double, 3> object_pos{};  // sits at the goal position
  int step = 0;
  EpisodeStatus status = EpisodeStatus::kRunning;

  double distance_to_goal() const;
};

EnvState init_env(const EnvConfig& cfg, Rng& rng);

// Applies one executable action, advances the step index and updates the
// status. EpisodeOver when the episode is not running.
void step_env(EnvState& state, const EnvConfig& cfg, const Action& executed);

// Scripted expert: capped proportional control toward the goal, gripper
// commanded by distance. The chunk's k-th action is the expert's plan for
// step state.step + k, rolled forward through the executable-action pipeline
// (normalize/denormalize quantization included) so its lookahead matches
// what execution produces.
ActionChunk expert_chunk(const EnvState& state, const EnvConfig& cfg, int chunk_size);

// Per-dimension Gaussian perturbation plus, with probability outlier_prob,
// replacement of the whole chunk by a direction-reversed scaled outlier
// with a flipped gripper command.
struct NoiseModel {
  std::array<double, Action::kDims> gaussian_sigma{};
  double outlier_prob = 0.0;
  double outlier_scale = 3.0;
  uint64_t seed = 0;
};

// Stream form used inside episodes; draws the same number of variates per
// chunk regardless of the outlier outcome, so outlier sets nest as the
// probability grows.
class CorruptionStream {
 public:
  explicit CorruptionStream(const NoiseModel& nm, uint64_t seed);
  ActionChunk corrupt(const ActionChunk& chunk);

 private:
  NoiseModel nm_;
  Rng rng_;
};

// One-shot form; deterministic in nm.seed.
ActionChunk corrupt(const ActionChunk& chunk, const NoiseModel& nm);

struct StepRecord {
  Action executed;                    // raw executable action
  std::vector<Action> candidates;     // committee, normalized space
  std::vector<double> similarities;   // vote strategy only
  std::vector<int> high_set, low_set; // vote strategy only
};

struct EpisodeLog {
  Strategy strategy = Strategy::kNone;
  ExecutionMode mode = ExecutionMode::kPerStep;
  uint64_t seed = 0;
  EpisodeStatus final_status = EpisodeStatus::kRunning;
  double traj_error = 0.0;  // mean distance to the noise-free expert path
  std::vector<StepRecord> steps;
};

EpisodeLog run_episode(const EnvConfig& cfg, const EnsembleConfig& ensemble,
                       ExecutionMode mode, const NoiseModel& nm, uint64_t seed);

// One noise row: outlier probability plus translation jitter. A zero
// probability row conventionally disables the jitter too, serving as the
// uncorrupted reference.
struct NoiseLevel {
  double outlier_prob = 0.0;
  double sigma = 0.0;
};

// Builds rows from a probability list: nonzero rows carry sigma, the zero
// row runs corruption-free.
std::vector<NoiseLevel> noise_levels_from_probs(const std::vector<double>& probs,
                                                double sigma);

struct SuiteConfig {
  int episodes = 200;
  uint64_t seed = 7;
  std::vector<NoiseLevel> noise_levels{{0.0, 0.0}, {0.2, 0.035}};
  double outlier_scale = 3.0;
  std::vector<Strategy> strategies{Strategy::kVote, Strategy::kNaiveAverage,
                                   Strategy::kStaticWeighted, Strategy::kNone};
  ExecutionMode execution_mode = ExecutionMode::kPerStep;
  EnsembleConfig ensemble{};
  EnvConfig env{};
  int workers = 1;

  std::string to_json_string() const;
  static SuiteConfig from_json_string(const std::string& text);
};

struct SuiteRow {
  Strategy strategy = Strategy::kNone;
  double noise_p = 0.0;
  double sigma = 0.0;
  double success_rate = 0.0;
  double mean_traj_error = 0.0;
  int episodes = 0;
};

// Runs strategies x noise levels; episode seeds are shared across rows so
// comparisons see common random numbers. Results come back in configuration
// order regardless of worker count. The optional per-episode sink forces
// single-threaded execution.
using EpisodeSink =
    std::function<void(const EpisodeLog&, Strategy, const NoiseLevel&, int episode)>;
std::vector<SuiteRow> evaluate(const SuiteConfig& cfg, const EpisodeSink& sink = nullptr);

std::string suite_rows_to_csv(const std::vector<SuiteRow>& rows);
std::string episode_log_to_json(const EpisodeLog& log, double noise_p, double sigma,
                                int episode);

}  // namespace actrt

#endif  // ACTRT_SIM_HPP_
