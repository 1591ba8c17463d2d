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

#include "actrt/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

namespace actrt {

namespace {

double dist3(const std::array<double, 6>& pose, const std::array<double, 6>& goal) {
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = pose[i] - goal[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Capped proportional controller; kp <= 1 keeps it overshoot-free.
Action expert_action(const EnvState& state, const EnvConfig& cfg) {
  Action a;
  const double dist = dist3(state.pose, state.goal);
  if (dist > 0.0) {
    const double step_len = std::min(cfg.step_cap, cfg.kp * dist);
    const double scale = step_len / dist;
    a.dx = (state.goal[0] - state.pose[0]) * scale;
    a.dy = (state.goal[1] - state.pose[1]) * scale;
    a.dz = (state.goal[2] - state.pose[2]) * scale;
  }
  for (int i = 3; i < 6; ++i) {
    const double d = cfg.kp * (state.goal[i] - state.pose[i]);
    a[i] = std::clamp(d, -cfg.rot_cap, cfg.rot_cap);
  }
  a.g = dist <= cfg.grip_radius ? 1.0 : 0.0;
  return a;
}

// The executable form of a raw prediction: what execution will actually
// apply after the normalize/denormalize round trip.
Action quantize(const Action& a, const NormalizationStats& stats) {
  return denormalize_action(normalize_action(a, stats), stats);
}

void apply_deltas(EnvState& state, const Action& executed) {
  for (int i = 0; i < 6; ++i) state.pose[i] += executed[i];
  state.gripper = executed.g;
}

// Noise-free expert rollout from the initial state; positions per step for
// the trajectory-error reference.
std::vector<std::array<double, 3>> reference_positions(EnvState state,
                                                       const EnvConfig& cfg) {
  std::vector<std::array<double, 3>> out;
  out.push_back({state.pose[0], state.pose[1], state.pose[2]});
  while (state.status == EpisodeStatus::kRunning) {
    const Action exec = quantize(expert_action(state, cfg), cfg.stats);
    step_env(state, cfg, exec);
    out.push_back({state.pose[0], state.pose[1], state.pose[2]});
  }
  return out;
}

double point_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

}  // namespace

std::string to_string(ExecutionMode m) {
  return m == ExecutionMode::kPerStep ? "per_step" : "open_loop_chunk";
}

ExecutionMode execution_mode_from_string(const std::string& s) {
  if (s == "per_step") return ExecutionMode::kPerStep;
  if (s == "open_loop_chunk") return ExecutionMode::kOpenLoopChunk;
  throw InvalidInput("unknown execution mode: " + s);
}

std::string to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::kRunning: return "running";
    case EpisodeStatus::kSuccess: return "success";
    case EpisodeStatus::kFailure: return "failure";
  }
  return "running";
}

NormalizationStats default_sim_stats() {
  NormalizationStats stats;
  stats.range = NormRange::kSymmetric;
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    stats.q_low[d] = -0.4;
    stats.q_high[d] = 0.4;
  }
  return stats;
}

EnvConfig::EnvConfig() : stats(default_sim_stats()) {}

void EnvConfig::validate() const {
  if (!(kp > 0.0 && kp <= 1.0)) throw InvalidInput("kp must lie in (0, 1]");
  if (step_cap <= 0.0 || rot_cap <= 0.0 || eps_pos <= 0.0 || grip_radius <= 0.0) {
    throw InvalidInput("env caps and thresholds must be positive");
  }
  if (step_budget <= 0 || chunk_size <= 0) {
    throw InvalidInput("step budget and chunk size must be positive");
  }
  stats.validate();
}

double EnvState::distance_to_goal() const { return dist3(pose, goal); }

EnvState init_env(const EnvConfig& cfg, Rng& rng) {
  cfg.validate();
  EnvState state;
  for (int i = 0; i < 3; ++i) {
    state.pose[i] = rng.uniform(-cfg.start_box, cfg.start_box);
    state.goal[i] = cfg.goal_center[i] + rng.uniform(-cfg.goal_box, cfg.goal_box);
  }
  for (int i = 3; i < 6; ++i) {
    state.pose[i] = 0.0;
    state.goal[i] = rng.uniform(-cfg.rot_box, cfg.rot_box);
  }
  state.object_pos = {state.goal[0], state.goal[1], state.goal[2]};
  return state;
}

void step_env(EnvState& state, const EnvConfig& cfg, const Action& executed) {
  if (state.status != EpisodeStatus::kRunning) {
    throw EpisodeOver("step on a finished episode");
  }
  apply_deltas(state, executed);
  state.step += 1;
  if (state.distance_to_goal() <= cfg.eps_pos && state.gripper == 1.0) {
    state.status = EpisodeStatus::kSuccess;
  } else if (state.step >= cfg.step_budget) {
    state.status = EpisodeStatus::kFailure;
  }
}

ActionChunk expert_chunk(const EnvState& state, const EnvConfig& cfg, int chunk_size) {
  if (state.status != EpisodeStatus::kRunning) {
    throw EpisodeOver("expert consulted on a finished episode");
  }
  if (chunk_size <= 0) throw InvalidInput("chunk size must be positive");
  ActionChunk chunk;
  chunk.origin_step = state.step;
  chunk.actions.reserve(chunk_size);
  EnvState rolled = state;
  for (int k = 0; k < chunk_size; ++k) {
    const Action a = expert_action(rolled, cfg);
    chunk.actions.push_back(a);
    apply_deltas(rolled, quantize(a, cfg.stats));
  }
  return chunk;
}

CorruptionStream::CorruptionStream(const NoiseModel& nm, uint64_t seed)
    : nm_(nm), rng_(seed) {
  if (nm.outlier_prob < 0.0 || nm.outlier_prob > 1.0) {
    throw InvalidInput("outlier probability must lie in [0, 1]");
  }
}

ActionChunk CorruptionStream::corrupt(const ActionChunk& chunk) {
  const bool outlier = rng_.uniform() < nm_.outlier_prob;
  ActionChunk out = chunk;
  for (Action& a : out.actions) {
    for (int d = 0; d < Action::kDims; ++d) {
      a[d] += nm_.gaussian_sigma[d] * rng_.normal();
    }
    if (outlier) {
      for (int d = 0; d < Action::kContinuousDims; ++d) a[d] = -nm_.outlier_scale * a[d];
      a.g = 1.0 - a.g;
    }
  }
  return out;
}

ActionChunk corrupt(const ActionChunk& chunk, const NoiseModel& nm) {
  CorruptionStream stream(nm, nm.seed);
  return stream.corrupt(chunk);
}

EpisodeLog run_episode(const EnvConfig& cfg, const EnsembleConfig& ensemble,
                       ExecutionMode mode, const NoiseModel& nm, uint64_t seed) {
  cfg.validate();
  ensemble.validate();

  Rng env_rng(derive_seed(seed, "env"));
  EnvState state = init_env(cfg, env_rng);
  const auto reference = reference_positions(state, cfg);
  CorruptionStream noise(nm, derive_seed(seed, "noise"));

  EpisodeLog log;
  log.strategy = ensemble.strategy;
  log.mode = mode;
  log.seed = seed;

  HistoryBuffer buffer(ensemble.horizon);
  double error_acc = 0.0;

  auto execute = [&](const Action& exec, StepRecord record) {
    record.executed = exec;
    step_env(state, cfg, exec);
    const std::array<double, 3> pos{state.pose[0], state.pose[1], state.pose[2]};
    const size_t ref_idx =
        std::min(static_cast<size_t>(state.step), reference.size() - 1);
    error_acc += point_dist(pos, reference[ref_idx]);
    log.steps.push_back(std::move(record));
  };

  if (mode == ExecutionMode::kPerStep) {
    while (state.status == EpisodeStatus::kRunning) {
      const int64_t t = state.step;
      ActionChunk chunk = noise.corrupt(expert_chunk(state, cfg, cfg.chunk_size));
      for (Action& a : chunk.actions) a = normalize_action(a, cfg.stats);
      buffer.push_prediction(std::move(chunk));
      const std::vector<Action> cands = candidates_for(buffer, t, ensemble.horizon);
      const AggregateResult agg = aggregate(cands, ensemble);

      StepRecord record;
      record.candidates = cands;
      if (agg.vote.has_value()) {
        record.similarities = agg.vote->similarities;
        record.high_set = agg.vote->high_set;
        record.low_set = agg.vote->low_set;
      }
      execute(denormalize_action(agg.action, cfg.stats), std::move(record));
    }
  } else {
    while (state.status == EpisodeStatus::kRunning) {
      const ActionChunk chunk = noise.corrupt(expert_chunk(state, cfg, cfg.chunk_size));
      for (const Action& a : chunk.actions) {
        if (state.status != EpisodeStatus::kRunning) break;
        execute(quantize(a, cfg.stats), StepRecord{});
      }
    }
  }

  log.final_status = state.status;
  log.traj_error = log.steps.empty()
                       ? 0.0
                       : error_acc / static_cast<double>(log.steps.size());
  return log;
}

std::vector<NoiseLevel> noise_levels_from_probs(const std::vector<double>& probs,
                                                double sigma) {
  std::vector<NoiseLevel> levels;
  levels.reserve(probs.size());
  for (double p : probs) levels.push_back({p, p > 0.0 ? sigma : 0.0});
  return levels;
}

std::string SuiteConfig::to_json_string() const {
  nlohmann::json j;
  j["episodes"] = episodes;
  j["seed"] = seed;
  nlohmann::json levels = nlohmann::json::array();
  for (const NoiseLevel& level : noise_levels) {
    levels.push_back({{"p", level.outlier_prob}, {"sigma", level.sigma}});
  }
  j["noise_levels"] = std::move(levels);
  j["outlier_scale"] = outlier_scale;
  std::vector<std::string> names;
  names.reserve(strategies.size());
  for (Strategy s : strategies) names.push_back(to_string(s));
  j["strategies"] = names;
  j["execution_mode"] = to_string(execution_mode);
  j["ensemble"] = {{"K", ensemble.horizon},
                   {"tau", ensemble.tau},
                   {"static_weight_decay", ensemble.static_weight_decay},
                   {"tie_break", ensemble.tie_break == TieBreak::kLowSet
                                     ? "low_set"
                                     : "high_set"}};
  j["env"] = {{"start_box", env.start_box},
              {"goal_center", env.goal_center},
              {"goal_box", env.goal_box},
              {"rot_box", env.rot_box},
              {"step_cap", env.step_cap},
              {"rot_cap", env.rot_cap},
              {"kp", env.kp},
              {"eps_pos", env.eps_pos},
              {"grip_radius", env.grip_radius},
              {"step_budget", env.step_budget},
              {"chunk_size", env.chunk_size},
              {"stats_bound", env.stats.q_high[0]}};
  j["workers"] = workers;
  return j.dump(2);
}

SuiteConfig SuiteConfig::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad suite config json: ") + e.what());
  }
  SuiteConfig cfg;
  try {
    if (j.contains("episodes")) cfg.episodes = j["episodes"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("noise_levels")) {
      cfg.noise_levels.clear();
      for (const auto& level : j["noise_levels"]) {
        cfg.noise_levels.push_back(
            {level.at("p").get<double>(), level.at("sigma").get<double>()});
      }
    } else if (j.contains("outlier_probs")) {
      const double sigma =
          j.contains("gaussian_sigma") ? j["gaussian_sigma"].get<double>() : 0.035;
      cfg.noise_levels =
          noise_levels_from_probs(j["outlier_probs"].get<std::vector<double>>(), sigma);
    }
    if (j.contains("outlier_scale")) cfg.outlier_scale = j["outlier_scale"].get<double>();
    if (j.contains("strategies")) {
      cfg.strategies.clear();
      for (const auto& name : j["strategies"]) {
        cfg.strategies.push_back(strategy_from_string(name.get<std::string>()));
      }
    }
    if (j.contains("execution_mode")) {
      cfg.execution_mode = execution_mode_from_string(j["execution_mode"].get<std::string>());
    }
    if (j.contains("ensemble")) {
      const auto& e = j["ensemble"];
      if (e.contains("K")) cfg.ensemble.horizon = e["K"].get<int>();
      if (e.contains("tau")) cfg.ensemble.tau = e["tau"].get<double>();
      if (e.contains("static_weight_decay"))
        cfg.ensemble.static_weight_decay = e["static_weight_decay"].get<double>();
      if (e.contains("tie_break")) {
        cfg.ensemble.tie_break = e["tie_break"].get<std::string>() == "high_set"
                                     ? TieBreak::kHighSet
                                     : TieBreak::kLowSet;
      }
    }
    if (j.contains("env")) {
      const auto& e = j["env"];
      if (e.contains("start_box")) cfg.env.start_box = e["start_box"].get<double>();
      if (e.contains("goal_center"))
        cfg.env.goal_center = e["goal_center"].get<std::array<double, 3>>();
      if (e.contains("goal_box")) cfg.env.goal_box = e["goal_box"].get<double>();
      if (e.contains("rot_box")) cfg.env.rot_box = e["rot_box"].get<double>();
      if (e.contains("step_cap")) cfg.env.step_cap = e["step_cap"].get<double>();
      if (e.contains("rot_cap")) cfg.env.rot_cap = e["rot_cap"].get<double>();
      if (e.contains("kp")) cfg.env.kp = e["kp"].get<double>();
      if (e.contains("eps_pos")) cfg.env.eps_pos = e["eps_pos"].get<double>();
      if (e.contains("grip_radius")) cfg.env.grip_radius = e["grip_radius"].get<double>();
      if (e.contains("step_budget")) cfg.env.step_budget = e["step_budget"].get<int>();
      if (e.contains("chunk_size")) cfg.env.chunk_size = e["chunk_size"].get<int>();
      if (e.contains("stats_bound")) {
        const double bound = e["stats_bound"].get<double>();
        for (int d = 0; d < Action::kContinuousDims; ++d) {
          cfg.env.stats.q_low[d] = -bound;
          cfg.env.stats.q_high[d] = bound;
        }
      }
    }
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad suite config json: ") + e.what());
  }
  return cfg;
}

std::vector<SuiteRow> evaluate(const SuiteConfig& cfg, const EpisodeSink& sink) {
  if (cfg.episodes < 1) throw InvalidInput("suite needs at least one episode");
  if (cfg.strategies.empty() || cfg.noise_levels.empty()) {
    throw InvalidInput("suite needs at least one strategy and one noise level");
  }
  // fail here rather than inside a worker thread
  cfg.env.validate();
  for (Strategy s : cfg.strategies) {
    EnsembleConfig per_row = cfg.ensemble;
    per_row.strategy = s;
    per_row.validate();
  }
  for (const NoiseLevel& level : cfg.noise_levels) {
    if (level.outlier_prob < 0.0 || level.outlier_prob > 1.0 || level.sigma < 0.0) {
      throw InvalidInput("noise level out of range");
    }
  }

  struct Task {
    size_t row;
    int episode;
  };
  const size_t num_rows = cfg.strategies.size() * cfg.noise_levels.size();
  std::vector<Task> tasks;
  tasks.reserve(num_rows * cfg.episodes);
  for (size_t r = 0; r < num_rows; ++r) {
    for (int ep = 0; ep < cfg.episodes; ++ep) tasks.push_back({r, ep});
  }

  struct Outcome {
    bool success = false;
    double traj_error = 0.0;
  };
  std::vector<Outcome> outcomes(tasks.size());

  auto run_task = [&](size_t task_idx) {
    const Task& task = tasks[task_idx];
    const Strategy strategy = cfg.strategies[task.row / cfg.noise_levels.size()];
    const NoiseLevel& level = cfg.noise_levels[task.row % cfg.noise_levels.size()];

    EnsembleConfig ensemble = cfg.ensemble;
    ensemble.strategy = strategy;

    // jitter goes on the translation dims: those gate success, and rotation
    // jitter would only wash out the similarity signal
    NoiseModel nm;
    for (int d = 0; d < 3; ++d) nm.gaussian_sigma[d] = level.sigma;
    nm.outlier_prob = level.outlier_prob;
    nm.outlier_scale = cfg.outlier_scale;

    // episode seeds shared across rows: common random numbers
    const uint64_t ep_seed = derive_seed(cfg.seed, static_cast<uint64_t>(task.episode));
    const EpisodeLog log =
        run_episode(cfg.env, ensemble, cfg.execution_mode, nm, ep_seed);
    outcomes[task_idx] = {log.final_status == EpisodeStatus::kSuccess, log.traj_error};
    if (sink) sink(log, strategy, level, task.episode);
  };

  const int workers = sink ? 1 : std::max(1, cfg.workers);
  if (workers == 1) {
    for (size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
          run_task(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<SuiteRow> rows(num_rows);
  for (size_t r = 0; r < num_rows; ++r) {
    SuiteRow& row = rows[r];
    row.strategy = cfg.strategies[r / cfg.noise_levels.size()];
    row.noise_p = cfg.noise_levels[r % cfg.noise_levels.size()].outlier_prob;
    row.sigma = cfg.noise_levels[r % cfg.noise_levels.size()].sigma;
    row.episodes = cfg.episodes;
    double success = 0.0, err = 0.0;
    for (int ep = 0; ep < cfg.episodes; ++ep) {
      const Outcome& o = outcomes[r * cfg.episodes + ep];
      success += o.success ? 1.0 : 0.0;
      err += o.traj_error;
    }
    row.success_rate = success / cfg.episodes;
    row.mean_traj_error = err / cfg.episodes;
  }
  return rows;
}

std::string suite_rows_to_csv(const std::vector<SuiteRow>& rows) {
  std::string out = "strategy,noise_p,sigma,success_rate,mean_traj_error,episodes\n";
  char line[256];
  for (const SuiteRow& row : rows) {
    std::snprintf(line, sizeof(line), "%s,%.6g,%.6g,%.6f,%.9f,%d\n",
                  to_string(row.strategy).c_str(), row.noise_p, row.sigma,
                  row.success_rate, row.mean_traj_error, row.episodes);
    out += line;
  }
  return out;
}

std::string episode_log_to_json(const EpisodeLog& log, double noise_p, double sigma,
                                int episode) {
  nlohmann::json j;
  j["episode"] = episode;
  j["strategy"] = to_string(log.strategy);
  j["execution_mode"] = to_string(log.mode);
  j["noise_p"] = noise_p;
  j["sigma"] = sigma;
  j["seed"] = log.seed;
  j["status"] = to_string(log.final_status);
  j["steps"] = log.steps.size();
  j["traj_error"] = log.traj_error;
  nlohmann::json executed = nlohmann::json::array();
  nlohmann::json candidates = nlohmann::json::array();
  for (const StepRecord& rec : log.steps) {
    executed.push_back(rec.executed.to_array());
    nlohmann::json committee = nlohmann::json::array();
    for (const Action& a : rec.candidates) committee.push_back(a.to_array());
    candidates.push_back(std::move(committee));
  }
  j["executed"] = std::move(executed);
  j["candidates"] = std::move(candidates);
  return j.dump();
}

}  // namespace actrt
