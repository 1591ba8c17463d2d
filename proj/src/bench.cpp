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

#include "actrt/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "actrt/action.hpp"
#include "actrt/head.hpp"
#include "actrt/policy.hpp"

namespace actrt {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0, Clock::time_point t1) {
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

NormalizationStats passthrough_stats() {
  NormalizationStats stats;
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    stats.q_low[d] = 0.0;
    stats.q_high[d] = 1.0;
  }
  return stats;
}

}  // namespace

LatencyStats bench_forward(const BenchForwardConfig& cfg) {
  if (cfg.workers != 0) {
    throw InvalidInput("the measurement loop is single-threaded; worker parallelism "
                       "must stay zero");
  }
  if (cfg.queries < 1 || cfg.warmup < 0) {
    throw InvalidInput("bench needs queries >= 1 and warmup >= 0");
  }
  if (cfg.hidden_width <= 0 || cfg.chunk_size <= 0 || cfg.action_dim <= 0 ||
      cfg.tokens < 1) {
    throw InvalidDims("bench dimensions must be positive");
  }

  PseudoBackboneConfig backbone_cfg;
  backbone_cfg.hidden_width = cfg.hidden_width;
  backbone_cfg.seed = derive_seed(cfg.seed, "bench-backbone");
  backbone_cfg.prefill_work = cfg.prefill_work;
  backbone_cfg.decode_work = cfg.decode_work;
  const PseudoBackbone backbone(backbone_cfg);

  const HeadParamsF head =
      init_params<float>(cfg.hidden_width, cfg.chunk_size, cfg.action_dim,
                         derive_seed(cfg.seed, "bench-head"));
  const NormalizationStats stats = passthrough_stats();

  Rng rng(derive_seed(cfg.seed, "bench-query"));
  std::vector<double> obs(cfg.obs_dim);
  for (auto& v : obs) v = rng.uniform(-1.0, 1.0);
  std::vector<int> instr(cfg.prompt_len);
  for (size_t i = 0; i < instr.size(); ++i) instr[i] = static_cast<int>(i) + 1;

  LatencyStats out;
  out.config_name = cfg.name;

  auto run_query = [&](PassCounter& counter) {
    if (cfg.mode == BenchMode::kParallelAct) {
      predict_chunk(backbone, obs, instr, head, stats, cfg.tokens, counter);
    } else {
      backbone.serial_decode_baseline(obs, instr, cfg.chunk_size, cfg.action_dim,
                                      counter);
    }
  };

  for (int i = 0; i < cfg.warmup; ++i) {
    PassCounter counter;
    run_query(counter);
  }

  out.samples_ms.reserve(cfg.queries);
  uint64_t passes_per_query = 0;
  for (int i = 0; i < cfg.queries; ++i) {
    PassCounter counter;
    const auto t0 = Clock::now();
    run_query(counter);
    const auto t1 = Clock::now();
    out.samples_ms.push_back(elapsed_ms(t0, t1));
    passes_per_query = counter.decoder_forward_passes;
  }

  if (cfg.mode == BenchMode::kParallelAct) {
    out.chunk_size = cfg.tokens * cfg.chunk_size;
    out.tokens = cfg.tokens;
  } else {
    out.chunk_size = cfg.chunk_size;
    out.tokens = cfg.chunk_size * cfg.action_dim;
  }
  out.decoder_passes = passes_per_query;

  double total = 0.0;
  for (double v : out.samples_ms) total += v;
  out.mean_ms = total / static_cast<double>(out.samples_ms.size());
  std::vector<double> sorted = out.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  out.p50_ms = percentile_sorted(sorted, 50.0);
  out.p95_ms = percentile_sorted(sorted, 95.0);
  out.throughput_hz = throughput(out.chunk_size, out.mean_ms);
  return out;
}

double throughput(int chunk_size, double mean_latency_ms) {
  if (chunk_size <= 0 || !(mean_latency_ms > 0.0)) {
    throw InvalidInput("throughput needs positive chunk size and latency");
  }
  return static_cast<double>(chunk_size) / (mean_latency_ms / 1000.0);
}

BenchReport make_report(const std::vector<LatencyStats>& stats,
                        size_t baseline_index, int warmup_excluded) {
  if (stats.empty() || baseline_index >= stats.size()) {
    throw MissingBaseline("report needs a baseline row");
  }
  BenchReport report;
  report.baseline_index = baseline_index;
  report.warmup_excluded = warmup_excluded;
  const double base = stats[baseline_index].throughput_hz;
  if (!(base > 0.0)) throw MissingBaseline("baseline throughput is not positive");
  report.rows.reserve(stats.size());
  for (size_t i = 0; i < stats.size(); ++i) {
    BenchReportRow row;
    row.stats = stats[i];
    row.speedup = i == baseline_index ? 1.0 : stats[i].throughput_hz / base;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_to_csv(const BenchReport& report) {
  std::string out = "# warmup_queries_excluded=" +
                    std::to_string(report.warmup_excluded) + "\n";
  out += "config_name,chunk_size,tokens,mean_ms,p50_ms,p95_ms,throughput_hz,"
         "speedup,decoder_passes\n";
  char line[320];
  for (const BenchReportRow& row : report.rows) {
    const LatencyStats& s = row.stats;
    std::snprintf(line, sizeof(line), "%s,%d,%d,%.6f,%.6f,%.6f,%.3f,%.3f,%llu\n",
                  s.config_name.c_str(), s.chunk_size, s.tokens, s.mean_ms, s.p50_ms,
                  s.p95_ms, s.throughput_hz, row.speedup,
                  static_cast<unsigned long long>(s.decoder_passes));
    out += line;
  }
  return out;
}

std::string report_to_json(const BenchReport& report) {
  nlohmann::json j;
  j["warmup_queries_excluded"] = report.warmup_excluded;
  j["baseline"] = report.rows[report.baseline_index].stats.config_name;
  nlohmann::json rows = nlohmann::json::array();
  for (const BenchReportRow& row : report.rows) {
    const LatencyStats& s = row.stats;
    rows.push_back({{"config_name", s.config_name},
                    {"chunk_size", s.chunk_size},
                    {"tokens", s.tokens},
                    {"mean_ms", s.mean_ms},
                    {"p50_ms", s.p50_ms},
                    {"p95_ms", s.p95_ms},
                    {"throughput_hz", s.throughput_hz},
                    {"speedup", row.speedup},
                    {"decoder_passes", s.decoder_passes}});
  }
  j["rows"] = std::move(rows);
  return j.dump(2);
}

std::vector<BenchForwardConfig> default_bench_suite(const BenchForwardConfig& base) {
  std::vector<BenchForwardConfig> configs;

  BenchForwardConfig serial = base;
  serial.name = "openvla_serial";
  serial.mode = BenchMode::kSerialBaseline;
  serial.chunk_size = 1;
  serial.tokens = 1;
  configs.push_back(serial);

  BenchForwardConfig chunk1 = base;
  chunk1.name = "ours_chunk1";
  chunk1.mode = BenchMode::kParallelAct;
  chunk1.chunk_size = 1;
  chunk1.tokens = 1;
  configs.push_back(chunk1);

  BenchForwardConfig chunk8 = base;
  chunk8.name = "ours_chunk8";
  chunk8.mode = BenchMode::kParallelAct;
  chunk8.chunk_size = 8;
  chunk8.tokens = 1;
  configs.push_back(chunk8);

  BenchForwardConfig chunk16 = base;
  chunk16.name = "ours_chunk16";
  chunk16.mode = BenchMode::kParallelAct;
  chunk16.chunk_size = 8;
  chunk16.tokens = 2;
  configs.push_back(chunk16);

  return configs;
}

}  // namespace actrt
