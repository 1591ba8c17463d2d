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

#ifndef ACTRT_BENCH_HPP_
#define ACTRT_BENCH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "actrt/common.hpp"

namespace actrt {

enum class BenchMode : uint8_t {
  kParallelAct,     // action-token decoding through the head
  kSerialBaseline,  // emulated token-per-dimension autoregressive decoding
};

struct BenchForwardConfig {
  std::string name = "config";
  int hidden_width = 64;
  int chunk_size = 8;  // actions per token (parallel) or per query (serial)
  int action_dim = 7;
  int tokens = 1;
  int queries = 100;
  int warmup = 10;
  BenchMode mode = BenchMode::kParallelAct;
  uint64_t prefill_work = 1500000;  // busy-work iterations per query
  uint64_t decode_work = 150000;    // busy-work iterations per decoder pass
  uint64_t seed = 0;
  int obs_dim = 8;
  int prompt_len = 8;
  int workers = 0;  // measurement is single-threaded; nonzero refuses to run
};

struct LatencyStats {
  std::string config_name;
  int chunk_size = 0;  // actions produced per query
  int tokens = 0;      // tokens generated per query
  uint64_t decoder_passes = 0;
  std::vector<double> samples_ms;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double throughput_hz = 0.0;  // chunk_size / mean latency in seconds
};

// Times the end-to-end prediction path (pseudo-backbone plus head) with a
// monotonic clock; warmup queries run first and are excluded from samples.
LatencyStats bench_forward(const BenchForwardConfig& cfg);

// Actions per second for a chunk produced in mean_latency_ms.
double throughput(int chunk_size, double mean_latency_ms);

struct BenchReportRow {
  LatencyStats stats;
  double speedup = 1.0;  // throughput relative to the baseline row
};

struct BenchReport {
  std::vector<BenchReportRow> rows;
  size_t baseline_index = 0;
  int warmup_excluded = 0;
};

BenchReport make_report(const std::vector<LatencyStats>& stats,
                        size_t baseline_index, int warmup_excluded);

std::string report_to_csv(const BenchReport& report);
std::string report_to_json(const BenchReport& report);

// The stock comparison set: an emulated serial baseline plus parallel
// decoding at chunk sizes 1, 8 and 16 (two tokens).
std::vector<BenchForwardConfig> default_bench_suite(const BenchForwardConfig& base);

}  // namespace actrt

#endif  // ACTRT_BENCH_HPP_
