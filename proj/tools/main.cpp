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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "actrt/action.hpp"
#include "actrt/bench.hpp"
#include "actrt/ensemble.hpp"
#include "actrt/head.hpp"
#include "actrt/policy.hpp"
#include "actrt/sim.hpp"
#include "actrt/tensor_io.hpp"
#include "actrt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw actrt::IoError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw actrt::IoError("cannot open for write: " + path);
  out << text;
  if (!out) throw actrt::IoError("write failed: " + path);
}

std::string out_path(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw actrt::IoError("output directory not writable: " + dir);
  }
  return (fs::path(dir) / name).string();
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw actrt::InvalidInput("empty list: " + csv);
  return out;
}

std::vector<actrt::Strategy> parse_strategy_list(const std::string& csv) {
  std::vector<actrt::Strategy> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(actrt::strategy_from_string(item));
  }
  if (out.empty()) throw actrt::InvalidInput("empty strategy list");
  return out;
}

struct TrainArgs {
  actrt::ToyTrainConfig cfg;
  std::string out_dir = ".";
  std::string weights_name = "weights.bin";
  std::string trace_name = "loss_trace.csv";
  std::string activation = "relu";
  std::string config_path;
};

int run_train(const TrainArgs& args) {
  actrt::ToyTrainConfig cfg = args.cfg;
  if (!args.config_path.empty()) {
    const json j = json::parse(slurp(args.config_path));
    if (j.contains("hidden_width")) cfg.hidden_width = j["hidden_width"].get<int>();
    if (j.contains("chunk_size")) cfg.chunk_size = j["chunk_size"].get<int>();
    if (j.contains("action_dim")) cfg.action_dim = j["action_dim"].get<int>();
    if (j.contains("num_samples")) cfg.num_samples = j["num_samples"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("max_steps")) cfg.max_steps = j["max_steps"].get<int>();
    if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("target_l1")) cfg.target_l1 = j["target_l1"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  }
  cfg.output_activation = actrt::output_activation_from_string(args.activation);

  const actrt::ToyTrainResult result = actrt::train_toy(cfg);

  const std::string weights_path = out_path(args.out_dir, args.weights_name);
  const actrt::HeadParamsF weights =
      actrt::cast_params<float, double>(result.params);
  actrt::save_head_params(weights_path, weights);
  const actrt::HeadParamsF reloaded = actrt::load_head_params(weights_path);
  for (int s = 0; s < actrt::HeadParamsF::kStages; ++s) {
    if (reloaded.weight[s] != weights.weight[s]) {
      throw actrt::IoError("weights round-trip mismatch");
    }
  }
  actrt::write_loss_trace_csv(out_path(args.out_dir, args.trace_name), result.trace);

  std::cout << (result.converged ? "converged" : "budget exhausted") << " after "
            << result.steps_run << " steps, eval L1 = " << result.final_eval_l1
            << "\nweights: " << weights_path << "\n";
  return result.converged ? 0 : 2;
}

struct EvalArgs {
  actrt::SuiteConfig cfg;
  double sigma = 0.035;
  std::string out_dir = ".";
  std::string csv_name = "suite.csv";
  std::string episode_logs;  // optional JSONL path
  std::string config_path;
  std::string noise;
  std::string strategies;
  std::string mode;
};

int run_eval(const EvalArgs& args, const CLI::App* cmd) {
  actrt::SuiteConfig cfg = args.cfg;
  if (!args.config_path.empty()) {
    actrt::SuiteConfig from_file =
        actrt::SuiteConfig::from_json_string(slurp(args.config_path));
    // explicit flags win over the config file
    if (cmd->count("--episodes")) from_file.episodes = cfg.episodes;
    if (cmd->count("--seed")) from_file.seed = cfg.seed;
    if (cmd->count("--workers")) from_file.workers = cfg.workers;
    cfg = from_file;
  }
  if (!args.noise.empty()) {
    cfg.noise_levels =
        actrt::noise_levels_from_probs(parse_double_list(args.noise), args.sigma);
  } else if (cmd->count("--sigma")) {
    for (actrt::NoiseLevel& level : cfg.noise_levels) {
      if (level.outlier_prob > 0.0) level.sigma = args.sigma;
    }
  }
  if (!args.strategies.empty()) cfg.strategies = parse_strategy_list(args.strategies);
  if (!args.mode.empty()) cfg.execution_mode = actrt::execution_mode_from_string(args.mode);

  std::ofstream log_stream;
  actrt::EpisodeSink sink;
  if (!args.episode_logs.empty()) {
    log_stream.open(out_path(args.out_dir, args.episode_logs));
    if (!log_stream) throw actrt::IoError("cannot open episode log file");
    sink = [&](const actrt::EpisodeLog& log, actrt::Strategy,
               const actrt::NoiseLevel& level, int ep) {
      log_stream << actrt::episode_log_to_json(log, level.outlier_prob, level.sigma, ep)
                 << "\n";
    };
  }

  const std::vector<actrt::SuiteRow> rows = actrt::evaluate(cfg, sink);
  const std::string csv = actrt::suite_rows_to_csv(rows);
  write_text(out_path(args.out_dir, args.csv_name), csv);
  std::cout << csv;
  return 0;
}

struct BenchArgs {
  actrt::BenchForwardConfig base;
  std::string out_dir = ".";
  std::string baseline = "openvla_serial";
  std::string csv_name = "bench.csv";
  std::string json_name = "bench.json";
  std::string config_path;
  int custom_chunk = 0;
  int custom_tokens = 0;
};

int run_bench(const BenchArgs& args) {
  actrt::BenchForwardConfig base = args.base;
  std::string baseline = args.baseline;
  if (!args.config_path.empty()) {
    const json j = json::parse(slurp(args.config_path));
    if (j.contains("queries")) base.queries = j["queries"].get<int>();
    if (j.contains("warmup")) base.warmup = j["warmup"].get<int>();
    if (j.contains("hidden_width")) base.hidden_width = j["hidden_width"].get<int>();
    if (j.contains("prefill_work")) base.prefill_work = j["prefill_work"].get<uint64_t>();
    if (j.contains("decode_work")) base.decode_work = j["decode_work"].get<uint64_t>();
    if (j.contains("baseline")) baseline = j["baseline"].get<std::string>();
  }

  std::vector<actrt::BenchForwardConfig> configs;
  if (args.custom_chunk > 0 || args.custom_tokens > 0) {
    actrt::BenchForwardConfig serial = base;
    serial.name = "openvla_serial";
    serial.mode = actrt::BenchMode::kSerialBaseline;
    serial.chunk_size = 1;
    serial.tokens = 1;
    configs.push_back(serial);

    actrt::BenchForwardConfig custom = base;
    custom.name = "custom";
    custom.mode = actrt::BenchMode::kParallelAct;
    custom.chunk_size = args.custom_chunk > 0 ? args.custom_chunk : 8;
    custom.tokens = args.custom_tokens > 0 ? args.custom_tokens : 1;
    configs.push_back(custom);
  } else {
    configs = actrt::default_bench_suite(base);
  }

  std::vector<actrt::LatencyStats> stats;
  stats.reserve(configs.size());
  for (const auto& cfg : configs) stats.push_back(actrt::bench_forward(cfg));

  size_t baseline_index = stats.size();
  for (size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].config_name == baseline) baseline_index = i;
  }
  if (baseline_index == stats.size()) {
    throw actrt::MissingBaseline("no benchmarked config named " + baseline);
  }

  const actrt::BenchReport report =
      actrt::make_report(stats, baseline_index, base.warmup);
  const std::string csv = actrt::report_to_csv(report);
  write_text(out_path(args.out_dir, args.csv_name), csv);
  write_text(out_path(args.out_dir, args.json_name), actrt::report_to_json(report));
  std::cout << csv;
  return 0;
}

struct TraceArgs {
  std::string input;   // JSONL of chunks
  std::string replay;  // tensor replay file
  std::string weights;
  std::string stats;
  std::string out_dir = ".";
  std::string trace_name = "trace.jsonl";
  actrt::EnsembleConfig ensemble;
  std::string strategy = "vote";
  std::string tie_break = "low_set";
};

std::vector<actrt::ActionChunk> chunks_from_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw actrt::IoError("cannot open: " + path);
  std::vector<actrt::ActionChunk> chunks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      actrt::ActionChunk chunk;
      chunk.origin_step = j.at("origin_step").get<int64_t>();
      for (const auto& row : j.at("actions")) {
        const auto values = row.get<std::vector<double>>();
        chunk.actions.push_back(actrt::Action::from_span(values));
      }
      if (chunk.actions.empty()) throw actrt::IoError("chunk has no actions");
      chunks.push_back(std::move(chunk));
    } catch (const std::exception& e) {
      throw actrt::IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (chunks.empty()) throw actrt::IoError("no chunks in " + path);
  return chunks;
}

int run_trace(const TraceArgs& args) {
  actrt::EnsembleConfig ensemble = args.ensemble;
  ensemble.strategy = actrt::strategy_from_string(args.strategy);
  ensemble.tie_break =
      args.tie_break == "high_set" ? actrt::TieBreak::kHighSet : actrt::TieBreak::kLowSet;
  ensemble.validate();

  const bool have_stats = !args.stats.empty();
  actrt::NormalizationStats stats;
  if (have_stats) stats = actrt::NormalizationStats::load(args.stats);

  std::vector<actrt::ActionChunk> chunks;
  if (!args.replay.empty()) {
    if (args.weights.empty() || !have_stats) {
      throw actrt::InvalidInput("--replay needs --weights and --stats");
    }
    const actrt::ReplayFile replay = actrt::ReplayFile::load(args.replay);
    const actrt::HeadParamsF head = actrt::load_head_params(args.weights);
    for (const auto& [step, hidden] : replay.steps) {
      chunks.push_back(actrt::predict_chunk_from_hidden(hidden, head, stats, step));
    }
  } else if (!args.input.empty()) {
    chunks = chunks_from_jsonl(args.input);
  } else {
    throw actrt::InvalidInput("give either --input or --replay");
  }

  std::ofstream out(out_path(args.out_dir, args.trace_name));
  if (!out) throw actrt::IoError("cannot open trace output");

  actrt::HistoryBuffer buffer(ensemble.horizon);
  for (actrt::ActionChunk& chunk : chunks) {
    if (have_stats) {
      for (actrt::Action& a : chunk.actions) a = actrt::normalize_action(a, stats);
    }
    const int64_t t = chunk.origin_step;
    buffer.push_prediction(std::move(chunk));
    const std::vector<actrt::Action> cands =
        actrt::candidates_for(buffer, t, ensemble.horizon);
    const actrt::AggregateResult agg = actrt::aggregate(cands, ensemble);

    actrt::TraceRecord rec;
    rec.t = t;
    rec.strategy = ensemble.strategy;
    rec.action = agg.action;
    if (agg.vote.has_value()) {
      rec.similarities = agg.vote->similarities;
      rec.high_set = agg.vote->high_set;
      rec.low_set = agg.vote->low_set;
    }
    out << actrt::trace_record_to_json(rec) << "\n";
  }
  if (!out) throw actrt::IoError("trace write failed");
  return 0;
}

int run_inspect(const std::string& weights_path) {
  const actrt::TensorFileSummary summary = actrt::inspect_tensor_file(weights_path);
  std::cout << "meta: " << summary.meta_json << "\n";
  std::cout << "blob: " << summary.blob_bytes << " bytes\n";
  for (const auto& t : summary.tensors) {
    std::cout << "  " << t.name << " shape=[";
    for (size_t i = 0; i < t.shape.size(); ++i) {
      std::cout << (i ? "," : "") << t.shape[i];
    }
    std::cout << "] offset=" << t.offset << " dtype=" << t.dtype << "\n";
  }
  // weights files additionally get a full structural validation
  const json meta = json::parse(summary.meta_json);
  if (meta.contains("N")) {
    const actrt::HeadParamsF params = actrt::load_head_params(weights_path);
    std::cout << "head: H=" << params.hidden_width << " N=" << params.chunk_size
              << " A=" << params.action_dim << " params="
              << actrt::head_param_count(params.hidden_width, params.chunk_size,
                                         params.action_dim)
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chunked action decoding runtime: toy head training, vote-ensemble "
               "evaluation and latency benchmarks"};
  app.require_subcommand(1);

  int exit_code = 0;

  TrainArgs train_args;
  CLI::App* train =
      app.add_subcommand("train-toy", "train the action head on the synthetic task");
  train->add_option("--seed", train_args.cfg.seed, "root seed")->capture_default_str();
  train->add_option("--out", train_args.out_dir, "output directory")->capture_default_str();
  train->add_option("--config", train_args.config_path, "JSON config file");
  train->add_option("--hidden", train_args.cfg.hidden_width, "hidden width H")->capture_default_str();
  train->add_option("--chunk", train_args.cfg.chunk_size, "chunk size N")->capture_default_str();
  train->add_option("--adim", train_args.cfg.action_dim, "action dim A")->capture_default_str();
  train->add_option("--latent", train_args.cfg.latent_dim, "latent task dimension")->capture_default_str();
  train->add_option("--samples", train_args.cfg.num_samples, "training samples")->capture_default_str();
  train->add_option("--eval-samples", train_args.cfg.eval_samples, "held-out samples")->capture_default_str();
  train->add_option("--batch", train_args.cfg.batch_size, "batch size")->capture_default_str();
  train->add_option("--steps", train_args.cfg.max_steps, "step budget")->capture_default_str();
  train->add_option("--eval-every", train_args.cfg.eval_every, "evaluation interval")->capture_default_str();
  train->add_option("--target-l1", train_args.cfg.target_l1, "stopping threshold")->capture_default_str();
  train->add_option("--lr", train_args.cfg.learning_rate, "learning rate")->capture_default_str();
  train->add_option("--vocab", train_args.cfg.vocab_size, "toy vocabulary size")->capture_default_str();
  train->add_option("--instr-len", train_args.cfg.instr_len, "instruction tokens per sample")->capture_default_str();
  train->add_option("--lambda-token", train_args.cfg.loss_weights.lambda_token, "token loss weight")->capture_default_str();
  train->add_option("--lambda-action", train_args.cfg.loss_weights.lambda_action, "action loss weight")->capture_default_str();
  train->add_option("--activation", train_args.activation, "output activation: relu|linear")->capture_default_str();
  train->add_option("--weights-name", train_args.weights_name, "weights file name")->capture_default_str();
  train->add_option("--trace-name", train_args.trace_name, "loss trace file name")->capture_default_str();
  train->callback([&]() { exit_code = run_train(train_args); });

  EvalArgs eval_args;
  CLI::App* eval =
      app.add_subcommand("eval", "closed-loop suite over strategies and noise levels");
  eval->add_option("--seed", eval_args.cfg.seed, "root seed")->capture_default_str();
  eval->add_option("--out", eval_args.out_dir, "output directory")->capture_default_str();
  eval->add_option("--config", eval_args.config_path, "suite JSON config");
  eval->add_option("--episodes", eval_args.cfg.episodes, "episodes per row")->capture_default_str();
  eval->add_option("--noise", eval_args.noise, "outlier probabilities, comma separated");
  eval->add_option("--sigma", eval_args.sigma, "translation jitter for nonzero-probability rows")->capture_default_str();
  eval->add_option("--outlier-scale", eval_args.cfg.outlier_scale, "outlier reversal scale")->capture_default_str();
  eval->add_option("--strategies", eval_args.strategies, "strategy list, comma separated");
  eval->add_option("--mode", eval_args.mode, "per_step | open_loop_chunk");
  eval->add_option("--k", eval_args.cfg.ensemble.horizon, "ensemble horizon K")->capture_default_str();
  eval->add_option("--tau", eval_args.cfg.ensemble.tau, "similarity threshold")->capture_default_str();
  eval->add_option("--decay", eval_args.cfg.ensemble.static_weight_decay, "static weighting decay")->capture_default_str();
  eval->add_option("--chunk", eval_args.cfg.env.chunk_size, "prediction chunk size")->capture_default_str();
  eval->add_option("--budget", eval_args.cfg.env.step_budget, "step budget per episode")->capture_default_str();
  eval->add_option("--workers", eval_args.cfg.workers, "episode worker threads")->capture_default_str();
  eval->add_option("--csv-name", eval_args.csv_name, "suite CSV file name")->capture_default_str();
  eval->add_option("--episode-logs", eval_args.episode_logs,
                   "episode JSONL file name (forces one worker)");
  eval->callback([&]() { exit_code = run_eval(eval_args, eval); });

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "latency and throughput measurement");
  bench->add_option("--seed", bench_args.base.seed, "root seed")->capture_default_str();
  bench->add_option("--out", bench_args.out_dir, "output directory")->capture_default_str();
  bench->add_option("--config", bench_args.config_path, "JSON config file");
  bench->add_option("--queries", bench_args.base.queries, "timed queries per config")->capture_default_str();
  bench->add_option("--warmup", bench_args.base.warmup, "warmup queries, excluded")->capture_default_str();
  bench->add_option("--hidden", bench_args.base.hidden_width, "hidden width H")->capture_default_str();
  bench->add_option("--adim", bench_args.base.action_dim, "action dim A")->capture_default_str();
  bench->add_option("--chunk", bench_args.custom_chunk, "custom row: actions per token");
  bench->add_option("--tokens", bench_args.custom_tokens, "custom row: action tokens");
  bench->add_option("--prefill-work", bench_args.base.prefill_work,
                    "prompt-pass busy-work iterations")->capture_default_str();
  bench->add_option("--decode-work", bench_args.base.decode_work,
                    "per-token busy-work iterations")->capture_default_str();
  bench->add_option("--workers", bench_args.base.workers,
                    "must stay 0; the measurement loop is single-threaded")->capture_default_str();
  bench->add_option("--baseline", bench_args.baseline, "baseline config name")->capture_default_str();
  bench->add_option("--csv-name", bench_args.csv_name, "report CSV name")->capture_default_str();
  bench->add_option("--json-name", bench_args.json_name, "report JSON name")->capture_default_str();
  bench->callback([&]() { exit_code = run_bench(bench_args); });

  TraceArgs trace_args;
  CLI::App* trace =
      app.add_subcommand("ensemble-trace", "replay chunk predictions through the ensemble");
  trace->add_option("--input", trace_args.input, "JSONL of chunks: {origin_step, actions}");
  trace->add_option("--replay", trace_args.replay,
                    "hidden-state replay file (needs --weights/--stats)");
  trace->add_option("--weights", trace_args.weights, "weights file for replay decoding");
  trace->add_option("--stats", trace_args.stats, "normalization stats JSON");
  trace->add_option("--out", trace_args.out_dir, "output directory")->capture_default_str();
  trace->add_option("--trace-name", trace_args.trace_name, "trace JSONL name")->capture_default_str();
  trace->add_option("--k", trace_args.ensemble.horizon, "ensemble horizon K")->capture_default_str();
  trace->add_option("--tau", trace_args.ensemble.tau, "similarity threshold")->capture_default_str();
  trace->add_option("--strategy", trace_args.strategy, "aggregation strategy")->capture_default_str();
  trace->add_option("--tie-break", trace_args.tie_break, "low_set | high_set")->capture_default_str();
  trace->callback([&]() { exit_code = run_trace(trace_args); });

  std::string inspect_path;
  CLI::App* inspect = app.add_subcommand("inspect-weights", "print a tensor file manifest");
  inspect->add_option("--weights", inspect_path, "tensor file")->required();
  inspect->callback([&]() { exit_code = run_inspect(inspect_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
