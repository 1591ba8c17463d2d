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

#include "actrt/train.hpp"

#include <cmath>
#include <fstream>

namespace actrt {

namespace {

struct ToySample {
  std::vector<double> hidden;        // H, input to the action head
  std::vector<double> target;        // N*A, normalized action targets
  std::vector<int> token_ids;        // instr_len + 1, last is the action token
  std::vector<double> token_hidden;  // (instr_len + 1) x H stand-in states
};

// Smooth bounded targets keep every value representable under the ReLU
// output activation.
constexpr double kTargetCenter = 0.5;
constexpr double kTargetAmplitude = 0.3;

struct ToyTask {
  int hidden_width;
  int latent_dim;
  int out_dim;
  int instr_len;
  int vocab_size;
  std::vector<double> latent_to_hidden;  // H x d
  std::vector<double> omega;             // out x d
  std::vector<double> phase;             // out
  std::vector<double> token_maps;        // (instr_len+1) x H x d
  std::vector<double> token_offsets;     // (instr_len+1) x H

  ToyTask(const ToyTrainConfig& cfg, Rng& rng)
      : hidden_width(cfg.hidden_width),
        latent_dim(cfg.latent_dim),
        out_dim(cfg.chunk_size * cfg.action_dim),
        instr_len(cfg.instr_len),
        vocab_size(cfg.vocab_size) {
    const double hscale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
    latent_to_hidden.resize(static_cast<size_t>(hidden_width) * latent_dim);
    for (auto& v : latent_to_hidden) v = rng.normal(0.0, hscale);
    omega.resize(static_cast<size_t>(out_dim) * latent_dim);
    for (auto& v : omega) v = rng.normal(0.0, 0.8 * hscale);
    phase.resize(out_dim);
    for (auto& v : phase) v = rng.uniform(0.0, 2.0 * M_PI);
    const size_t positions = static_cast<size_t>(instr_len) + 1;
    token_maps.resize(positions * hidden_width * latent_dim);
    for (auto& v : token_maps) v = rng.normal(0.0, hscale);
    token_offsets.resize(positions * hidden_width);
    for (auto& v : token_offsets) v = rng.normal(0.0, 0.5);
  }

  ToySample draw(Rng& rng) const {
    ToySample s;
    std::vector<double> z(latent_dim);
    for (auto& v : z) v = rng.uniform(-1.0, 1.0);

    s.hidden.assign(hidden_width, 0.0);
    for (int j = 0; j < hidden_width; ++j) {
      double acc = 0.0;
      for (int i = 0; i < latent_dim; ++i) {
        acc += latent_to_hidden[static_cast<size_t>(j) * latent_dim + i] * z[i];
      }
      s.hidden[j] = acc;
    }

    s.target.assign(out_dim, 0.0);
    for (int j = 0; j < out_dim; ++j) {
      double acc = phase[j];
      for (int i = 0; i < latent_dim; ++i) {
        acc += omega[static_cast<size_t>(j) * latent_dim + i] * z[i];
      }
      s.target[j] = kTargetCenter + kTargetAmplitude * std::sin(acc);
    }

    const int positions = instr_len + 1;
    const int sign_bit = z[0] > 0.0 ? 1 : 0;
    s.token_ids.resize(positions);
    for (int p = 0; p < instr_len; ++p) {
      s.token_ids[p] = (p + sign_bit) % (vocab_size - 1);
    }
    s.token_ids[instr_len] = vocab_size - 1;  // reserved action token

    s.token_hidden.assign(static_cast<size_t>(positions) * hidden_width, 0.0);
    for (int p = 0; p < positions; ++p) {
      for (int j = 0; j < hidden_width; ++j) {
        double acc = token_offsets[static_cast<size_t>(p) * hidden_width + j];
        const size_t base =
            (static_cast<size_t>(p) * hidden_width + j) * latent_dim;
        for (int i = 0; i < latent_dim; ++i) acc += token_maps[base + i] * z[i];
        s.token_hidden[static_cast<size_t>(p) * hidden_width + j] = acc;
      }
    }
    return s;
  }
};

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 AdamState& state, const ToyTrainConfig& cfg, int step) {
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, step);
  const double corr2 = 1.0 - std::pow(b2, step);
  for (size_t i = 0; i < param.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = state.m[i] / corr1;
    const double vhat = state.v[i] / corr2;
    param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

double eval_l1(const HeadParamsD& params, const std::vector<ToySample>& samples) {
  double acc = 0.0;
  size_t count = 0;
  HeadForwardCacheT<double> cache;
  for (const ToySample& s : samples) {
    head_forward_cached<double>(s.hidden, params, cache);
    for (size_t j = 0; j < cache.output.size(); ++j) {
      acc += std::abs(cache.output[j] - s.target[j]);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace

void ToyTrainConfig::validate() const {
  if (hidden_width <= 0 || chunk_size <= 0 || action_dim <= 0 || latent_dim <= 0) {
    throw InvalidDims("toy config dimensions must be positive");
  }
  if (num_samples <= 0 || batch_size <= 0 || max_steps <= 0 || eval_every <= 0 ||
      eval_samples <= 0) {
    throw InvalidInput("toy config counts must be positive");
  }
  if (vocab_size < 2 || instr_len < 1) {
    throw InvalidInput("toy vocabulary needs >= 2 ids and >= 1 instruction token");
  }
  loss_weights.validate();
}

ToyTrainResult train_toy(const ToyTrainConfig& cfg) {
  cfg.validate();

  Rng task_rng(derive_seed(cfg.seed, "toy-task"));
  const ToyTask task(cfg, task_rng);

  Rng data_rng(derive_seed(cfg.seed, "toy-data"));
  std::vector<ToySample> train_set(cfg.num_samples);
  for (auto& s : train_set) s = task.draw(data_rng);
  std::vector<ToySample> eval_set(cfg.eval_samples);
  for (auto& s : eval_set) s = task.draw(data_rng);

  ToyTrainResult result;
  result.params = init_params<double>(cfg.hidden_width, cfg.chunk_size,
                                      cfg.action_dim, derive_seed(cfg.seed, "init"),
                                      cfg.output_activation);
  HeadParamsD& params = result.params;

  Rng cls_rng(derive_seed(cfg.seed, "classifier"));
  const int vocab = cfg.vocab_size;
  const int h = cfg.hidden_width;
  result.classifier_w.resize(static_cast<size_t>(h) * vocab);
  const double cls_std = std::sqrt(2.0 / static_cast<double>(h));
  for (auto& v : result.classifier_w) v = cls_rng.normal(0.0, cls_std);
  result.classifier_b.assign(vocab, 0.0);

  std::array<AdamState, 4> opt_w{AdamState(params.weight[0].size()),
                                 AdamState(params.weight[1].size()),
                                 AdamState(params.weight[2].size()),
                                 AdamState(params.weight[3].size())};
  std::array<AdamState, 4> opt_b{AdamState(params.bias[0].size()),
                                 AdamState(params.bias[1].size()),
                                 AdamState(params.bias[2].size()),
                                 AdamState(params.bias[3].size())};
  std::array<AdamState, 4> opt_g{AdamState(params.gamma[0].size()),
                                 AdamState(params.gamma[1].size()),
                                 AdamState(params.gamma[2].size()),
                                 AdamState(params.gamma[3].size())};
  std::array<AdamState, 4> opt_beta{AdamState(params.beta[0].size()),
                                    AdamState(params.beta[1].size()),
                                    AdamState(params.beta[2].size()),
                                    AdamState(params.beta[3].size())};
  AdamState opt_cls_w(result.classifier_w.size());
  AdamState opt_cls_b(result.classifier_b.size());

  Rng batch_rng(derive_seed(cfg.seed, "batches"));
  const int out_dim = params.output_width();
  const int positions = cfg.instr_len + 1;
  // batch_size >= num_samples means a deterministic full-batch pass
  const bool full_batch = cfg.batch_size >= cfg.num_samples;
  const int batch = full_batch ? cfg.num_samples : cfg.batch_size;

  HeadForwardCacheT<double> cache;
  std::vector<double> d_out(out_dim);
  std::vector<double> logits(vocab);
  std::vector<double> cls_w_grad(result.classifier_w.size());
  std::vector<double> cls_b_grad(result.classifier_b.size());

  result.final_eval_l1 = eval_l1(params, eval_set);
  for (int step = 1; step <= cfg.max_steps; ++step) {
    HeadGradsT<double> grads = HeadGradsT<double>::zeros_like(params);
    std::fill(cls_w_grad.begin(), cls_w_grad.end(), 0.0);
    std::fill(cls_b_grad.begin(), cls_b_grad.end(), 0.0);

    double batch_l1 = 0.0;
    double batch_ce = 0.0;
    const double inv_bna = 1.0 / (static_cast<double>(batch) * out_dim);
    const double inv_bp = 1.0 / (static_cast<double>(batch) * positions);

    for (int b = 0; b < batch; ++b) {
      const ToySample& s =
          train_set[full_batch ? b : batch_rng.uniform_int(0, cfg.num_samples - 1)];

      // action branch
      head_forward_cached<double>(s.hidden, params, cache);
      for (int j = 0; j < out_dim; ++j) {
        const double diff = cache.output[j] - s.target[j];
        batch_l1 += std::abs(diff) * inv_bna;
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        d_out[j] = cfg.loss_weights.lambda_action * sign * inv_bna;
      }
      head_backward_accumulate<double>(params, cache, d_out, grads);

      // token branch: linear classifier over the stand-in hidden states
      for (int p = 0; p < positions; ++p) {
        const double* hp = s.token_hidden.data() + static_cast<size_t>(p) * h;
        for (int c = 0; c < vocab; ++c) logits[c] = result.classifier_b[c];
        for (int r = 0; r < h; ++r) {
          const double hr = hp[r];
          const double* wrow = result.classifier_w.data() + static_cast<size_t>(r) * vocab;
          for (int c = 0; c < vocab; ++c) logits[c] += hr * wrow[c];
        }
        double max_logit = logits[0];
        for (int c = 1; c < vocab; ++c) max_logit = std::max(max_logit, logits[c]);
        double sum_exp = 0.0;
        for (int c = 0; c < vocab; ++c) sum_exp += std::exp(logits[c] - max_logit);
        const int target_id = s.token_ids[p];
        batch_ce += (max_logit + std::log(sum_exp) - logits[target_id]) * inv_bp;
        const double gscale = cfg.loss_weights.lambda_token * inv_bp;
        for (int c = 0; c < vocab; ++c) {
          const double softmax = std::exp(logits[c] - max_logit) / sum_exp;
          const double dlogit = (softmax - (c == target_id ? 1.0 : 0.0)) * gscale;
          cls_b_grad[c] += dlogit;
          for (int r = 0; r < h; ++r) {
            cls_w_grad[static_cast<size_t>(r) * vocab + c] += hp[r] * dlogit;
          }
        }
      }
    }

    const double total = cfg.loss_weights.lambda_token * batch_ce +
                         cfg.loss_weights.lambda_action * batch_l1;
    if (!std::isfinite(total)) {
      throw Diverged("loss became non-finite at step " + std::to_string(step));
    }
    result.trace.push_back({step, batch_l1, batch_ce, total});

    for (int s = 0; s < 4; ++s) {
      adam_update(params.weight[s], grads.weight[s], opt_w[s], cfg, step);
      adam_update(params.bias[s], grads.bias[s], opt_b[s], cfg, step);
      adam_update(params.gamma[s], grads.gamma[s], opt_g[s], cfg, step);
      adam_update(params.beta[s], grads.beta[s], opt_beta[s], cfg, step);
    }
    adam_update(result.classifier_w, cls_w_grad, opt_cls_w, cfg, step);
    adam_update(result.classifier_b, cls_b_grad, opt_cls_b, cfg, step);

    result.steps_run = step;
    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      result.final_eval_l1 = eval_l1(params, eval_set);
      if (!std::isfinite(result.final_eval_l1)) {
        throw Diverged("evaluation loss became non-finite");
      }
      if (result.final_eval_l1 < cfg.target_l1) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

void write_loss_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "step,l1,ce,total\n";
  char line[160];
  for (const TraceRow& row : trace) {
    std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.12g\n", row.step, row.l1,
                  row.ce, row.total);
    out << line;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace actrt
