// Copyright (c) 2026 The svkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Head training: one-cycle LR, SGD with momentum, chunked batches over a
// manifest with VAD and augmentation applied online, plus finite-difference
// verification of the analytic gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "svkit/augment.hpp"
#include "svkit/common.hpp"
#include "svkit/encoder.hpp"
#include "svkit/frontend.hpp"
#include "svkit/head.hpp"
#include "svkit/wav.hpp"

namespace svkit {

struct TrainConfig {
  int epochs = 5;          // stage-1 epochs (short chunks)
  int stage2_epochs = 0;   // fine-tuning epochs (long chunks)
  int batch_size = 16;
  ChunkSpec chunk_stage1{4.0, 6.0};
  ChunkSpec chunk_stage2{12.0, 18.0};
  double lr_start = 1e-4;
  double lr_max = 1e-2;
  double lr_final = 1e-5;
  double warmup_frac = 0.3;
  double momentum = 0.9;
  bool freeze_encoder = true;
  uint64_t seed = 1;

  void validate() const {
    require(epochs >= 1, "train config: epochs must be >= 1");
    require(stage2_epochs >= 0, "train config: stage2_epochs must be >= 0");
    require(batch_size >= 1, "train config: batch_size must be >= 1");
    require(lr_start > 0 && lr_max > 0 && lr_final > 0,
            "train config: learning rates must be positive");
    require(warmup_frac > 0.0 && warmup_frac < 1.0,
            "train config: warmup_frac must lie in (0,1)");
    require(momentum >= 0.0 && momentum < 1.0,
            "train config: momentum must lie in [0,1)");
    require(chunk_stage1.min_dur > 0 &&
                chunk_stage1.min_dur <= chunk_stage1.max_dur,
            "train config: stage-1 chunk range invalid");
    require(chunk_stage2.min_dur > 0 &&
                chunk_stage2.min_dur <= chunk_stage2.max_dur,
            "train config: stage-2 chunk range invalid");
  }
};

/// Linear warmup lr_start -> lr_max over warmup_frac of the run, then a
/// linear decay lr_max -> lr_final; continuous at the peak.
inline double one_cycle_lr(int step, int total_steps, const TrainConfig& cfg) {
  require(total_steps > 0, "one_cycle_lr: total_steps must be positive");
  require(step >= 0 && step <= total_steps, "one_cycle_lr: step out of range");
  const double peak = cfg.warmup_frac * static_cast<double>(total_steps);
  const double t = static_cast<double>(step);
  if (t <= peak)
    return cfg.lr_start + (t / peak) * (cfg.lr_max - cfg.lr_start);
  return cfg.lr_max + ((t - peak) / (static_cast<double>(total_steps) - peak)) *
                          (cfg.lr_final - cfg.lr_max);
}

/// One labeled feature sequence, ready for the head.
struct BatchItem {
  FeatureSequence seq;
  int label = 0;
};

/// Mean AAM loss over the batch with gradients accumulated into `g`
/// (already zeroed and scaled here by 1/batch). Returns the mean loss.
/// When `input_grads` is given it receives d(loss)/d(features) per item.
inline double batch_loss_and_gradients(
    const std::vector<BatchItem>& batch, const HeadWeights& w,
    const HeadConfig& cfg, HeadGradients& g,
    std::vector<Eigen::MatrixXd>* input_grads = nullptr) {
  require(!batch.empty(), "batch_loss_and_gradients: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (g.classifier.size() == 0)
    g.classifier = Eigen::MatrixXd::Zero(cfg.n_classes, cfg.embed_dim);
  if (input_grads) input_grads->clear();
  double loss = 0.0;
  for (const BatchItem& item : batch) {
    HeadForwardCache cache;
    Eigen::VectorXd e = head_forward(item.seq, w, cfg, &cache);
    AamResult r =
        aam_softmax_loss(e, item.label, w.classifier, cfg.margin, cfg.scale);
    loss += r.loss;
    g.classifier += inv_n * r.grad_classifier;
    HeadGradients item_g = zero_head_gradients(cfg);
    head_backward(cache, w, cfg, r.grad_embedding, item_g);
    g.tdnn1_w += inv_n * item_g.tdnn1_w;
    g.tdnn1_b += inv_n * item_g.tdnn1_b;
    g.tdnn2_w += inv_n * item_g.tdnn2_w;
    g.tdnn2_b += inv_n * item_g.tdnn2_b;
    for (int k = 0; k < cfg.maxout_k; ++k) {
      g.maxout_w[static_cast<size_t>(k)] +=
          inv_n * item_g.maxout_w[static_cast<size_t>(k)];
      g.maxout_b[static_cast<size_t>(k)] +=
          inv_n * item_g.maxout_b[static_cast<size_t>(k)];
    }
    if (input_grads) input_grads->push_back(inv_n * item_g.input);
  }
  loss *= inv_n;
  require(std::isfinite(loss), "batch_loss_and_gradients: non-finite loss");
  return loss;
}

/// SGD with momentum: v = momentum*v + g; w -= lr*v. The velocity buffers
/// live in a HeadGradients of matching shapes.
inline void sgd_update(HeadWeights& w, const HeadGradients& g,
                       HeadGradients& velocity, double lr, double momentum) {
  auto upd_m = [&](Eigen::MatrixXd& wt, const Eigen::MatrixXd& gt,
                   Eigen::MatrixXd& vt) {
    vt = momentum * vt + gt;
    wt -= lr * vt;
  };
  auto upd_v = [&](Eigen::VectorXd& wt, const Eigen::VectorXd& gt,
                   Eigen::VectorXd& vt) {
    vt = momentum * vt + gt;
    wt -= lr * vt;
  };
  upd_m(w.tdnn1_w, g.tdnn1_w, velocity.tdnn1_w);
  upd_v(w.tdnn1_b, g.tdnn1_b, velocity.tdnn1_b);
  upd_m(w.tdnn2_w, g.tdnn2_w, velocity.tdnn2_w);
  upd_v(w.tdnn2_b, g.tdnn2_b, velocity.tdnn2_b);
  for (size_t k = 0; k < w.maxout_w.size(); ++k) {
    upd_m(w.maxout_w[k], g.maxout_w[k], velocity.maxout_w[k]);
    upd_v(w.maxout_b[k], g.maxout_b[k], velocity.maxout_b[k]);
  }
  if (velocity.classifier.size() == 0)
    velocity.classifier = Eigen::MatrixXd::Zero(g.classifier.rows(),
                                                g.classifier.cols());
  upd_m(w.classifier, g.classifier, velocity.classifier);
}

/// Single optimizer step on a prepared batch; returns the pre-update loss.
inline double train_step(HeadWeights& w, const HeadConfig& cfg,
                         const std::vector<BatchItem>& batch, double lr,
                         double momentum, HeadGradients& velocity) {
  HeadGradients g = zero_head_gradients(cfg);
  double loss = batch_loss_and_gradients(batch, w, cfg, g);
  sgd_update(w, g, velocity, lr, momentum);
  return loss;
}

// ---------------------------------------------------------------------------
// Gradient verification

/// Compares analytic gradients against central finite differences over a
/// random subsample of at least `target_coords` coordinates spanning every
/// head parameter tensor and the input features. Returns the max relative
/// error, with relative defined against max(|analytic|, |fd|, 1e-5).
inline double grad_check(const HeadConfig& cfg, HeadWeights w,
                         std::vector<BatchItem> batch, double fd_step,
                         int target_coords = 200, uint64_t seed = 12345) {
  cfg.validate();
  require(fd_step > 0.0, "grad_check: fd_step must be positive");
  require(!batch.empty(), "grad_check: empty batch");
  require(target_coords >= 1, "grad_check: target_coords must be >= 1");

  // analytic gradients
  HeadGradients g = zero_head_gradients(cfg);
  std::vector<Eigen::MatrixXd> input_grads;
  const double base_loss =
      batch_loss_and_gradients(batch, w, cfg, g, &input_grads);
  require(std::isfinite(base_loss), "grad_check: non-finite loss");

  auto loss_only = [&]() {
    double loss = 0.0;
    for (const BatchItem& item : batch) {
      Eigen::VectorXd e = head_forward(item.seq, w, cfg);
      loss += aam_softmax_loss(e, item.label, w.classifier, cfg.margin,
                               cfg.scale)
                  .loss;
    }
    return loss / static_cast<double>(batch.size());
  };

  // coordinate space: parameter tensors then per-item input features
  std::vector<TensorRef> w_refs = tensor_refs(w);
  struct Segment {
    double* data;
    const double* grad;
    Eigen::Index size;
  };
  std::vector<Segment> segs;
  auto grad_ptr = [&](const std::string& name) -> const double* {
    if (name == "head.tdnn1.weight") return g.tdnn1_w.data();
    if (name == "head.tdnn1.bias") return g.tdnn1_b.data();
    if (name == "head.tdnn2.weight") return g.tdnn2_w.data();
    if (name == "head.tdnn2.bias") return g.tdnn2_b.data();
    if (name == "head.classifier.weight") return g.classifier.data();
    for (size_t k = 0; k < g.maxout_w.size(); ++k) {
      std::string p = "head.maxout" + std::to_string(k + 1);
      if (name == p + ".weight") return g.maxout_w[k].data();
      if (name == p + ".bias") return g.maxout_b[k].data();
    }
    throw Error("grad_check: unknown tensor " + name);
  };
  for (const TensorRef& r : w_refs) {
    Segment s;
    s.data = r.mat ? r.mat->data() : r.vec->data();
    s.grad = grad_ptr(r.name);
    s.size = r.mat ? r.mat->size() : r.vec->size();
    segs.push_back(s);
  }
  for (size_t i = 0; i < batch.size(); ++i) {
    Segment s;
    s.data = batch[i].seq.frames.data();
    s.grad = input_grads[i].data();
    s.size = batch[i].seq.frames.size();
    segs.push_back(s);
  }

  Eigen::Index total = 0;
  for (const Segment& s : segs) total += s.size;
  require(total > 0, "grad_check: no coordinates");

  Rng rng(derive_seed(seed, "grad_check"));
  double max_rel = 0.0;
  for (int c = 0; c < target_coords; ++c) {
    Eigen::Index idx =
        static_cast<Eigen::Index>(rng.uniform_int(static_cast<uint64_t>(total)));
    size_t si = 0;
    while (idx >= segs[si].size) {
      idx -= segs[si].size;
      ++si;
    }
    double* slot = segs[si].data + idx;
    const double saved = *slot;
    *slot = saved + fd_step;
    const double lp = loss_only();
    *slot = saved - fd_step;
    const double lm = loss_only();
    *slot = saved;
    const double fd = (lp - lm) / (2.0 * fd_step);
    const double an = segs[si].grad[idx];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-5});
    max_rel = std::max(max_rel, std::abs(fd - an) / denom);
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Full training over a manifest

struct TrainItem {
  std::string utt;
  std::string path;
  std::string speaker;
};

/// Parses a `utt<TAB>path<TAB>speaker` manifest.
inline std::vector<TrainItem> read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_manifest: cannot open " + path);
  std::vector<TrainItem> items;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    TrainItem it;
    if (!std::getline(ss, it.utt, '\t') || !std::getline(ss, it.path, '\t') ||
        !std::getline(ss, it.speaker, '\t')) {
      throw Error("read_manifest: malformed line " + std::to_string(lineno) +
                  " in " + path);
    }
    items.push_back(std::move(it));
  }
  require(!items.empty(), "read_manifest: empty manifest " + path);
  return items;
}

/// Deterministic class ids: speakers sorted lexicographically.
inline std::map<std::string, int> speaker_class_map(
    const std::vector<TrainItem>& items) {
  std::map<std::string, int> m;
  for (const TrainItem& it : items) m.emplace(it.speaker, 0);
  int next = 0;
  for (auto& [spk, id] : m) id = next++;
  return m;
}

struct FeaturePipeline {
  MfbConfig mfb;
  double vad_offset_db = 30.0;
  double norm_window_sec = 3.0;
  bool normalize = true;
  bool use_encoder = false;
  EncoderConfig encoder;
};

/// Features for one (already VAD-filtered, chunked, augmented) waveform.
inline FeatureSequence pipeline_features(const Waveform& w,
                                         const FeaturePipeline& p,
                                         const EncoderWeights* enc) {
  if (p.use_encoder) {
    require(enc != nullptr, "pipeline_features: encoder weights missing");
    return encode(w, p.encoder, *enc);
  }
  FeatureSequence f = compute_mfb(w, p.mfb);
  if (p.normalize) f = sliding_mean_normalize(f, p.norm_window_sec);
  return f;
}

struct TrainState {
  int step = 0;
  double lr = 0.0;
  double running_loss = 0.0;  // mean loss over the current epoch so far
  HeadWeights weights;
  HeadGradients velocity;
};

struct TrainResult {
  TrainState state;
  std::vector<double> epoch_loss;
  int total_steps = 0;
};

using StepLogger = std::function<void(int step, double lr, double loss)>;
using EpochCallback = std::function<void(int epoch, const HeadWeights&)>;

/// Fine-tunes the head over the manifest items. Pipeline per sample:
/// decode -> VAD filter -> random chunk -> augment -> features. The decoded
/// and VAD-filtered waveforms are cached once up front. Single-threaded and
/// fully deterministic under cfg.seed.
inline TrainResult train(const std::vector<TrainItem>& items,
                         const TrainConfig& cfg, const FeaturePipeline& pipe,
                         const HeadConfig& head_cfg,
                         const AugmentPolicy* augment = nullptr,
                         const EncoderWeights* enc_weights = nullptr,
                         const StepLogger& log = nullptr,
                         const EpochCallback& on_epoch = nullptr) {
  cfg.validate();
  head_cfg.validate();
  require(!items.empty(), "train: empty manifest");
  require(cfg.freeze_encoder,
          "train: encoder fine-tuning is not supported; set freeze_encoder");
  if (augment) augment->validate();

  std::map<std::string, int> classes = speaker_class_map(items);
  require(classes.size() >= 2, "train: need at least 2 speakers");
  require(static_cast<int>(classes.size()) == head_cfg.n_classes,
          "train: manifest has " + std::to_string(classes.size()) +
              " speakers but head expects " +
              std::to_string(head_cfg.n_classes) + " classes");

  // decode + VAD once
  std::vector<Waveform> speech(items.size());
  std::vector<int> labels(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    Waveform w = read_wav(items[i].path);
    speech[i] = vad_filter_samples(w, pipe.mfb, pipe.vad_offset_db);
    labels[i] = classes.at(items[i].speaker);
  }

  const int n = static_cast<int>(items.size());
  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const int total_epochs = cfg.epochs + cfg.stage2_epochs;
  const int total_steps = steps_per_epoch * total_epochs;

  TrainState st;
  st.weights = init_head(head_cfg, derive_seed(cfg.seed, "train.init"));
  st.velocity = zero_head_gradients(head_cfg);
  st.velocity.classifier =
      Eigen::MatrixXd::Zero(head_cfg.n_classes, head_cfg.embed_dim);

  TrainResult res;
  uint64_t sample_counter = 0;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const ChunkSpec chunk =
        epoch < cfg.epochs ? cfg.chunk_stage1 : cfg.chunk_stage2;
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, "train.shuffle",
                                static_cast<uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(
          shuffle_rng.uniform_int(static_cast<uint64_t>(i) + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    double epoch_loss_sum = 0.0;
    int epoch_steps = 0;
    for (int b = 0; b < n; b += cfg.batch_size) {
      std::vector<BatchItem> batch;
      const int hi = std::min(n, b + cfg.batch_size);
      for (int i = b; i < hi; ++i) {
        const int idx = order[static_cast<size_t>(i)];
        Rng chunk_rng(derive_seed(cfg.seed, "train.chunk", sample_counter));
        Waveform c = random_chunk(speech[static_cast<size_t>(idx)], chunk,
                                  chunk_rng);
        if (augment) {
          c = apply_policy(c, *augment,
                           derive_seed(cfg.seed, "train.augment",
                                       sample_counter));
        }
        ++sample_counter;
        BatchItem item;
        item.seq = pipeline_features(c, pipe, enc_weights);
        item.label = labels[static_cast<size_t>(idx)];
        require(item.seq.num_frames() >= 1, "train: chunk produced no frames");
        batch.push_back(std::move(item));
      }
      st.lr = one_cycle_lr(st.step, total_steps, cfg);
      const double loss = train_step(st.weights, head_cfg, batch, st.lr,
                                     cfg.momentum, st.velocity);
      if (log) log(st.step, st.lr, loss);
      ++st.step;
      ++epoch_steps;
      epoch_loss_sum += loss;
      st.running_loss = epoch_loss_sum / epoch_steps;
    }
    res.epoch_loss.push_back(epoch_loss_sum / std::max(1, epoch_steps));
    if (on_epoch) on_epoch(epoch, st.weights);
  }

  res.total_steps = total_steps;
  res.state = std::move(st);
  return res;
}

}  // namespace svkit
