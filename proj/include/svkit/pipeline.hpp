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
// End-to-end plumbing shared by the command line tools: model container,
// checkpoint round trip, augmentation pool loading, and embedding extraction
// over utterance lists.

#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "svkit/archive.hpp"
#include "svkit/checkpoint.hpp"
#include "svkit/config.hpp"
#include "svkit/trainer.hpp"

namespace svkit {

struct Model {
  HeadWeights head;
  EncoderWeights encoder;  // sized only when the config enables the encoder
  bool has_encoder = false;
};

inline std::vector<TensorRef> model_tensor_refs(Model& m) {
  std::vector<TensorRef> refs = tensor_refs(m.head);
  if (m.has_encoder) {
    std::vector<TensorRef> enc = tensor_refs(m.encoder);
    refs.insert(refs.end(), enc.begin(), enc.end());
  }
  return refs;
}

/// Fresh model: head (and encoder when enabled) initialized from the config
/// seed. The same config and seed always give the same tensors.
inline Model init_model(const PipelineConfig& cfg) {
  cfg.validate();
  Model m;
  m.head = init_head(cfg.head, derive_seed(cfg.train.seed, "model.head"));
  if (cfg.encoder_enabled) {
    EncoderConfig ec = cfg.encoder;
    ec.sample_rate = cfg.sample_rate;
    m.encoder =
        init_encoder(ec, derive_seed(cfg.train.seed, "model.encoder"));
    m.has_encoder = true;
  }
  return m;
}

inline void save_model(const std::string& path, const PipelineConfig& cfg,
                       Model& m) {
  write_checkpoint(path, save_config(cfg), model_tensor_refs(m));
}

struct LoadedModel {
  PipelineConfig config;
  Model model;
};

inline LoadedModel load_model(const std::string& path) {
  const Checkpoint ck = read_checkpoint(path);
  LoadedModel out;
  out.config = load_config_text(ck.config_json);
  out.model.head = resize_head_weights(out.config.head);
  if (out.config.encoder_enabled) {
    EncoderConfig ec = out.config.encoder;
    ec.sample_rate = out.config.sample_rate;
    out.model.encoder = resize_encoder_weights(ec);
    out.model.has_encoder = true;
  }
  apply_checkpoint(ck, model_tensor_refs(out.model));
  return out;
}

inline FeaturePipeline feature_pipeline(const PipelineConfig& cfg) {
  FeaturePipeline p;
  p.mfb = cfg.mfb;
  p.vad_offset_db = cfg.vad_offset_db;
  p.norm_window_sec = cfg.norm_window_sec;
  p.normalize = cfg.normalize;
  p.use_encoder = cfg.encoder_enabled;
  p.encoder = cfg.encoder;
  p.encoder.sample_rate = cfg.sample_rate;
  return p;
}

/// WAV files of a directory in lexicographic filename order.
inline std::vector<Waveform> load_wav_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "load_wav_dir: not a directory: " + dir);
  std::vector<std::string> paths;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav")
      paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  require(!paths.empty(), "load_wav_dir: no .wav files in " + dir);
  std::vector<Waveform> out;
  out.reserve(paths.size());
  for (const std::string& p : paths) out.push_back(read_wav(p));
  return out;
}

/// Augmentation policy with pools loaded from the configured directories.
inline AugmentPolicy load_policy(const AugmentConfig& cfg) {
  AugmentPolicy p = cfg.policy;
  if (p.p_noise > 0) {
    require(!cfg.noise_dir.empty(),
            "augment: p_noise > 0 but augment.noise_dir is empty");
    p.noise_pool = load_wav_dir(cfg.noise_dir);
  }
  if (p.p_rir > 0) {
    require(!cfg.rir_dir.empty(),
            "augment: p_rir > 0 but augment.rir_dir is empty");
    p.rir_pool = load_wav_dir(cfg.rir_dir);
  }
  p.validate();
  return p;
}

inline bool augmentation_enabled(const AugmentPolicy& p) {
  return p.p_noise > 0 || p.p_rir > 0 || p.p_freq_mask > 0 ||
         p.p_time_mask > 0 || p.p_clip > 0;
}

struct Utterance {
  std::string utt;
  std::string path;
};

/// One manifest row per file; utt ids are the filename stems.
inline std::vector<Utterance> utterances_from_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "not a directory: " + dir);
  std::vector<Utterance> out;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav")
      out.push_back({e.path().stem().string(), e.path().string()});
  }
  std::sort(out.begin(), out.end(),
            [](const Utterance& a, const Utterance& b) { return a.utt < b.utt; });
  require(!out.empty(), "no .wav files in " + dir);
  return out;
}

inline std::vector<Utterance> utterances_from_manifest(
    const std::string& path) {
  std::vector<Utterance> out;
  for (const TrainItem& it : read_manifest(path))
    out.push_back({it.utt, it.path});
  return out;
}

/// Features the head consumes for a whole utterance: decode, VAD filter,
/// feature computation. No chunking, no augmentation.
inline FeatureSequence utterance_features(const Waveform& w,
                                          const PipelineConfig& cfg,
                                          const Model& m) {
  require(w.sample_rate == cfg.sample_rate,
          "utterance sample rate " + std::to_string(w.sample_rate) +
              " does not match config audio.sample_rate " +
              std::to_string(cfg.sample_rate));
  const FeaturePipeline pipe = feature_pipeline(cfg);
  const Waveform speech = vad_filter_samples(w, cfg.mfb, cfg.vad_offset_db);
  require(!speech.samples.empty(), "utterance has no speech frames");
  return pipeline_features(speech, pipe, m.has_encoder ? &m.encoder : nullptr);
}

struct ExtractResult {
  std::vector<SpeakerEmbedding> embeddings;
  std::vector<std::pair<std::string, FeatureSequence>> features;  // optional
};

/// Embeddings for a list of utterances, in list order. Items are independent,
/// so worker threads change nothing but wall-clock time.
inline ExtractResult extract_embeddings(const std::vector<Utterance>& utts,
                                        const PipelineConfig& cfg,
                                        const Model& m, int threads = 1,
                                        bool keep_features = false) {
  require(!utts.empty(), "extract_embeddings: no utterances");
  require(threads >= 1, "extract_embeddings: threads must be >= 1");
  ExtractResult res;
  res.embeddings.resize(utts.size());
  if (keep_features) res.features.resize(utts.size());

  std::vector<std::string> errors(utts.size());
  auto work = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      try {
        const Waveform w = read_wav(utts[i].path);
        FeatureSequence f = utterance_features(w, cfg, m);
        res.embeddings[i].utt = utts[i].utt;
        res.embeddings[i].vector = head_forward(f, m.head, cfg.head);
        if (keep_features) res.features[i] = {utts[i].utt, std::move(f)};
      } catch (const std::exception& e) {
        errors[i] = utts[i].utt + ": " + e.what();
      }
    }
  };

  const size_t n = utts.size();
  const size_t nthreads = std::min<size_t>(static_cast<size_t>(threads), n);
  if (nthreads <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const size_t per = (n + nthreads - 1) / nthreads;
    for (size_t t = 0; t < nthreads; ++t) {
      const size_t begin = t * per;
      const size_t end = std::min(n, begin + per);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw Error("extract_embeddings: " + e);
  return res;
}

}  // namespace svkit
