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
// Pipeline configuration document: one JSON file with sections audio, mfb,
// vad, augment, encoder, head, train, scoring, metrics. Every field has a
// default, unknown keys are rejected, and save -> load -> save is
// byte-identical (sorted keys, two-space indent, trailing newline).

#pragma once

#include <array>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "svkit/augment.hpp"
#include "svkit/common.hpp"
#include "svkit/encoder.hpp"
#include "svkit/frontend.hpp"
#include "svkit/head.hpp"
#include "svkit/trainer.hpp"

namespace svkit {

struct AugmentConfig {
  AugmentPolicy policy;  // pools stay empty here; dirs are loaded at use time
  std::string noise_dir;
  std::string rir_dir;
};

struct ScoringConfig {
  bool snorm = false;
  int snorm_top_k = 200;
  bool chnorm = false;
};

struct MetricsConfig {
  std::array<double, 2> p_tars = {0.01, 0.05};
  double c_miss = 1.0;
  double c_fa = 1.0;
};

struct PipelineConfig {
  int sample_rate = 16000;
  MfbConfig mfb;
  bool normalize = true;
  double norm_window_sec = 3.0;
  double vad_offset_db = 30.0;
  AugmentConfig augment;
  bool encoder_enabled = false;
  EncoderConfig encoder;
  HeadConfig head;
  TrainConfig train;
  ScoringConfig scoring;
  MetricsConfig metrics;

  void validate() const {
    require(sample_rate == 8000 || sample_rate == 16000,
            "config: audio.sample_rate must be 8000 or 16000");
    require(mfb.f_min >= 0 && mfb.f_min < mfb.f_max &&
                mfb.f_max <= sample_rate / 2.0,
            "config: mfb band must satisfy 0 <= f_min < f_max <= Nyquist");
    require(mfb.n_mels >= 1, "config: mfb.n_mels must be >= 1");
    require(mfb.frame_length > 0 && mfb.frame_shift > 0,
            "config: mfb frame geometry must be positive");
    require(mfb.log_floor > 0, "config: mfb.log_floor must be > 0");
    require(norm_window_sec > 0, "config: mfb.norm_window_sec must be > 0");
    require(vad_offset_db > 0, "config: vad.offset_db must be > 0");
    const AugmentPolicy& a = augment.policy;
    for (double p : {a.p_noise, a.p_rir, a.p_freq_mask, a.p_time_mask,
                     a.p_clip})
      require(p >= 0.0 && p <= 1.0,
              "config: augment probabilities must lie in [0,1]");
    require(a.snr_range_db[0] <= a.snr_range_db[1],
            "config: augment.snr_db range inverted");
    require(a.freq_mask_width_hz[0] >= 0 &&
                a.freq_mask_width_hz[0] <= a.freq_mask_width_hz[1],
            "config: augment.freq_mask_hz range invalid");
    require(a.time_mask_frac[0] >= 0 &&
                a.time_mask_frac[0] <= a.time_mask_frac[1] &&
                a.time_mask_frac[1] <= 1.0,
            "config: augment.time_mask_frac range invalid");
    require(a.clip_lower_pct[0] >= 0 &&
                a.clip_lower_pct[1] < a.clip_upper_pct[0] &&
                a.clip_upper_pct[1] <= 100.0,
            "config: augment clip percentile ranges invalid");
    require(a.stft_win >= 2, "config: augment.stft_win must be >= 2");
    if (encoder_enabled) {
      EncoderConfig e = encoder;
      e.sample_rate = sample_rate;
      e.validate();
    }
    head.validate();
    train.validate();
    require(scoring.snorm_top_k >= 2,
            "config: scoring.snorm_top_k must be >= 2");
    for (double p : metrics.p_tars)
      require(p > 0 && p < 1, "config: metrics.p_tars must lie in (0,1)");
    require(metrics.c_miss > 0 && metrics.c_fa > 0,
            "config: metrics costs must be positive");
  }
};

namespace cfgdetail {

using nlohmann::json;

/// Typed field access with path-qualified errors and unknown-key rejection.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), path_ + " must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T, typename Pred>
  void get(const std::string& key, T& out, Pred pred, const char* type_name) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    require(pred(v), path_ + "." + key + " must be " + type_name);
    out = v.get<T>();
  }

  void integer(const std::string& key, int& out) {
    get(key, out, [](const json& v) { return v.is_number_integer(); },
        "an integer");
  }
  void unsigned64(const std::string& key, uint64_t& out) {
    get(key, out,
        [](const json& v) {
          return v.is_number_unsigned() ||
                 (v.is_number_integer() && v.get<int64_t>() >= 0);
        },
        "a non-negative integer");
  }
  void number(const std::string& key, double& out) {
    get(key, out, [](const json& v) { return v.is_number(); }, "a number");
  }
  void boolean(const std::string& key, bool& out) {
    get(key, out, [](const json& v) { return v.is_boolean(); }, "a boolean");
  }
  void text(const std::string& key, std::string& out) {
    get(key, out, [](const json& v) { return v.is_string(); }, "a string");
  }
  void pair(const std::string& key, std::array<double, 2>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    require(v.is_array() && v.size() == 2 && v[0].is_number() &&
                v[1].is_number(),
            path_ + "." + key + " must be a [low, high] number pair");
    out = {v[0].get<double>(), v[1].get<double>()};
  }
  void pair(const std::string& key, ChunkSpec& out) {
    std::array<double, 2> a = {out.min_dur, out.max_dur};
    pair(key, a);
    out = {a[0], a[1]};
  }
  void conv_specs(const std::string& key, std::vector<ConvSpec>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    require(v.is_array() && !v.empty(),
            path_ + "." + key + " must be a non-empty array");
    std::vector<ConvSpec> specs;
    for (const json& e : v) {
      require(e.is_array() && e.size() == 3 && e[0].is_number_integer() &&
                  e[1].is_number_integer() && e[2].is_number_integer(),
              path_ + "." + key +
                  " entries must be [channels, kernel, stride] integer "
                  "triples");
      specs.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
    }
    out = std::move(specs);
  }

  Section section(const std::string& key) {
    seen_.insert(key);
    require(j_.contains(key), path_ + "." + key + " missing");
    return Section(j_.at(key), path_ + "." + key);
  }
  bool has_section(const std::string& key) { return has(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      require(seen_.count(it.key()) > 0,
              "config: unknown key " + path_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace cfgdetail

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["audio"]["sample_rate"] = c.sample_rate;

  j["mfb"]["n_mels"] = c.mfb.n_mels;
  j["mfb"]["frame_length_sec"] = c.mfb.frame_length;
  j["mfb"]["frame_shift_sec"] = c.mfb.frame_shift;
  j["mfb"]["f_min_hz"] = c.mfb.f_min;
  j["mfb"]["f_max_hz"] = c.mfb.f_max;
  j["mfb"]["log_floor"] = c.mfb.log_floor;
  j["mfb"]["normalize"] = c.normalize;
  j["mfb"]["norm_window_sec"] = c.norm_window_sec;

  j["vad"]["offset_db"] = c.vad_offset_db;

  const AugmentPolicy& a = c.augment.policy;
  j["augment"]["p_noise"] = a.p_noise;
  j["augment"]["p_rir"] = a.p_rir;
  j["augment"]["p_freq_mask"] = a.p_freq_mask;
  j["augment"]["p_time_mask"] = a.p_time_mask;
  j["augment"]["p_clip"] = a.p_clip;
  j["augment"]["snr_db"] = a.snr_range_db;
  j["augment"]["freq_mask_hz"] = a.freq_mask_width_hz;
  j["augment"]["time_mask_frac"] = a.time_mask_frac;
  j["augment"]["clip_lower_pct"] = a.clip_lower_pct;
  j["augment"]["clip_upper_pct"] = a.clip_upper_pct;
  j["augment"]["stft_win"] = a.stft_win;
  j["augment"]["noise_dir"] = c.augment.noise_dir;
  j["augment"]["rir_dir"] = c.augment.rir_dir;

  j["encoder"]["enabled"] = c.encoder_enabled;
  nlohmann::json convs = nlohmann::json::array();
  for (const ConvSpec& s : c.encoder.conv_layers)
    convs.push_back({s.out_channels, s.kernel, s.stride});
  j["encoder"]["conv_layers"] = convs;
  j["encoder"]["d_model"] = c.encoder.d_model;
  j["encoder"]["n_layers"] = c.encoder.n_layers;
  j["encoder"]["n_heads"] = c.encoder.n_heads;
  j["encoder"]["ffn_dim"] = c.encoder.ffn_dim;
  j["encoder"]["truncate_layer"] = c.encoder.truncate_layer;
  j["encoder"]["positional_conv_kernel"] = c.encoder.positional_conv_kernel;
  j["encoder"]["layernorm_eps"] = c.encoder.layernorm_eps;

  j["head"]["input_dim"] = c.head.input_dim;
  j["head"]["tdnn_dim"] = c.head.tdnn_dim;
  j["head"]["embed_dim"] = c.head.embed_dim;
  j["head"]["maxout_k"] = c.head.maxout_k;
  j["head"]["n_classes"] = c.head.n_classes;
  j["head"]["margin"] = c.head.margin;
  j["head"]["scale"] = c.head.scale;
  j["head"]["pool_eps"] = c.head.pool_eps;

  j["train"]["epochs"] = c.train.epochs;
  j["train"]["stage2_epochs"] = c.train.stage2_epochs;
  j["train"]["batch_size"] = c.train.batch_size;
  j["train"]["chunk_stage1_sec"] =
      std::array<double, 2>{c.train.chunk_stage1.min_dur,
                            c.train.chunk_stage1.max_dur};
  j["train"]["chunk_stage2_sec"] =
      std::array<double, 2>{c.train.chunk_stage2.min_dur,
                            c.train.chunk_stage2.max_dur};
  j["train"]["lr_start"] = c.train.lr_start;
  j["train"]["lr_max"] = c.train.lr_max;
  j["train"]["lr_final"] = c.train.lr_final;
  j["train"]["warmup_frac"] = c.train.warmup_frac;
  j["train"]["momentum"] = c.train.momentum;
  j["train"]["freeze_encoder"] = c.train.freeze_encoder;
  j["train"]["seed"] = c.train.seed;

  j["scoring"]["snorm"] = c.scoring.snorm;
  j["scoring"]["snorm_top_k"] = c.scoring.snorm_top_k;
  j["scoring"]["chnorm"] = c.scoring.chnorm;

  j["metrics"]["p_tars"] = c.metrics.p_tars;
  j["metrics"]["c_miss"] = c.metrics.c_miss;
  j["metrics"]["c_fa"] = c.metrics.c_fa;
  return j;
}

/// Canonical text form: sorted keys, two-space indent, trailing newline.
inline std::string save_config(const PipelineConfig& c) {
  return config_to_json(c).dump(2) + "\n";
}

inline PipelineConfig parse_config(const nlohmann::json& j) {
  using cfgdetail::Section;
  PipelineConfig c;
  Section root(j, "config");

  if (root.has_section("audio")) {
    Section s = root.section("audio");
    s.integer("sample_rate", c.sample_rate);
    s.finish();
  }
  if (root.has_section("mfb")) {
    Section s = root.section("mfb");
    s.integer("n_mels", c.mfb.n_mels);
    s.number("frame_length_sec", c.mfb.frame_length);
    s.number("frame_shift_sec", c.mfb.frame_shift);
    s.number("f_min_hz", c.mfb.f_min);
    s.number("f_max_hz", c.mfb.f_max);
    s.number("log_floor", c.mfb.log_floor);
    s.boolean("normalize", c.normalize);
    s.number("norm_window_sec", c.norm_window_sec);
    s.finish();
  }
  if (root.has_section("vad")) {
    Section s = root.section("vad");
    s.number("offset_db", c.vad_offset_db);
    s.finish();
  }
  if (root.has_section("augment")) {
    Section s = root.section("augment");
    AugmentPolicy& a = c.augment.policy;
    s.number("p_noise", a.p_noise);
    s.number("p_rir", a.p_rir);
    s.number("p_freq_mask", a.p_freq_mask);
    s.number("p_time_mask", a.p_time_mask);
    s.number("p_clip", a.p_clip);
    s.pair("snr_db", a.snr_range_db);
    s.pair("freq_mask_hz", a.freq_mask_width_hz);
    s.pair("time_mask_frac", a.time_mask_frac);
    s.pair("clip_lower_pct", a.clip_lower_pct);
    s.pair("clip_upper_pct", a.clip_upper_pct);
    uint64_t win = a.stft_win;
    s.unsigned64("stft_win", win);
    a.stft_win = static_cast<size_t>(win);
    s.text("noise_dir", c.augment.noise_dir);
    s.text("rir_dir", c.augment.rir_dir);
    s.finish();
  }
  if (root.has_section("encoder")) {
    Section s = root.section("encoder");
    s.boolean("enabled", c.encoder_enabled);
    s.conv_specs("conv_layers", c.encoder.conv_layers);
    s.integer("d_model", c.encoder.d_model);
    s.integer("n_layers", c.encoder.n_layers);
    s.integer("n_heads", c.encoder.n_heads);
    s.integer("ffn_dim", c.encoder.ffn_dim);
    s.integer("truncate_layer", c.encoder.truncate_layer);
    s.integer("positional_conv_kernel", c.encoder.positional_conv_kernel);
    s.number("layernorm_eps", c.encoder.layernorm_eps);
    s.finish();
  }
  if (root.has_section("head")) {
    Section s = root.section("head");
    s.integer("input_dim", c.head.input_dim);
    s.integer("tdnn_dim", c.head.tdnn_dim);
    s.integer("embed_dim", c.head.embed_dim);
    s.integer("maxout_k", c.head.maxout_k);
    s.integer("n_classes", c.head.n_classes);
    s.number("margin", c.head.margin);
    s.number("scale", c.head.scale);
    s.number("pool_eps", c.head.pool_eps);
    s.finish();
  }
  if (root.has_section("train")) {
    Section s = root.section("train");
    s.integer("epochs", c.train.epochs);
    s.integer("stage2_epochs", c.train.stage2_epochs);
    s.integer("batch_size", c.train.batch_size);
    s.pair("chunk_stage1_sec", c.train.chunk_stage1);
    s.pair("chunk_stage2_sec", c.train.chunk_stage2);
    s.number("lr_start", c.train.lr_start);
    s.number("lr_max", c.train.lr_max);
    s.number("lr_final", c.train.lr_final);
    s.number("warmup_frac", c.train.warmup_frac);
    s.number("momentum", c.train.momentum);
    s.boolean("freeze_encoder", c.train.freeze_encoder);
    s.unsigned64("seed", c.train.seed);
    s.finish();
  }
  if (root.has_section("scoring")) {
    Section s = root.section("scoring");
    s.boolean("snorm", c.scoring.snorm);
    s.integer("snorm_top_k", c.scoring.snorm_top_k);
    s.boolean("chnorm", c.scoring.chnorm);
    s.finish();
  }
  if (root.has_section("metrics")) {
    Section s = root.section("metrics");
    s.pair("p_tars", c.metrics.p_tars);
    s.number("c_miss", c.metrics.c_miss);
    s.number("c_fa", c.metrics.c_fa);
    s.finish();
  }
  root.finish();

  c.encoder.sample_rate = c.sample_rate;
  c.validate();
  return c;
}

inline PipelineConfig load_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline PipelineConfig read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return load_config_text(text);
}

/// The published field-and-type schema, as a JSON document. The loader
/// enforces exactly these keys and types.
inline std::string config_schema() {
  nlohmann::json defaults = config_to_json(PipelineConfig{});
  nlohmann::json schema;
  for (auto sec = defaults.begin(); sec != defaults.end(); ++sec) {
    for (auto field = sec.value().begin(); field != sec.value().end();
         ++field) {
      const nlohmann::json& v = field.value();
      std::string type;
      if (v.is_boolean()) {
        type = "boolean";
      } else if (v.is_number_integer()) {
        type = "integer";
      } else if (v.is_number()) {
        type = "number";
      } else if (v.is_string()) {
        type = "string";
      } else if (v.is_array()) {
        type = (!v.empty() && v[0].is_array())
                   ? "array of [channels, kernel, stride] integer triples"
                   : "[low, high] number pair";
      }
      schema[sec.key()][field.key()] = type;
    }
  }
  return schema.dump(2) + "\n";
}

}  // namespace svkit
