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
// Wav2vec-style encoder: a strided 1-D conv feature extractor over raw
// audio, a positional convolution, and a pre-norm transformer stack whose
// output can be taken from any intermediate layer (truncate_layer).

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "svkit/common.hpp"
#include "svkit/frontend.hpp"
#include "svkit/tensor.hpp"
#include "svkit/wav.hpp"

namespace svkit {

struct ConvSpec {
  int out_channels = 0;
  int kernel = 0;
  int stride = 0;
};

struct EncoderConfig {
  std::vector<ConvSpec> conv_layers = {
      {64, 10, 5}, {64, 3, 2}, {64, 3, 2}, {64, 3, 2}};
  int d_model = 64;
  int n_layers = 6;
  int n_heads = 4;
  int ffn_dim = 256;
  int truncate_layer = 3;  // 1-based; output is taken after this block
  int positional_conv_kernel = 15;
  double layernorm_eps = 1e-5;
  int sample_rate = 16000;

  void validate() const {
    require(!conv_layers.empty(), "encoder config: conv stack is empty");
    for (const ConvSpec& c : conv_layers) {
      require(c.out_channels >= 1 && c.kernel >= 1 && c.stride >= 1,
              "encoder config: conv dims must be >= 1");
    }
    require(conv_layers.back().out_channels == d_model,
            "encoder config: last conv channels must equal d_model");
    require(d_model >= 1 && n_layers >= 1 && n_heads >= 1 && ffn_dim >= 1,
            "encoder config: dims must be >= 1");
    require(d_model % n_heads == 0,
            "encoder config: d_model must be divisible by n_heads");
    require(truncate_layer >= 1 && truncate_layer <= n_layers,
            "encoder config: truncate_layer out of range");
    require(positional_conv_kernel >= 1,
            "encoder config: positional conv kernel must be >= 1");
    require(layernorm_eps > 0, "encoder config: layernorm_eps must be > 0");
    require(sample_rate > 0, "encoder config: sample_rate must be > 0");
  }

  /// Stride between latent frames, in input samples.
  int hop_samples() const {
    int hop = 1;
    for (const ConvSpec& c : conv_layers) hop *= c.stride;
    return hop;
  }

  /// Receptive field of one latent frame, in input samples.
  int receptive_field() const {
    int rf = 1, jump = 1;
    for (const ConvSpec& c : conv_layers) {
      rf += (c.kernel - 1) * jump;
      jump *= c.stride;
    }
    return rf;
  }

  /// Minimal number of input samples yielding one latent frame.
  int min_input_samples() const {
    int need = 1;
    for (auto it = conv_layers.rbegin(); it != conv_layers.rend(); ++it)
      need = (need - 1) * it->stride + it->kernel;
    return need;
  }

  /// Latent frame count for an input of n samples (0 if too short).
  Eigen::Index output_frames(size_t n) const {
    long long t = static_cast<long long>(n);
    for (const ConvSpec& c : conv_layers) {
      if (t < c.kernel) return 0;
      t = (t - c.kernel) / c.stride + 1;
    }
    return static_cast<Eigen::Index>(t);
  }
};

struct ConvLayerWeights {
  Eigen::MatrixXd weight;  // out_channels x (in_channels * kernel)
  Eigen::VectorXd bias;
  Eigen::VectorXd ln_gain;
  Eigen::VectorXd ln_bias;
};

struct TransformerLayerWeights {
  Eigen::VectorXd attn_ln_gain, attn_ln_bias;
  Eigen::MatrixXd wq, wk, wv, wo;  // each d_model x d_model
  Eigen::VectorXd bq, bk, bv, bo;
  Eigen::VectorXd ffn_ln_gain, ffn_ln_bias;
  Eigen::MatrixXd ffn_w1;  // ffn_dim x d_model
  Eigen::VectorXd ffn_b1;
  Eigen::MatrixXd ffn_w2;  // d_model x ffn_dim
  Eigen::VectorXd ffn_b2;
};

struct EncoderWeights {
  std::vector<ConvLayerWeights> conv;
  Eigen::MatrixXd pos_weight;  // d_model x kernel (depthwise)
  Eigen::VectorXd pos_bias;
  std::vector<TransformerLayerWeights> layers;
};

/// Flat named view over all encoder tensors. Layer names are 1-based to
/// match truncate_layer semantics.
inline std::vector<TensorRef> tensor_refs(EncoderWeights& w) {
  std::vector<TensorRef> refs;
  for (size_t i = 0; i < w.conv.size(); ++i) {
    std::string p = "encoder.conv" + std::to_string(i + 1);
    refs.push_back(make_ref(p + ".weight", w.conv[i].weight));
    refs.push_back(make_ref(p + ".bias", w.conv[i].bias));
    refs.push_back(make_ref(p + ".ln.gain", w.conv[i].ln_gain));
    refs.push_back(make_ref(p + ".ln.bias", w.conv[i].ln_bias));
  }
  refs.push_back(make_ref("encoder.pos_conv.weight", w.pos_weight));
  refs.push_back(make_ref("encoder.pos_conv.bias", w.pos_bias));
  for (size_t i = 0; i < w.layers.size(); ++i) {
    std::string p = "encoder.layer" + std::to_string(i + 1);
    TransformerLayerWeights& l = w.layers[i];
    refs.push_back(make_ref(p + ".attn_ln.gain", l.attn_ln_gain));
    refs.push_back(make_ref(p + ".attn_ln.bias", l.attn_ln_bias));
    refs.push_back(make_ref(p + ".attn.q.weight", l.wq));
    refs.push_back(make_ref(p + ".attn.q.bias", l.bq));
    refs.push_back(make_ref(p + ".attn.k.weight", l.wk));
    refs.push_back(make_ref(p + ".attn.k.bias", l.bk));
    refs.push_back(make_ref(p + ".attn.v.weight", l.wv));
    refs.push_back(make_ref(p + ".attn.v.bias", l.bv));
    refs.push_back(make_ref(p + ".attn.out.weight", l.wo));
    refs.push_back(make_ref(p + ".attn.out.bias", l.bo));
    refs.push_back(make_ref(p + ".ffn_ln.gain", l.ffn_ln_gain));
    refs.push_back(make_ref(p + ".ffn_ln.bias", l.ffn_ln_bias));
    refs.push_back(make_ref(p + ".ffn.w1.weight", l.ffn_w1));
    refs.push_back(make_ref(p + ".ffn.w1.bias", l.ffn_b1));
    refs.push_back(make_ref(p + ".ffn.w2.weight", l.ffn_w2));
    refs.push_back(make_ref(p + ".ffn.w2.bias", l.ffn_b2));
  }
  return refs;
}

inline EncoderWeights resize_encoder_weights(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderWeights w;
  int in_ch = 1;
  for (const ConvSpec& c : cfg.conv_layers) {
    ConvLayerWeights lw;
    lw.weight.resize(c.out_channels, in_ch * c.kernel);
    lw.bias.resize(c.out_channels);
    lw.ln_gain.resize(c.out_channels);
    lw.ln_bias.resize(c.out_channels);
    w.conv.push_back(std::move(lw));
    in_ch = c.out_channels;
  }
  w.pos_weight.resize(cfg.d_model, cfg.positional_conv_kernel);
  w.pos_bias.resize(cfg.d_model);
  w.layers.resize(static_cast<size_t>(cfg.n_layers));
  for (TransformerLayerWeights& l : w.layers) {
    l.attn_ln_gain.resize(cfg.d_model);
    l.attn_ln_bias.resize(cfg.d_model);
    l.wq.resize(cfg.d_model, cfg.d_model);
    l.wk.resize(cfg.d_model, cfg.d_model);
    l.wv.resize(cfg.d_model, cfg.d_model);
    l.wo.resize(cfg.d_model, cfg.d_model);
    l.bq.resize(cfg.d_model);
    l.bk.resize(cfg.d_model);
    l.bv.resize(cfg.d_model);
    l.bo.resize(cfg.d_model);
    l.ffn_ln_gain.resize(cfg.d_model);
    l.ffn_ln_bias.resize(cfg.d_model);
    l.ffn_w1.resize(cfg.ffn_dim, cfg.d_model);
    l.ffn_b1.resize(cfg.ffn_dim);
    l.ffn_w2.resize(cfg.d_model, cfg.ffn_dim);
    l.ffn_b2.resize(cfg.d_model);
  }
  return w;
}

inline EncoderWeights init_encoder(const EncoderConfig& cfg, uint64_t seed) {
  EncoderWeights w = resize_encoder_weights(cfg);
  std::vector<TensorRef> refs = tensor_refs(w);
  init_tensors(refs, seed);
  return w;
}

struct TensorShape {
  std::string name;
  std::vector<Eigen::Index> dims;
};

/// Shapes of every tensor the config implies, without allocating weights.
/// Used to sanity-check paper-scale presets.
inline std::vector<TensorShape> encoder_tensor_shapes(
    const EncoderConfig& cfg) {
  cfg.validate();
  std::vector<TensorShape> out;
  int in_ch = 1;
  for (size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const ConvSpec& c = cfg.conv_layers[i];
    std::string p = "encoder.conv" + std::to_string(i + 1);
    out.push_back({p + ".weight",
                   {c.out_channels, static_cast<Eigen::Index>(in_ch) * c.kernel}});
    out.push_back({p + ".bias", {c.out_channels}});
    out.push_back({p + ".ln.gain", {c.out_channels}});
    out.push_back({p + ".ln.bias", {c.out_channels}});
    in_ch = c.out_channels;
  }
  out.push_back(
      {"encoder.pos_conv.weight", {cfg.d_model, cfg.positional_conv_kernel}});
  out.push_back({"encoder.pos_conv.bias", {cfg.d_model}});
  for (int i = 1; i <= cfg.n_layers; ++i) {
    std::string p = "encoder.layer" + std::to_string(i);
    out.push_back({p + ".attn_ln.gain", {cfg.d_model}});
    out.push_back({p + ".attn_ln.bias", {cfg.d_model}});
    for (const char* proj : {"q", "k", "v", "out"}) {
      out.push_back(
          {p + ".attn." + proj + ".weight", {cfg.d_model, cfg.d_model}});
      out.push_back({p + ".attn." + std::string(proj) + ".bias",
                     {cfg.d_model}});
    }
    out.push_back({p + ".ffn_ln.gain", {cfg.d_model}});
    out.push_back({p + ".ffn_ln.bias", {cfg.d_model}});
    out.push_back({p + ".ffn.w1.weight", {cfg.ffn_dim, cfg.d_model}});
    out.push_back({p + ".ffn.w1.bias", {cfg.ffn_dim}});
    out.push_back({p + ".ffn.w2.weight", {cfg.d_model, cfg.ffn_dim}});
    out.push_back({p + ".ffn.w2.bias", {cfg.d_model}});
  }
  return out;
}

inline uint64_t parameter_count(const std::vector<TensorShape>& shapes) {
  uint64_t n = 0;
  for (const TensorShape& s : shapes) {
    uint64_t t = 1;
    for (Eigen::Index d : s.dims) t *= static_cast<uint64_t>(d);
    n += t;
  }
  return n;
}

namespace encdetail {

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

/// Layer norm over the feature axis of a time-major (T x F) matrix.
inline void layer_norm_rows(Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                            const Eigen::VectorXd& bias, double eps) {
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double mu = x.row(t).mean();
    const double var = (x.row(t).array() - mu).square().mean();
    x.row(t) = (((x.row(t).array() - mu) / std::sqrt(var + eps)) *
                    gain.transpose().array() +
                bias.transpose().array())
                   .matrix();
  }
}

}  // namespace encdetail

/// Optional record of intermediate state captured during encode().
struct EncodeTrace {
  Eigen::MatrixXd conv_output;  // latent features before the transformer
  std::vector<Eigen::MatrixXd> layer_outputs;  // post-residual block outputs
  std::vector<std::vector<Eigen::MatrixXd>> attention;  // [layer][head], TxT
};

/// Runs the conv stack (each layer: conv, layer norm over channels, GELU),
/// adds the positional convolution branch, then applies pre-norm transformer
/// blocks 1..truncate_layer with full bidirectional attention. Returns the
/// post-residual hidden states of the selected layer.
inline FeatureSequence encode(const Waveform& w, const EncoderConfig& cfg,
                              const EncoderWeights& weights,
                              EncodeTrace* trace = nullptr) {
  cfg.validate();
  require(w.sample_rate == cfg.sample_rate,
          "encode: waveform sample rate " + std::to_string(w.sample_rate) +
              " does not match encoder sample rate " +
              std::to_string(cfg.sample_rate));
  require(weights.conv.size() == cfg.conv_layers.size() &&
              weights.layers.size() == static_cast<size_t>(cfg.n_layers),
          "encode: weights do not match config");
  const int min_n = cfg.min_input_samples();
  require(w.samples.size() >= static_cast<size_t>(min_n),
          "encode: input too short: need at least " + std::to_string(min_n) +
              " samples, got " + std::to_string(w.samples.size()));

  // conv stack, channels-major (C x T)
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(w.samples.size()));
  for (size_t i = 0; i < w.samples.size(); ++i)
    x(0, static_cast<Eigen::Index>(i)) = w.samples[i];

  for (size_t li = 0; li < cfg.conv_layers.size(); ++li) {
    const ConvSpec& c = cfg.conv_layers[li];
    const ConvLayerWeights& lw = weights.conv[li];
    const Eigen::Index in_ch = x.rows();
    const Eigen::Index t_out = (x.cols() - c.kernel) / c.stride + 1;
    Eigen::MatrixXd cols(in_ch * c.kernel, t_out);
    for (Eigen::Index t = 0; t < t_out; ++t) {
      for (Eigen::Index ic = 0; ic < in_ch; ++ic)
        for (int j = 0; j < c.kernel; ++j)
          cols(ic * c.kernel + j, t) = x(ic, t * c.stride + j);
    }
    Eigen::MatrixXd y = lw.weight * cols;
    y.colwise() += lw.bias;
    // layer norm over channels at each time step, then GELU
    for (Eigen::Index t = 0; t < y.cols(); ++t) {
      const double mu = y.col(t).mean();
      const double var = (y.col(t).array() - mu).square().mean();
      y.col(t) = (((y.col(t).array() - mu) / std::sqrt(var + cfg.layernorm_eps)) *
                      lw.ln_gain.array() +
                  lw.ln_bias.array())
                     .matrix();
    }
    y = y.unaryExpr(&encdetail::gelu);
    x = std::move(y);
  }

  Eigen::MatrixXd h = x.transpose();  // T' x d_model
  if (trace) trace->conv_output = h;

  // positional convolution: depthwise over time, same padding, residual add
  {
    const int k = cfg.positional_conv_kernel;
    const int pad = k / 2;
    const Eigen::Index t_count = h.rows();
    Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(t_count, cfg.d_model);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      for (int j = 0; j < k; ++j) {
        const Eigen::Index src = t + j - pad;
        if (src < 0 || src >= t_count) continue;
        pos.row(t) += h.row(src).cwiseProduct(weights.pos_weight.col(j).transpose());
      }
      pos.row(t) += weights.pos_bias.transpose();
    }
    h += pos.unaryExpr(&encdetail::gelu);
  }

  if (trace) {
    trace->layer_outputs.clear();
    trace->attention.clear();
  }

  const int dh = cfg.d_model / cfg.n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int li = 0; li < cfg.truncate_layer; ++li) {
    const TransformerLayerWeights& l = weights.layers[static_cast<size_t>(li)];

    // attention sublayer
    Eigen::MatrixXd z = h;
    encdetail::layer_norm_rows(z, l.attn_ln_gain, l.attn_ln_bias,
                               cfg.layernorm_eps);
    Eigen::MatrixXd q = z * l.wq.transpose();
    q.rowwise() += l.bq.transpose();
    Eigen::MatrixXd kk = z * l.wk.transpose();
    kk.rowwise() += l.bk.transpose();
    Eigen::MatrixXd v = z * l.wv.transpose();
    v.rowwise() += l.bv.transpose();

    Eigen::MatrixXd ctx(h.rows(), cfg.d_model);
    std::vector<Eigen::MatrixXd> head_attn;
    for (int hd = 0; hd < cfg.n_heads; ++hd) {
      auto qh = q.middleCols(hd * dh, dh);
      auto kh = kk.middleCols(hd * dh, dh);
      auto vh = v.middleCols(hd * dh, dh);
      Eigen::MatrixXd scores = (qh * kh.transpose()) * inv_sqrt_dh;
      for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double mx = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - mx).exp();
        scores.row(r) /= scores.row(r).sum();
      }
      ctx.middleCols(hd * dh, dh) = scores * vh;
      if (trace) head_attn.push_back(std::move(scores));
    }
    Eigen::MatrixXd attn_out = ctx * l.wo.transpose();
    attn_out.rowwise() += l.bo.transpose();
    h += attn_out;
    if (trace) trace->attention.push_back(std::move(head_attn));

    // feed-forward sublayer
    Eigen::MatrixXd z2 = h;
    encdetail::layer_norm_rows(z2, l.ffn_ln_gain, l.ffn_ln_bias,
                               cfg.layernorm_eps);
    Eigen::MatrixXd f = z2 * l.ffn_w1.transpose();
    f.rowwise() += l.ffn_b1.transpose();
    f = f.unaryExpr(&encdetail::gelu);
    Eigen::MatrixXd f2 = f * l.ffn_w2.transpose();
    f2.rowwise() += l.ffn_b2.transpose();
    h += f2;

    if (trace) trace->layer_outputs.push_back(h);
  }

  FeatureSequence out;
  out.frames = std::move(h);
  out.frame_shift =
      static_cast<double>(cfg.hop_samples()) / cfg.sample_rate;
  out.frame_length =
      static_cast<double>(cfg.receptive_field()) / cfg.sample_rate;
  out.kind = FeatureKind::kHiddenState;
  return out;
}

}  // namespace svkit
