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
// Speaker embedding back-end: two context-1 TDNN layers (first with ReLU),
// statistics pooling, a maxout linear embedding layer, and AAM-Softmax
// classification with analytic gradients throughout.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "svkit/common.hpp"
#include "svkit/frontend.hpp"
#include "svkit/tensor.hpp"

namespace svkit {

struct HeadConfig {
  int input_dim = 64;
  int tdnn_dim = 2048;
  int embed_dim = 512;
  int maxout_k = 2;
  int n_classes = 2;
  double margin = 0.35;
  double scale = 32.0;
  double pool_eps = 1e-5;

  void validate() const {
    require(input_dim >= 1 && tdnn_dim >= 1 && embed_dim >= 1 && n_classes >= 1,
            "head config: dims must be >= 1");
    require(maxout_k >= 2, "head config: maxout_k must be >= 2");
    require(margin >= 0.0 && margin < kPi / 2.0,
            "head config: margin must lie in [0, pi/2)");
    require(scale > 0.0, "head config: scale must be > 0");
    require(pool_eps > 0.0, "head config: pool_eps must be > 0");
  }
};

struct HeadWeights {
  Eigen::MatrixXd tdnn1_w;  // tdnn_dim x input_dim
  Eigen::VectorXd tdnn1_b;
  Eigen::MatrixXd tdnn2_w;  // tdnn_dim x tdnn_dim
  Eigen::VectorXd tdnn2_b;
  std::vector<Eigen::MatrixXd> maxout_w;  // k of embed_dim x 2*tdnn_dim
  std::vector<Eigen::VectorXd> maxout_b;
  Eigen::MatrixXd classifier;  // n_classes x embed_dim, rows normalized at use
};

struct SpeakerEmbedding {
  std::string utt;
  Eigen::VectorXd vector;
};

inline std::vector<TensorRef> tensor_refs(HeadWeights& w) {
  std::vector<TensorRef> refs;
  refs.push_back(make_ref("head.tdnn1.weight", w.tdnn1_w));
  refs.push_back(make_ref("head.tdnn1.bias", w.tdnn1_b));
  refs.push_back(make_ref("head.tdnn2.weight", w.tdnn2_w));
  refs.push_back(make_ref("head.tdnn2.bias", w.tdnn2_b));
  for (size_t k = 0; k < w.maxout_w.size(); ++k) {
    std::string p = "head.maxout" + std::to_string(k + 1);
    refs.push_back(make_ref(p + ".weight", w.maxout_w[k]));
    refs.push_back(make_ref(p + ".bias", w.maxout_b[k]));
  }
  refs.push_back(make_ref("head.classifier.weight", w.classifier));
  return refs;
}

inline HeadWeights resize_head_weights(const HeadConfig& cfg) {
  cfg.validate();
  HeadWeights w;
  w.tdnn1_w.resize(cfg.tdnn_dim, cfg.input_dim);
  w.tdnn1_b.resize(cfg.tdnn_dim);
  w.tdnn2_w.resize(cfg.tdnn_dim, cfg.tdnn_dim);
  w.tdnn2_b.resize(cfg.tdnn_dim);
  w.maxout_w.assign(static_cast<size_t>(cfg.maxout_k),
                    Eigen::MatrixXd(cfg.embed_dim, 2 * cfg.tdnn_dim));
  w.maxout_b.assign(static_cast<size_t>(cfg.maxout_k),
                    Eigen::VectorXd(cfg.embed_dim));
  w.classifier.resize(cfg.n_classes, cfg.embed_dim);
  return w;
}

inline HeadWeights init_head(const HeadConfig& cfg, uint64_t seed) {
  HeadWeights w = resize_head_weights(cfg);
  std::vector<TensorRef> refs = tensor_refs(w);
  init_tensors(refs, seed);
  return w;
}

/// Mean and sqrt(population variance + eps) per dimension, concatenated.
/// Per-dimension sums run over sorted values so the result is exactly
/// invariant to frame order (plain accumulation would pick up different
/// rounding under permutation).
inline Eigen::VectorXd stats_pool(const FeatureSequence& seq, double eps) {
  require(seq.num_frames() >= 1, "stats_pool: empty sequence");
  require(eps > 0, "stats_pool: eps must be > 0");
  const Eigen::Index f = seq.dim();
  const Eigen::Index t_count = seq.num_frames();
  Eigen::VectorXd out(2 * f);
  std::vector<double> col(static_cast<size_t>(t_count));
  for (Eigen::Index d = 0; d < f; ++d) {
    for (Eigen::Index t = 0; t < t_count; ++t)
      col[static_cast<size_t>(t)] = seq.frames(t, d);
    std::sort(col.begin(), col.end());
    double sum = 0.0;
    for (double v : col) sum += v;
    const double mean = sum / static_cast<double>(t_count);
    for (double& v : col) v = (v - mean) * (v - mean);
    std::sort(col.begin(), col.end());
    double sq = 0.0;
    for (double v : col) sq += v;
    out(d) = mean;
    out(f + d) = std::sqrt(sq / static_cast<double>(t_count) + eps);
  }
  return out;
}

namespace headdetail {

// total order on doubles via sign-magnitude to two's-complement mapping;
// equal keys iff identical bit patterns
inline uint64_t order_key(double x) {
  const uint64_t b = std::bit_cast<uint64_t>(x);
  return (b & 0x8000000000000000ull) ? ~b : (b | 0x8000000000000000ull);
}

// Canonical frame permutation (lexicographic over the row values). The TDNN
// layers are per-frame and the pooling is symmetric, so the embedding must
// not depend on frame order; GEMM rounding is position-dependent, so we fix
// the order before multiplying to get that invariance bit for bit.
inline std::vector<Eigen::Index> canonical_order(const Eigen::MatrixXd& x) {
  std::vector<Eigen::Index> order(static_cast<size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) {
              for (Eigen::Index j = 0; j < x.cols(); ++j) {
                const uint64_t ka = order_key(x(a, j));
                const uint64_t kb = order_key(x(b, j));
                if (ka != kb) return ka < kb;
              }
              return false;
            });
  return order;
}

}  // namespace headdetail

/// Intermediate activations kept for the backward pass. The frame-indexed
/// members are stored in canonical (sorted) order, not caller order.
struct HeadForwardCache {
  Eigen::MatrixXd input;    // T x input_dim, canonical order
  std::vector<Eigen::Index> frame_order;  // input.row(i) = caller row order[i]
  Eigen::MatrixXd h1_pre;   // T x tdnn_dim, before ReLU
  Eigen::MatrixXd h1;       // after ReLU
  Eigen::MatrixXd h2;       // T x tdnn_dim
  Eigen::VectorXd pooled;   // 2*tdnn_dim
  Eigen::VectorXd mean;     // tdnn_dim
  Eigen::VectorXd stddev;   // tdnn_dim, sqrt(var + eps)
  std::vector<int> maxout_winner;  // per embedding dim, winning map index
  Eigen::VectorXd embedding;
};

inline Eigen::VectorXd head_forward(const FeatureSequence& seq,
                                    const HeadWeights& w, const HeadConfig& cfg,
                                    HeadForwardCache* cache = nullptr) {
  cfg.validate();
  require(seq.num_frames() >= 1, "head_forward: empty sequence");
  require(seq.dim() == cfg.input_dim,
          "head_forward: feature dim " + std::to_string(seq.dim()) +
              " does not match head input_dim " +
              std::to_string(cfg.input_dim));

  std::vector<Eigen::Index> order = headdetail::canonical_order(seq.frames);
  Eigen::MatrixXd input(seq.frames.rows(), seq.frames.cols());
  for (Eigen::Index i = 0; i < input.rows(); ++i)
    input.row(i) = seq.frames.row(order[static_cast<size_t>(i)]);

  Eigen::MatrixXd h1_pre = input * w.tdnn1_w.transpose();
  h1_pre.rowwise() += w.tdnn1_b.transpose();
  Eigen::MatrixXd h1 = h1_pre.cwiseMax(0.0);
  Eigen::MatrixXd h2 = h1 * w.tdnn2_w.transpose();
  h2.rowwise() += w.tdnn2_b.transpose();

  FeatureSequence pooled_in;
  pooled_in.frames = h2;
  Eigen::VectorXd pooled = stats_pool(pooled_in, cfg.pool_eps);

  Eigen::VectorXd embedding(cfg.embed_dim);
  std::vector<int> winner(static_cast<size_t>(cfg.embed_dim), 0);
  for (int k = 0; k < cfg.maxout_k; ++k) {
    Eigen::VectorXd cand =
        w.maxout_w[static_cast<size_t>(k)] * pooled +
        w.maxout_b[static_cast<size_t>(k)];
    for (Eigen::Index d = 0; d < cfg.embed_dim; ++d) {
      if (k == 0 || cand(d) > embedding(d)) {
        embedding(d) = cand(d);
        winner[static_cast<size_t>(d)] = k;
      }
    }
  }

  if (cache) {
    cache->input = std::move(input);
    cache->frame_order = std::move(order);
    cache->h1_pre = std::move(h1_pre);
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->pooled = pooled;
    cache->mean = pooled.head(cfg.tdnn_dim);
    cache->stddev = pooled.tail(cfg.tdnn_dim);
    cache->maxout_winner = winner;
    cache->embedding = embedding;
  }
  return embedding;
}

struct HeadGradients {
  Eigen::MatrixXd tdnn1_w;
  Eigen::VectorXd tdnn1_b;
  Eigen::MatrixXd tdnn2_w;
  Eigen::VectorXd tdnn2_b;
  std::vector<Eigen::MatrixXd> maxout_w;
  std::vector<Eigen::VectorXd> maxout_b;
  Eigen::MatrixXd classifier;
  Eigen::MatrixXd input;  // T x input_dim, gradient w.r.t. the features
};

inline HeadGradients zero_head_gradients(const HeadConfig& cfg) {
  HeadGradients g;
  g.tdnn1_w = Eigen::MatrixXd::Zero(cfg.tdnn_dim, cfg.input_dim);
  g.tdnn1_b = Eigen::VectorXd::Zero(cfg.tdnn_dim);
  g.tdnn2_w = Eigen::MatrixXd::Zero(cfg.tdnn_dim, cfg.tdnn_dim);
  g.tdnn2_b = Eigen::VectorXd::Zero(cfg.tdnn_dim);
  g.maxout_w.assign(
      static_cast<size_t>(cfg.maxout_k),
      Eigen::MatrixXd::Zero(cfg.embed_dim, 2 * cfg.tdnn_dim));
  g.maxout_b.assign(static_cast<size_t>(cfg.maxout_k),
                    Eigen::VectorXd::Zero(cfg.embed_dim));
  g.classifier = Eigen::MatrixXd::Zero(0, 0);  // sized by the loss
  return g;
}

/// Backpropagates d(loss)/d(embedding) through maxout, pooling and the TDNN
/// stack, accumulating into `g` (classifier gradient comes from the loss).
inline void head_backward(const HeadForwardCache& cache, const HeadWeights& w,
                          const HeadConfig& cfg,
                          const Eigen::VectorXd& grad_embedding,
                          HeadGradients& g) {
  const Eigen::Index t_count = cache.input.rows();
  const double t_inv = 1.0 / static_cast<double>(t_count);

  // maxout
  Eigen::VectorXd grad_pooled = Eigen::VectorXd::Zero(2 * cfg.tdnn_dim);
  for (Eigen::Index d = 0; d < cfg.embed_dim; ++d) {
    const int k = cache.maxout_winner[static_cast<size_t>(d)];
    const double gd = grad_embedding(d);
    if (gd == 0.0) continue;
    g.maxout_w[static_cast<size_t>(k)].row(d) +=
        gd * cache.pooled.transpose();
    g.maxout_b[static_cast<size_t>(k)](d) += gd;
    grad_pooled += gd * w.maxout_w[static_cast<size_t>(k)].row(d).transpose();
  }

  // statistics pooling: mean part and std part
  Eigen::MatrixXd grad_h2(t_count, cfg.tdnn_dim);
  for (Eigen::Index i = 0; i < cfg.tdnn_dim; ++i) {
    const double gm = grad_pooled(i);
    const double gs = grad_pooled(cfg.tdnn_dim + i);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      grad_h2(t, i) =
          gm * t_inv +
          gs * (cache.h2(t, i) - cache.mean(i)) * t_inv / cache.stddev(i);
    }
  }

  // tdnn2 (linear)
  g.tdnn2_w += grad_h2.transpose() * cache.h1;
  g.tdnn2_b += grad_h2.colwise().sum().transpose();
  Eigen::MatrixXd grad_h1 = grad_h2 * w.tdnn2_w;

  // ReLU
  Eigen::MatrixXd grad_h1_pre =
      (cache.h1_pre.array() > 0.0).select(grad_h1, 0.0);

  // tdnn1; the input gradient goes back out in caller frame order
  g.tdnn1_w += grad_h1_pre.transpose() * cache.input;
  g.tdnn1_b += grad_h1_pre.colwise().sum().transpose();
  Eigen::MatrixXd gi = grad_h1_pre * w.tdnn1_w;
  g.input.resize(gi.rows(), gi.cols());
  for (Eigen::Index i = 0; i < gi.rows(); ++i)
    g.input.row(cache.frame_order[static_cast<size_t>(i)]) = gi.row(i);
}

struct AamResult {
  double loss = 0.0;
  Eigen::VectorXd logits;
  Eigen::VectorXd grad_embedding;
  Eigen::MatrixXd grad_classifier;
};

/// AAM-Softmax loss over cosine logits. The target logit is s*cos(theta+m)
/// while theta+m stays in range (cos theta > cos(pi-m)); otherwise the
/// monotone fallback s*(cos theta - m*sin m) is used. Cosines are clamped to
/// [-1+1e-7, 1-1e-7] before the margin.
inline AamResult aam_softmax_loss(const Eigen::VectorXd& embedding, int label,
                                  const Eigen::MatrixXd& classifier, double m,
                                  double s) {
  const Eigen::Index n_classes = classifier.rows();
  require(label >= 0 && label < n_classes, "aam_softmax_loss: bad label");
  require(classifier.cols() == embedding.size(),
          "aam_softmax_loss: dim mismatch");
  require(m >= 0.0 && m < kPi / 2.0, "aam_softmax_loss: bad margin");
  require(s > 0.0, "aam_softmax_loss: bad scale");

  const double e_norm = embedding.norm();
  require(e_norm > 0.0, "aam_softmax_loss: zero-norm embedding");
  const Eigen::VectorXd u = embedding / e_norm;

  const double clamp_lo = -1.0 + 1e-7, clamp_hi = 1.0 - 1e-7;
  Eigen::VectorXd row_norm(n_classes), cosines(n_classes);
  Eigen::MatrixXd v(n_classes, embedding.size());
  for (Eigen::Index j = 0; j < n_classes; ++j) {
    const double cn = classifier.row(j).norm();
    require(cn > 0.0, "aam_softmax_loss: zero-norm classifier row");
    row_norm(j) = cn;
    v.row(j) = classifier.row(j) / cn;
    cosines(j) = std::clamp(u.dot(v.row(j).transpose()), clamp_lo, clamp_hi);
  }

  const double cos_m = std::cos(m), sin_m = std::sin(m);
  const double cy = cosines(label);
  const double sin_y = std::sqrt(1.0 - cy * cy);
  const bool margin_branch = cy > std::cos(kPi - m);
  double phi, dphi_dcos;
  if (margin_branch) {
    phi = cy * cos_m - sin_y * sin_m;
    dphi_dcos = cos_m + cy * sin_m / sin_y;
  } else {
    phi = cy - m * sin_m;
    dphi_dcos = 1.0;
  }

  Eigen::VectorXd logits = s * cosines;
  logits(label) = s * phi;

  const double mx = logits.maxCoeff();
  const Eigen::VectorXd ex = (logits.array() - mx).exp();
  const double denom = ex.sum();
  const double loss = -logits(label) + mx + std::log(denom);
  Eigen::VectorXd p = ex / denom;

  AamResult r;
  r.loss = loss;
  r.logits = logits;
  r.grad_embedding = Eigen::VectorXd::Zero(embedding.size());
  r.grad_classifier = Eigen::MatrixXd::Zero(n_classes, embedding.size());
  for (Eigen::Index j = 0; j < n_classes; ++j) {
    double dz = p(j) - (j == label ? 1.0 : 0.0);
    double dcos = dz * s * (j == label ? dphi_dcos : 1.0);
    r.grad_embedding += dcos * (v.row(j).transpose() - cosines(j) * u) / e_norm;
    r.grad_classifier.row(j) =
        dcos * (u.transpose() - cosines(j) * v.row(j)) / row_norm(j);
  }
  return r;
}

}  // namespace svkit
