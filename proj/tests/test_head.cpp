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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "support/eig.hpp"
#include "svkit/common.hpp"
#include "svkit/head.hpp"

using svkit::FeatureSequence;
using svkit::HeadConfig;
using svkit::HeadWeights;

namespace {

FeatureSequence random_seq(Eigen::Index t, Eigen::Index f, uint64_t seed) {
  svkit::Rng rng(seed);
  FeatureSequence s;
  s.frames.resize(t, f);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < f; ++j) s.frames(i, j) = rng.normal();
  return s;
}

HeadConfig small_cfg() {
  HeadConfig cfg;
  cfg.input_dim = 8;
  cfg.tdnn_dim = 16;
  cfg.embed_dim = 8;
  cfg.maxout_k = 2;
  cfg.n_classes = 4;
  return cfg;
}

}  // namespace

TEST_CASE("stats_pool of constant frames is the value plus the eps floor") {
  FeatureSequence s;
  s.frames = Eigen::MatrixXd::Constant(7, 3, 2.5);
  Eigen::VectorXd p = svkit::stats_pool(s, 1e-5);
  REQUIRE(p.size() == 6);
  for (int d = 0; d < 3; ++d) {
    REQUIRE(p(d) == Catch::Approx(2.5).margin(1e-15));
    REQUIRE(p(3 + d) == Catch::Approx(std::sqrt(1e-5)).margin(1e-12));
  }
}

TEST_CASE("stats_pool hits the two-frame worked example") {
  FeatureSequence s;
  s.frames.resize(2, 1);
  s.frames << 1.0, 3.0;
  Eigen::VectorXd p = svkit::stats_pool(s, 1e-5);
  // population variance of {1,3} is 1
  REQUIRE(p(0) == Catch::Approx(2.0).margin(1e-15));
  REQUIRE(p(1) == Catch::Approx(std::sqrt(1.0 + 1e-5)).margin(1e-15));
}

TEST_CASE("stats_pool is exactly permutation invariant") {
  FeatureSequence s = random_seq(101, 5, 3);
  Eigen::VectorXd base = svkit::stats_pool(s, 1e-5);
  svkit::Rng rng(4);
  std::vector<Eigen::Index> perm(101);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    for (size_t i = perm.size() - 1; i > 0; --i) {
      size_t j = rng.uniform_int(i + 1);
      std::swap(perm[i], perm[j]);
    }
    FeatureSequence shuffled = s;
    for (size_t i = 0; i < perm.size(); ++i)
      shuffled.frames.row(static_cast<Eigen::Index>(i)) =
          s.frames.row(perm[i]);
    Eigen::VectorXd p = svkit::stats_pool(shuffled, 1e-5);
    REQUIRE(testsup::exact_equal(p, base));
  }
}

TEST_CASE("stats_pool is equivariant to per-dimension mean shift") {
  FeatureSequence s = random_seq(40, 4, 5);
  Eigen::VectorXd base = svkit::stats_pool(s, 1e-5);
  FeatureSequence shifted = s;
  Eigen::RowVectorXd delta(4);
  delta << 1.0, -2.0, 0.5, 3.0;
  shifted.frames.rowwise() += delta;
  Eigen::VectorXd p = svkit::stats_pool(shifted, 1e-5);
  for (int d = 0; d < 4; ++d) {
    REQUIRE(p(d) == Catch::Approx(base(d) + delta(d)).margin(1e-12));
    REQUIRE(p(4 + d) == Catch::Approx(base(4 + d)).margin(1e-12));
  }
}

TEST_CASE("stats_pool rejects empty input and bad eps") {
  FeatureSequence s;
  s.frames.resize(0, 4);
  REQUIRE_THROWS_AS(svkit::stats_pool(s, 1e-5), svkit::Error);
  s = random_seq(3, 2, 1);
  REQUIRE_THROWS_AS(svkit::stats_pool(s, 0.0), svkit::Error);
}

TEST_CASE("maxout with identity and negated identity computes abs") {
  HeadConfig cfg;
  cfg.input_dim = 3;
  cfg.tdnn_dim = 3;
  cfg.embed_dim = 6;  // = 2 * tdnn_dim
  cfg.maxout_k = 2;
  cfg.n_classes = 2;
  HeadWeights w = svkit::resize_head_weights(cfg);
  w.tdnn1_w = Eigen::MatrixXd::Identity(3, 3);
  w.tdnn1_b.setZero();
  w.tdnn2_w = Eigen::MatrixXd::Identity(3, 3);
  w.tdnn2_b.setConstant(-5.0);  // push the means negative
  w.maxout_w[0] = Eigen::MatrixXd::Identity(6, 6);
  w.maxout_w[1] = -Eigen::MatrixXd::Identity(6, 6);
  w.maxout_b[0].setZero();
  w.maxout_b[1].setZero();
  w.classifier.setOnes();

  FeatureSequence s = random_seq(9, 3, 7);
  // keep everything positive pre-ReLU so the TDNN stack stays affine
  s.frames = s.frames.array().abs() + 0.1;
  Eigen::VectorXd e = svkit::head_forward(s, w, cfg);
  FeatureSequence pooled_in;
  pooled_in.frames = s.frames.array() - 5.0;
  Eigen::VectorXd pooled = svkit::stats_pool(pooled_in, cfg.pool_eps);
  bool saw_negative = false;
  for (int d = 0; d < 6; ++d) {
    if (pooled(d) < 0.0) saw_negative = true;
    REQUIRE(e(d) == Catch::Approx(std::abs(pooled(d))).margin(1e-12));
  }
  REQUIRE(saw_negative);
}

TEST_CASE("zero TDNN weights force the documented pooled vector") {
  HeadConfig cfg = small_cfg();
  HeadWeights w = svkit::resize_head_weights(cfg);
  w.tdnn1_w.setZero();
  w.tdnn1_b.setZero();
  w.tdnn2_w.setZero();
  w.tdnn2_b.setZero();
  for (auto& m : w.maxout_w) m.setOnes();
  for (auto& b : w.maxout_b) b.setZero();
  w.classifier.setOnes();

  FeatureSequence s = random_seq(5, 8, 9);
  svkit::HeadForwardCache cache;
  Eigen::VectorXd e = svkit::head_forward(s, w, cfg, &cache);
  for (int d = 0; d < cfg.tdnn_dim; ++d) {
    REQUIRE(cache.pooled(d) == 0.0);
    REQUIRE(cache.pooled(cfg.tdnn_dim + d) ==
            Catch::Approx(std::sqrt(cfg.pool_eps)).margin(1e-15));
  }
  // embedding = ones * pooled = sum of pooled, identical across dims
  const double expect = cfg.tdnn_dim * std::sqrt(cfg.pool_eps);
  for (int d = 0; d < cfg.embed_dim; ++d)
    REQUIRE(e(d) == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("head_forward is invariant to frame order") {
  HeadConfig cfg = small_cfg();
  HeadWeights w = svkit::init_head(cfg, 10);
  FeatureSequence s = random_seq(23, 8, 11);
  Eigen::VectorXd base = svkit::head_forward(s, w, cfg);
  FeatureSequence rev = s;
  rev.frames = s.frames.colwise().reverse().eval();
  Eigen::VectorXd e = svkit::head_forward(rev, w, cfg);
  REQUIRE(testsup::exact_equal(e, base));
}

TEST_CASE("head_forward validates dimensions") {
  HeadConfig cfg = small_cfg();
  HeadWeights w = svkit::init_head(cfg, 1);
  FeatureSequence s = random_seq(4, 7, 2);  // dim 7 != 8
  REQUIRE_THROWS_AS(svkit::head_forward(s, w, cfg), svkit::Error);
  FeatureSequence empty;
  empty.frames.resize(0, 8);
  REQUIRE_THROWS_AS(svkit::head_forward(empty, w, cfg), svkit::Error);
}

TEST_CASE("aam with zero margin and unit scale is plain softmax") {
  svkit::Rng rng(13);
  const int classes = 5, dim = 6;
  Eigen::VectorXd e(dim);
  for (int i = 0; i < dim; ++i) e(i) = rng.normal();
  Eigen::MatrixXd c(classes, dim);
  for (int i = 0; i < classes; ++i)
    for (int j = 0; j < dim; ++j) c(i, j) = rng.normal();

  svkit::AamResult r = svkit::aam_softmax_loss(e, 2, c, 0.0, 1.0);

  // independent recomputation: softmax cross-entropy over cosines
  Eigen::VectorXd cosines(classes);
  for (int j = 0; j < classes; ++j)
    cosines(j) = e.dot(c.row(j).transpose()) / (e.norm() * c.row(j).norm());
  double denom = 0.0;
  for (int j = 0; j < classes; ++j) denom += std::exp(cosines(j));
  double want = -std::log(std::exp(cosines(2)) / denom);
  REQUIRE(r.loss == Catch::Approx(want).epsilon(1e-12));
  for (int j = 0; j < classes; ++j)
    REQUIRE(r.logits(j) == Catch::Approx(cosines(j)).margin(1e-12));
}

TEST_CASE("aam worked example: aligned target, orthogonal non-target") {
  Eigen::VectorXd e(2);
  e << 1.0, 0.0;
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 0.0, 0.0, 1.0;
  svkit::AamResult r = svkit::aam_softmax_loss(e, 0, c, 0.35, 32.0);
  // 32*cos(0.35) = 30.0599...; the cosine clamp shaves off < 0.01
  REQUIRE(r.logits(0) == Catch::Approx(32.0 * std::cos(0.35)).margin(0.01));
  REQUIRE(r.logits(1) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(r.loss > 0.0);
  REQUIRE(r.loss < 1e-12);  // log(1 + e^-30.05)
}

TEST_CASE("aam loss is non-negative and logits scale linearly in s") {
  svkit::Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd e(4);
    for (int i = 0; i < 4; ++i) e(i) = rng.normal();
    Eigen::MatrixXd c(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) c(i, j) = rng.normal();
    svkit::AamResult r1 = svkit::aam_softmax_loss(e, 1, c, 0.35, 1.0);
    svkit::AamResult r7 = svkit::aam_softmax_loss(e, 1, c, 0.35, 7.0);
    REQUIRE(r1.loss >= 0.0);
    for (int j = 0; j < 3; ++j)
      REQUIRE(r7.logits(j) == Catch::Approx(7.0 * r1.logits(j)).margin(1e-9));
  }
}

TEST_CASE("growing the margin never raises the target logit") {
  svkit::Rng rng(19);
  Eigen::VectorXd e(5);
  for (int i = 0; i < 5; ++i) e(i) = rng.normal();
  Eigen::MatrixXd c(3, 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) c(i, j) = rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (double m : {0.0, 0.1, 0.2, 0.35, 0.5, 0.7}) {
    svkit::AamResult r = svkit::aam_softmax_loss(e, 0, c, m, 32.0);
    REQUIRE(r.logits(0) <= prev + 1e-12);
    prev = r.logits(0);
  }
}

TEST_CASE("aam fallback branch engages for near-opposite embeddings") {
  Eigen::VectorXd e(2);
  e << -1.0, 1e-4;
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 0.0, 0.0, 1.0;
  // cos(theta_0) ~ -1: theta + m would exceed pi, fallback is linear
  svkit::AamResult r = svkit::aam_softmax_loss(e, 0, c, 0.35, 32.0);
  double cos0 = std::max(e(0) / e.norm(), -1.0 + 1e-7);
  double want = 32.0 * (cos0 - 0.35 * std::sin(0.35));
  REQUIRE(r.logits(0) == Catch::Approx(want).margin(1e-9));
  REQUIRE(std::isfinite(r.grad_embedding.norm()));
}

TEST_CASE("aam gradients match central finite differences") {
  svkit::Rng rng(23);
  const int classes = 6, dim = 8;
  Eigen::VectorXd e(dim);
  for (int i = 0; i < dim; ++i) e(i) = rng.normal();
  Eigen::MatrixXd c(classes, dim);
  for (int i = 0; i < classes; ++i)
    for (int j = 0; j < dim; ++j) c(i, j) = rng.normal();
  const int label = 3;
  const double m = 0.35, s = 32.0, h = 1e-5;

  svkit::AamResult r = svkit::aam_softmax_loss(e, label, c, m, s);

  double max_rel = 0.0;
  auto rel = [](double fd, double an) {
    return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-5});
  };
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd ep = e, em = e;
    ep(i) += h;
    em(i) -= h;
    double fd = (svkit::aam_softmax_loss(ep, label, c, m, s).loss -
                 svkit::aam_softmax_loss(em, label, c, m, s).loss) /
                (2 * h);
    max_rel = std::max(max_rel, rel(fd, r.grad_embedding(i)));
  }
  for (int i = 0; i < classes; ++i) {
    for (int j = 0; j < dim; ++j) {
      Eigen::MatrixXd cp = c, cm = c;
      cp(i, j) += h;
      cm(i, j) -= h;
      double fd = (svkit::aam_softmax_loss(e, label, cp, m, s).loss -
                   svkit::aam_softmax_loss(e, label, cm, m, s).loss) /
                  (2 * h);
      max_rel = std::max(max_rel, rel(fd, r.grad_classifier(i, j)));
    }
  }
  REQUIRE(max_rel < 1e-4);
}

TEST_CASE("aam rejects degenerate inputs") {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(2, 3);
  REQUIRE_THROWS_AS(svkit::aam_softmax_loss(e, 0, c, 0.35, 32.0),
                    svkit::Error);
  e << 1.0, 0.0, 0.0;
  c.row(1).setZero();
  REQUIRE_THROWS_AS(svkit::aam_softmax_loss(e, 0, c, 0.35, 32.0),
                    svkit::Error);
  c.row(1).setOnes();
  REQUIRE_THROWS_AS(svkit::aam_softmax_loss(e, 2, c, 0.35, 32.0),
                    svkit::Error);
  REQUIRE_THROWS_AS(svkit::aam_softmax_loss(e, -1, c, 0.35, 32.0),
                    svkit::Error);
}

TEST_CASE("head init is deterministic and scaled by fan-in") {
  HeadConfig cfg = small_cfg();
  HeadWeights a = svkit::init_head(cfg, 29);
  HeadWeights b = svkit::init_head(cfg, 29);
  REQUIRE(testsup::exact_equal(a.tdnn1_w, b.tdnn1_w));
  REQUIRE(testsup::exact_equal(a.classifier, b.classifier));
  REQUIRE(a.tdnn1_b.isZero());

  HeadConfig big = cfg;
  big.tdnn_dim = 256;
  HeadWeights w = svkit::init_head(big, 31);
  double mean = w.tdnn2_w.mean();
  double sd = std::sqrt((w.tdnn2_w.array() - mean).square().mean());
  double target = 1.0 / std::sqrt(256.0);
  REQUIRE(sd > 0.8 * target);
  REQUIRE(sd < 1.2 * target);
}

TEST_CASE("head config validation") {
  HeadConfig bad = small_cfg();
  bad.maxout_k = 1;
  REQUIRE_THROWS_AS(bad.validate(), svkit::Error);
  bad = small_cfg();
  bad.margin = 1.6;  // >= pi/2
  REQUIRE_THROWS_AS(bad.validate(), svkit::Error);
  bad = small_cfg();
  bad.scale = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), svkit::Error);
  bad = small_cfg();
  bad.pool_eps = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), svkit::Error);
}
