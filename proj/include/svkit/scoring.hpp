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
// Trial scoring: cosine similarity, adaptive s-norm over a top-K cohort,
// and per-source-pair channel normalization of trial scores.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "svkit/common.hpp"
#include "svkit/head.hpp"

namespace svkit {

enum class SrcType { kTel, kMic };

inline std::string to_string(SrcType s) {
  return s == SrcType::kTel ? "tel" : "mic";
}

inline SrcType parse_src_type(const std::string& s) {
  if (s == "tel") return SrcType::kTel;
  if (s == "mic") return SrcType::kMic;
  throw Error("unknown source type '" + s + "' (want tel or mic)");
}

struct Trial {
  std::string enroll_id;
  std::string test_id;
  std::optional<bool> target;  // label when known
  std::optional<SrcType> enroll_src;
  std::optional<SrcType> test_src;
};

struct TrialSet {
  std::vector<Trial> trials;
};

struct ScoreRecord {
  Trial trial;
  double raw_score = 0.0;
  std::optional<double> normalized_score;

  double current_score() const {
    return normalized_score ? *normalized_score : raw_score;
  }
  std::optional<std::pair<SrcType, SrcType>> src_pair() const {
    if (trial.enroll_src && trial.test_src)
      return std::make_pair(*trial.enroll_src, *trial.test_src);
    return std::nullopt;
  }
};

inline double cosine_score(const Eigen::VectorXd& e1,
                           const Eigen::VectorXd& e2) {
  require(e1.size() == e2.size(), "cosine_score: dim mismatch");
  const double n1 = e1.norm(), n2 = e2.norm();
  require(n1 > 0.0 && n2 > 0.0, "cosine_score: zero vector");
  return std::clamp(e1.dot(e2) / (n1 * n2), -1.0, 1.0);
}

namespace scoredetail {

// mean and population std of the K largest values
inline std::pair<double, double> top_k_stats(const std::vector<double>& scores,
                                             size_t k, const char* side) {
  require(scores.size() >= k,
          std::string("adaptive_snorm: ") + side + " cohort has " +
              std::to_string(scores.size()) + " scores, need K = " +
              std::to_string(k));
  std::vector<double> s = scores;
  std::stable_sort(s.begin(), s.end(), std::greater<double>());
  s.resize(k);
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= static_cast<double>(k);
  require(var > 0.0, std::string("adaptive_snorm: ") + side +
                         " top-K scores are degenerate (zero variance)");
  return {mean, std::sqrt(var)};
}

}  // namespace scoredetail

/// Symmetric adaptive s-norm: half-sum of the raw score standardized by the
/// top-K cohort statistics of each side.
inline double adaptive_snorm(double raw,
                             const std::vector<double>& enroll_cohort_scores,
                             const std::vector<double>& test_cohort_scores,
                             size_t k = 200) {
  require(k >= 2, "adaptive_snorm: K must be >= 2");
  auto [mu_e, sigma_e] =
      scoredetail::top_k_stats(enroll_cohort_scores, k, "enroll");
  auto [mu_t, sigma_t] =
      scoredetail::top_k_stats(test_cohort_scores, k, "test");
  return 0.5 * ((raw - mu_e) / sigma_e + (raw - mu_t) / sigma_t);
}

/// Mean/variance normalization of trial scores within each source-type pair
/// group (tel-tel, mic-mic, tel-mic, mic-tel), statistics taken over the
/// records themselves. Writes the result into normalized_score.
inline std::vector<ScoreRecord> channel_normalize(
    std::vector<ScoreRecord> records) {
  require(!records.empty(), "channel_normalize: no records");
  std::map<std::pair<int, int>, std::vector<size_t>> groups;
  for (size_t i = 0; i < records.size(); ++i) {
    auto pair = records[i].src_pair();
    require(pair.has_value(),
            "channel_normalize: trial " + records[i].trial.enroll_id + "\t" +
                records[i].trial.test_id + " has no source metadata");
    groups[{static_cast<int>(pair->first), static_cast<int>(pair->second)}]
        .push_back(i);
  }
  for (const auto& [key, idx] : groups) {
    const std::string name =
        to_string(static_cast<SrcType>(key.first)) + "-" +
        to_string(static_cast<SrcType>(key.second));
    double mean = 0.0;
    for (size_t i : idx) mean += records[i].current_score();
    mean /= static_cast<double>(idx.size());
    double var = 0.0;
    for (size_t i : idx) {
      const double d = records[i].current_score() - mean;
      var += d * d;
    }
    var /= static_cast<double>(idx.size());
    require(var > 0.0,
            "channel_normalize: group " + name + " has zero score variance");
    const double sigma = std::sqrt(var);
    for (size_t i : idx)
      records[i].normalized_score = (records[i].current_score() - mean) / sigma;
  }
  return records;
}

struct ScoreOptions {
  bool snorm = false;
  size_t snorm_top_k = 200;
  const std::vector<SpeakerEmbedding>* cohort = nullptr;
  bool chnorm = false;
};

/// Scores every trial by cosine; optionally applies adaptive s-norm (per-side
/// cohort score lists computed once per unique id) and then channel
/// normalization. Warnings (cohort contamination) are appended if a sink is
/// given.
inline std::vector<ScoreRecord> score_trials(
    const std::vector<SpeakerEmbedding>& embeddings, const TrialSet& trials,
    const ScoreOptions& opt = {}, std::vector<std::string>* warnings = nullptr) {
  require(!trials.trials.empty(), "score_trials: no trials");
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < embeddings.size(); ++i) {
    auto [it, fresh] = index.emplace(embeddings[i].utt, i);
    require(fresh, "score_trials: duplicate embedding id " + it->first);
  }
  auto resolve = [&](const std::string& id) -> const Eigen::VectorXd& {
    auto it = index.find(id);
    require(it != index.end(), "score_trials: no embedding for id " + id);
    return embeddings[it->second].vector;
  };

  std::unordered_map<std::string, std::vector<double>> cohort_scores;
  if (opt.snorm) {
    require(opt.cohort != nullptr && !opt.cohort->empty(),
            "score_trials: s-norm requested without a cohort");
    if (warnings) {
      for (const SpeakerEmbedding& c : *opt.cohort) {
        if (index.count(c.utt)) {
          warnings->push_back("cohort contains trial embedding id '" + c.utt +
                              "' (cohort contamination)");
        }
      }
    }
  }
  auto scores_vs_cohort =
      [&](const std::string& id) -> const std::vector<double>& {
    auto it = cohort_scores.find(id);
    if (it != cohort_scores.end()) return it->second;
    const Eigen::VectorXd& e = resolve(id);
    std::vector<double> s;
    s.reserve(opt.cohort->size());
    for (const SpeakerEmbedding& c : *opt.cohort)
      s.push_back(cosine_score(e, c.vector));
    return cohort_scores.emplace(id, std::move(s)).first->second;
  };

  std::vector<ScoreRecord> out;
  out.reserve(trials.trials.size());
  for (const Trial& t : trials.trials) {
    ScoreRecord rec;
    rec.trial = t;
    rec.raw_score = cosine_score(resolve(t.enroll_id), resolve(t.test_id));
    if (opt.snorm) {
      rec.normalized_score =
          adaptive_snorm(rec.raw_score, scores_vs_cohort(t.enroll_id),
                         scores_vs_cohort(t.test_id), opt.snorm_top_k);
    }
    out.push_back(std::move(rec));
  }
  if (opt.chnorm) out = channel_normalize(std::move(out));
  return out;
}

// ---------------------------------------------------------------------------
// TSV interfaces

/// %.17g preserves doubles exactly through the text round trip.
inline std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_scores(const std::vector<ScoreRecord>& records,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_scores: cannot open " + path);
  for (const ScoreRecord& r : records) {
    out << r.trial.enroll_id << '\t' << r.trial.test_id << '\t'
        << format_score(r.current_score()) << '\n';
  }
  require(out.good(), "write_scores: write failed for " + path);
}

struct ScoredPair {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
};

inline std::vector<ScoredPair> read_scores(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_scores: cannot open " + path);
  std::vector<ScoredPair> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    ScoredPair p;
    std::string score_text;
    if (!std::getline(ss, p.enroll_id, '\t') ||
        !std::getline(ss, p.test_id, '\t') ||
        !std::getline(ss, score_text, '\t')) {
      throw Error("read_scores: malformed line " + std::to_string(lineno) +
                  " in " + path);
    }
    try {
      size_t used = 0;
      p.score = std::stod(score_text, &used);
      require(used == score_text.size(), "trailing junk");
    } catch (const std::exception&) {
      throw Error("read_scores: bad score '" + score_text + "' at line " +
                  std::to_string(lineno) + " in " + path);
    }
    require(std::isfinite(p.score),
            "read_scores: non-finite score at line " + std::to_string(lineno));
    out.push_back(std::move(p));
  }
  require(!out.empty(), "read_scores: empty file " + path);
  return out;
}

/// `utt_id<TAB>src` with src in {tel, mic}.
inline std::map<std::string, SrcType> read_src_meta(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_src_meta: cannot open " + path);
  std::map<std::string, SrcType> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string utt, src;
    if (!std::getline(ss, utt, '\t') || !std::getline(ss, src, '\t')) {
      throw Error("read_src_meta: malformed line " + std::to_string(lineno) +
                  " in " + path);
    }
    require(out.emplace(utt, parse_src_type(src)).second,
            "read_src_meta: duplicate utt id " + utt);
  }
  require(!out.empty(), "read_src_meta: empty file " + path);
  return out;
}

}  // namespace svkit
