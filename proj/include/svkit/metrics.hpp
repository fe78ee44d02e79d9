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
// Detection metrics over trial scores: EER (linear interpolation between the
// bracketing ROC points) and minDCF, plus trial/key file ingestion.
// Decision rule everywhere: accept iff score >= threshold.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "svkit/common.hpp"
#include "svkit/scoring.hpp"

namespace svkit {

struct ScoreSet {
  std::vector<double> target_scores;
  std::vector<double> nontarget_scores;

  void validate() const {
    require(!target_scores.empty() && !nontarget_scores.empty(),
            "score set: need both target and nontarget scores");
    for (double s : target_scores)
      require(std::isfinite(s), "score set: non-finite target score");
    for (double s : nontarget_scores)
      require(std::isfinite(s), "score set: non-finite nontarget score");
  }
};

struct DcfParams {
  double p_tar = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;

  void validate() const {
    require(p_tar > 0.0 && p_tar < 1.0, "dcf params: p_tar must be in (0,1)");
    require(c_miss > 0.0 && c_fa > 0.0, "dcf params: costs must be positive");
  }
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

namespace metricdetail {

struct RocPoint {
  double threshold;
  double far;  // P(nontarget >= threshold)
  double frr;  // P(target < threshold)
};

/// Operating points at sentinel (min-1), every distinct score, and (max+1),
/// in ascending threshold order. Counts by binary search on sorted copies.
inline std::vector<RocPoint> roc_points(const ScoreSet& s) {
  std::vector<double> tar = s.target_scores, non = s.nontarget_scores;
  std::sort(tar.begin(), tar.end());
  std::sort(non.begin(), non.end());

  std::vector<double> thresholds;
  thresholds.push_back(std::min(tar.front(), non.front()) - 1.0);
  {
    std::vector<double> all = tar;
    all.insert(all.end(), non.begin(), non.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    thresholds.insert(thresholds.end(), all.begin(), all.end());
  }
  thresholds.push_back(std::max(tar.back(), non.back()) + 1.0);

  std::vector<RocPoint> points;
  points.reserve(thresholds.size());
  for (double th : thresholds) {
    const auto tar_below =
        std::lower_bound(tar.begin(), tar.end(), th) - tar.begin();
    const auto non_at_or_above =
        non.end() - std::lower_bound(non.begin(), non.end(), th);
    points.push_back(
        {th, static_cast<double>(non_at_or_above) / non.size(),
         static_cast<double>(tar_below) / tar.size()});
  }
  return points;
}

}  // namespace metricdetail

inline EerResult compute_eer(const ScoreSet& s) {
  s.validate();
  const std::vector<metricdetail::RocPoint> pts = metricdetail::roc_points(s);
  // frr - far is nondecreasing in the threshold: find the sign change
  size_t i = 0;
  while (i < pts.size() && pts[i].frr - pts[i].far < 0.0) ++i;
  require(i < pts.size(), "compute_eer: no crossing found");
  const double d_hi = pts[i].frr - pts[i].far;
  EerResult r;
  if (d_hi == 0.0 || i == 0) {
    r.eer = pts[i].frr;
    r.threshold = pts[i].threshold;
    return r;
  }
  const metricdetail::RocPoint& a = pts[i - 1];
  const metricdetail::RocPoint& b = pts[i];
  const double d_lo = a.frr - a.far;  // < 0
  const double t = d_lo / (d_lo - d_hi);
  r.eer = (1.0 - t) * a.far + t * b.far;
  r.threshold = (1.0 - t) * a.threshold + t * b.threshold;
  return r;
}

inline DcfResult compute_min_dcf(const ScoreSet& s, const DcfParams& p) {
  s.validate();
  p.validate();
  const std::vector<metricdetail::RocPoint> pts = metricdetail::roc_points(s);
  const double norm = std::min(p.c_miss * p.p_tar, p.c_fa * (1.0 - p.p_tar));
  DcfResult r;
  r.min_dcf = std::numeric_limits<double>::infinity();
  // skip the low sentinel: the accept-all point recurs at the lowest score
  for (size_t i = 1; i < pts.size(); ++i) {
    const double dcf = (p.c_miss * p.p_tar * pts[i].frr +
                        p.c_fa * (1.0 - p.p_tar) * pts[i].far) /
                       norm;
    if (dcf < r.min_dcf) {
      r.min_dcf = dcf;
      r.threshold = pts[i].threshold;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Trial and key files

/// Reads `enroll_id<TAB>test_id[<TAB>label]` trials. A key file of
/// `enroll_id<TAB>test_id<TAB>label` rows fills (or checks) labels; source
/// metadata joins by utt id on both sides.
inline TrialSet parse_trials(const std::string& trials_path,
                             const std::string& key_path = "",
                             const std::string& src_meta_path = "") {
  std::ifstream in(trials_path);
  require(in.good(), "parse_trials: cannot open " + trials_path);

  auto parse_label = [](const std::string& text, size_t lineno,
                        const std::string& path) {
    if (text == "target") return true;
    if (text == "nontarget") return false;
    throw Error("parse_trials: unknown label '" + text + "' at line " +
                std::to_string(lineno) + " in " + path);
  };

  TrialSet set;
  std::map<std::pair<std::string, std::string>, size_t> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    Trial t;
    std::string label;
    if (!std::getline(ss, t.enroll_id, '\t') ||
        !std::getline(ss, t.test_id, '\t')) {
      throw Error("parse_trials: malformed line " + std::to_string(lineno) +
                  " in " + trials_path);
    }
    require(!t.enroll_id.empty() && !t.test_id.empty(),
            "parse_trials: empty id at line " + std::to_string(lineno) +
                " in " + trials_path);
    if (std::getline(ss, label, '\t'))
      t.target = parse_label(label, lineno, trials_path);
    auto [it, fresh] =
        seen.emplace(std::make_pair(t.enroll_id, t.test_id), set.trials.size());
    require(fresh, "parse_trials: duplicate trial " + t.enroll_id + "\t" +
                       t.test_id);
    set.trials.push_back(std::move(t));
  }
  require(!set.trials.empty(), "parse_trials: empty file " + trials_path);

  if (!key_path.empty()) {
    std::ifstream key(key_path);
    require(key.good(), "parse_trials: cannot open key " + key_path);
    size_t key_lineno = 0;
    while (std::getline(key, line)) {
      ++key_lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string enroll, test, label;
      if (!std::getline(ss, enroll, '\t') || !std::getline(ss, test, '\t') ||
          !std::getline(ss, label, '\t')) {
        throw Error("parse_trials: malformed key line " +
                    std::to_string(key_lineno) + " in " + key_path);
      }
      auto it = seen.find({enroll, test});
      require(it != seen.end(), "parse_trials: key names unknown trial " +
                                    enroll + "\t" + test);
      const bool target = parse_label(label, key_lineno, key_path);
      Trial& t = set.trials[it->second];
      require(!t.target || *t.target == target,
              "parse_trials: conflicting labels for trial " + enroll + "\t" +
                  test);
      t.target = target;
    }
  }

  if (!src_meta_path.empty()) {
    const std::map<std::string, SrcType> meta = read_src_meta(src_meta_path);
    for (Trial& t : set.trials) {
      auto e = meta.find(t.enroll_id);
      auto s = meta.find(t.test_id);
      if (e == meta.end() && s == meta.end()) continue;
      require(e != meta.end() && s != meta.end(),
              "parse_trials: source metadata covers only one side of trial " +
                  t.enroll_id + "\t" + t.test_id);
      t.enroll_src = e->second;
      t.test_src = s->second;
    }
  }
  return set;
}

/// Joins a scored pair list against labeled trials.
inline ScoreSet make_score_set(const std::vector<ScoredPair>& scores,
                               const TrialSet& key) {
  std::map<std::pair<std::string, std::string>, bool> labels;
  for (const Trial& t : key.trials) {
    if (!t.target) continue;
    labels[{t.enroll_id, t.test_id}] = *t.target;
  }
  require(!labels.empty(), "make_score_set: key has no labeled trials");
  ScoreSet set;
  for (const ScoredPair& p : scores) {
    auto it = labels.find({p.enroll_id, p.test_id});
    require(it != labels.end(), "make_score_set: no label for scored trial " +
                                    p.enroll_id + "\t" + p.test_id);
    (it->second ? set.target_scores : set.nontarget_scores).push_back(p.score);
  }
  set.validate();
  return set;
}

// ---------------------------------------------------------------------------
// Reports

struct MetricReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double min_dcf_001 = 0.0;
  double min_dcf_005 = 0.0;
  size_t target_trials = 0;
  size_t nontarget_trials = 0;
};

/// Report at two DCF operating points, default P_tar 0.01 and 0.05.
inline MetricReport compute_report(const ScoreSet& s, double p_tar_a = 0.01,
                                   double p_tar_b = 0.05, double c_miss = 1.0,
                                   double c_fa = 1.0) {
  MetricReport r;
  const EerResult eer = compute_eer(s);
  r.eer = eer.eer;
  r.eer_threshold = eer.threshold;
  r.min_dcf_001 = compute_min_dcf(s, {p_tar_a, c_miss, c_fa}).min_dcf;
  r.min_dcf_005 = compute_min_dcf(s, {p_tar_b, c_miss, c_fa}).min_dcf;
  r.target_trials = s.target_scores.size();
  r.nontarget_trials = s.nontarget_scores.size();
  return r;
}

/// Canonical JSON (sorted keys, fixed layout, %.17g numbers).
inline std::string report_to_json(const MetricReport& r) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"counts\": {\n";
  out << "    \"nontarget_trials\": " << r.nontarget_trials << ",\n";
  out << "    \"target_trials\": " << r.target_trials << "\n";
  out << "  },\n";
  out << "  \"eer\": " << format_score(r.eer) << ",\n";
  out << "  \"eer_threshold\": " << format_score(r.eer_threshold) << ",\n";
  out << "  \"min_dcf_001\": " << format_score(r.min_dcf_001) << ",\n";
  out << "  \"min_dcf_005\": " << format_score(r.min_dcf_005) << "\n";
  out << "}\n";
  return out.str();
}

struct MetricRow {
  std::string label;  // layer number or run name
  MetricReport report;
};

/// Aligned layer-by-metric table, one row per entry.
inline std::string format_metric_table(const std::vector<MetricRow>& rows) {
  require(!rows.empty(), "format_metric_table: no rows");
  size_t label_w = std::string("layer").size();
  for (const MetricRow& r : rows) label_w = std::max(label_w, r.label.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %12s  %12s\n",
                static_cast<int>(label_w), "layer", "EER(%)", "minDCF(0.01)",
                "minDCF(0.05)");
  out << buf;
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %12.4f  %12.4f\n",
                  static_cast<int>(label_w), r.label.c_str(),
                  100.0 * r.report.eer, r.report.min_dcf_001,
                  r.report.min_dcf_005);
    out << buf;
  }
  return out.str();
}

}  // namespace svkit
