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

#include "svkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "support/tempdir.hpp"
#include "svkit/common.hpp"

using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

svkit::ScoreSet set(std::vector<double> tar, std::vector<double> non) {
  return {std::move(tar), std::move(non)};
}

std::string write_text(const testsup::TempDir& tmp, const std::string& name,
                       const std::string& text) {
  std::ofstream out(tmp.file(name), std::ios::binary);
  out << text;
  return tmp.file(name);
}

}  // namespace

TEST_CASE("EER is zero for perfectly separated scores") {
  const auto r = svkit::compute_eer(set({0.9, 0.8, 0.7}, {0.3, 0.2, 0.1}));
  CHECK(r.eer == 0.0);
  // any threshold between 0.3 and 0.7 works; the reported one must separate
  CHECK(r.threshold > 0.3);
  CHECK(r.threshold <= 0.7);
}

TEST_CASE("EER matches the worked three-by-three example") {
  // targets {0.9, 0.8, 0.3}, nontargets {0.7, 0.2, 0.1}: at threshold 0.7
  // exactly one target is rejected and one nontarget accepted, so FAR and
  // FRR meet at 1/3 without interpolation
  const auto r = svkit::compute_eer(set({0.9, 0.8, 0.3}, {0.7, 0.2, 0.1}));
  CHECK(r.eer == Approx(1.0 / 3.0).margin(1e-15));
  CHECK(r.threshold == 0.7);
}

TEST_CASE("minDCF matches the worked three-by-three example") {
  // same scores, P_tar = 0.05, unit costs: the best operating point rejects
  // one target and no nontargets, DCF = 0.05 * (1/3) / min(0.05, 0.95)
  const auto r = svkit::compute_min_dcf(set({0.9, 0.8, 0.3}, {0.7, 0.2, 0.1}),
                                        {0.05, 1.0, 1.0});
  CHECK(r.min_dcf == Approx(1.0 / 3.0).margin(1e-12));
  CHECK(r.threshold == 0.8);
}

TEST_CASE("EER interpolates between bracketing operating points") {
  // between thresholds 2 and 3 the difference FRR - FAR moves from -1/3 to
  // +2/3, so the crossing sits a third of the way along the segment
  const auto r = svkit::compute_eer(set({2.0, 2.0, 2.0}, {1.0, 1.0, 3.0}));
  CHECK(r.eer == Approx(1.0 / 3.0).margin(1e-12));
  CHECK(r.threshold == Approx(2.0 + 1.0 / 3.0).margin(1e-12));
}

TEST_CASE("EER of identical score distributions is one half") {
  const auto r = svkit::compute_eer(set({0.5}, {0.5}));
  CHECK(r.eer == Approx(0.5).margin(1e-15));
}

TEST_CASE("EER and minDCF are exactly invariant to monotone transforms") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> tar(37), non(61);
  for (double& v : tar) v = dist(gen);
  for (double& v : non) v = dist(gen);
  const svkit::ScoreSet base = set(tar, non);
  const auto base_eer = svkit::compute_eer(base);
  const auto base_dcf = svkit::compute_min_dcf(base, {0.05, 1.0, 1.0});

  auto apply = [&](double (*f)(double)) {
    svkit::ScoreSet s = base;
    for (double& v : s.target_scores) v = f(v);
    for (double& v : s.nontarget_scores) v = f(v);
    return s;
  };
  const svkit::ScoreSet affine = apply([](double x) { return 2.0 * x + 1.0; });
  const svkit::ScoreSet cubic = apply([](double x) { return x * x * x; });

  // the metric depends on score ranks only, so the values are bit-identical
  CHECK(svkit::compute_eer(affine).eer == base_eer.eer);
  CHECK(svkit::compute_eer(cubic).eer == base_eer.eer);
  CHECK(svkit::compute_min_dcf(affine, {0.05, 1.0, 1.0}).min_dcf ==
        base_dcf.min_dcf);
  CHECK(svkit::compute_min_dcf(cubic, {0.05, 1.0, 1.0}).min_dcf ==
        base_dcf.min_dcf);
}

TEST_CASE("EER is symmetric under score negation with swapped roles") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> tar(1 + rep * 3), non(2 + rep * 2);
    for (double& v : tar) v = dist(gen);
    for (double& v : non) v = dist(gen);
    const double base = svkit::compute_eer(set(tar, non)).eer;
    std::vector<double> neg_tar = non, neg_non = tar;
    for (double& v : neg_tar) v = -v;
    for (double& v : neg_non) v = -v;
    const double swapped = svkit::compute_eer(set(neg_tar, neg_non)).eer;
    CHECK(swapped == Approx(base).margin(1e-9));
  }
}

TEST_CASE("EER agrees with the brute-force oracle on random score sets") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 100; ++rep) {
    std::uniform_int_distribution<int> size_dist(1, 100);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> tar(size_dist(gen)), non(size_dist(gen));
    const bool quantize = rep % 3 == 0;  // force ties and flat segments
    auto draw = [&]() {
      double v = dist(gen);
      return quantize ? std::round(v * 8.0) / 8.0 : v;
    };
    for (double& v : tar) v = draw();
    for (double& v : non) v = draw();
    const double got = svkit::compute_eer(set(tar, non)).eer;
    const double want = oracle::eer(tar, non);
    INFO("rep " << rep << " tar " << tar.size() << " non " << non.size());
    CHECK(got == Approx(want).margin(1e-9));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("minDCF agrees with the brute-force oracle on random score sets") {
  std::mt19937_64 gen(47);
  const double p_tars[3] = {0.01, 0.05, 0.5};
  for (int rep = 0; rep < 100; ++rep) {
    std::uniform_int_distribution<int> size_dist(1, 80);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> tar(size_dist(gen)), non(size_dist(gen));
    const bool quantize = rep % 4 == 0;
    auto draw = [&]() {
      double v = dist(gen);
      return quantize ? std::round(v * 4.0) / 4.0 : v;
    };
    for (double& v : tar) v = draw();
    for (double& v : non) v = draw();
    const double p_tar = p_tars[rep % 3];
    const double c_miss = rep % 5 == 0 ? 10.0 : 1.0;
    const auto got =
        svkit::compute_min_dcf(set(tar, non), {p_tar, c_miss, 1.0});
    const double want = oracle::min_dcf(tar, non, p_tar, c_miss, 1.0);
    INFO("rep " << rep << " p_tar " << p_tar);
    CHECK(got.min_dcf == Approx(want).margin(1e-9));
  }
}

TEST_CASE("minDCF never exceeds one") {
  // both trivial systems (accept all, reject all) are always available and
  // the normalizer is exactly the cheaper of the two
  std::mt19937_64 gen(59);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> tar(5), non(7);
    for (double& v : tar) v = dist(gen);
    for (double& v : non) v = dist(gen);
    const auto r = svkit::compute_min_dcf(set(tar, non), {0.05, 1.0, 1.0});
    CHECK(r.min_dcf <= 1.0 + 1e-12);
    CHECK(r.min_dcf >= 0.0);
  }
  // fully inverted scores: the trivial system is the best one
  const auto r = svkit::compute_min_dcf(set({0.0}, {1.0}), {0.05, 1.0, 1.0});
  CHECK(r.min_dcf == Approx(1.0).margin(1e-15));
}

TEST_CASE("score set and DCF parameter validation") {
  CHECK_THROWS_WITH(svkit::compute_eer(set({}, {0.1})),
                    ContainsSubstring("need both"));
  CHECK_THROWS_WITH(svkit::compute_eer(set({0.1}, {})),
                    ContainsSubstring("need both"));
  CHECK_THROWS_WITH(
      svkit::compute_eer(set({std::nan("")}, {0.1})),
      ContainsSubstring("non-finite target"));
  CHECK_THROWS_WITH(
      svkit::compute_min_dcf(set({0.5}, {0.1}), {0.0, 1.0, 1.0}),
      ContainsSubstring("p_tar"));
  CHECK_THROWS_WITH(
      svkit::compute_min_dcf(set({0.5}, {0.1}), {1.0, 1.0, 1.0}),
      ContainsSubstring("p_tar"));
  CHECK_THROWS_WITH(
      svkit::compute_min_dcf(set({0.5}, {0.1}), {0.05, 0.0, 1.0}),
      ContainsSubstring("costs"));
}

TEST_CASE("parse_trials reads inline labels and optional columns") {
  testsup::TempDir tmp;
  const std::string path = write_text(
      tmp, "trials.tsv",
      "e1\tt1\ttarget\ne1\tt2\tnontarget\ne2\tt1\n\r\ne2\tt2\ttarget\r\n");
  const svkit::TrialSet s = svkit::parse_trials(path);
  REQUIRE(s.trials.size() == 4);
  CHECK(*s.trials[0].target);
  CHECK_FALSE(*s.trials[1].target);
  CHECK_FALSE(s.trials[2].target.has_value());
  CHECK(*s.trials[3].target);
  CHECK(s.trials[2].enroll_id == "e2");
  CHECK(s.trials[2].test_id == "t1");
}

TEST_CASE("parse_trials joins a key file onto unlabeled trials") {
  testsup::TempDir tmp;
  const std::string trials =
      write_text(tmp, "trials.tsv", "e1\tt1\ne1\tt2\n");
  const std::string key = write_text(
      tmp, "key.tsv", "e1\tt1\ttarget\ne1\tt2\tnontarget\n");
  const svkit::TrialSet s = svkit::parse_trials(trials, key);
  REQUIRE(s.trials.size() == 2);
  CHECK(*s.trials[0].target);
  CHECK_FALSE(*s.trials[1].target);
}

TEST_CASE("parse_trials attaches source metadata to both sides") {
  testsup::TempDir tmp;
  const std::string trials =
      write_text(tmp, "trials.tsv", "e1\tt1\ttarget\ne2\tt2\tnontarget\n");
  const std::string meta =
      write_text(tmp, "meta.tsv", "e1\ttel\nt1\tmic\n");
  const svkit::TrialSet s = svkit::parse_trials(trials, "", meta);
  REQUIRE(s.trials.size() == 2);
  CHECK(*s.trials[0].enroll_src == svkit::SrcType::kTel);
  CHECK(*s.trials[0].test_src == svkit::SrcType::kMic);
  // trials with no metadata at all stay unannotated
  CHECK_FALSE(s.trials[1].enroll_src.has_value());
  CHECK_FALSE(s.trials[1].test_src.has_value());
}

TEST_CASE("parse_trials error handling") {
  testsup::TempDir tmp;
  SECTION("duplicate trials") {
    const std::string p =
        write_text(tmp, "t.tsv", "e\tt\ttarget\ne\tt\tnontarget\n");
    CHECK_THROWS_WITH(svkit::parse_trials(p),
                      ContainsSubstring("duplicate trial"));
  }
  SECTION("unknown label with line number") {
    const std::string p = write_text(tmp, "t.tsv", "e\tt\ttarget\ne\tu\tpos\n");
    CHECK_THROWS_WITH(svkit::parse_trials(p),
                      ContainsSubstring("unknown label 'pos' at line 2"));
  }
  SECTION("malformed line") {
    const std::string p = write_text(tmp, "t.tsv", "justonefield\n");
    CHECK_THROWS_WITH(svkit::parse_trials(p),
                      ContainsSubstring("malformed line 1"));
  }
  SECTION("key names an unknown trial") {
    const std::string t = write_text(tmp, "t.tsv", "e\tt\n");
    const std::string k = write_text(tmp, "k.tsv", "e\tother\ttarget\n");
    CHECK_THROWS_WITH(svkit::parse_trials(t, k),
                      ContainsSubstring("unknown trial"));
  }
  SECTION("key conflicts with an inline label") {
    const std::string t = write_text(tmp, "t.tsv", "e\tt\ttarget\n");
    const std::string k = write_text(tmp, "k.tsv", "e\tt\tnontarget\n");
    CHECK_THROWS_WITH(svkit::parse_trials(t, k),
                      ContainsSubstring("conflicting labels"));
  }
  SECTION("key agreeing with the inline label is fine") {
    const std::string t = write_text(tmp, "t.tsv", "e\tt\ttarget\n");
    const std::string k = write_text(tmp, "k.tsv", "e\tt\ttarget\n");
    CHECK(*svkit::parse_trials(t, k).trials[0].target);
  }
  SECTION("source metadata covering one side only") {
    const std::string t = write_text(tmp, "t.tsv", "e\tt\ttarget\n");
    const std::string m = write_text(tmp, "m.tsv", "e\ttel\n");
    CHECK_THROWS_WITH(svkit::parse_trials(t, "", m),
                      ContainsSubstring("covers only one side"));
  }
  SECTION("empty file") {
    const std::string p = write_text(tmp, "t.tsv", "\n\n");
    CHECK_THROWS_WITH(svkit::parse_trials(p), ContainsSubstring("empty file"));
  }
}

TEST_CASE("make_score_set splits scores by label") {
  svkit::TrialSet key;
  key.trials.push_back({"e1", "t1", true, {}, {}});
  key.trials.push_back({"e1", "t2", false, {}, {}});
  std::vector<svkit::ScoredPair> scores = {{"e1", "t1", 0.9},
                                           {"e1", "t2", 0.2}};
  const svkit::ScoreSet s = svkit::make_score_set(scores, key);
  REQUIRE(s.target_scores.size() == 1);
  REQUIRE(s.nontarget_scores.size() == 1);
  CHECK(s.target_scores[0] == 0.9);
  CHECK(s.nontarget_scores[0] == 0.2);
}

TEST_CASE("make_score_set rejects scores without labels") {
  svkit::TrialSet key;
  key.trials.push_back({"e1", "t1", true, {}, {}});
  key.trials.push_back({"e9", "t9", std::nullopt, {}, {}});
  SECTION("scored trial missing from the key") {
    std::vector<svkit::ScoredPair> scores = {{"e1", "t1", 0.9},
                                             {"eX", "tX", 0.2}};
    CHECK_THROWS_WITH(svkit::make_score_set(scores, key),
                      ContainsSubstring("no label for scored trial eX\ttX"));
  }
  SECTION("scored trial present but unlabeled") {
    std::vector<svkit::ScoredPair> scores = {{"e1", "t1", 0.9},
                                             {"e9", "t9", 0.2}};
    CHECK_THROWS_WITH(svkit::make_score_set(scores, key),
                      ContainsSubstring("no label"));
  }
  SECTION("key with no labels at all") {
    svkit::TrialSet bare;
    bare.trials.push_back({"e", "t", std::nullopt, {}, {}});
    std::vector<svkit::ScoredPair> scores = {{"e", "t", 0.5}};
    CHECK_THROWS_WITH(svkit::make_score_set(scores, bare),
                      ContainsSubstring("no labeled trials"));
  }
}

TEST_CASE("compute_report carries both operating points and counts") {
  const svkit::ScoreSet s = set({0.9, 0.8, 0.3}, {0.7, 0.2, 0.1});
  const svkit::MetricReport r = svkit::compute_report(s);
  CHECK(r.eer == Approx(1.0 / 3.0).margin(1e-15));
  CHECK(r.eer_threshold == 0.7);
  CHECK(r.min_dcf_001 ==
        svkit::compute_min_dcf(s, {0.01, 1.0, 1.0}).min_dcf);
  CHECK(r.min_dcf_005 ==
        svkit::compute_min_dcf(s, {0.05, 1.0, 1.0}).min_dcf);
  CHECK(r.target_trials == 3);
  CHECK(r.nontarget_trials == 3);
}

TEST_CASE("compute_report accepts custom operating points") {
  const svkit::ScoreSet s = set({0.9, 0.8, 0.3}, {0.7, 0.2, 0.1});
  const svkit::MetricReport r = svkit::compute_report(s, 0.3, 0.4, 2.0, 1.0);
  CHECK(r.min_dcf_001 == svkit::compute_min_dcf(s, {0.3, 2.0, 1.0}).min_dcf);
  CHECK(r.min_dcf_005 == svkit::compute_min_dcf(s, {0.4, 2.0, 1.0}).min_dcf);
}

TEST_CASE("report JSON is canonical and lossless") {
  const svkit::MetricReport r =
      svkit::compute_report(set({0.9, 0.8, 0.3}, {0.7, 0.2, 0.1}));
  const std::string json = svkit::report_to_json(r);
  CHECK_THAT(json, ContainsSubstring("\"eer\": 0.33333333333333331"));
  CHECK_THAT(json, ContainsSubstring("\"eer_threshold\": 0.69999999999999996"));
  CHECK_THAT(json, ContainsSubstring("\"target_trials\": 3"));
  CHECK_THAT(json, ContainsSubstring("\"nontarget_trials\": 3"));
  CHECK_THAT(json, ContainsSubstring("\"min_dcf_001\": "));
  CHECK_THAT(json, ContainsSubstring("\"min_dcf_005\": "));
  // identical input gives identical bytes
  CHECK(json == svkit::report_to_json(r));
}

TEST_CASE("metric table lines up layer rows") {
  svkit::MetricReport a;
  a.eer = 1.0 / 3.0;
  a.min_dcf_001 = 0.25;
  a.min_dcf_005 = 0.125;
  svkit::MetricReport b;
  b.eer = 0.05;
  b.min_dcf_001 = 1.0;
  b.min_dcf_005 = 0.5;
  const std::string table =
      svkit::format_metric_table({{"3", a}, {"12", b}});
  CHECK_THAT(table, ContainsSubstring("layer"));
  CHECK_THAT(table, ContainsSubstring("EER(%)"));
  CHECK_THAT(table, ContainsSubstring("minDCF(0.01)"));
  CHECK_THAT(table, ContainsSubstring("minDCF(0.05)"));
  CHECK_THAT(table, ContainsSubstring("33.33"));
  CHECK_THAT(table, ContainsSubstring("0.2500"));
  CHECK_THAT(table, ContainsSubstring("5.00"));
  // three lines: header plus one row per entry
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  CHECK_THROWS_WITH(svkit::format_metric_table({}),
                    ContainsSubstring("no rows"));
}
