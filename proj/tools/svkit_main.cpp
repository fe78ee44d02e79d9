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
// svkit command line. Exit codes: 0 success, 1 usage error, 2 data or
// validation error. Diagnostics go to stderr; data goes to files named by
// flags.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "svkit/svkit.hpp"

namespace {

using nlohmann::json;

struct ExtractArgs {
  std::string config_path;
  std::string checkpoint;
  std::string wav_dir;
  std::string manifest;
  std::string out;
  std::string features_out;
  int threads = 1;
};

void run_extract(const ExtractArgs& a) {
  svkit::PipelineConfig cfg;
  svkit::Model model;
  if (!a.checkpoint.empty()) {
    svkit::LoadedModel lm = svkit::load_model(a.checkpoint);
    cfg = std::move(lm.config);
    model = std::move(lm.model);
  } else {
    cfg = svkit::read_config_file(a.config_path);
    model = svkit::init_model(cfg);
    std::cerr << "extract: no checkpoint given, using seed-initialized "
                 "weights (seed "
              << cfg.train.seed << ")\n";
  }
  std::vector<svkit::Utterance> utts =
      a.manifest.empty() ? svkit::utterances_from_dir(a.wav_dir)
                         : svkit::utterances_from_manifest(a.manifest);
  svkit::ExtractResult res = svkit::extract_embeddings(
      utts, cfg, model, a.threads, !a.features_out.empty());
  svkit::write_embeddings(res.embeddings, a.out);
  std::cerr << "extract: wrote " << res.embeddings.size()
            << " embeddings (dim " << res.embeddings.front().vector.size()
            << ") to " << a.out << "\n";
  if (!a.features_out.empty()) {
    svkit::write_feature_dump(res.features, a.features_out);
    std::cerr << "extract: wrote feature dump to " << a.features_out << "\n";
  }
}

struct TrainArgs {
  std::string config_path;
  std::string manifest;
  std::string out;
  std::string log_path;
  std::string epoch_dir;
  uint64_t seed = 0;
  bool seed_set = false;
};

void run_train(const TrainArgs& a) {
  svkit::PipelineConfig cfg = svkit::read_config_file(a.config_path);
  if (a.seed_set) cfg.train.seed = a.seed;

  std::vector<svkit::TrainItem> items = svkit::read_manifest(a.manifest);
  svkit::AugmentPolicy policy;
  const svkit::AugmentPolicy* policy_ptr = nullptr;
  if (svkit::augmentation_enabled(cfg.augment.policy)) {
    policy = svkit::load_policy(cfg.augment);
    policy_ptr = &policy;
  }

  svkit::Model model = svkit::init_model(cfg);
  const svkit::FeaturePipeline pipe = svkit::feature_pipeline(cfg);

  std::ofstream log;
  if (!a.log_path.empty()) {
    log.open(a.log_path, std::ios::binary);
    svkit::require(log.good(), "train: cannot open log " + a.log_path);
  }
  svkit::StepLogger logger = nullptr;
  if (log.is_open()) {
    logger = [&log](int step, double lr, double loss) {
      log << json{{"step", step}, {"lr", lr}, {"loss", loss}}.dump() << "\n";
    };
  }
  svkit::EpochCallback on_epoch = nullptr;
  if (!a.epoch_dir.empty()) {
    std::filesystem::create_directories(a.epoch_dir);
    on_epoch = [&](int epoch, const svkit::HeadWeights& w) {
      svkit::Model snapshot = model;
      snapshot.head = w;
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d.svck", epoch + 1);
      svkit::save_model(
          (std::filesystem::path(a.epoch_dir) / name).string(), cfg, snapshot);
    };
  }

  svkit::TrainResult res = svkit::train(
      items, cfg.train, pipe, cfg.head, policy_ptr,
      model.has_encoder ? &model.encoder : nullptr, logger, on_epoch);

  model.head = res.state.weights;
  svkit::save_model(a.out, cfg, model);
  std::cerr << "train: " << res.total_steps << " steps over "
            << res.epoch_loss.size() << " epochs; epoch losses:";
  for (double l : res.epoch_loss) std::cerr << " " << l;
  std::cerr << "\ntrain: wrote model to " << a.out << "\n";
}

struct ScoreArgs {
  std::string config_path;
  std::string emb;
  std::string trials;
  std::string out;
  std::string cohort;
  std::string src_meta;
  bool snorm = false, snorm_set = false;
  bool chnorm = false, chnorm_set = false;
  int top_k = 0;
};

void run_score(const ScoreArgs& a) {
  svkit::ScoreOptions opt;
  if (!a.config_path.empty()) {
    const svkit::PipelineConfig cfg = svkit::read_config_file(a.config_path);
    opt.snorm = cfg.scoring.snorm;
    opt.snorm_top_k = static_cast<size_t>(cfg.scoring.snorm_top_k);
    opt.chnorm = cfg.scoring.chnorm;
  }
  if (a.snorm_set) opt.snorm = a.snorm;
  if (a.chnorm_set) opt.chnorm = a.chnorm;
  if (a.top_k > 0) opt.snorm_top_k = static_cast<size_t>(a.top_k);

  const std::vector<svkit::SpeakerEmbedding> embeddings =
      svkit::read_embeddings(a.emb);
  const svkit::TrialSet trials =
      svkit::parse_trials(a.trials, "", a.src_meta);

  std::vector<svkit::SpeakerEmbedding> cohort;
  if (opt.snorm) {
    svkit::require(!a.cohort.empty(),
                   "score: s-norm enabled but no --cohort archive given");
    cohort = svkit::read_embeddings(a.cohort);
    opt.cohort = &cohort;
  }

  std::vector<std::string> warnings;
  const std::vector<svkit::ScoreRecord> records =
      svkit::score_trials(embeddings, trials, opt, &warnings);
  for (const std::string& w : warnings) std::cerr << "score: warning: " << w << "\n";
  svkit::write_scores(records, a.out);
  std::cerr << "score: wrote " << records.size() << " scores to " << a.out
            << "\n";
}

struct EvalArgs {
  std::string scores;
  std::string key;
  std::string out;
  std::string table_out;
  std::string config_path;
};

void run_eval(const EvalArgs& a) {
  double p_a = 0.01, p_b = 0.05, c_miss = 1.0, c_fa = 1.0;
  if (!a.config_path.empty()) {
    const svkit::PipelineConfig cfg = svkit::read_config_file(a.config_path);
    p_a = cfg.metrics.p_tars[0];
    p_b = cfg.metrics.p_tars[1];
    c_miss = cfg.metrics.c_miss;
    c_fa = cfg.metrics.c_fa;
  }
  const std::vector<svkit::ScoredPair> scores = svkit::read_scores(a.scores);
  const svkit::TrialSet key = svkit::parse_trials(a.key);
  const svkit::ScoreSet set = svkit::make_score_set(scores, key);
  const svkit::MetricReport report =
      svkit::compute_report(set, p_a, p_b, c_miss, c_fa);

  const std::string json_text = svkit::report_to_json(report);
  std::ofstream out(a.out, std::ios::binary);
  svkit::require(out.good(), "eval: cannot open " + a.out);
  out << json_text;
  svkit::require(out.good(), "eval: write failed for " + a.out);

  const std::string table =
      svkit::format_metric_table({{"all", report}});
  if (!a.table_out.empty()) {
    std::ofstream t(a.table_out, std::ios::binary);
    svkit::require(t.good(), "eval: cannot open " + a.table_out);
    t << table;
  }
  std::cerr << table;
  std::cerr << "eval: wrote report to " << a.out << "\n";
}

struct AugmentArgs {
  std::string config_path;
  std::string in;
  std::string out;
  uint64_t seed = 1;
};

void run_augment(const AugmentArgs& a) {
  const svkit::PipelineConfig cfg = svkit::read_config_file(a.config_path);
  const svkit::AugmentPolicy policy = svkit::load_policy(cfg.augment);
  const svkit::Waveform w = svkit::read_wav(a.in);
  svkit::AugmentRecord record;
  const svkit::Waveform out = svkit::apply_policy(w, policy, a.seed, &record);
  svkit::write_wav(out, a.out);
  std::cerr << "augment: applied " << record.size() << " op(s):";
  for (const svkit::AppliedAugment& op : record) std::cerr << " " << op.type;
  std::cerr << "\naugment: wrote " << a.out << "\n";
}

struct AblateArgs {
  std::string config_path;
  std::vector<int> layers;
  std::string manifest;
  std::string eval_manifest;
  std::string trials;
  std::string key;
  std::string cohort_manifest;
  std::string src_meta;
  std::string out;
  std::string json_out;
  int threads = 1;
};

void run_ablate(const AblateArgs& a) {
  svkit::PipelineConfig cfg = svkit::read_config_file(a.config_path);
  svkit::require(cfg.encoder_enabled,
                 "ablate-layers: encoder.enabled must be true");
  svkit::require(!a.layers.empty(), "ablate-layers: no layers requested");
  for (int layer : a.layers) {
    svkit::require(layer >= 1 && layer <= cfg.encoder.n_layers,
                   "ablate-layers: layer " + std::to_string(layer) +
                       " outside [1, " +
                       std::to_string(cfg.encoder.n_layers) + "]");
  }

  std::vector<svkit::TrainItem> train_items =
      svkit::read_manifest(a.manifest);
  std::vector<svkit::Utterance> eval_utts =
      svkit::utterances_from_manifest(a.eval_manifest);
  const svkit::TrialSet trials =
      svkit::parse_trials(a.trials, a.key, a.src_meta);

  svkit::AugmentPolicy policy;
  const svkit::AugmentPolicy* policy_ptr = nullptr;
  if (svkit::augmentation_enabled(cfg.augment.policy)) {
    policy = svkit::load_policy(cfg.augment);
    policy_ptr = &policy;
  }

  std::vector<svkit::MetricRow> rows;
  json rows_json = json::array();
  for (int layer : a.layers) {
    svkit::PipelineConfig lc = cfg;
    lc.encoder.truncate_layer = layer;
    lc.validate();

    svkit::Model model = svkit::init_model(lc);
    const svkit::FeaturePipeline pipe = svkit::feature_pipeline(lc);
    svkit::TrainResult tr = svkit::train(
        train_items, lc.train, pipe, lc.head, policy_ptr,
        model.has_encoder ? &model.encoder : nullptr);
    model.head = tr.state.weights;

    svkit::ExtractResult ex =
        svkit::extract_embeddings(eval_utts, lc, model, a.threads);

    svkit::ScoreOptions opt;
    opt.snorm = lc.scoring.snorm;
    opt.snorm_top_k = static_cast<size_t>(lc.scoring.snorm_top_k);
    opt.chnorm = lc.scoring.chnorm;
    std::vector<svkit::SpeakerEmbedding> cohort;
    if (opt.snorm) {
      svkit::require(!a.cohort_manifest.empty(),
                     "ablate-layers: scoring.snorm is on but no "
                     "--cohort-manifest given");
      cohort = svkit::extract_embeddings(
                   svkit::utterances_from_manifest(a.cohort_manifest), lc,
                   model, a.threads)
                   .embeddings;
      opt.cohort = &cohort;
    }
    std::vector<std::string> warnings;
    const std::vector<svkit::ScoreRecord> records =
        svkit::score_trials(ex.embeddings, trials, opt, &warnings);
    for (const std::string& w : warnings)
      std::cerr << "ablate-layers: warning: " << w << "\n";

    std::vector<svkit::ScoredPair> pairs;
    for (const svkit::ScoreRecord& r : records)
      pairs.push_back({r.trial.enroll_id, r.trial.test_id,
                       r.current_score()});
    const svkit::ScoreSet set = svkit::make_score_set(pairs, trials);
    const svkit::MetricReport report = svkit::compute_report(
        set, lc.metrics.p_tars[0], lc.metrics.p_tars[1], lc.metrics.c_miss,
        lc.metrics.c_fa);
    rows.push_back({std::to_string(layer), report});
    rows_json.push_back({{"layer", layer},
                         {"eer", report.eer},
                         {"min_dcf_001", report.min_dcf_001},
                         {"min_dcf_005", report.min_dcf_005}});
    std::cerr << "ablate-layers: layer " << layer << " done (final epoch loss "
              << tr.epoch_loss.back() << ")\n";
  }

  const std::string table = svkit::format_metric_table(rows);
  std::ofstream out(a.out, std::ios::binary);
  svkit::require(out.good(), "ablate-layers: cannot open " + a.out);
  out << table;
  svkit::require(out.good(), "ablate-layers: write failed for " + a.out);
  if (!a.json_out.empty()) {
    std::ofstream j(a.json_out, std::ios::binary);
    svkit::require(j.good(), "ablate-layers: cannot open " + a.json_out);
    j << rows_json.dump(2) << "\n";
  }
  std::cerr << table;
}

struct InspectArgs {
  std::string in;
  std::string out;
  bool schema = false;
};

void run_inspect(const InspectArgs& a) {
  json summary;
  if (a.schema) {
    const std::string schema = svkit::config_schema();
    if (!a.out.empty()) {
      std::ofstream out(a.out, std::ios::binary);
      svkit::require(out.good(), "inspect: cannot open " + a.out);
      out << schema;
    }
    std::cerr << schema;
    return;
  }
  svkit::require(!a.in.empty(), "inspect: need --in or --schema");

  std::ifstream probe(a.in, std::ios::binary);
  svkit::require(probe.good(), "inspect: cannot open " + a.in);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  const std::string tag(magic, magic + probe.gcount());
  probe.close();

  if (tag == "SVCK") {
    const svkit::Checkpoint ck = svkit::read_checkpoint(a.in);
    size_t params = 0;
    json tensors = json::array();
    for (const svkit::Checkpoint::Entry& e : ck.tensors) {
      const size_t n = e.rank == 2 ? static_cast<size_t>(e.mat.size())
                                   : static_cast<size_t>(e.vec.size());
      params += n;
      json dims = e.rank == 2 ? json{e.mat.rows(), e.mat.cols()}
                              : json{e.vec.size()};
      tensors.push_back({{"name", e.name}, {"dims", dims}});
    }
    summary = {{"kind", "checkpoint"},
               {"tensor_count", ck.tensors.size()},
               {"parameters", params},
               {"tensors", tensors},
               {"config", json::parse(ck.config_json)}};
    std::cerr << "inspect: SVCK checkpoint, " << ck.tensors.size()
              << " tensors, " << params << " parameters\n";
  } else if (tag == "SVEB") {
    try {
      const std::vector<svkit::SpeakerEmbedding> recs =
          svkit::read_embeddings(a.in);
      summary = {{"kind", "embedding_archive"},
                 {"count", recs.size()},
                 {"dim", recs.front().vector.size()}};
      std::cerr << "inspect: SVEB embedding archive, " << recs.size()
                << " records, dim " << recs.front().vector.size() << "\n";
    } catch (const svkit::Error&) {
      const svkit::FeatureDump dump = svkit::read_feature_dump(a.in);
      summary = {{"kind", "feature_dump"},
                 {"feature_kind", dump.feature_kind},
                 {"count", dump.frames.size()},
                 {"dim", dump.frames.front().vector.size()}};
      std::cerr << "inspect: SVEB feature dump (" << dump.feature_kind
                << "), " << dump.frames.size() << " frames, dim "
                << dump.frames.front().vector.size() << "\n";
    }
  } else {
    const svkit::PipelineConfig cfg = svkit::read_config_file(a.in);
    summary = {{"kind", "config"},
               {"canonical", svkit::config_to_json(cfg)}};
    std::cerr << "inspect: valid pipeline config\n"
              << svkit::save_config(cfg);
  }
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    svkit::require(out.good(), "inspect: cannot open " + a.out);
    out << summary.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svkit: a desk-scale speaker verification toolkit"};
  app.require_subcommand(1);

  ExtractArgs extract_args;
  CLI::App* extract = app.add_subcommand(
      "extract", "Compute speaker embeddings for a set of WAV files");
  extract->add_option("--config", extract_args.config_path,
                      "pipeline config JSON");
  extract->add_option("--checkpoint", extract_args.checkpoint,
                      "SVCK model (embeds its own config)");
  extract->add_option("--wav-dir", extract_args.wav_dir,
                      "directory of .wav files (ids are filename stems)");
  extract->add_option("--manifest", extract_args.manifest,
                      "TSV utt<TAB>path<TAB>speaker manifest");
  extract->add_option("--out", extract_args.out, "output SVEB archive")
      ->required();
  extract->add_option("--features-out", extract_args.features_out,
                      "also dump per-frame features (SVEB v2)");
  extract
      ->add_option("--threads", extract_args.threads,
                   "worker threads (1 = deterministic order anyway)")
      ->envname("SVKIT_THREADS");

  TrainArgs train_args;
  CLI::App* train =
      app.add_subcommand("train", "Fine-tune the speaker embedding head");
  train->add_option("--config", train_args.config_path, "pipeline config JSON")
      ->required();
  train->add_option("--manifest", train_args.manifest,
                    "TSV utt<TAB>path<TAB>speaker manifest")
      ->required();
  train->add_option("--out", train_args.out, "output SVCK model")->required();
  train->add_option("--log", train_args.log_path,
                    "JSONL step log (step, lr, loss)");
  train->add_option("--epoch-dir", train_args.epoch_dir,
                    "write an SVCK checkpoint after each epoch");
  CLI::Option* seed_opt =
      train->add_option("--seed", train_args.seed, "override train.seed");

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "Score trials by cosine");
  score->add_option("--emb", score_args.emb, "SVEB embedding archive")
      ->required();
  score->add_option("--trials", score_args.trials,
                    "TSV enroll<TAB>test[<TAB>label] trials")
      ->required();
  score->add_option("--out", score_args.out, "output scores TSV")->required();
  score->add_option("--config", score_args.config_path,
                    "pipeline config JSON (scoring section)");
  score->add_option("--cohort", score_args.cohort,
                    "SVEB cohort archive for adaptive s-norm");
  score->add_option("--src-meta", score_args.src_meta,
                    "TSV utt<TAB>src (tel|mic) for channel norm");
  CLI::Option* snorm_opt =
      score->add_flag("--snorm,!--no-snorm", score_args.snorm,
                      "enable adaptive s-norm (overrides config)");
  CLI::Option* chnorm_opt =
      score->add_flag("--chnorm,!--no-chnorm", score_args.chnorm,
                      "enable channel norm (overrides config)");
  score->add_option("--top-k", score_args.top_k,
                    "s-norm cohort depth (overrides config)");

  EvalArgs eval_args;
  CLI::App* eval =
      app.add_subcommand("eval", "Compute EER and minDCF from scores");
  eval->add_option("--scores", eval_args.scores, "scores TSV")->required();
  eval->add_option("--key", eval_args.key,
                   "TSV enroll<TAB>test<TAB>label key")
      ->required();
  eval->add_option("--out", eval_args.out, "output JSON report")->required();
  eval->add_option("--table-out", eval_args.table_out,
                   "also write the plain-text table");
  eval->add_option("--config", eval_args.config_path,
                   "pipeline config JSON (metrics section)");

  AugmentArgs augment_args;
  CLI::App* augment =
      app.add_subcommand("augment", "Apply the augmentation policy once");
  augment
      ->add_option("--config", augment_args.config_path,
                   "pipeline config JSON")
      ->required();
  augment->add_option("--in", augment_args.in, "input WAV")->required();
  augment->add_option("--out", augment_args.out, "output WAV")->required();
  augment->add_option("--seed", augment_args.seed, "augmentation seed");

  AblateArgs ablate_args;
  CLI::App* ablate = app.add_subcommand(
      "ablate-layers",
      "Train and evaluate once per encoder truncation layer");
  ablate
      ->add_option("--config", ablate_args.config_path,
                   "pipeline config JSON (encoder must be enabled)")
      ->required();
  ablate
      ->add_option("--layers", ablate_args.layers,
                   "encoder layers to ablate, e.g. --layers 1 3 6")
      ->required();
  ablate
      ->add_option("--manifest", ablate_args.manifest, "training manifest")
      ->required();
  ablate
      ->add_option("--eval-manifest", ablate_args.eval_manifest,
                   "manifest of trial utterances")
      ->required();
  ablate->add_option("--trials", ablate_args.trials, "trials TSV")->required();
  ablate->add_option("--key", ablate_args.key, "label key TSV");
  ablate->add_option("--cohort-manifest", ablate_args.cohort_manifest,
                     "cohort utterances for s-norm");
  ablate->add_option("--src-meta", ablate_args.src_meta,
                     "TSV utt<TAB>src for channel norm");
  ablate->add_option("--out", ablate_args.out, "output table file")
      ->required();
  ablate->add_option("--json-out", ablate_args.json_out,
                     "also write rows as JSON");
  ablate
      ->add_option("--threads", ablate_args.threads,
                   "worker threads for extraction")
      ->envname("SVKIT_THREADS");

  InspectArgs inspect_args;
  CLI::App* inspect = app.add_subcommand(
      "inspect", "Summarize a checkpoint, archive, or config");
  inspect->add_option("--in", inspect_args.in, "file to inspect");
  inspect->add_option("--out", inspect_args.out, "write a JSON summary");
  inspect->add_flag("--schema", inspect_args.schema,
                    "print the config schema");

  try {
    app.parse(argc, argv);
    if (*extract) {
      svkit::require(
          extract_args.config_path.empty() != extract_args.checkpoint.empty(),
          "extract: give exactly one of --config or --checkpoint");
      svkit::require(
          extract_args.wav_dir.empty() != extract_args.manifest.empty(),
          "extract: give exactly one of --wav-dir or --manifest");
      run_extract(extract_args);
    } else if (*train) {
      train_args.seed_set = seed_opt->count() > 0;
      run_train(train_args);
    } else if (*score) {
      score_args.snorm_set = snorm_opt->count() > 0;
      score_args.chnorm_set = chnorm_opt->count() > 0;
      run_score(score_args);
    } else if (*eval) {
      run_eval(eval_args);
    } else if (*augment) {
      run_augment(augment_args);
    } else if (*ablate) {
      run_ablate(ablate_args);
    } else if (*inspect) {
      run_inspect(inspect_args);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const svkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
