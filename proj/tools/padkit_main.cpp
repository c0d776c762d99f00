// Copyright 2026 The padkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// padkit: face presentation attack detection with shuffled patch-wise
// supervision. One binary, one subcommand per experiment step.

#include <CLI11.hpp>

#include <iostream>

#include "padkit/pipeline.hpp"
#include "padkit/synthdata.hpp"

namespace fs = std::filesystem;
using namespace padkit;

namespace {

struct CacheFlags {
  std::string cache;
  std::string manifest;

  void add(CLI::App* app) {
    app->add_option("--cache", cache, "Prepared face cache directory");
    app->add_option("--manifest", manifest, "Manifest whose default cache to use (when --cache is absent)");
  }
  fs::path resolve() const {
    if (!cache.empty()) return cache;
    if (!manifest.empty()) return default_cache_dir(manifest);
    throw PipelineError("pass --cache or --manifest");
  }
};

struct TrainFlags {
  std::uint64_t seed = 0;
  std::string stitch = "random";
  double bona_fide_fraction = 0.5;
  double unstitched_fraction = 0.0;
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.001;
  std::string backbone = "dense_truncated";
  std::string pretrained_weights;
  bool no_augment = false;
  std::string stitch_pool = "batch";
  std::string augment_stage = "composite";

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "Seed for every random stream")->capture_default_str();
    app->add_option("--stitch", stitch, "Stitching strategy")
        ->check(CLI::IsMember({"random", "controlled"}))
        ->capture_default_str();
    app->add_option("--bona-fide-fraction", bona_fide_fraction, "Per-slot bona fide probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app->add_option("--unstitched-fraction", unstitched_fraction, "Share of plain, unstitched training samples")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app->add_option("--epochs", epochs)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--lr", lr, "Initial learning rate, halved every 10 epochs")->capture_default_str();
    app->add_option("--backbone", backbone)
        ->check(CLI::IsMember({"dense_truncated", "tiny"}))
        ->capture_default_str();
    app->add_option("--pretrained-weights", pretrained_weights, "Backbone weight file (padkit weights container)");
    app->add_flag("--no-augment", no_augment, "Disable flip and color jitter");
    app->add_option("--stitch-pool", stitch_pool, "Patch source: current batch or every training face")
        ->check(CLI::IsMember({"batch", "epoch"}))
        ->capture_default_str();
    app->add_option("--augment-stage", augment_stage, "Augment stitched composites or source faces")
        ->check(CLI::IsMember({"composite", "source"}))
        ->capture_default_str();
  }

  ModelConfig model() const {
    ModelConfig m;
    m.backbone = parse_backbone(backbone);
    m.seed = seed;
    m.pretrained = !pretrained_weights.empty();
    m.pretrained_weights = pretrained_weights;
    return m;
  }
  TrainConfig train() const {
    TrainConfig t;
    t.seed = seed;
    t.stitch_strategy = parse_stitch_strategy(stitch);
    t.stitch_policy.bona_fide_fraction = bona_fide_fraction;
    t.unstitched_fraction = unstitched_fraction;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.initial_lr = lr;
    t.stitch_pool = parse_stitch_pool(stitch_pool);
    t.augment_stage = parse_augment_stage(augment_stage);
    if (no_augment) t.augment = AugmentConfig{0.0, 0.0, 0.0, 0.0};
    return t;
  }
};

struct EvalFlags {
  std::string protocol = "grandtest";
  std::string split = "test";
  bool per_video = false;
  std::string aggregation = "mean";
  std::string apcer = "max";
  int batch_size = 32;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--protocol", protocol, "Protocol name prepared in the cache")->capture_default_str();
    app->add_option("--split", split, "Split to report on")
        ->check(CLI::IsMember({"train", "dev", "test", "all"}))
        ->capture_default_str();
    app->add_flag("--per-video", per_video, "Aggregate frame scores per (subject, media) before metrics");
    app->add_option("--video-aggregation", aggregation)->check(CLI::IsMember({"mean", "median"}))->capture_default_str();
    app->add_option("--apcer", apcer, "Headline APCER convention")
        ->check(CLI::IsMember({"max", "pooled"}))
        ->capture_default_str();
    app->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--out", out, "Output directory")->required();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"padkit: face presentation attack detection with shuffled patch-wise supervision"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "padkit 0.1.0");

  // synth
  SynthConfig synth;
  std::string synth_out;
  bool synth_pair = false;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic face-PAD corpus");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--n-subjects", synth.n_subjects)->capture_default_str();
  synth_cmd->add_option("--frames-per-subject", synth.frames_per_subject)->capture_default_str();
  synth_cmd->add_option("--pai", synth.attack_pais, "Attack PAI names")->capture_default_str();
  synth_cmd->add_option("--texture-strength", synth.texture_strength)->capture_default_str();
  synth_cmd->add_option("--domain-shift", synth.domain_shift)->capture_default_str();
  synth_cmd->add_option("--folds", synth.n_folds, "Number of fold_id values")->capture_default_str();
  synth_cmd->add_flag("--pair", synth_pair, "Write domains A and B under --out");

  // prepare
  std::string prep_manifest, prep_protocol, prep_out, prep_media;
  auto* prep_cmd = app.add_subcommand("prepare", "Align faces into a cache and write protocol split listings");
  prep_cmd->add_option("--manifest", prep_manifest)->required()->check(CLI::ExistingFile);
  prep_cmd->add_option("--protocol", prep_protocol, "Protocol config JSON (default: grandtest)")
      ->check(CLI::ExistingFile);
  prep_cmd->add_option("--out", prep_out, "Cache directory (default: under $PADKIT_CACHE_DIR)");
  prep_cmd->add_option("--media-root", prep_media, "Root for relative media paths (default: manifest directory)");

  // stitch-preview
  CacheFlags prev_cache;
  PreviewOptions prev;
  std::string prev_stitch = "random", prev_out, prev_protocol;
  auto* prev_cmd = app.add_subcommand("stitch-preview", "Write stitched samples with label maps and provenance");
  prev_cache.add(prev_cmd);
  prev_cmd->add_option("--stitch", prev_stitch)->check(CLI::IsMember({"random", "controlled"}))->capture_default_str();
  prev_cmd->add_option("--bona-fide-fraction", prev.bona_fide_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  prev_cmd->add_option("--seed", prev.seed)->capture_default_str();
  prev_cmd->add_option("--n", prev.n)->check(CLI::PositiveNumber)->capture_default_str();
  prev_cmd->add_option("--protocol", prev_protocol, "Draw patches from this protocol's train split");
  prev_cmd->add_option("--out", prev_out)->required();

  // train
  CacheFlags train_cache;
  TrainFlags train_flags;
  std::string train_protocol = "grandtest", train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a map-producing model on stitched samples");
  train_cache.add(train_cmd);
  train_flags.add(train_cmd);
  train_cmd->add_option("--protocol", train_protocol, "Protocol name prepared in the cache")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Run directory")->required();

  // eval
  CacheFlags eval_cache;
  EvalFlags eval_flags;
  std::string eval_ckpt;
  auto* eval_cmd = app.add_subcommand("eval", "Score a split and report metrics at the dev-EER threshold");
  eval_cache.add(eval_cmd);
  eval_flags.add(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file or run directory")->required();

  // cross-eval
  CacheFlags cross_cache;
  EvalFlags cross_flags;
  std::string cross_ckpt;
  bool recalibrate = false;
  auto* cross_cmd = app.add_subcommand("cross-eval", "Evaluate a model on another dataset's cache");
  cross_cache.add(cross_cmd);
  cross_flags.add(cross_cmd);
  cross_cmd->add_option("--checkpoint", cross_ckpt, "Checkpoint file or run directory")->required();
  cross_cmd->add_flag("--recalibrate", recalibrate, "Take the threshold from the target dev split");

  // metrics
  MetricsOptions met;
  std::string met_scores, met_dev, met_out, met_apcer = "max";
  double met_threshold = 0.0;
  auto* met_cmd = app.add_subcommand("metrics", "Compute metrics from score CSV files");
  met_cmd->add_option("--scores", met_scores, "Test score CSV")->required()->check(CLI::ExistingFile);
  auto* dev_opt = met_cmd->add_option("--dev-scores", met_dev, "Dev score CSV for the EER threshold")
                      ->check(CLI::ExistingFile);
  auto* thr_opt = met_cmd->add_option("--threshold", met_threshold, "Fixed threshold");
  dev_opt->excludes(thr_opt);
  met_cmd->add_option("--apcer", met_apcer)->check(CLI::IsMember({"max", "pooled"}))->capture_default_str();
  met_cmd->add_option("--out", met_out, "Output directory for metrics.json/metrics.txt");

  // cross-compare
  std::string cc_source, cc_target, cc_source_manifest, cc_target_manifest, cc_protocol = "grandtest", cc_out;
  TrainFlags cc_flags;
  auto* cc_cmd =
      app.add_subcommand("cross-compare", "Train stitched and unstitched variants on A, compare on A and B");
  cc_cmd->add_option("--cache", cc_source, "Source-domain cache");
  cc_cmd->add_option("--manifest", cc_source_manifest, "Source-domain manifest (default cache)");
  cc_cmd->add_option("--target-cache", cc_target, "Target-domain cache");
  cc_cmd->add_option("--target-manifest", cc_target_manifest, "Target-domain manifest (default cache)");
  cc_cmd->add_option("--protocol", cc_protocol)->capture_default_str();
  cc_cmd->add_option("--out", cc_out)->required();
  cc_flags.add(cc_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      synth.out_dir = synth_out;
      if (synth_pair) {
        const SynthPair p = generate_pair(synth);
        std::cout << "wrote " << p.a.records.size() << " + " << p.b.records.size() << " samples under " << synth_out
                  << "\n";
      } else {
        const DatasetManifest m = generate(synth);
        std::cout << "wrote " << m.records.size() << " samples to " << synth_out << "\n";
      }
    } else if (*prep_cmd) {
      PrepareOptions o;
      o.manifest = prep_manifest;
      if (!prep_protocol.empty()) o.protocol_config = fs::path(prep_protocol);
      o.cache_dir = prep_out;
      o.media_root = prep_media;
      cmd_prepare(o, &std::cout);
    } else if (*prev_cmd) {
      prev.cache_dir = prev_cache.resolve();
      prev.strategy = parse_stitch_strategy(prev_stitch);
      prev.out_dir = prev_out;
      if (!prev_protocol.empty()) prev.protocol = prev_protocol;
      cmd_stitch_preview(prev);
      std::cout << "wrote " << prev.n << " previews to " << prev_out << "\n";
    } else if (*train_cmd) {
      TrainOptions o{train_cache.resolve(), train_protocol, train_flags.model(), train_flags.train(), train_out};
      cmd_train(o, &std::cout);
    } else if (*eval_cmd) {
      EvalOptions o;
      o.checkpoint = eval_ckpt;
      o.cache_dir = eval_cache.resolve();
      o.protocol = eval_flags.protocol;
      o.split = eval_flags.split;
      o.per_video = eval_flags.per_video;
      o.video_aggregation = parse_video_aggregation(eval_flags.aggregation);
      o.apcer = parse_apcer_convention(eval_flags.apcer);
      o.batch_size = eval_flags.batch_size;
      o.out_dir = eval_flags.out;
      std::cout << cmd_eval(o).text;
    } else if (*cross_cmd) {
      CrossEvalOptions o;
      o.checkpoint = cross_ckpt;
      o.cache_dir = cross_cache.resolve();
      o.protocol = cross_flags.protocol;
      o.split = cross_flags.split;
      o.recalibrate = recalibrate;
      o.per_video = cross_flags.per_video;
      o.video_aggregation = parse_video_aggregation(cross_flags.aggregation);
      o.apcer = parse_apcer_convention(cross_flags.apcer);
      o.batch_size = cross_flags.batch_size;
      o.out_dir = cross_flags.out;
      std::cout << cmd_cross_eval(o).text;
    } else if (*met_cmd) {
      met.scores = met_scores;
      if (!met_dev.empty()) met.dev_scores = fs::path(met_dev);
      if (*thr_opt) met.threshold = met_threshold;
      met.apcer = parse_apcer_convention(met_apcer);
      met.out_dir = met_out;
      const EvalResult r = cmd_metrics(met);
      for (const auto& w : r.reports.front().warnings) std::cerr << "warning: " << w << "\n";
      std::cout << r.text;
    } else if (*cc_cmd) {
      CrossCompareOptions o;
      o.source_cache = !cc_source.empty() ? fs::path(cc_source)
                       : !cc_source_manifest.empty() ? default_cache_dir(cc_source_manifest)
                                                     : throw PipelineError("pass --cache or --manifest");
      o.target_cache = !cc_target.empty() ? fs::path(cc_target)
                       : !cc_target_manifest.empty() ? default_cache_dir(cc_target_manifest)
                                                     : throw PipelineError("pass --target-cache or --target-manifest");
      o.protocol = cc_protocol;
      o.model = cc_flags.model();
      o.train = cc_flags.train();
      o.out_dir = cc_out;
      std::cout << cmd_cross_compare(o, &std::cout).table;
    }
  } catch (const std::exception& e) {
    std::cerr << "padkit: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
