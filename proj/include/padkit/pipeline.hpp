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

/**
 * @file pipeline.hpp
 * @brief The experiment commands behind the `padkit` tool.
 *
 * Aligned-face cache layout:
 *
 *   <cache>/manifest.csv                 records as prepared
 *   <cache>/index.csv                    sample_id,face_path,face_hash,source_hash
 *   <cache>/faces/<sample_id>.png        aligned 224x224 faces
 *   <cache>/protocols.json               protocol config used for the listings
 *   <cache>/splits/<protocol>/[fold_<k>/]{train,dev,test}.txt
 *
 * Every command writes run.json into its output directory before the long
 * work starts (status "running") and rewrites it with status "completed",
 * output hashes included, when it finishes.
 */

#ifndef PADKIT_PIPELINE_HPP
#define PADKIT_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "padkit/ingest.hpp"
#include "padkit/metrics.hpp"
#include "padkit/model.hpp"
#include "padkit/patcher.hpp"
#include "padkit/scorer.hpp"
#include "padkit/trainer.hpp"

namespace padkit {

class PipelineError : public Error {
 public:
  using Error::Error;
};

/// $PADKIT_CACHE_DIR when set, otherwise ./padkit_cache.
std::filesystem::path default_cache_root();
/// <root>/<manifest parent dir name>-<manifest stem>.
std::filesystem::path default_cache_dir(const std::filesystem::path& manifest);

class RunRecord {
 public:
  RunRecord(std::filesystem::path dir, std::string command, nlohmann::json parameters);
  nlohmann::json& parameters() { return doc_["parameters"]; }
  void add_input(const std::string& name, const std::filesystem::path& path);
  void add_output(const std::string& name, const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value);
  void begin();
  void complete();
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void write() const;
  std::filesystem::path dir_;
  nlohmann::json doc_;
};

struct CacheEntry {
  SampleRecord record;
  std::string face_path;  // relative to the cache directory
  std::string face_hash;
  std::string source_hash;
};

class FaceCache {
 public:
  static FaceCache open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<CacheEntry>& entries() const { return entries_; }
  const CacheEntry& entry(const std::string& sample_id) const;

  std::vector<std::string> protocols() const;
  /// Fold numbers of a leave-one-out protocol; empty for a single split.
  std::vector<int> folds(const std::string& protocol) const;
  /// role is train, dev, test, or all (every cached record).
  std::vector<const CacheEntry*> split(const std::string& protocol, std::optional<int> fold,
                                       const std::string& role) const;

  AlignedFace load_face(const CacheEntry& entry) const;
  std::vector<AlignedFace> load_faces(const std::vector<const CacheEntry*>& entries) const;

 private:
  std::filesystem::path dir_;
  DatasetManifest manifest_;
  std::vector<CacheEntry> entries_;
  std::map<std::string, std::size_t> by_id_;
};

// ---------------------------------------------------------------------------

struct PrepareOptions {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> protocol_config;  // default: grandtest
  std::filesystem::path cache_dir;                       // empty: default_cache_dir(manifest)
  std::filesystem::path media_root;                      // empty: manifest's directory
};

struct PrepareResult {
  std::filesystem::path cache_dir;
  std::size_t n_records = 0;
  std::size_t n_written = 0;
  std::size_t n_reused = 0;
};

PrepareResult cmd_prepare(const PrepareOptions& options, std::ostream* log = nullptr);

struct PreviewOptions {
  std::filesystem::path cache_dir;
  std::optional<std::string> protocol;  // pool = its train split; default: every cached face
  StitchStrategy strategy = StitchStrategy::random;
  double bona_fide_fraction = 0.5;
  std::uint64_t seed = 0;
  int n = 4;
  std::filesystem::path out_dir;
};

/// Writes preview_NNN.png, preview_NNN_labels.txt, preview_NNN_labels.png
/// and preview_NNN_provenance.json for each of the n samples.
void cmd_stitch_preview(const PreviewOptions& options);

/// 14 rows of 14 space-separated 0/1 values.
std::string label_map_text(const LabelMap& map);
LabelMap parse_label_map_text(const std::string& text);
nlohmann::json provenance_json(const StitchedSample& sample);

struct TrainOptions {
  std::filesystem::path cache_dir;
  std::string protocol = "grandtest";
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path out_dir;
};

struct TrainRunResult {
  std::filesystem::path run_dir;
  std::vector<std::optional<int>> folds;
  std::vector<TrainState> states;
};

/// Trains one model per split set; folded protocols write <out>/fold_<k>/.
TrainRunResult cmd_train(const TrainOptions& options, std::ostream* log = nullptr);

struct EvalOptions {
  /// A checkpoint file, a run directory holding best.bin, or a folded run
  /// directory holding fold_<k>/best.bin.
  std::filesystem::path checkpoint;
  std::filesystem::path cache_dir;
  std::string protocol = "grandtest";
  std::string split = "test";
  bool per_video = false;
  VideoAggregation video_aggregation = VideoAggregation::mean;
  ApcerConvention apcer = ApcerConvention::max_over_pai;
  int batch_size = 32;
  std::filesystem::path out_dir;
};

struct EvalResult {
  std::vector<MetricsReport> reports;  // one per fold
  std::optional<FoldedReport> folded;
  std::string text;
};

/// Threshold from the protocol's dev split (EER), rates on `split`.
EvalResult cmd_eval(const EvalOptions& options);

struct CrossEvalOptions {
  std::filesystem::path checkpoint;  // trained on the source domain
  std::filesystem::path cache_dir;   // target domain
  std::string protocol = "grandtest";
  std::string split = "test";
  /// Recompute the threshold on the target's dev split instead of using the
  /// source dev threshold stored in the checkpoint.
  bool recalibrate = false;
  bool per_video = false;
  VideoAggregation video_aggregation = VideoAggregation::mean;
  ApcerConvention apcer = ApcerConvention::max_over_pai;
  int batch_size = 32;
  std::filesystem::path out_dir;
};

EvalResult cmd_cross_eval(const CrossEvalOptions& options);

struct MetricsOptions {
  std::filesystem::path scores;
  std::optional<std::filesystem::path> dev_scores;
  std::optional<double> threshold;
  ApcerConvention apcer = ApcerConvention::max_over_pai;
  std::filesystem::path out_dir;  // empty: no files
};

EvalResult cmd_metrics(const MetricsOptions& options);

struct CrossCompareOptions {
  std::filesystem::path source_cache;
  std::filesystem::path target_cache;
  std::string protocol = "grandtest";
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path out_dir;
};

struct CrossCompareResult {
  std::vector<ComparisonRow> rows;
  std::string table;
};

/// Trains stitched-random, stitched-controlled and unstitched variants on
/// the source cache; reports intra (source test) and cross (target test) ACER.
CrossCompareResult cmd_cross_compare(const CrossCompareOptions& options, std::ostream* log = nullptr);

}  // namespace padkit

#endif  // PADKIT_PIPELINE_HPP
