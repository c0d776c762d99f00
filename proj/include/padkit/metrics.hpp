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
 * @file metrics.hpp
 * @brief ISO/IEC 30107-3 style error rates with EER-calibrated thresholds.
 *
 * A presentation is accepted as bona fide iff score > threshold. All rates
 * are percentages carried at full precision; only the renderers round.
 *
 *   APCER  attacks accepted, per PAI; headline is the max over PAIs or pooled
 *   BPCER  bona fide presentations rejected (== FRR)
 *   FAR    all attacks accepted (== pooled APCER)
 *   ACER = (APCER + BPCER) / 2,  HTER = (FAR + FRR) / 2
 */

#ifndef PADKIT_METRICS_HPP
#define PADKIT_METRICS_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "padkit/common.hpp"

namespace padkit {

struct ScoreRecord {
  std::string sample_id;
  std::string subject_id;
  double score = 0.0;
  Label label = Label::bona_fide;
  std::string pai{kBonaFidePai};
};

class MetricsError : public Error {
 public:
  using Error::Error;
};

enum class ApcerConvention : std::uint8_t { max_over_pai, pooled };

std::string_view to_string(ApcerConvention convention);
/// Accepts "max" and "pooled".
ApcerConvention parse_apcer_convention(std::string_view text);

struct EerResult {
  double threshold = 0.0;
  double eer = 0.0;  // percent
  double far = 0.0;  // percent, at threshold
  double frr = 0.0;  // percent, at threshold
};

/// Scans candidate thresholds (every distinct score plus the midpoints
/// between consecutive distinct scores) for the smallest |FAR - FRR|. Ties
/// go to the lowest threshold class; within a class the midpoint above the
/// class's score is returned, or the score itself for the top class.
EerResult eer_threshold(std::span<const ScoreRecord> dev_scores);

struct EvaluateOptions {
  ApcerConvention apcer = ApcerConvention::max_over_pai;
  /// When nonempty, attack PAIs outside this list are pooled into "unknown"
  /// with a warning.
  std::vector<std::string> pai_vocabulary;
};

struct MetricsReport {
  double threshold = 0.0;
  std::optional<double> eer_dev;
  std::string threshold_source;
  ApcerConvention convention = ApcerConvention::max_over_pai;
  double apcer = 0.0;
  double apcer_pooled = 0.0;
  double apcer_max = 0.0;
  std::map<std::string, double> apcer_per_pai;
  double bpcer = 0.0;
  double acer = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double hter = 0.0;
  std::size_t n_bona_fide = 0;
  std::size_t n_attack = 0;
  std::vector<std::string> warnings;
};

MetricsReport evaluate(std::span<const ScoreRecord> test_scores, double threshold, const EvaluateOptions& options = {});

struct RateSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single fold
};

struct FoldedReport {
  std::vector<MetricsReport> per_fold;
  /// Keys: apcer, bpcer, acer, far, frr, hter, and eer_dev when every fold has it.
  std::map<std::string, RateSummary> summary;
};

FoldedReport aggregate_folds(std::span<const MetricsReport> reports);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const FoldedReport& report);
/// Two-column plain-text table, rates rounded to 2 decimals.
std::string render_table(const MetricsReport& report);
/// Same layout with `mean±std` cells.
std::string render_table(const FoldedReport& report);

struct ComparisonRow {
  std::string name;
  double intra_acer = 0.0;
  double cross_acer = 0.0;
};
/// Train-on-A / test-on-B comparison, ACER columns.
std::string render_comparison(std::span<const ComparisonRow> rows, const std::string& source_name,
                              const std::string& target_name);

/// Score interchange CSV: sample_id,subject_id,score,label,pai
inline constexpr std::string_view kScoreHeader = "sample_id,subject_id,score,label,pai";
void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path);

}  // namespace padkit

#endif  // PADKIT_METRICS_HPP
