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
 * @file scorer.hpp
 * @brief Liveness scores from a frozen model: mean of the 14x14 map.
 */

#ifndef PADKIT_SCORER_HPP
#define PADKIT_SCORER_HPP

#include <span>
#include <string>
#include <vector>

#include "padkit/ingest.hpp"
#include "padkit/metrics.hpp"
#include "padkit/model.hpp"

namespace padkit {

enum class VideoAggregation : std::uint8_t { mean, median };

std::string_view to_string(VideoAggregation aggregation);
VideoAggregation parse_video_aggregation(std::string_view text);

class ScorerError : public Error {
 public:
  using Error::Error;
};

/// Arithmetic mean of a probability map.
double score_map(const ProbabilityMap& map);

double score_frame(const Model& model, const AlignedFace& face);

/// Scores in input order, evaluated in batches of `batch_size`.
std::vector<double> score_faces(const Model& model, std::span<const AlignedFace> faces, int batch_size = 32);

/// bona_fide iff score > threshold.
Label classify(double score, double threshold);

double aggregate_scores(std::span<const double> scores, VideoAggregation aggregation = VideoAggregation::mean);

double score_video(const Model& model, std::span<const AlignedFace> frames,
                   VideoAggregation aggregation = VideoAggregation::mean);

/// One record per face, in input order.
std::vector<ScoreRecord> score_records(const Model& model, std::span<const AlignedFace> faces, int batch_size = 32);

/// Collapses frame records into one record per (subject_id, video key). The
/// video record's sample_id is the key. `video_keys` runs parallel to
/// `frames`; output order follows first appearance.
std::vector<ScoreRecord> aggregate_per_video(std::span<const ScoreRecord> frames,
                                             std::span<const std::string> video_keys,
                                             VideoAggregation aggregation = VideoAggregation::mean);

}  // namespace padkit

#endif  // PADKIT_SCORER_HPP
