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

#include "padkit/scorer.hpp"

#include <algorithm>
#include <map>

namespace padkit {

std::string_view to_string(VideoAggregation aggregation) {
  return aggregation == VideoAggregation::median ? "median" : "mean";
}

VideoAggregation parse_video_aggregation(std::string_view text) {
  if (text == "mean") return VideoAggregation::mean;
  if (text == "median") return VideoAggregation::median;
  throw ScorerError("unknown video aggregation '" + std::string(text) + "' (expected mean or median)");
}

double score_map(const ProbabilityMap& map) { return map.mean(); }

double score_frame(const Model& model, const AlignedFace& face) {
  return score_map(model.predict(std::span<const Image>(&face.pixels, 1)).front());
}

std::vector<double> score_faces(const Model& model, std::span<const AlignedFace> faces, int batch_size) {
  if (batch_size <= 0) throw ScorerError("batch_size must be positive");
  std::vector<double> out;
  out.reserve(faces.size());
  std::vector<Image> batch;
  for (std::size_t start = 0; start < faces.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(faces.size(), start + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(faces[i].pixels);
    for (const auto& map : model.predict(batch)) out.push_back(score_map(map));
  }
  return out;
}

Label classify(double score, double threshold) { return score > threshold ? Label::bona_fide : Label::attack; }

double aggregate_scores(std::span<const double> scores, VideoAggregation aggregation) {
  if (scores.empty()) throw ScorerError("cannot aggregate an empty frame list");
  if (aggregation == VideoAggregation::mean) {
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
}

double score_video(const Model& model, std::span<const AlignedFace> frames, VideoAggregation aggregation) {
  if (frames.empty()) throw ScorerError("score_video needs at least one frame");
  const auto scores = score_faces(model, frames);
  return aggregate_scores(scores, aggregation);
}

std::vector<ScoreRecord> score_records(const Model& model, std::span<const AlignedFace> faces, int batch_size) {
  const auto scores = score_faces(model, faces, batch_size);
  std::vector<ScoreRecord> out;
  out.reserve(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    out.push_back(ScoreRecord{faces[i].sample_id, faces[i].subject_id, scores[i], faces[i].label, faces[i].pai});
  }
  return out;
}

std::vector<ScoreRecord> aggregate_per_video(std::span<const ScoreRecord> frames,
                                             std::span<const std::string> video_keys,
                                             VideoAggregation aggregation) {
  if (frames.size() != video_keys.size()) throw ScorerError("frame records and video keys differ in length");
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::vector<ScoreRecord> out;
  std::vector<std::vector<double>> scores;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto key = std::pair{frames[i].subject_id, video_keys[i]};
    auto [it, inserted] = slot.emplace(key, out.size());
    if (inserted) {
      out.push_back(ScoreRecord{video_keys[i], frames[i].subject_id, 0.0, frames[i].label, frames[i].pai});
      scores.emplace_back();
    } else if (out[it->second].label != frames[i].label || out[it->second].pai != frames[i].pai) {
      throw ScorerError("video '" + video_keys[i] + "' mixes labels or PAIs across frames");
    }
    scores[it->second].push_back(frames[i].score);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].score = aggregate_scores(scores[i], aggregation);
  return out;
}

}  // namespace padkit
