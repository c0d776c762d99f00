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

// Shared fixtures for the unit and acceptance tests.

#ifndef PADKIT_TESTS_HELPERS_HPP
#define PADKIT_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "padkit/image.hpp"
#include "padkit/ingest.hpp"
#include "padkit/metrics.hpp"
#include "padkit/rng.hpp"

namespace padkit::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("padkit_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline Image random_image(int h, int w, std::uint64_t seed, int channels = 3) {
  Image img(h, w, channels);
  Rng rng(seed);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

/// Smooth image: a sum of low-frequency waves, friendly to bilinear sampling.
inline Image smooth_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  const double a = rng.uniform(0.01, 0.05), b = rng.uniform(0.01, 0.05), p = rng.uniform(0.0, 6.28);
  Image img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = static_cast<float>(0.5 + 0.2 * std::sin(a * x + p + c) * std::cos(b * y + c));
      }
    }
  }
  return img;
}

inline AlignedFace random_face(const std::string& id, Label label, std::uint64_t seed) {
  AlignedFace f;
  f.pixels = random_image(kFaceSize, kFaceSize, seed);
  f.label = label;
  f.pai = label == Label::bona_fide ? std::string(kBonaFidePai) : std::string("print");
  f.subject_id = "subj_" + id;
  f.sample_id = id;
  return f;
}

inline ScoreRecord score(double s, Label label, std::string pai = "") {
  ScoreRecord r;
  r.sample_id = "x";
  r.subject_id = "s";
  r.score = s;
  r.label = label;
  r.pai = label == Label::bona_fide ? std::string(kBonaFidePai) : (pai.empty() ? std::string("print") : pai);
  return r;
}

struct EerOracle {
  double threshold;
  double far;
  double frr;
  double eer;
};

/// Quadratic reference: rates recounted from scratch at every distinct score,
/// lowest-threshold winner on ties, midpoint to the next distinct score.
inline EerOracle brute_force_eer(const std::vector<ScoreRecord>& scores) {
  std::vector<double> values;
  double n_bona = 0, n_attack = 0;
  for (const auto& r : scores) {
    values.push_back(r.score);
    (r.label == Label::bona_fide ? n_bona : n_attack) += 1;
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  EerOracle best{0, 0, 0, 0};
  double best_gap = 1e300;
  for (std::size_t k = 0; k < values.size(); ++k) {
    double fa = 0, fr = 0;
    for (const auto& r : scores) {
      if (r.label == Label::attack && r.score > values[k]) fa += 1;
      if (r.label == Label::bona_fide && r.score <= values[k]) fr += 1;
    }
    const double far = 100.0 * fa / n_attack, frr = 100.0 * fr / n_bona;
    if (std::abs(far - frr) < best_gap) {
      best_gap = std::abs(far - frr);
      const double t = k + 1 < values.size() ? (values[k] + values[k + 1]) / 2.0 : values[k];
      best = {t, far, frr, (far + frr) / 2.0};
    }
  }
  return best;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace padkit::testing

#endif  // PADKIT_TESTS_HELPERS_HPP
