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
 * @file synthdata.hpp
 * @brief Deterministic synthetic face-PAD corpus.
 *
 * Bona fide frames are a smooth per-subject blob pattern plus pixel noise.
 * Attack frames add a period-2 texture of amplitude texture_strength over the
 * whole face (checkerboard for even PAI indices, vertical stripes for odd),
 * so every 32x32 patch carries the class cue. Eyes sit at the canonical
 * alignment points, making alignment an identity warp.
 *
 * Layout: out_dir/<subject>/<sample_id>.png plus out_dir/manifest.csv.
 */

#ifndef PADKIT_SYNTHDATA_HPP
#define PADKIT_SYNTHDATA_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "padkit/image.hpp"
#include "padkit/ingest.hpp"

namespace padkit {

struct SynthConfig {
  int n_subjects = 20;
  /// Frames per subject for each presentation type (bona fide and every PAI).
  int frames_per_subject = 4;
  std::vector<std::string> attack_pais{"print", "replay"};
  double texture_strength = 0.3;
  /// Domain B offset: illumination +0.2 * domain_shift and a zero-mean
  /// background wave of amplitude 0.1 * domain_shift.
  double domain_shift = 0.0;
  double noise_sigma = 0.02;
  int n_folds = 5;
  std::uint64_t seed = 7;
  std::filesystem::path out_dir;

  void validate() const;
};

class SynthError : public Error {
 public:
  using Error::Error;
};

struct SynthSampleSpec {
  int subject = 0;
  int frame = 0;
  Label label = Label::bona_fide;
  int pai_index = -1;  // index into attack_pais for attacks
  int domain = 0;      // 0 = A, 1 = B
};

/// Pure rendering of one frame, values in [0, 1] (not yet quantized).
Image render_sample(const SynthConfig& config, const SynthSampleSpec& spec);

/// Split of a subject index: first 60% train, next 20% dev, rest test, with
/// at least one subject in each.
Split synth_split(int subject, int n_subjects);
std::string synth_subject_id(int subject);

/// Writes images and manifest.csv under config.out_dir (domain A law).
DatasetManifest generate(const SynthConfig& config);

struct SynthPair {
  DatasetManifest a;
  DatasetManifest b;
  std::filesystem::path a_dir;
  std::filesystem::path b_dir;
};

/// Writes out_dir/A and out_dir/B; B carries the domain shift.
SynthPair generate_pair(const SynthConfig& config);

}  // namespace padkit

#endif  // PADKIT_SYNTHDATA_HPP
