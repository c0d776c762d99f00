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

#include "padkit/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "padkit/rng.hpp"

namespace padkit {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (n_subjects < 3) throw SynthError("n_subjects must be at least 3 (train, dev and test need a subject each)");
  if (frames_per_subject <= 0) throw SynthError("frames_per_subject must be positive");
  if (attack_pais.empty()) throw SynthError("attack_pais must be nonempty");
  for (const auto& p : attack_pais) {
    if (p.empty() || p == kBonaFidePai || p.find(',') != std::string::npos) {
      throw SynthError("invalid attack PAI name '" + p + "'");
    }
  }
  if (!(texture_strength >= 0.0) || !std::isfinite(texture_strength)) {
    throw SynthError("texture_strength must be finite and nonnegative");
  }
  if (!(domain_shift >= 0.0) || !std::isfinite(domain_shift)) throw SynthError("domain_shift must be finite and nonnegative");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw SynthError("noise_sigma must be finite and nonnegative");
  if (n_folds <= 0) throw SynthError("n_folds must be positive");
}

Split synth_split(int subject, int n_subjects) {
  const int n_train = std::min(static_cast<int>(std::lround(0.6 * n_subjects)), n_subjects - 2);
  const int n_dev = std::max(1, std::min(static_cast<int>(std::lround(0.2 * n_subjects)), n_subjects - n_train - 1));
  if (subject < n_train) return Split::train;
  if (subject < n_train + n_dev) return Split::dev;
  return Split::test;
}

std::string synth_subject_id(int subject) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%03d", subject);
  return buf;
}

namespace {

struct Blob {
  double cx, cy, sigma;
  double color[3];
};

struct SubjectLaw {
  std::vector<Blob> blobs;
  double base[3];
  double phase;
};

SubjectLaw subject_law(const SynthConfig& config, int subject, int domain) {
  Rng rng(derive_seed(config.seed, {kStreamSynth, static_cast<std::uint64_t>(domain),
                                    static_cast<std::uint64_t>(subject), 0}));
  SubjectLaw law;
  for (double& b : law.base) b = rng.uniform(0.30, 0.40);
  const int n_blobs = 3 + static_cast<int>(rng.below(3));
  for (int i = 0; i < n_blobs; ++i) {
    Blob b{rng.uniform(40.0, 184.0), rng.uniform(40.0, 184.0), rng.uniform(18.0, 45.0), {}};
    for (double& c : b.color) c = rng.uniform(0.0, 0.2);
    law.blobs.push_back(b);
  }
  law.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return law;
}

}  // namespace

Image render_sample(const SynthConfig& config, const SynthSampleSpec& spec) {
  const SubjectLaw law = subject_law(config, spec.subject, spec.domain);
  const std::uint64_t kind = spec.label == Label::bona_fide ? 0 : 1 + static_cast<std::uint64_t>(spec.pai_index);
  Rng rng(derive_seed(config.seed, {kStreamSynth, static_cast<std::uint64_t>(spec.domain),
                                    static_cast<std::uint64_t>(spec.subject), 1 + kind,
                                    static_cast<std::uint64_t>(spec.frame)}));
  const double dx = rng.uniform(-4.0, 4.0);
  const double dy = rng.uniform(-4.0, 4.0);
  const double gain = rng.uniform(-0.02, 0.02);
  const double offset = spec.domain == 1 ? 0.2 * config.domain_shift : 0.0;
  const double wave = spec.domain == 1 ? 0.1 * config.domain_shift : 0.0;
  const double amp = spec.label == Label::attack ? config.texture_strength / 2.0 : 0.0;
  const bool checker = spec.pai_index % 2 == 0;

  Image img(kFaceSize, kFaceSize, kChannels);
  for (int y = 0; y < kFaceSize; ++y) {
    for (int x = 0; x < kFaceSize; ++x) {
      double field[3] = {law.base[0], law.base[1], law.base[2]};
      for (const auto& b : law.blobs) {
        const double rx = x - (b.cx + dx), ry = y - (b.cy + dy);
        const double g = std::exp(-(rx * rx + ry * ry) / (2.0 * b.sigma * b.sigma));
        for (int c = 0; c < 3; ++c) field[c] += b.color[c] * g;
      }
      const double shift =
          offset + wave * std::sin(2.0 * std::numbers::pi * x / 56.0 + law.phase) *
                       std::cos(2.0 * std::numbers::pi * y / 56.0);
      double texture = 0.0;
      if (amp > 0.0) {
        const int parity = checker ? (x + y) % 2 : x % 2;
        texture = parity == 0 ? amp : -amp;
      }
      for (int c = 0; c < 3; ++c) {
        const double v = std::min(field[c], 0.65) + gain + shift + texture + config.noise_sigma * rng.normal();
        img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

namespace {

DatasetManifest generate_domain(const SynthConfig& config, const fs::path& out_dir, int domain,
                                const std::string& dataset_name) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw SynthError("cannot create output directory '" + out_dir.string() + "'");

  DatasetManifest manifest;
  manifest.dataset_name = dataset_name;
  manifest.pai_vocabulary = config.attack_pais;
  const AlignConfig canonical;
  for (int s = 0; s < config.n_subjects; ++s) {
    const std::string subject = synth_subject_id(s);
    fs::create_directories(out_dir / subject);
    for (int kind = 0; kind <= static_cast<int>(config.attack_pais.size()); ++kind) {
      const bool bona = kind == 0;
      const std::string tag = bona ? "bona" : config.attack_pais[static_cast<std::size_t>(kind - 1)];
      for (int f = 0; f < config.frames_per_subject; ++f) {
        SynthSampleSpec spec{s, f, bona ? Label::bona_fide : Label::attack, kind - 1, domain};
        char name[128];
        std::snprintf(name, sizeof(name), "%s_%s_f%02d", subject.c_str(), tag.c_str(), f);
        const std::string rel = subject + "/" + name + ".png";
        try {
          write_png(out_dir / rel, render_sample(config, spec));
        } catch (const ImageIoError& e) {
          throw SynthError(e.what());
        }
        SampleRecord r;
        r.sample_id = name;
        r.media_path = rel;
        r.frame_index = 0;
        r.subject_id = subject;
        r.label = spec.label;
        r.pai = bona ? std::string(kBonaFidePai) : tag;
        r.split = synth_split(s, config.n_subjects);
        r.fold_id = 1 + s % config.n_folds;
        r.left_eye = canonical.left_eye;
        r.right_eye = canonical.right_eye;
        manifest.records.push_back(std::move(r));
      }
    }
  }
  try {
    write_manifest(out_dir / "manifest.csv", manifest);
  } catch (const Error& e) {
    throw SynthError(e.what());
  }
  return manifest;
}

}  // namespace

DatasetManifest generate(const SynthConfig& config) {
  if (config.out_dir.empty()) throw SynthError("out_dir must be set");
  return generate_domain(config, config.out_dir, 0, config.out_dir.filename().string());
}

SynthPair generate_pair(const SynthConfig& config) {
  if (config.out_dir.empty()) throw SynthError("out_dir must be set");
  SynthPair pair;
  pair.a_dir = config.out_dir / "A";
  pair.b_dir = config.out_dir / "B";
  pair.a = generate_domain(config, pair.a_dir, 0, "A");
  pair.b = generate_domain(config, pair.b_dir, 1, "B");
  return pair;
}

}  // namespace padkit
