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

#include "padkit/patcher.hpp"

#include <algorithm>
#include <cstring>

namespace padkit {

std::string_view to_string(StitchStrategy strategy) {
  return strategy == StitchStrategy::random ? "random" : "controlled";
}

StitchStrategy parse_stitch_strategy(std::string_view text) {
  if (text == "random") return StitchStrategy::random;
  if (text == "controlled") return StitchStrategy::controlled;
  throw PatcherError("unknown stitch strategy '" + std::string(text) + "' (expected random or controlled)");
}

namespace {

void copy_block(const Image& src, int sy, int sx, Image& dst, int dy, int dx, int size) {
  const std::size_t row_len = static_cast<std::size_t>(size) * kChannels;
  for (int y = 0; y < size; ++y) {
    const std::size_t from = (static_cast<std::size_t>(sy + y) * src.width + sx) * kChannels;
    std::memcpy(&dst.at(dy + y, dx, 0), src.data.data() + from, row_len * sizeof(float));
  }
}

void check_face(const Image& pixels) {
  if (pixels.height != kFaceSize || pixels.width != kFaceSize || pixels.channels != kChannels) {
    throw PatcherError("expected a " + std::to_string(kFaceSize) + "x" + std::to_string(kFaceSize) +
                       "x3 face, got " + std::to_string(pixels.height) + "x" + std::to_string(pixels.width) + "x" +
                       std::to_string(pixels.channels));
  }
}

struct ClassIndex {
  std::vector<std::size_t> bona_fide;
  std::vector<std::size_t> attack;
};

ClassIndex index_pool(std::span<const PatchGrid> pool, const StitchPolicy& policy) {
  if (pool.empty()) throw PatcherError("stitching needs a nonempty pool");
  if (!(policy.bona_fide_fraction >= 0.0 && policy.bona_fide_fraction <= 1.0)) {
    throw PatcherError("bona_fide_fraction must lie in [0, 1]");
  }
  ClassIndex idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].patches.size() != static_cast<std::size_t>(kSlots)) throw PatcherError("malformed patch grid");
    (pool[i].label() == Label::bona_fide ? idx.bona_fide : idx.attack).push_back(i);
  }
  if (policy.bona_fide_fraction > 0.0 && idx.bona_fide.empty()) {
    throw PatcherError("policy asks for bona fide patches but the pool has none");
  }
  if (policy.bona_fide_fraction < 1.0 && idx.attack.empty()) {
    throw PatcherError("policy asks for attack patches but the pool has none");
  }
  return idx;
}

template <typename PickSource>
StitchedSample fill_slots(std::span<const PatchGrid> pool, Rng& rng, const StitchPolicy& policy,
                          PickSource&& pick) {
  const ClassIndex idx = index_pool(pool, policy);
  StitchedSample out;
  out.pixels = Image(kFaceSize, kFaceSize, kChannels);
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      const bool bona = rng.bernoulli(policy.bona_fide_fraction);
      const auto& members = bona ? idx.bona_fide : idx.attack;
      const auto [grid_index, slot] = pick(rng, members, r * kGridSize + c);
      const PatchGrid& grid = pool[grid_index];
      copy_block(grid.patches[static_cast<std::size_t>(slot)], 0, 0, out.pixels, r * kPatchSize, c * kPatchSize,
                 kPatchSize);
      out.provenance[static_cast<std::size_t>(r * kGridSize + c)] = grid.refs[static_cast<std::size_t>(slot)];
    }
  }
  out.label_map = make_label_map(out.provenance);
  return out;
}

}  // namespace

PatchGrid decompose(const AlignedFace& face) {
  check_face(face.pixels);
  PatchGrid grid;
  grid.patches.reserve(kSlots);
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      Image patch(kPatchSize, kPatchSize, kChannels);
      copy_block(face.pixels, r * kPatchSize, c * kPatchSize, patch, 0, 0, kPatchSize);
      grid.patches.push_back(std::move(patch));
      grid.refs[static_cast<std::size_t>(r * kGridSize + c)] = PatchRef{face.sample_id, r, c, face.label};
    }
  }
  return grid;
}

Image reassemble(const PatchGrid& grid) {
  Image out(kFaceSize, kFaceSize, kChannels);
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      copy_block(grid.patch(r, c), 0, 0, out, r * kPatchSize, c * kPatchSize, kPatchSize);
    }
  }
  return out;
}

StitchedSample stitch_random(std::span<const PatchGrid> pool, Rng& rng, const StitchPolicy& policy) {
  return fill_slots(pool, rng, policy, [](Rng& g, const std::vector<std::size_t>& members, int) {
    // Uniform over (source grid, source position) pairs within the class.
    const std::uint64_t pick = g.below(members.size() * kSlots);
    return std::pair{members[pick / kSlots], static_cast<int>(pick % kSlots)};
  });
}

StitchedSample stitch_controlled(std::span<const PatchGrid> pool, Rng& rng, const StitchPolicy& policy) {
  return fill_slots(pool, rng, policy, [](Rng& g, const std::vector<std::size_t>& members, int slot) {
    return std::pair{members[g.below(members.size())], slot};
  });
}

StitchedSample stitch(StitchStrategy strategy, std::span<const PatchGrid> pool, Rng& rng,
                      const StitchPolicy& policy) {
  return strategy == StitchStrategy::random ? stitch_random(pool, rng, policy)
                                            : stitch_controlled(pool, rng, policy);
}

StitchedSample unstitched(const PatchGrid& grid) {
  StitchedSample out;
  out.pixels = reassemble(grid);
  out.provenance = grid.refs;
  out.label_map = make_label_map(out.provenance);
  return out;
}

LabelMap make_label_map(const Provenance& provenance) {
  LabelMap map;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      const std::uint8_t v =
          provenance[static_cast<std::size_t>(r * kGridSize + c)].label == Label::bona_fide ? 1 : 0;
      for (int dy = 0; dy < kCellsPerPatch; ++dy) {
        for (int dx = 0; dx < kCellsPerPatch; ++dx) map.at(r * kCellsPerPatch + dy, c * kCellsPerPatch + dx) = v;
      }
    }
  }
  return map;
}

bool is_block_constant(const LabelMap& map) {
  for (int r = 0; r < kMapSize; r += kCellsPerPatch) {
    for (int c = 0; c < kMapSize; c += kCellsPerPatch) {
      const auto v = map.at(r, c);
      if (v > 1 || map.at(r + 1, c) != v || map.at(r, c + 1) != v || map.at(r + 1, c + 1) != v) return false;
    }
  }
  return true;
}

void validate(const AugmentConfig& config) {
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(config.flip_probability)) throw PatcherError("flip_probability must lie in [0, 1]");
  if (!in_unit(config.brightness) || !in_unit(config.contrast) || !in_unit(config.saturation)) {
    throw PatcherError("jitter ranges must lie in [0, 1]");
  }
}

namespace {

void mirror_pixels(Image& img) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width / 2; ++x) {
      for (int c = 0; c < img.channels; ++c) std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
    }
  }
}

}  // namespace

void flip_horizontal(StitchedSample& sample) {
  mirror_pixels(sample.pixels);
  for (int r = 0; r < kMapSize; ++r) {
    for (int c = 0; c < kMapSize / 2; ++c) std::swap(sample.label_map.at(r, c), sample.label_map.at(r, kMapSize - 1 - c));
  }
  for (int r = 0; r < kGridSize; ++r) {
    auto row = sample.provenance.begin() + r * kGridSize;
    std::reverse(row, row + kGridSize);
  }
  sample.mirrored = !sample.mirrored;
}

void color_jitter(Image& pixels, Rng& rng, const AugmentConfig& config) {
  validate(config);
  const auto factor = [&rng](double range) { return range > 0.0 ? rng.uniform(1.0 - range, 1.0 + range) : 1.0; };
  const double b = factor(config.brightness);
  const double k = factor(config.contrast);
  const double s = factor(config.saturation);
  const std::size_t n = static_cast<std::size_t>(pixels.height) * pixels.width;
  const auto gray = [&](std::size_t i) {
    const float* p = &pixels.data[i * 3];
    return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  };
  const auto clamp01 = [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); };

  if (b != 1.0) {
    for (float& v : pixels.data) v = clamp01(v * b);
  }
  if (k != 1.0) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += gray(i);
    mean /= static_cast<double>(n);
    for (float& v : pixels.data) v = clamp01(mean + k * (v - mean));
  }
  if (s != 1.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = gray(i);
      for (int c = 0; c < 3; ++c) {
        float& v = pixels.data[i * 3 + static_cast<std::size_t>(c)];
        v = clamp01(g + s * (v - g));
      }
    }
  }
}

StitchedSample augment(StitchedSample sample, Rng& rng, const AugmentConfig& config) {
  validate(config);
  if (rng.bernoulli(config.flip_probability)) flip_horizontal(sample);
  color_jitter(sample.pixels, rng, config);
  return sample;
}

AlignedFace augment_face(AlignedFace face, Rng& rng, const AugmentConfig& config) {
  validate(config);
  if (rng.bernoulli(config.flip_probability)) mirror_pixels(face.pixels);
  color_jitter(face.pixels, rng, config);
  return face;
}

}  // namespace padkit
