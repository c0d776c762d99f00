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
 * @file patcher.hpp
 * @brief Patch grids, stitched composites and their 14x14 label maps.
 *
 * An aligned 224x224 face is cut into a 7x7 grid of 32x32 patches. Stitching
 * fills the 49 slots of a new image with patches taken from a pool of grids;
 * the patch in slot (r, c) owns the 2x2 block at (2r, 2c) of the label map,
 * which is 1 for bona fide sources and 0 for attack sources.
 */

#ifndef PADKIT_PATCHER_HPP
#define PADKIT_PATCHER_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "padkit/common.hpp"
#include "padkit/image.hpp"
#include "padkit/ingest.hpp"
#include "padkit/rng.hpp"

namespace padkit {

inline constexpr int kSlots = kGridSize * kGridSize;

struct PatchRef {
  std::string source_sample_id;
  int grid_row = 0;
  int grid_col = 0;
  Label label = Label::bona_fide;

  bool operator==(const PatchRef&) const = default;
};

/// Row-major 7x7 array of patch references.
using Provenance = std::array<PatchRef, kSlots>;

struct PatchGrid {
  std::vector<Image> patches;  // kSlots entries, row-major
  Provenance refs;

  const Image& patch(int row, int col) const { return patches[static_cast<std::size_t>(row * kGridSize + col)]; }
  Label label() const { return refs[0].label; }
};

struct LabelMap {
  std::array<std::uint8_t, kMapSize * kMapSize> values{};

  std::uint8_t at(int row, int col) const { return values[static_cast<std::size_t>(row * kMapSize + col)]; }
  std::uint8_t& at(int row, int col) { return values[static_cast<std::size_t>(row * kMapSize + col)]; }
  bool operator==(const LabelMap&) const = default;
};

struct StitchedSample {
  Image pixels;
  LabelMap label_map;
  Provenance provenance;
  /// Set after an odd number of horizontal flips: every slot then holds the
  /// mirror image of the patch its provenance names.
  bool mirrored = false;

  bool operator==(const StitchedSample&) const = default;
};

enum class StitchStrategy : std::uint8_t { random, controlled };

std::string_view to_string(StitchStrategy strategy);
StitchStrategy parse_stitch_strategy(std::string_view text);

struct StitchPolicy {
  /// Per-slot probability of drawing from the bona fide part of the pool.
  double bona_fide_fraction = 0.5;
};

struct AugmentConfig {
  double flip_probability = 0.5;
  // Jitter factors are drawn from [1 - r, 1 + r]; each r must lie in [0, 1].
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;
};

class PatcherError : public Error {
 public:
  using Error::Error;
};

PatchGrid decompose(const AlignedFace& face);
Image reassemble(const PatchGrid& grid);

StitchedSample stitch_random(std::span<const PatchGrid> pool, Rng& rng, const StitchPolicy& policy);
StitchedSample stitch_controlled(std::span<const PatchGrid> pool, Rng& rng, const StitchPolicy& policy);
StitchedSample stitch(StitchStrategy strategy, std::span<const PatchGrid> pool, Rng& rng, const StitchPolicy& policy);

/// A face kept whole: pixels as-is, provenance in original positions.
StitchedSample unstitched(const PatchGrid& grid);

LabelMap make_label_map(const Provenance& provenance);
/// True when every 2x2 block at even offsets is constant.
bool is_block_constant(const LabelMap& map);

void validate(const AugmentConfig& config);
/// Mirrors pixels, label-map columns and provenance columns together.
void flip_horizontal(StitchedSample& sample);
/// Brightness, contrast, then saturation; results clamped to [0, 1].
void color_jitter(Image& pixels, Rng& rng, const AugmentConfig& config);
StitchedSample augment(StitchedSample sample, Rng& rng, const AugmentConfig& config);
/// Source-stage variant: flip and jitter an aligned face before decomposition.
AlignedFace augment_face(AlignedFace face, Rng& rng, const AugmentConfig& config);

}  // namespace padkit

#endif  // PADKIT_PATCHER_HPP
