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

#include <doctest.h>

#include "helpers.hpp"
#include "padkit/patcher.hpp"

using namespace padkit;
using padkit::testing::random_face;

namespace {

std::vector<PatchGrid> pool_of(std::initializer_list<std::pair<const char*, Label>> faces, std::uint64_t seed = 1) {
  std::vector<PatchGrid> pool;
  for (const auto& [id, label] : faces) pool.push_back(decompose(random_face(id, label, seed++)));
  return pool;
}

// Independent 2x nearest-neighbour upsampling of a 7x7 0/1 grid.
LabelMap upsample(const std::array<int, 49>& grid) {
  LabelMap m;
  for (int y = 0; y < 14; ++y) {
    for (int x = 0; x < 14; ++x) m.values[static_cast<std::size_t>(y * 14 + x)] = static_cast<std::uint8_t>(grid[(y / 2) * 7 + x / 2]);
  }
  return m;
}

bool slot_matches_source(const StitchedSample& s, std::span<const PatchGrid> pool, int r, int c) {
  const PatchRef& ref = s.provenance[static_cast<std::size_t>(r * 7 + c)];
  for (const auto& g : pool) {
    if (g.refs[0].source_sample_id != ref.source_sample_id) continue;
    const Image& patch = g.patch(ref.grid_row, ref.grid_col);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          if (s.pixels.at(r * 32 + y, c * 32 + x, ch) != patch.at(y, x, ch)) return false;
        }
      }
    }
    return g.refs[0].label == ref.label;
  }
  return false;
}

}  // namespace

TEST_SUITE("patcher") {
  TEST_CASE("decompose gives 49 patches of 32x32") {
    const AlignedFace face = random_face("f", Label::bona_fide, 3);
    const PatchGrid g = decompose(face);
    REQUIRE(g.patches.size() == 49);
    for (const auto& p : g.patches) {
      CHECK(p.height == 32);
      CHECK(p.width == 32);
      CHECK(p.channels == 3);
    }
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) CHECK(g.patch(0, 0).at(y, x, 1) == face.pixels.at(y, x, 1));
    }
    CHECK(g.patch(3, 5).at(7, 9, 2) == face.pixels.at(3 * 32 + 7, 5 * 32 + 9, 2));
    CHECK(g.refs[10] == PatchRef{"f", 1, 3, Label::bona_fide});
    CHECK(reassemble(g) == face.pixels);
  }

  TEST_CASE("decompose rejects other sizes") {
    AlignedFace face;
    face.pixels = Image(200, 200, 3);
    CHECK_THROWS_AS(decompose(face), PatcherError);
  }

  TEST_CASE("make_label_map examples") {
    Provenance prov;
    for (auto& r : prov) r.label = Label::bona_fide;
    CHECK(make_label_map(prov).values == LabelMap{[] {
            std::array<std::uint8_t, 196> a{};
            a.fill(1);
            return a;
          }()}.values);
    prov[0].label = Label::attack;
    const LabelMap one = make_label_map(prov);
    for (int y = 0; y < 14; ++y) {
      for (int x = 0; x < 14; ++x) CHECK(one.at(y, x) == ((y < 2 && x < 2) ? 0 : 1));
    }
    std::array<int, 49> checker{};
    for (int i = 0; i < 49; ++i) {
      checker[static_cast<std::size_t>(i)] = (i / 7 + i % 7) % 2;
      prov[static_cast<std::size_t>(i)].label = checker[static_cast<std::size_t>(i)] ? Label::bona_fide : Label::attack;
    }
    CHECK(make_label_map(prov) == upsample(checker));
  }

  TEST_CASE("block constancy detector") {
    LabelMap m;
    CHECK(is_block_constant(m));
    m.values[1] = 1;
    CHECK_FALSE(is_block_constant(m));
  }

  TEST_CASE("random stitching from a single bona fide face") {
    const auto pool = pool_of({{"a", Label::bona_fide}});
    Rng rng(3);
    const auto s = stitch_random(pool, rng, StitchPolicy{1.0});
    for (auto v : s.label_map.values) CHECK(v == 1);
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 7; ++c) CHECK(slot_matches_source(s, pool, r, c));
    }
  }

  TEST_CASE("random stitching class mix follows the policy") {
    const auto pool = pool_of({{"a", Label::bona_fide}, {"b", Label::attack}, {"c", Label::attack}});
    Rng rng(42);
    std::size_t bona = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto s = stitch_random(pool, rng, StitchPolicy{0.5});
      for (const auto& ref : s.provenance) bona += ref.label == Label::bona_fide;
    }
    const double frac = static_cast<double>(bona) / (1000.0 * 49.0);
    CHECK(frac >= 0.47);
    CHECK(frac <= 0.53);
  }

  TEST_CASE("random stitching draws positions uniformly") {
    const auto pool = pool_of({{"a", Label::bona_fide}, {"b", Label::attack}});
    Rng rng(8);
    std::array<int, 49> hits{};
    int moved = 0;
    for (int i = 0; i < 400; ++i) {
      const auto s = stitch_random(pool, rng, StitchPolicy{});
      for (int k = 0; k < 49; ++k) {
        const auto& ref = s.provenance[static_cast<std::size_t>(k)];
        ++hits[static_cast<std::size_t>(ref.grid_row * 7 + ref.grid_col)];
        moved += (ref.grid_row * 7 + ref.grid_col) != k;
      }
    }
    for (int h : hits) {
      CHECK(h > 250);
      CHECK(h < 550);
    }
    CHECK(moved > 400 * 40);
  }

  TEST_CASE("stitching is deterministic") {
    const auto pool = pool_of({{"a", Label::bona_fide}, {"b", Label::attack}});
    for (auto strategy : {StitchStrategy::random, StitchStrategy::controlled}) {
      Rng r1(99), r2(99);
      CHECK(stitch(strategy, pool, r1, {}) == stitch(strategy, pool, r2, {}));
    }
  }

  TEST_CASE("controlled stitching preserves positions") {
    const auto single = pool_of({{"a", Label::attack}});
    Rng rng(1);
    const auto s = stitch_controlled(single, rng, StitchPolicy{0.0});
    CHECK(s.pixels == reassemble(single[0]));
    for (auto v : s.label_map.values) CHECK(v == 0);

    const auto pool = pool_of({{"a", Label::bona_fide}, {"b", Label::attack}});
    for (int i = 0; i < 20; ++i) {
      const auto t = stitch_controlled(pool, rng, {});
      for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 7; ++c) {
          const auto& ref = t.provenance[static_cast<std::size_t>(r * 7 + c)];
          CHECK(ref.grid_row == r);
          CHECK(ref.grid_col == c);
          CHECK(slot_matches_source(t, pool, r, c));
        }
      }
      CHECK(t.label_map == make_label_map(t.provenance));
    }
  }

  TEST_CASE("single-source pool reproduces the face with both strategies") {
    const auto pool = pool_of({{"a", Label::bona_fide}});
    Rng rng(4);
    CHECK(stitch_controlled(pool, rng, StitchPolicy{1.0}).pixels == reassemble(pool[0]));
    CHECK(unstitched(pool[0]).pixels == reassemble(pool[0]));
    CHECK(unstitched(pool[0]).provenance == pool[0].refs);
  }

  TEST_CASE("stitching errors") {
    const std::vector<PatchGrid> empty;
    Rng rng(1);
    CHECK_THROWS_AS(stitch_random(empty, rng, {}), PatcherError);
    const auto bona_only = pool_of({{"a", Label::bona_fide}});
    CHECK_THROWS_AS(stitch_random(bona_only, rng, StitchPolicy{0.5}), PatcherError);
    CHECK_THROWS_AS(stitch_controlled(bona_only, rng, StitchPolicy{0.0}), PatcherError);
    CHECK_THROWS_AS(stitch_random(bona_only, rng, StitchPolicy{1.5}), PatcherError);
    CHECK(parse_stitch_strategy("controlled") == StitchStrategy::controlled);
    CHECK_THROWS_AS(parse_stitch_strategy("shuffle"), PatcherError);
  }

  TEST_CASE("flip is a joint involution") {
    const auto pool = pool_of({{"a", Label::bona_fide}, {"b", Label::attack}});
    Rng rng(12);
    const auto s = stitch_random(pool, rng, {});
    auto f = s;
    flip_horizontal(f);
    CHECK(f.mirrored);
    CHECK(f.label_map == make_label_map(f.provenance));
    for (int r = 0; r < 14; ++r) {
      for (int c = 0; c < 14; ++c) CHECK(f.label_map.at(r, c) == s.label_map.at(r, 13 - c));
    }
    CHECK(f.pixels.at(5, 0, 0) == s.pixels.at(5, 223, 0));
    flip_horizontal(f);
    CHECK(f == s);
  }

  TEST_CASE("flip moves an attack patch from (0,0) to (0,6)") {
    const auto pool = pool_of({{"a", Label::bona_fide}});
    auto s = unstitched(pool[0]);
    s.provenance[0].label = Label::attack;
    s.label_map = make_label_map(s.provenance);
    flip_horizontal(s);
    CHECK(s.provenance[6].label == Label::attack);
    for (int r = 0; r < 14; ++r) {
      for (int c = 0; c < 14; ++c) CHECK(s.label_map.at(r, c) == ((r < 2 && c >= 12) ? 0 : 1));
    }
  }

  TEST_CASE("color jitter") {
    const auto pool = pool_of({{"a", Label::bona_fide}, {"b", Label::attack}});
    Rng rng(3);
    const auto s = stitch_random(pool, rng, {});
    AugmentConfig none{0.0, 0.0, 0.0, 0.0};
    Rng j(1);
    CHECK(augment(s, j, none) == s);

    AugmentConfig strong{0.0, 0.9, 0.9, 0.9};
    const auto t = augment(s, j, strong);
    CHECK(t.label_map == s.label_map);
    CHECK(t.provenance == s.provenance);
    CHECK(t.pixels != s.pixels);
    for (float v : t.pixels.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    CHECK_THROWS_AS(validate(AugmentConfig{0.5, 1.2, 0.0, 0.0}), PatcherError);
    CHECK_THROWS_AS(validate(AugmentConfig{-0.1, 0.0, 0.0, 0.0}), PatcherError);
  }

  TEST_CASE("brightness alone scales pixels") {
    Image img(2, 2, 3, 0.5f);
    Rng a(5), b(5);
    color_jitter(img, a, AugmentConfig{0.0, 0.4, 0.0, 0.0});
    const double factor = b.uniform(0.6, 1.4);
    CHECK(img.at(1, 1, 2) == doctest::Approx(std::min(1.0, 0.5 * factor)).epsilon(1e-6));
  }

  TEST_CASE("augment with certain flip always mirrors") {
    const auto pool = pool_of({{"a", Label::bona_fide}});
    const auto s = unstitched(pool[0]);
    Rng rng(2);
    const auto f = augment(s, rng, AugmentConfig{1.0, 0.0, 0.0, 0.0});
    CHECK(f.mirrored);
    auto g = s;
    flip_horizontal(g);
    CHECK(f == g);
  }
}
