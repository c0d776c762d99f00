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

#include <set>

#include "padkit/common.hpp"
#include "padkit/rng.hpp"

using namespace padkit;

TEST_SUITE("common") {
  TEST_CASE("label round trip") {
    CHECK(parse_label("bona_fide") == Label::bona_fide);
    CHECK(parse_label("attack") == Label::attack);
    CHECK(to_string(Label::attack) == "attack");
    CHECK_THROWS_AS(parse_label("spoof"), Error);
  }

  TEST_CASE("geometry constants") {
    CHECK(kPatchSize == 32);
    CHECK(kGridSize * kGridSize == 49);
    CHECK(kCellsPerPatch == 2);
  }

  TEST_CASE("derived seeds differ by path and are stable") {
    const auto a = derive_seed(7, {kStreamStitch, 0, 1});
    CHECK(a == derive_seed(7, {kStreamStitch, 0, 1}));
    CHECK(a != derive_seed(7, {kStreamStitch, 1, 0}));
    CHECK(a != derive_seed(8, {kStreamStitch, 0, 1}));
    CHECK(derive_seed(7, {}) != derive_seed(7, {0}));
  }

  TEST_CASE("rng helpers") {
    Rng rng(123);
    Rng same(123);
    for (int i = 0; i < 100; ++i) CHECK(rng.next_u64() == same.next_u64());

    Rng r(5);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto v = r.below(7);
      CHECK(v < 7);
      seen.insert(v);
      const double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
    CHECK(seen.size() == 7);
    CHECK_FALSE(r.bernoulli(0.0));
    CHECK(r.bernoulli(1.0));

    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
  }
}
