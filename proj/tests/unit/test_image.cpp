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

#include <cstring>

#include "helpers.hpp"
#include "padkit/image.hpp"

using namespace padkit;
using padkit::testing::TempDir;

TEST_SUITE("image") {
  TEST_CASE("fnv1a64 reference vectors") {
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
    const char* a = "a";
    CHECK(fnv1a64(std::as_bytes(std::span(a, 1))) == 0xaf63dc4c8601ec8cULL);
    const char* foobar = "foobar";
    CHECK(fnv1a64(std::as_bytes(std::span(foobar, 6))) == 0x85944171f73967e8ULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
  }

  TEST_CASE("png round trip is exact after quantization") {
    TempDir dir("image");
    const Image img = padkit::testing::random_image(17, 23, 3);
    write_png(dir / "a.png", img);
    const Image back = read_png(dir / "a.png");
    CHECK(back.height == 17);
    CHECK(back.width == 23);
    CHECK(back == quantize8(img));
    // Identical content gives identical bytes (no timestamps).
    write_png(dir / "b.png", img);
    CHECK(hash_file(dir / "a.png") == hash_file(dir / "b.png"));
  }

  TEST_CASE("grayscale png is read as rgb") {
    TempDir dir("image_gray");
    Image g(4, 5, 1, 1.0f);
    g.at(0, 0, 0) = 0.0f;
    write_png(dir / "g.png", g);
    const Image back = read_png(dir / "g.png");
    CHECK(back.channels == 3);
    CHECK(back.at(0, 0, 2) == 0.0f);
    CHECK(back.at(3, 4, 1) == 1.0f);
  }

  TEST_CASE("missing and corrupt files") {
    TempDir dir("image_bad");
    CHECK_THROWS_AS(read_png(dir / "nope.png"), ImageIoError);
    {
      std::ofstream out(dir / "bad.png");
      out << "not a png";
    }
    CHECK_THROWS_AS(read_png(dir / "bad.png"), ImageIoError);
    CHECK_THROWS_AS(hash_file(dir / "nope.png"), Error);
  }
}
