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

#ifndef PADKIT_IMAGE_HPP
#define PADKIT_IMAGE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "padkit/common.hpp"

namespace padkit {

/// Interleaved (HWC) float image. Channel values are nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = kChannels;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c = kChannels, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool empty() const { return data.empty(); }
  bool operator==(const Image&) const = default;
};

class ImageIoError : public Error {
 public:
  using Error::Error;
};

/// Reads any 8/16-bit PNG and converts it to RGB floats in [0, 1].
Image read_png(const std::filesystem::path& path);

/// Writes an 8-bit RGB (channels == 3) or gray (channels == 1) PNG. Values are
/// clamped to [0, 1] and rounded to the nearest level. No time chunk is
/// emitted, so identical pixels produce identical files.
void write_png(const std::filesystem::path& path, const Image& image);

/// Quantizes to 8 bits and back; what a write_png/read_png round trip yields.
Image quantize8(const Image& image);

/// 64-bit FNV-1a, used for artifact fingerprints in run metadata.
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace padkit

#endif  // PADKIT_IMAGE_HPP
