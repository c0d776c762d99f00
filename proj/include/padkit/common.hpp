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

#ifndef PADKIT_COMMON_HPP
#define PADKIT_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace padkit {

// Geometry shared by every stage of the pipeline.
inline constexpr int kFaceSize = 224;
inline constexpr int kGridSize = 7;
inline constexpr int kPatchSize = kFaceSize / kGridSize;  // 32
inline constexpr int kMapSize = 14;
inline constexpr int kCellsPerPatch = kMapSize / kGridSize;  // 2
inline constexpr int kChannels = 3;

enum class Label : std::uint8_t { bona_fide, attack };

/// PAI tag carried by every bona fide record.
inline constexpr std::string_view kBonaFidePai = "none";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view to_string(Label label);
/// Throws Error for anything other than "bona_fide" / "attack".
Label parse_label(std::string_view text);

}  // namespace padkit

#endif  // PADKIT_COMMON_HPP
