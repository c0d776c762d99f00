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
 * @file ingest.hpp
 * @brief Dataset manifests, eye-based face alignment and protocol splits.
 *
 * Faces are never detected here: every record carries its eye landmarks in
 * source-image pixel coordinates, and frames are fetched through a
 * FrameSource keyed by (media_path, frame_index).
 */

#ifndef PADKIT_INGEST_HPP
#define PADKIT_INGEST_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "padkit/common.hpp"
#include "padkit/image.hpp"

namespace padkit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

enum class Split : std::uint8_t { train, dev, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SampleRecord {
  std::string sample_id;
  std::string media_path;
  int frame_index = 0;
  std::string subject_id;
  Label label = Label::bona_fide;
  std::string pai{kBonaFidePai};
  Split split = Split::train;
  std::optional<int> fold_id;
  Point2 left_eye;
  Point2 right_eye;
};

struct DatasetManifest {
  std::string dataset_name;
  std::vector<SampleRecord> records;
  /// Distinct attack PAI tags in order of first appearance.
  std::vector<std::string> pai_vocabulary;
};

/// Raised for any manifest problem; line() is the 1-based CSV line or 0.
class ManifestError : public Error {
 public:
  ManifestError(const std::string& what, int line = 0);
  int line() const { return line_; }

 private:
  int line_;
};

inline constexpr std::string_view kManifestHeader =
    "sample_id,media_path,frame_index,subject_id,label,pai,split,fold_id,"
    "left_eye_x,left_eye_y,right_eye_x,right_eye_y";

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::istream& in, std::string dataset_name);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
/// Checks every DatasetManifest invariant; throws ManifestError.
void validate_manifest(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Alignment

struct AlignConfig {
  Point2 left_eye{67.0, 92.0};
  Point2 right_eye{157.0, 92.0};
  int size = kFaceSize;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

struct AlignedFace {
  Image pixels;
  Label label = Label::bona_fide;
  std::string pai{kBonaFidePai};
  std::string subject_id;
  std::string sample_id;
};

/// Warps `image` with the similarity transform that takes the given eye
/// centers onto the canonical ones. Bilinear sampling; samples outside the
/// source are zero.
Image align_face(const Image& image, Point2 left_eye, Point2 right_eye, const AlignConfig& config = {});

// ---------------------------------------------------------------------------
// Frame extraction

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual Image load(const SampleRecord& record) const = 0;
};

/// media_path is either a PNG still (frame_index must be 0) or a directory
/// of PNG frames, indexed in lexicographic file-name order. Relative paths
/// resolve against `root`.
class ImageDirectorySource final : public FrameSource {
 public:
  explicit ImageDirectorySource(std::filesystem::path root) : root_(std::move(root)) {}
  Image load(const SampleRecord& record) const override;

 private:
  std::filesystem::path root_;
};

AlignedFace align_record(const FrameSource& source, const SampleRecord& record, const AlignConfig& config = {});

// ---------------------------------------------------------------------------
// Protocols

/// Column -> accepted values. An empty selector accepts everything.
struct Selector {
  std::map<std::string, std::vector<std::string>> accepted;
  bool matches(const SampleRecord& record) const;
};

struct ProtocolSpec {
  std::string name;
  Selector train;
  Selector dev;
  Selector test;
  /// When set, one split set per distinct fold_id: that fold is the test set
  /// and is excluded from train/dev.
  bool leave_one_out = false;
  /// Keep at most this many frames per media_path (lowest frame_index first).
  std::optional<int> frames_per_video;
};

struct ProtocolConfig {
  std::map<std::string, ProtocolSpec> protocols;

  /// JSON object: protocol name -> {train?, dev?, test?, leave_one_out?,
  /// frames_per_video?}. A missing role selector defaults to {"split": [role]}.
  static ProtocolConfig from_json(const std::string& text);
  static ProtocolConfig load(const std::filesystem::path& path);
  /// A single "grandtest" protocol that passes the split column through.
  static ProtocolConfig grandtest();
  std::string to_json() const;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

struct SplitSet {
  std::optional<int> fold;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> dev;
  std::vector<SampleRecord> test;
};

/// One SplitSet, or one per fold for leave-one-out protocols. Roles are
/// pairwise disjoint; a record matched by two roles is an error.
std::vector<SplitSet> split_protocol(const DatasetManifest& manifest, const std::string& protocol_name,
                                     const ProtocolConfig& config);

}  // namespace padkit

#endif  // PADKIT_INGEST_HPP
