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

#include "padkit/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace padkit {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "dev") return Split::dev;
  if (text == "test") return Split::test;
  throw Error("unknown split '" + std::string(text) + "' (expected train, dev or test)");
}

ManifestError::ManifestError(const std::string& what, int line)
    : Error(line > 0 ? "manifest line " + std::to_string(line) + ": " + what : what), line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view text, const char* what, int line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ManifestError(std::string("bad ") + what + " '" + std::string(text) + "'", line);
  }
  return value;
}

std::string format_coord(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

DatasetManifest parse_manifest(std::istream& in, std::string dataset_name) {
  DatasetManifest manifest;
  manifest.dataset_name = std::move(dataset_name);
  std::string line;
  int line_no = 0;
  std::unordered_set<std::string> seen;
  if (!std::getline(in, line)) throw ManifestError("manifest is empty");
  ++line_no;
  if (trim(line) != kManifestHeader) {
    throw ManifestError("unexpected header, expected '" + std::string(kManifestHeader) + "'", line_no);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 12) {
      throw ManifestError("expected 12 fields, got " + std::to_string(f.size()), line_no);
    }
    SampleRecord r;
    r.sample_id = f[0];
    r.media_path = f[1];
    if (r.sample_id.empty()) throw ManifestError("empty sample_id", line_no);
    r.frame_index = parse_number<int>(f[2], "frame_index", line_no);
    if (r.frame_index < 0) throw ManifestError("negative frame_index", line_no);
    r.subject_id = f[3];
    try {
      r.label = parse_label(f[4]);
      r.split = parse_split(f[6]);
    } catch (const Error& e) {
      throw ManifestError(std::string(e.what()) + " for sample '" + r.sample_id + "'", line_no);
    }
    r.pai = f[5];
    if (!f[7].empty()) r.fold_id = parse_number<int>(f[7], "fold_id", line_no);
    r.left_eye = {parse_number<double>(f[8], "left_eye_x", line_no),
                  parse_number<double>(f[9], "left_eye_y", line_no)};
    r.right_eye = {parse_number<double>(f[10], "right_eye_x", line_no),
                   parse_number<double>(f[11], "right_eye_y", line_no)};
    if (r.label == Label::bona_fide && r.pai != kBonaFidePai) {
      throw ManifestError("bona fide sample '" + r.sample_id + "' must have pai 'none'", line_no);
    }
    if (r.label == Label::attack && (r.pai.empty() || r.pai == kBonaFidePai)) {
      throw ManifestError("attack sample '" + r.sample_id + "' needs a PAI tag", line_no);
    }
    if (!(r.left_eye.x < r.right_eye.x)) {
      throw ManifestError("left_eye_x must be smaller than right_eye_x for '" + r.sample_id + "'", line_no);
    }
    if (!seen.insert(r.sample_id).second) {
      throw ManifestError("duplicate sample_id '" + r.sample_id + "'", line_no);
    }
    manifest.records.push_back(std::move(r));
    const auto& added = manifest.records.back();
    if (added.label == Label::attack &&
        std::find(manifest.pai_vocabulary.begin(), manifest.pai_vocabulary.end(), added.pai) ==
            manifest.pai_vocabulary.end()) {
      manifest.pai_vocabulary.push_back(added.pai);
    }
  }
  return manifest;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.stem().string());
}

void validate_manifest(const DatasetManifest& manifest) {
  std::unordered_set<std::string> ids;
  for (const auto& r : manifest.records) {
    if (!ids.insert(r.sample_id).second) throw ManifestError("duplicate sample_id '" + r.sample_id + "'");
    if (r.label == Label::bona_fide && r.pai != kBonaFidePai) {
      throw ManifestError("bona fide sample '" + r.sample_id + "' must have pai 'none'");
    }
    if (r.label == Label::attack &&
        std::find(manifest.pai_vocabulary.begin(), manifest.pai_vocabulary.end(), r.pai) ==
            manifest.pai_vocabulary.end()) {
      throw ManifestError("attack sample '" + r.sample_id + "' has PAI '" + r.pai + "' outside the vocabulary");
    }
  }
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ManifestError("cannot write manifest '" + path.string() + "'");
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    out << r.sample_id << ',' << r.media_path << ',' << r.frame_index << ',' << r.subject_id << ','
        << to_string(r.label) << ',' << r.pai << ',' << to_string(r.split) << ','
        << (r.fold_id ? std::to_string(*r.fold_id) : "") << ',' << format_coord(r.left_eye.x) << ','
        << format_coord(r.left_eye.y) << ',' << format_coord(r.right_eye.x) << ','
        << format_coord(r.right_eye.y) << '\n';
  }
}

// ---------------------------------------------------------------------------

Image align_face(const Image& image, Point2 left_eye, Point2 right_eye, const AlignConfig& config) {
  if (image.channels != kChannels) throw AlignmentError("align_face expects a 3-channel image");
  const auto inside = [&](Point2 p) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= image.width - 1 && p.y <= image.height - 1;
  };
  if (!inside(left_eye) || !inside(right_eye)) throw AlignmentError("eye landmark outside the image");
  using C = std::complex<double>;
  const C src_l(left_eye.x, left_eye.y), src_r(right_eye.x, right_eye.y);
  const C dst_l(config.left_eye.x, config.left_eye.y), dst_r(config.right_eye.x, config.right_eye.y);
  if (std::abs(src_r - src_l) < 1e-6) throw AlignmentError("degenerate landmarks: eyes coincide");
  if (std::abs(dst_r - dst_l) < 1e-6) throw AlignmentError("degenerate canonical eye coordinates");

  // Inverse map: output pixel p samples the source at src_l + z * (p - dst_l).
  const C z = (src_r - src_l) / (dst_r - dst_l);
  const int n = config.size;
  Image out(n, n, kChannels, 0.0f);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const C s = src_l + z * (C(x, y) - dst_l);
      const double sx = s.real(), sy = s.imag();
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
      if (x0 < -1 || y0 < -1 || x0 >= image.width || y0 >= image.height) continue;
      const float ax = static_cast<float>(sx - fx0), ay = static_cast<float>(sy - fy0);
      const float w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int c = 0; c < kChannels; ++c) {
        float acc = 0.0f;
        for (int k = 0; k < 4; ++k) {
          if (w[k] == 0.0f) continue;
          if (xs[k] < 0 || ys[k] < 0 || xs[k] >= image.width || ys[k] >= image.height) continue;
          acc += w[k] * image.at(ys[k], xs[k], c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Image ImageDirectorySource::load(const SampleRecord& record) const {
  fs::path media = record.media_path;
  if (media.is_relative()) media = root_ / media;
  if (fs::is_directory(media)) {
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(media)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") frames.push_back(entry.path());
    }
    std::sort(frames.begin(), frames.end());
    if (record.frame_index >= static_cast<int>(frames.size())) {
      throw Error("sample '" + record.sample_id + "': frame " + std::to_string(record.frame_index) +
                  " out of range, '" + media.string() + "' has " + std::to_string(frames.size()) + " frames");
    }
    return read_png(frames[static_cast<std::size_t>(record.frame_index)]);
  }
  if (!fs::exists(media)) {
    throw Error("sample '" + record.sample_id + "': media '" + media.string() + "' not found");
  }
  if (record.frame_index != 0) {
    throw Error("sample '" + record.sample_id + "': still image media only has frame 0");
  }
  return read_png(media);
}

AlignedFace align_record(const FrameSource& source, const SampleRecord& record, const AlignConfig& config) {
  AlignedFace face;
  try {
    face.pixels = align_face(source.load(record), record.left_eye, record.right_eye, config);
  } catch (const Error& e) {
    const std::string what = e.what();
    if (what.find(record.sample_id) != std::string::npos) throw;
    throw Error("sample '" + record.sample_id + "': " + what);
  }
  face.label = record.label;
  face.pai = record.pai;
  face.subject_id = record.subject_id;
  face.sample_id = record.sample_id;
  return face;
}

// ---------------------------------------------------------------------------

namespace {

std::string column_value(const SampleRecord& r, const std::string& column) {
  if (column == "sample_id") return r.sample_id;
  if (column == "media_path") return r.media_path;
  if (column == "frame_index") return std::to_string(r.frame_index);
  if (column == "subject_id") return r.subject_id;
  if (column == "label") return std::string(to_string(r.label));
  if (column == "pai") return r.pai;
  if (column == "split") return std::string(to_string(r.split));
  if (column == "fold_id") return r.fold_id ? std::to_string(*r.fold_id) : "";
  throw ProtocolError("unknown manifest column '" + column + "' in protocol selector");
}

const std::set<std::string> kColumns = {"sample_id", "media_path", "frame_index", "subject_id",
                                        "label",     "pai",        "split",       "fold_id"};

Selector parse_selector(const json& j, const std::string& where) {
  Selector sel;
  if (!j.is_object()) throw ProtocolError(where + ": selector must be an object");
  for (const auto& [column, values] : j.items()) {
    if (!kColumns.count(column)) throw ProtocolError(where + ": unknown column '" + column + "'");
    std::vector<std::string> accepted;
    if (values.is_array()) {
      for (const auto& v : values) accepted.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      accepted.push_back(values.is_string() ? values.get<std::string>() : values.dump());
    }
    sel.accepted[column] = std::move(accepted);
  }
  return sel;
}

json selector_json(const Selector& sel) {
  json j = json::object();
  for (const auto& [column, values] : sel.accepted) j[column] = values;
  return j;
}

Selector split_selector(std::string_view role) {
  Selector s;
  s.accepted["split"] = {std::string(role)};
  return s;
}

}  // namespace

bool Selector::matches(const SampleRecord& record) const {
  for (const auto& [column, values] : accepted) {
    const std::string v = column_value(record, column);
    if (std::find(values.begin(), values.end(), v) == values.end()) return false;
  }
  return true;
}

ProtocolConfig ProtocolConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("protocol config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ProtocolError("protocol config must be a JSON object");
  ProtocolConfig config;
  for (const auto& [name, body] : root.items()) {
    if (!body.is_object()) throw ProtocolError("protocol '" + name + "' must be an object");
    ProtocolSpec spec;
    spec.name = name;
    for (const char* role : {"train", "dev", "test"}) {
      Selector sel = body.contains(role) ? parse_selector(body[role], name + "." + role) : split_selector(role);
      if (std::string_view(role) == "train") spec.train = std::move(sel);
      else if (std::string_view(role) == "dev") spec.dev = std::move(sel);
      else spec.test = std::move(sel);
    }
    spec.leave_one_out = body.value("leave_one_out", false);
    if (body.contains("frames_per_video") && !body["frames_per_video"].is_null()) {
      const int n = body["frames_per_video"].get<int>();
      if (n <= 0) throw ProtocolError("protocol '" + name + "': frames_per_video must be positive");
      spec.frames_per_video = n;
    }
    for (const auto& [key, _] : body.items()) {
      if (key != "train" && key != "dev" && key != "test" && key != "leave_one_out" && key != "frames_per_video") {
        throw ProtocolError("protocol '" + name + "': unknown key '" + key + "'");
      }
    }
    config.protocols[name] = std::move(spec);
  }
  return config;
}

ProtocolConfig ProtocolConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ProtocolError("cannot open protocol config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

ProtocolConfig ProtocolConfig::grandtest() { return from_json(R"({"grandtest": {}})"); }

std::string ProtocolConfig::to_json() const {
  json root = json::object();
  for (const auto& [name, spec] : protocols) {
    json body = {{"train", selector_json(spec.train)},
                 {"dev", selector_json(spec.dev)},
                 {"test", selector_json(spec.test)},
                 {"leave_one_out", spec.leave_one_out}};
    if (spec.frames_per_video) body["frames_per_video"] = *spec.frames_per_video;
    root[name] = body;
  }
  return root.dump(2);
}

std::vector<SplitSet> split_protocol(const DatasetManifest& manifest, const std::string& protocol_name,
                                     const ProtocolConfig& config) {
  const auto it = config.protocols.find(protocol_name);
  if (it == config.protocols.end()) throw ProtocolError("unknown protocol '" + protocol_name + "'");
  const ProtocolSpec& spec = it->second;

  std::vector<const SampleRecord*> records;
  records.reserve(manifest.records.size());
  if (spec.frames_per_video) {
    std::map<std::string, std::vector<const SampleRecord*>> by_media;
    for (const auto& r : manifest.records) by_media[r.media_path].push_back(&r);
    std::unordered_set<const SampleRecord*> keep;
    for (auto& [_, frames] : by_media) {
      std::stable_sort(frames.begin(), frames.end(),
                       [](const auto* a, const auto* b) { return a->frame_index < b->frame_index; });
      const auto n = std::min<std::size_t>(frames.size(), static_cast<std::size_t>(*spec.frames_per_video));
      keep.insert(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(n));
    }
    for (const auto& r : manifest.records) {
      if (keep.count(&r)) records.push_back(&r);
    }
  } else {
    for (const auto& r : manifest.records) records.push_back(&r);
  }

  const auto assign = [&](SplitSet& set, const auto& fold_filter) {
    for (const SampleRecord* r : records) {
      const bool tr = spec.train.matches(*r) && fold_filter(*r, Split::train);
      const bool dv = spec.dev.matches(*r) && fold_filter(*r, Split::dev);
      const bool te = spec.test.matches(*r) && fold_filter(*r, Split::test);
      if (tr + dv + te > 1) {
        throw ProtocolError("protocol '" + protocol_name + "': sample '" + r->sample_id +
                            "' selected by more than one role");
      }
      if (tr) set.train.push_back(*r);
      if (dv) set.dev.push_back(*r);
      if (te) set.test.push_back(*r);
    }
  };

  std::vector<SplitSet> out;
  if (!spec.leave_one_out) {
    SplitSet set;
    assign(set, [](const SampleRecord&, Split) { return true; });
    out.push_back(std::move(set));
    return out;
  }

  std::set<int> folds;
  for (const SampleRecord* r : records) {
    const bool selected = spec.train.matches(*r) || spec.dev.matches(*r) || spec.test.matches(*r);
    if (!selected) continue;
    if (!r->fold_id) {
      throw ProtocolError("protocol '" + protocol_name + "' is leave-one-out but sample '" + r->sample_id +
                          "' has no fold_id");
    }
    folds.insert(*r->fold_id);
  }
  if (folds.empty()) throw ProtocolError("protocol '" + protocol_name + "' selects no records");
  for (int fold : folds) {
    SplitSet set;
    set.fold = fold;
    assign(set, [fold](const SampleRecord& r, Split role) {
      return role == Split::test ? r.fold_id == fold : r.fold_id != fold;
    });
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace padkit
